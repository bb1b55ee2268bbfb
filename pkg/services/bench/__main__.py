import sys

from bench.app import cli_main

sys.exit(cli_main())
