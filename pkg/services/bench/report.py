"""
REPORTS - CSV records, JSON summaries and metric dumps
================================================================================

FILES:
------
    records.csv    one row per run, fixed header:
                   strategy,s,rep,seed,rel_l2_err,max_coeff_err,samples,stage_samples,wall_s,status
                   stage_samples is ';'-separated, missing metrics are empty
    summary.json   config plus lower medians per (strategy, s)

Everything is plot-ready; nothing is rendered here.

================================================================================
"""

import logging
from pathlib import Path
from typing import List, Optional

import pandas as pd

from bench.experiment import records_frame, summarize
from bench.schemas import ExperimentConfig, ExperimentRecord, SummaryReport

log = logging.getLogger("bench.report")

CSV_HEADER = ["strategy", "s", "rep", "seed", "rel_l2_err", "max_coeff_err", "samples", "stage_samples", "wall_s", "status"]
RECORDS_FILE = "records.csv"
SUMMARY_FILE = "summary.json"


def records_to_csv(records: List[ExperimentRecord], path: Path) -> Path:
    frame = records_frame(records)
    frame["stage_samples"] = frame["stage_samples"].map(lambda stages: ";".join(str(v) for v in stages))
    frame[CSV_HEADER].to_csv(path, index=False)
    return path


def read_records(path) -> List[ExperimentRecord]:
    """Parse a records CSV written by `records_to_csv`."""
    frame = pd.read_csv(
        path,
        dtype={"stage_samples": str, "strategy": str, "status": str},
        float_precision="round_trip",
    )
    missing = set(CSV_HEADER) - set(frame.columns)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    frame = frame.astype(object).where(frame.notna(), None)
    records = []
    for row in frame.to_dict(orient="records"):
        stages = row["stage_samples"]
        row["stage_samples"] = [int(v) for v in stages.split(";")] if stages else []
        records.append(ExperimentRecord(**row))
    return records


def summary_report(cfg: ExperimentConfig, records: List[ExperimentRecord]) -> SummaryReport:
    return SummaryReport(config=cfg, rows=summarize(records))


def emit(
    records: List[ExperimentRecord],
    cfg: ExperimentConfig,
    out_dir: Optional[str] = None,
    fmt: str = "both",
) -> List[Path]:
    """
    Write the sweep results.

    Args:
        records: sweep records (possibly empty: header-only CSV).
        cfg: the sweep config, stored with the summary.
        out_dir: target directory (created if needed); defaults to cfg.out_dir.
        fmt: "csv", "json" or "both".

    Returns:
        Paths written.
    """
    if fmt not in ("csv", "json", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    target = Path(out_dir or cfg.out_dir)
    target.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        written.append(records_to_csv(records, target / RECORDS_FILE))
    if fmt in ("json", "both"):
        path = target / SUMMARY_FILE
        path.write_text(summary_report(cfg, records).model_dump_json(indent=2))
        written.append(path)
    for path in written:
        log.info(f"wrote {path}")
    return written
