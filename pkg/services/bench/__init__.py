"""Benchmark harness comparing the sampling strategies of the sparse FFT."""
