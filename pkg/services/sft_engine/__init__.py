"""Dimension-incremental sparse FFT on (subsampled) rank-1 lattices."""
