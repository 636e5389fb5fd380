"""Evaluation measures: sliding-window violation averages, validation rates,
and multi-run min/mean/max bands."""

from __future__ import annotations

import numpy as np


def moving_avg_violations(history, window: int = 1000) -> np.ndarray:
    """Moving average of a 0/1 violation history.

    For step t (1-based) the value is the mean of the first t entries while
    t < window, then the mean of the trailing ``window`` entries. Integer
    prefix sums keep the incremental computation exact; division happens
    only at read-out.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    flags = np.asarray(history)
    if flags.size == 0:
        return np.empty(0)
    prefix = np.concatenate(([0], np.cumsum(flags.astype(np.int64))))
    t = np.arange(1, flags.size + 1)
    out = np.empty(flags.size)
    head = t < window
    out[head] = prefix[t[head]] / t[head]
    tail = ~head
    if tail.any():
        out[tail] = (prefix[t[tail]] - prefix[t[tail] - window]) / window
    return out


def validation_rate(flags, expected_steps: int = 300) -> float:
    """Fraction of violating steps in one validation phase of fixed length."""
    flags = np.asarray(flags)
    if flags.size != expected_steps:
        raise ValueError(f"expected {expected_steps} validation flags, got {flags.size}")
    return float(np.count_nonzero(flags)) / expected_steps


def band(runs: list) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise (mean, min, max) across aligned per-run series."""
    if not runs:
        raise ValueError("need at least one run")
    arrays = [np.asarray(r, dtype=np.float64) for r in runs]
    length = arrays[0].size
    for a in arrays:
        if a.size != length:
            raise ValueError("runs must be aligned (equal lengths)")
    stacked = np.stack(arrays)
    return stacked.mean(axis=0), stacked.min(axis=0), stacked.max(axis=0)
