"""Small numpy helpers shared across modules."""

from __future__ import annotations

import numpy as np


def segment_ranges(counts: np.ndarray) -> np.ndarray:
    """[0..c0), [0..c1), ... concatenated: a per-segment arange.

    counts must be non-negative int64.  Standard cumsum trick; the result
    has length counts.sum().
    """
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = np.cumsum(counts) - counts
    return np.arange(total, dtype=np.int64) - np.repeat(starts, counts)


def gather_segments(
    values: np.ndarray, starts: np.ndarray, counts: np.ndarray
) -> np.ndarray:
    """Concatenate values[starts[i] : starts[i]+counts[i]] for all i."""
    idx = np.repeat(np.asarray(starts, dtype=np.int64), counts) + segment_ranges(counts)
    return values[idx]
