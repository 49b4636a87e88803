"""Break classification for one parsing round.

A round scans a sequence right to left and types each position by comparing
symbol fingerprints, the randomized analogue of suffix-array induced-sorting
types: a position is L when its fingerprint exceeds the next one, S when it
is smaller, and inherits the next position's type on ties.  The maximal
equal-fingerprint suffix run stays untyped and can never contain a break.
A break falls on every S-typed position whose left neighbour is L-typed, so
position 0 never breaks and two breaks are never adjacent.

Ties are resolved by inheritance only.  Distinct symbols whose fingerprints
collide compare equal on purpose; no secondary comparison is allowed, since
any rank-dependent tiebreak would destroy the cross-build agreement that
merging relies on.

Everything below works on the uint64 fingerprint sequence, not the symbols
themselves.  The multi-sequence entry point types many sequences in one
vectorized pass by marking the last position of each sequence as a
boundary, which naturally gives it (and any equal-fingerprint run ending
there) no type.
"""

from __future__ import annotations

import numpy as np

L_TYPE = 1
S_TYPE = -1
NO_TYPE = 0

_BOUNDARY = 2


def _neighbour_codes(fps: np.ndarray, seq_starts: np.ndarray) -> np.ndarray:
    """Per-position code: 1 if L, -1 if S, 2 if untyped (boundary run)."""
    m = len(fps)
    cmp = np.zeros(m, dtype=np.int8)
    if m > 1:
        left = fps[:-1]
        right = fps[1:]
        body = cmp[:-1]
        body[left > right] = 1
        body[left < right] = -1
    # the final position of every sequence opens an untyped suffix run
    cmp[seq_starts[1:] - 1] = _BOUNDARY
    cmp[m - 1] = _BOUNDARY
    idx = np.arange(m, dtype=np.int64)
    cand = np.where(cmp != 0, idx, np.int64(m))
    nearest = np.minimum.accumulate(cand[::-1])[::-1]
    return cmp[nearest]


def phrase_starts(fps: np.ndarray, seq_starts: np.ndarray) -> np.ndarray:
    """Start index of every phrase across concatenated sequences.

    fps: uint64 fingerprints of all sequences laid back to back.
    seq_starts: int64 start offset of each sequence, first entry 0.
    Returns sorted global indices; each sequence start is always included,
    so consecutive entries delimit phrases (sequence ends fall out of the
    fact that a sequence's first position is never a break).
    """
    m = len(fps)
    codes = _neighbour_codes(fps, seq_starts)
    starts = np.zeros(m, dtype=bool)
    starts[1:] = (codes[1:] == -1) & (codes[:-1] == 1)
    starts[seq_starts] = True
    return np.flatnonzero(starts)


def classify(fps) -> np.ndarray:
    """Break positions of a single fingerprint sequence, ascending.

    Returns 0-based indices of the first symbol of every phrase except the
    first; empty when the whole sequence is one phrase.
    """
    fps = np.asarray(fps, dtype=np.uint64)
    if len(fps) == 0:
        raise ValueError("cannot classify an empty sequence")
    starts = phrase_starts(fps, np.zeros(1, dtype=np.int64))
    return starts[1:]


def position_types(fps) -> np.ndarray:
    """L/S/untyped codes per position (L_TYPE, S_TYPE, NO_TYPE); test aid."""
    fps = np.asarray(fps, dtype=np.uint64)
    if len(fps) == 0:
        raise ValueError("cannot classify an empty sequence")
    codes = _neighbour_codes(fps, np.zeros(1, dtype=np.int64))
    out = np.zeros(len(fps), dtype=np.int8)
    out[codes == 1] = L_TYPE
    out[codes == -1] = S_TYPE
    return out


def split(seq, breaks) -> list[tuple[int, int]]:
    """Cut seq at the given break positions into (start, end) spans.

    Spans are half-open, cover the whole sequence, and are never empty.
    """
    n = len(seq)
    if n == 0:
        raise ValueError("cannot split an empty sequence")
    bounds = [0] + [int(b) for b in breaks] + [n]
    out = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if not 0 < hi - lo <= n or hi > n:
            raise ValueError(f"invalid break list for length-{n} sequence")
        out.append((lo, hi))
    return out
