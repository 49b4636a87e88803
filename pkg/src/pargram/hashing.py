"""Seeded hash family that fingerprints grammar symbols.

Every symbol gets a fingerprint determined solely by the string it expands
to and the topology of its parse, never by the numeric rank a particular
build happened to assign.  Two independent builds over the same master seed
therefore agree on every fingerprint, which is what makes their grammars
mergeable.

Terminals are hashed with an affine map; a rule at level i is hashed by a
polynomial of its children's fingerprints evaluated at a per-level point.
All arithmetic is carried out modulo the Mersenne prime 2^61 - 1, which is
shared by every level.  Hot paths run on uint64 numpy arrays; products are
split 31/30 bits so no intermediate ever exceeds 64 bits.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

MERSENNE61 = (1 << 61) - 1

_U64 = np.uint64
_P = _U64(MERSENNE61)
_MASK61 = _U64(MERSENNE61)
_MASK31 = _U64((1 << 31) - 1)
_MASK30 = _U64((1 << 30) - 1)
_MASK32 = _U64((1 << 32) - 1)


def _derive_params(master_seed: int, level: int) -> tuple[int, int, int]:
    """Counter-mode expansion of the master seed into one level's parameters.

    Parameters for level i depend only on (seed, i), so growing the family
    later never disturbs the levels that already exist.
    """
    block = hashlib.sha512(
        struct.pack("<QQ", master_seed & 0xFFFFFFFFFFFFFFFF, level)
    ).digest()
    out = []
    for j in range(3):
        chunk = int.from_bytes(block[16 * j : 16 * (j + 1)], "little")
        out.append(chunk % (MERSENNE61 - 1) + 1)  # uniform enough over [1, p-1]
    return tuple(out)


def mulmod(a, b):
    """(a * b) mod 2^61-1 for uint64 arrays with all values < 2^61."""
    a = np.asarray(a, dtype=_U64)
    b = np.asarray(b, dtype=_U64)
    a1 = a >> _U64(31)
    a0 = a & _MASK31
    b1 = b >> _U64(31)
    b0 = b & _MASK31
    hi = a1 * b1                # < 2^60
    mid = a1 * b0 + a0 * b1     # < 2^62, still fits
    lo = a0 * b0                # < 2^62
    mid = (mid & _MASK61) + (mid >> _U64(61))
    # mid * 2^31 mod p == (mid >> 30) + ((mid & MASK30) << 31), as 2^61 == 1
    t = (
        (hi << _U64(1))
        + (mid >> _U64(30))
        + ((mid & _MASK30) << _U64(31))
        + (lo & _MASK61)
        + (lo >> _U64(61))
    )
    t = (t & _MASK61) + (t >> _U64(61))
    t = (t & _MASK61) + (t >> _U64(61))
    return t - (t >= _P).astype(_U64) * _P


def addmod(a, b):
    """(a + b) mod 2^61-1 for uint64 arrays with all values < 2^61."""
    t = np.asarray(a, dtype=_U64) + np.asarray(b, dtype=_U64)
    t = (t & _MASK61) + (t >> _U64(61))
    return t - (t >= _P).astype(_U64) * _P


@dataclass
class HashFamily:
    """One seeded family of per-level hash functions.

    fingerprint_bits selects the fingerprint range: 61 keeps the full
    modulus (range = 2^61 - 1), 32 folds fingerprints into 2^32 cells for
    smaller tables at a higher collision rate.  Collisions are harmless for
    correctness (colliding neighbours simply never break) but cost
    compression, so 61 is the default.
    """

    master_seed: int
    fingerprint_bits: int = 61
    _params: list[tuple[int, int, int]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.fingerprint_bits not in (61, 32):
            raise ValueError("fingerprint_bits must be 61 or 32")

    def params(self, level: int) -> tuple[int, int, int]:
        """(a, b, c) for the given level, derived lazily and cached."""
        while len(self._params) <= level:
            self._params.append(_derive_params(self.master_seed, len(self._params)))
        return self._params[level]

    def compatible_with(self, other: "HashFamily") -> bool:
        return (
            self.master_seed == other.master_seed
            and self.fingerprint_bits == other.fingerprint_bits
        )

    def _fold(self, values: np.ndarray) -> np.ndarray:
        if self.fingerprint_bits == 32:
            return values & _MASK32
        return values

    def terminal_fingerprints(self, alphabet_size: int) -> np.ndarray:
        """Fingerprints of the dense terminal codes 1..alphabet_size."""
        a, b, _ = self.params(0)
        vals = [((a * s + b) % MERSENNE61) for s in range(1, alphabet_size + 1)]
        out = np.array(vals, dtype=_U64)
        return self._fold(out)

    def sequence_fingerprint(self, level: int, child_fps) -> int:
        """Scalar reference path: hash one rule body at the given level.

        child_fps are the fingerprints of the body's symbols, leftmost
        first.  Exact integer arithmetic; used by tests and small paths.
        """
        a, b, c = self.params(level)
        acc = 0
        for fp in reversed(list(child_fps)):
            acc = (acc * c + int(fp)) % MERSENNE61
        out = (a * acc + b) % MERSENNE61
        if self.fingerprint_bits == 32:
            out &= (1 << 32) - 1
        return out

    def rows_fingerprint(self, level: int, rows: np.ndarray) -> np.ndarray:
        """Hash a (n, q) matrix of child fingerprints, one rule per row."""
        a, b, c = self.params(level)
        n, q = rows.shape
        acc = np.zeros(n, dtype=_U64)
        cc = _U64(c)
        for j in range(q - 1, -1, -1):
            acc = addmod(mulmod(acc, cc), rows[:, j])
        out = addmod(mulmod(acc, _U64(a)), _U64(b % MERSENNE61))
        return self._fold(out)

    def ragged_fingerprint(
        self, level: int, symbols_fp: np.ndarray, offsets: np.ndarray
    ) -> np.ndarray:
        """Hash variable-length rule bodies stored back to back.

        symbols_fp holds the concatenated child fingerprints, offsets the
        rule boundaries (len = count + 1).  Bodies are grouped by length so
        each group runs through the vectorized Horner loop.
        """
        count = len(offsets) - 1
        out = np.empty(count, dtype=_U64)
        lengths = np.diff(offsets)
        for q in np.unique(lengths):
            rows_idx = np.flatnonzero(lengths == q)
            gather = offsets[rows_idx][:, None] + np.arange(int(q))[None, :]
            out[rows_idx] = self.rows_fingerprint(level, symbols_fp[gather])
        return out


def derive_family(
    master_seed: int, levels: int, fingerprint_bits: int = 61
) -> HashFamily:
    """Expand a 64-bit master seed into a hash family with params for
    levels 0..levels-1 precomputed.  The family keeps growing on demand;
    derive_family(s, m) is always a prefix of derive_family(s, n) for m < n.
    """
    fam = HashFamily(master_seed, fingerprint_bits)
    if levels > 0:
        fam.params(levels - 1)
    return fam
