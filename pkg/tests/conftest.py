"""Shared fixtures and slow reference implementations.

The reference functions here deliberately avoid the production code paths:
fingerprints are computed with Python big ints and an explicit power sum,
position types with a plain right-to-left loop, and expansion by memoized
recursion over the grammar. Tests compare the fast implementations against
these.
"""

from __future__ import annotations

import functools

import numpy as np
import pytest

from pargram.grammar import RANK_DTYPE, Grammar
from pargram.hashing import derive_family

P61 = (1 << 61) - 1


# ------------------------------------------------------------- oracles

def oracle_terminal_fp(params: tuple[int, int, int], m: int, code: int) -> int:
    a, b, _ = params
    return ((a * code + b) % P61) % m


def oracle_sequence_fp(
    params: tuple[int, int, int], m: int, child_fps: list[int]
) -> int:
    """Power-sum form of the polynomial hash, no Horner."""
    a, b, c = params
    acc = 0
    for j, f in enumerate(child_fps):
        acc = (acc + f * pow(c, j, P61)) % P61
    return ((a * acc + b) % P61) % m


def reference_breaks(fps: list[int]) -> list[int]:
    """Break positions of one sequence, straight from the definitions.

    Scan right to left: a position compares its fingerprint with its right
    neighbour (greater -> L, smaller -> S, equal -> inherit).  The last
    position has no neighbour and stays untyped, as does any equal run
    touching it.  A break is an S position directly after an L position.
    """
    n = len(fps)
    L, S, NONE = 1, -1, 0
    types = [NONE] * n
    for i in range(n - 2, -1, -1):
        if fps[i] > fps[i + 1]:
            types[i] = L
        elif fps[i] < fps[i + 1]:
            types[i] = S
        else:
            types[i] = types[i + 1]
    return [
        i for i in range(1, n) if types[i] == S and types[i - 1] == L
    ]


def slow_expand(g: Grammar) -> list[bytes]:
    """Expand every compressed string by memoized recursion."""

    @functools.cache
    def rec(level: int, rank: int) -> bytes:
        if level == 0:
            return g.alphabet_map[rank - 1 : rank]
        lvl = g.levels[level - 1]
        lo, hi = int(lvl.offsets[rank - 1]), int(lvl.offsets[rank])
        return b"".join(rec(level - 1, int(s)) for s in lvl.symbols[lo:hi])

    return [
        rec(int(lv), int(r)) for lv, r in zip(g.c_levels, g.c_ranks)
    ]


def shuffle_ranks(g: Grammar, rng: np.random.Generator) -> Grammar:
    """Randomly renumber the rules of every level of a root grammar.

    The result derives the same strings from the same bodies; only rank
    labels move.  Canonicalization must erase the difference.
    """
    assert g.is_root
    out = g.copy()
    new_of = [None]  # level 0 (terminals) keeps its numbering
    for i, lvl in enumerate(g.levels, start=1):
        perm = rng.permutation(lvl.count)  # old rank r -> new rank perm[r-1]+1
        inv = np.empty(lvl.count, dtype=np.int64)
        inv[perm] = np.arange(lvl.count)
        lengths = np.diff(lvl.offsets)[inv]
        offsets = np.zeros(lvl.count + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        symbols = np.empty_like(lvl.symbols)
        pos = 0
        for old in inv:
            lo, hi = int(lvl.offsets[old]), int(lvl.offsets[old + 1])
            body = lvl.symbols[lo:hi]
            if i > 1:
                body = (new_of[i - 1][body.astype(np.int64) - 1] + 1).astype(
                    RANK_DTYPE
                )
            symbols[pos : pos + len(body)] = body
            pos += len(body)
        out.levels[i - 1].symbols = symbols
        out.levels[i - 1].offsets = offsets
        out.levels[i - 1]._index = None
        out.fingerprints[i] = g.fingerprints[i][inv]
        new_of.append(perm)
    for j in range(g.k):
        lv = int(g.c_levels[j])
        if lv > 0:
            out.c_ranks[j] = new_of[lv][int(g.c_ranks[j]) - 1] + 1
    return out


# ------------------------------------------------------------ corpora

def random_collection(
    rng: np.random.Generator, k: int, sigma: int, maxlen: int, minlen: int = 1
) -> list[bytes]:
    alpha = np.arange(97, 97 + sigma) if sigma <= 26 else np.arange(sigma)
    return [
        bytes(rng.choice(alpha, size=rng.integers(minlen, maxlen + 1)).tolist())
        for _ in range(k)
    ]


def repetitive_collection(
    rng: np.random.Generator, copies: int, seed_len: int, mutation_rate: float,
    sigma: int = 4,
) -> list[bytes]:
    """Mutated copies of one random seed string."""
    base = rng.integers(97, 97 + sigma, size=seed_len, dtype=np.uint8)
    out = []
    for _ in range(copies):
        s = base.copy()
        hits = rng.random(seed_len) < mutation_rate
        s[hits] = rng.integers(97, 97 + sigma, size=int(hits.sum()), dtype=np.uint8)
        out.append(s.tobytes())
    return out


def runny_collection(
    rng: np.random.Generator, k: int, run_symbol: int = 78
) -> list[bytes]:
    """Strings with long planted single-symbol runs between random filler."""
    out = []
    for _ in range(k):
        parts = []
        for _ in range(int(rng.integers(1, 5))):
            parts.append(
                bytes(rng.integers(97, 101, size=rng.integers(5, 40)).tolist())
            )
            parts.append(bytes([run_symbol]) * int(rng.integers(20, 2000)))
        out.append(b"".join(parts))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


@pytest.fixture
def family():
    return derive_family(42, 10)
