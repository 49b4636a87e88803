"""Core data model: string collections and level-partitioned grammars.

A grammar produced by the builder is fully balanced: rules live on levels,
a rule at level i rewrites to a sequence of level-(i-1) symbols, and level
0 holds the terminals (dense codes 1..sigma).  The compressed collection C
keeps one (level, rank) pair per input string, in input order; the start
rule is implicit.

Ranks are local to their level, assigned in first-occurrence order during
a build, so rank numbers carry no meaning across grammars.  Equality of
grammars is therefore decided on a canonical form that renumbers every
level into the lexicographic order of its (already canonical) rule bodies.

Buffered grammars built against a frozen read-only sink address a combined
rank space: at each level the sink owns ranks 1..s and the buffer's own
rules sit above s.  `sink_counts` records those bases; root grammars have
none.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import gather_segments
from .errors import GrammarIntegrityError, IngestionError
from .hashing import HashFamily

RANK_DTYPE = np.uint32
MAX_RANK = (1 << 32) - 1


class LevelTable:
    """Rules of one level: concatenated bodies plus boundary offsets.

    Rank r (1-based, local) owns symbols[offsets[r-1] : offsets[r]].
    The body index (bytes of the uint32 body -> local rank) is built
    lazily; builders keep it in sync while appending.
    """

    __slots__ = ("symbols", "offsets", "_index")

    def __init__(self, symbols=None, offsets=None):
        self.symbols = (
            np.empty(0, dtype=RANK_DTYPE) if symbols is None else symbols
        )
        self.offsets = (
            np.zeros(1, dtype=np.int64) if offsets is None else offsets
        )
        self._index: dict[bytes, int] | None = None

    @property
    def count(self) -> int:
        return len(self.offsets) - 1

    @property
    def size(self) -> int:
        return int(self.offsets[-1])

    def body(self, rank: int) -> np.ndarray:
        return self.symbols[self.offsets[rank - 1] : self.offsets[rank]]

    def body_lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def ensure_index(self) -> dict[bytes, int]:
        if self._index is None:
            idx: dict[bytes, int] = {}
            blob = self.symbols.tobytes()
            offs = self.offsets
            for r in range(self.count):
                idx[blob[4 * int(offs[r]) : 4 * int(offs[r + 1])]] = r + 1
            self._index = idx
        return self._index

    def append_bodies(self, keys: list[bytes]) -> None:
        """Extend the table with bodies given as uint32-little-endian bytes.

        Callers that maintain the index add the keys there themselves; the
        arrays and the dict must always describe the same table.
        """
        if not keys:
            return
        blob = b"".join(keys)
        new_syms = np.frombuffer(blob, dtype=RANK_DTYPE)
        lengths = np.fromiter(
            (len(k) >> 2 for k in keys), dtype=np.int64, count=len(keys)
        )
        self.symbols = np.concatenate([self.symbols, new_syms])
        self.offsets = np.concatenate(
            [self.offsets, self.offsets[-1] + np.cumsum(lengths)]
        )

    def copy(self) -> "LevelTable":
        return LevelTable(self.symbols.copy(), self.offsets.copy())


@dataclass
class Grammar:
    alphabet_size: int
    alphabet_map: bytes
    family: HashFamily
    levels: list[LevelTable] = field(default_factory=list)
    # fingerprints[0] covers terminals, fingerprints[i] level-i rules (own part only)
    fingerprints: list[np.ndarray] = field(default_factory=list)
    c_levels: np.ndarray = field(default_factory=lambda: np.empty(0, RANK_DTYPE))
    c_ranks: np.ndarray = field(default_factory=lambda: np.empty(0, RANK_DTYPE))
    sink_counts: list[int] | None = None

    def __post_init__(self):
        if not self.fingerprints:
            self.fingerprints = [
                self.family.terminal_fingerprints(self.alphabet_size)
            ]

    @classmethod
    def empty(cls, alphabet_size: int, alphabet_map: bytes, family: HashFamily):
        return cls(alphabet_size, alphabet_map, family)

    @property
    def seed(self) -> int:
        return self.family.master_seed

    @property
    def k(self) -> int:
        return len(self.c_levels)

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def is_root(self) -> bool:
        # a buffer whose sink owned nothing is a root in all but name
        return self.sink_counts is None or not any(self.sink_counts)

    def level_count(self, level: int) -> int:
        """Own rule count at a level (terminal count for level 0)."""
        if level == 0:
            return self.alphabet_size
        if level <= len(self.levels):
            return self.levels[level - 1].count
        return 0

    def base_at(self, level: int) -> int:
        """Rank count owned by the sink below this grammar at a level."""
        if level == 0 or self.sink_counts is None:
            return 0
        if level <= len(self.sink_counts):
            return self.sink_counts[level - 1]
        return 0

    def combined_count(self, level: int) -> int:
        return self.base_at(level) + self.level_count(level)

    @property
    def total_rules(self) -> int:
        return sum(t.count for t in self.levels)

    @property
    def total_rule_symbols(self) -> int:
        return sum(t.size for t in self.levels)

    def copy(self) -> "Grammar":
        return Grammar(
            self.alphabet_size,
            self.alphabet_map,
            self.family,
            [t.copy() for t in self.levels],
            [f.copy() for f in self.fingerprints],
            self.c_levels.copy(),
            self.c_ranks.copy(),
            None if self.sink_counts is None else list(self.sink_counts),
        )

    def expansion_lengths(self) -> list[np.ndarray]:
        """Per level, the expanded length of each rule.  Root grammars only."""
        if not self.is_root:
            raise GrammarIntegrityError("expansion lengths need a root grammar")
        out = [np.ones(self.alphabet_size, dtype=np.int64)]
        for lvl in self.levels:
            if lvl.count == 0:
                out.append(np.empty(0, dtype=np.int64))
                continue
            child = out[-1][lvl.symbols.astype(np.int64) - 1]
            out.append(np.add.reduceat(child, lvl.offsets[:-1]))
        return out


def combined_fingerprints(
    own: Grammar, sink: Grammar | None, level: int, values: np.ndarray
) -> np.ndarray:
    """Fingerprints of combined-space ranks at a level.

    Ranks at or below the sink's base resolve in the sink's array, the rest
    in the buffer's own array.  Root lookups pass sink=None.
    """
    own_fp = own.fingerprints[level]
    base = own.base_at(level)
    idx = values.astype(np.int64) - 1
    if base == 0:
        return own_fp[idx]
    sink_fp = sink.fingerprints[level]
    in_sink = idx < base
    out = np.empty(len(values), dtype=np.uint64)
    out[in_sink] = sink_fp[idx[in_sink]]
    out[~in_sink] = own_fp[idx[~in_sink] - base]
    return out


@dataclass
class Collection:
    """Input strings over a dense alphabet 1..alphabet_size.

    alphabet_map[s-1] is the original byte of dense code s.  Strings are
    non-empty; an explicit map lets several collections share one alphabet,
    which merging requires.
    """

    strings: list[np.ndarray]
    alphabet_size: int
    alphabet_map: bytes

    @classmethod
    def from_bytes(cls, raw: list[bytes], alphabet_map: bytes | None = None):
        if not raw:
            raise IngestionError("a collection needs at least one string")
        if alphabet_map is None:
            seen = np.zeros(256, dtype=bool)
            for s in raw:
                if len(s) == 0:
                    raise IngestionError("empty strings are not allowed")
                seen[np.frombuffer(s, dtype=np.uint8)] = True
            alphabet_map = bytes(np.flatnonzero(seen).astype(np.uint8))
        if not 1 <= len(alphabet_map) <= 256:
            raise IngestionError("alphabet must hold between 1 and 256 bytes")
        if len(set(alphabet_map)) != len(alphabet_map):
            raise IngestionError("alphabet map repeats a byte")
        table = np.zeros(256, dtype=RANK_DTYPE)
        table[np.frombuffer(alphabet_map, dtype=np.uint8)] = np.arange(
            1, len(alphabet_map) + 1, dtype=RANK_DTYPE
        )
        strings = []
        for s in raw:
            if len(s) == 0:
                raise IngestionError("empty strings are not allowed")
            enc = table[np.frombuffer(s, dtype=np.uint8)]
            if enc.min(initial=1) == 0:
                raise IngestionError("string contains a byte outside the alphabet")
            strings.append(enc)
        return cls(strings, len(alphabet_map), alphabet_map)

    @property
    def k(self) -> int:
        return len(self.strings)

    @property
    def total_symbols(self) -> int:
        return sum(len(s) for s in self.strings)

    def decode(self, dense: np.ndarray) -> bytes:
        lut = np.frombuffer(self.alphabet_map, dtype=np.uint8)
        return lut[dense.astype(np.int64) - 1].tobytes()

    def to_bytes(self) -> list[bytes]:
        return [self.decode(s) for s in self.strings]


def _structural_check(g: Grammar) -> None:
    for i, lvl in enumerate(g.levels, start=1):
        if lvl.offsets[0] != 0 or np.any(np.diff(lvl.offsets) < 1):
            raise GrammarIntegrityError(f"level {i} has an empty or torn body")
        if lvl.count:
            limit = g.base_at(i - 1) + g.level_count(i - 1)
            if lvl.symbols.min(initial=MAX_RANK) < 1 or (
                lvl.size and int(lvl.symbols.max()) > limit
            ):
                raise GrammarIntegrityError(f"level {i} references a bad rank")


def canonicalize(g: Grammar) -> Grammar:
    """Renumber every level into lexicographic body order, bottom up.

    The result is a normal form: any two grammars that differ only by
    level-respecting rank permutations canonicalize to identical values.
    Idempotent.  Requires a root grammar.
    """
    if not g.is_root:
        raise GrammarIntegrityError("only root grammars can be canonicalized")
    _structural_check(g)
    out_levels: list[LevelTable] = []
    out_fps: list[np.ndarray] = [g.fingerprints[0].copy()]
    # perm[old_rank] = new_rank for the level below the one being sorted
    prev_perm = np.arange(g.alphabet_size + 1, dtype=RANK_DTYPE)
    perms: list[np.ndarray] = []
    for i, lvl in enumerate(g.levels, start=1):
        remapped = prev_perm[lvl.symbols]
        count = lvl.count
        be = remapped.astype(">u4").tobytes()
        offs = lvl.offsets
        keys = [be[4 * int(offs[r]) : 4 * int(offs[r + 1])] for r in range(count)]
        order = sorted(range(count), key=keys.__getitem__)
        order_arr = np.asarray(order, dtype=np.int64)
        perm = np.zeros(count + 1, dtype=RANK_DTYPE)
        perm[order_arr + 1] = np.arange(1, count + 1, dtype=RANK_DTYPE)
        lengths = lvl.body_lengths()
        new_symbols = gather_segments(remapped, offs[:-1][order_arr], lengths[order_arr])
        new_offsets = np.zeros(count + 1, dtype=np.int64)
        np.cumsum(lengths[order_arr], out=new_offsets[1:])
        out_levels.append(LevelTable(new_symbols, new_offsets))
        fp = np.empty(count, dtype=np.uint64)
        fp[perm[1:].astype(np.int64) - 1] = g.fingerprints[i]
        out_fps.append(fp)
        perms.append(perm)
        prev_perm = perm
    c_ranks = g.c_ranks.copy()
    for i, perm in enumerate(perms, start=1):
        mask = g.c_levels == i
        if mask.any():
            c_ranks[mask] = perm[c_ranks[mask]]
    return Grammar(
        g.alphabet_size,
        g.alphabet_map,
        g.family,
        out_levels,
        out_fps,
        g.c_levels.copy(),
        c_ranks,
    )


def grammars_equivalent(a: Grammar, b: Grammar) -> bool:
    """True when both canonical forms coincide exactly."""
    if (
        a.alphabet_size != b.alphabet_size
        or a.alphabet_map != b.alphabet_map
        or a.num_levels != b.num_levels
        or a.k != b.k
    ):
        return False
    if any(
        la.count != lb.count or la.size != lb.size
        for la, lb in zip(a.levels, b.levels)
    ):
        return False
    ca, cb = canonicalize(a), canonicalize(b)
    for la, lb in zip(ca.levels, cb.levels):
        if not (
            np.array_equal(la.symbols, lb.symbols)
            and np.array_equal(la.offsets, lb.offsets)
        ):
            return False
    return np.array_equal(ca.c_levels, cb.c_levels) and np.array_equal(
        ca.c_ranks, cb.c_ranks
    )


def validate(g: Grammar, sink: Grammar | None = None) -> list[str]:
    """All invariant violations of a grammar value, empty when sound.

    Fingerprint recomputation needs the full rank space, so for buffered
    grammars it only runs when the sink is supplied.
    """
    issues: list[str] = []
    if not 1 <= g.alphabet_size <= 256:
        issues.append(f"alphabet: size {g.alphabet_size} out of range")
    if len(g.alphabet_map) != g.alphabet_size:
        issues.append("alphabet: map length differs from alphabet size")
    if len(set(g.alphabet_map)) != len(g.alphabet_map):
        issues.append("alphabet: map repeats a byte")
    if len(g.fingerprints) != len(g.levels) + 1:
        issues.append("fingerprints: one array per level expected")
        return issues

    for i, lvl in enumerate(g.levels, start=1):
        if lvl.offsets[0] != 0:
            issues.append(f"level {i}: offsets must start at 0")
        lens = lvl.body_lengths()
        if np.any(lens < 1):
            issues.append(f"level {i}: empty rule body")
        if lvl.count > MAX_RANK:
            issues.append(f"level {i}: rank overflow")
        limit = g.base_at(i - 1) + g.level_count(i - 1)
        if lvl.size:
            lo, hi = int(lvl.symbols.min()), int(lvl.symbols.max())
            if lo < 1 or hi > limit:
                issues.append(
                    f"level {i}: body rank outside [1, {limit}] (saw {lo}..{hi})"
                )
        if len(g.fingerprints[i]) != lvl.count:
            issues.append(f"level {i}: fingerprint array length mismatch")
        seen = set()
        blob = lvl.symbols.tobytes()
        for r in range(lvl.count):
            key = blob[4 * int(lvl.offsets[r]) : 4 * int(lvl.offsets[r + 1])]
            if key in seen:
                issues.append(f"level {i}: duplicate rule body at rank {r + 1}")
                break
            seen.add(key)

    if len(g.c_levels) != len(g.c_ranks):
        issues.append("C: level/rank arrays differ in length")
    elif g.k:
        if int(g.c_levels.max()) > g.num_levels:
            issues.append("C: entry references a missing level")
        else:
            for i in range(int(g.c_levels.max()) + 1):
                mask = g.c_levels == i
                if not mask.any():
                    continue
                limit = g.base_at(i) + g.level_count(i)
                ranks = g.c_ranks[mask]
                if int(ranks.min()) < 1 or int(ranks.max()) > limit:
                    issues.append(f"C: rank out of range at level {i}")

    if issues:
        return issues

    expected0 = g.family.terminal_fingerprints(g.alphabet_size)
    if not np.array_equal(g.fingerprints[0], expected0):
        issues.append("fingerprints: terminal array does not match the seed")
    if g.is_root or sink is not None:
        for i, lvl in enumerate(g.levels, start=1):
            if lvl.count == 0:
                continue
            child = combined_fingerprints(g, sink, i - 1, lvl.symbols)
            got = g.family.ragged_fingerprint(i, child, lvl.offsets)
            if not np.array_equal(got, g.fingerprints[i]):
                issues.append(f"fingerprints: level {i} array fails recomputation")
    return issues
