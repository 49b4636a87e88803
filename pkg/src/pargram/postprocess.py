"""Grammar shrinking passes applied after construction.

Both passes trade the level-balanced build structure for size, so they
operate on (and produce) a flattened form, PostGrammar, whose symbols live
in one global id space: terminals first, then sequence rules, then run
rules.  A run rule (base, n) stands for n copies of base and costs a
constant amount of space.  The compressed strings C become per-string
sequences here, since inlining can widen an entry beyond a single symbol.

The run-length pass collapses every maximal run of equal symbols inside
rule bodies and C.  Runs of length two only pay for themselves when the
pair is shared, so they are collapsed only if the same (base, 2) run occurs
at least twice overall.  The pass never grows the grammar and is
idempotent.

The simplification pass inlines every sequence rule referenced exactly once
across all bodies and C.  Inlining one such rule shifts its body into its
lone occurrence, so no occurrence count ever changes and the fixpoint is
order-independent.  Run rules are never inlined (expanding one would undo
the run-length pass) and a rule serving as a run base keeps its name.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import segment_ranges
from .errors import GrammarIntegrityError
from .grammar import RANK_DTYPE, Grammar


@dataclass
class PostGrammar:
    alphabet_size: int
    alphabet_map: bytes
    seed: int
    fingerprint_bits: int
    seq_offsets: np.ndarray  # int64, len = num_seq + 1
    seq_symbols: np.ndarray  # uint32 global ids
    run_bases: np.ndarray    # uint32 global ids
    run_lengths: np.ndarray  # int64
    c_offsets: np.ndarray    # int64, len = k + 1
    c_symbols: np.ndarray    # uint32 global ids

    @property
    def num_seq(self) -> int:
        return len(self.seq_offsets) - 1

    @property
    def num_runs(self) -> int:
        return len(self.run_bases)

    @property
    def num_rules(self) -> int:
        return self.num_seq + self.num_runs

    @property
    def total_ids(self) -> int:
        return self.alphabet_size + self.num_rules

    @property
    def k(self) -> int:
        return len(self.c_offsets) - 1

    @property
    def total_symbols(self) -> int:
        """Size accounting: body symbols, two per run rule, plus C."""
        return len(self.seq_symbols) + 2 * self.num_runs + len(self.c_symbols)

    def seq_body(self, seq_index: int) -> np.ndarray:
        return self.seq_symbols[
            self.seq_offsets[seq_index] : self.seq_offsets[seq_index + 1]
        ]


def to_post_grammar(g: Grammar) -> PostGrammar:
    """Flatten a level-partitioned root grammar into the global id space."""
    if not g.is_root:
        raise GrammarIntegrityError("only root grammars can be flattened")
    counts = [t.count for t in g.levels]
    # bases[i]: id offset added to a level-i rank
    bases = np.zeros(len(counts) + 1, dtype=np.int64)
    bases[1:] = g.alphabet_size + np.cumsum([0] + counts[:-1]) if counts else []
    sym_parts = []
    off_parts = [np.zeros(1, dtype=np.int64)]
    shift = 0
    for i, lvl in enumerate(g.levels, start=1):
        sym_parts.append(lvl.symbols.astype(np.int64) + bases[i - 1])
        off_parts.append(lvl.offsets[1:] + shift)
        shift += lvl.size
    seq_symbols = (
        np.concatenate(sym_parts).astype(RANK_DTYPE)
        if sym_parts
        else np.empty(0, RANK_DTYPE)
    )
    seq_offsets = np.concatenate(off_parts)
    c_symbols = (bases[g.c_levels.astype(np.int64)] + g.c_ranks).astype(RANK_DTYPE)
    c_offsets = np.arange(g.k + 1, dtype=np.int64)
    return PostGrammar(
        g.alphabet_size,
        g.alphabet_map,
        g.seed,
        g.family.fingerprint_bits,
        seq_offsets,
        seq_symbols,
        np.empty(0, RANK_DTYPE),
        np.empty(0, np.int64),
        c_offsets,
        c_symbols,
    )


def _maximal_runs(symbols: np.ndarray, offsets: np.ndarray):
    """(starts, lengths) of maximal equal-symbol runs of length >= 2 that
    do not cross the segment boundaries given by offsets."""
    m = len(symbols)
    if m == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    new_run = np.ones(m, dtype=bool)
    new_run[1:] = symbols[1:] != symbols[:-1]
    inner = offsets[1:-1]
    new_run[inner[inner < m]] = True
    starts = np.flatnonzero(new_run)
    lengths = np.diff(np.append(starts, m))
    keep = lengths >= 2
    return starts[keep], lengths[keep]


def _rewrite_runs(symbols, offsets, starts, lengths, ids):
    """Replace each run [start, start+length) by the single symbol ids[i]."""
    out = symbols.copy()
    out[starts] = ids
    drop = np.repeat(starts + 1, lengths - 1) + segment_ranges(lengths - 1)
    keep = np.ones(len(symbols), dtype=bool)
    keep[drop] = False
    seg = np.searchsorted(offsets, starts, side="right") - 1
    removed = np.zeros(len(offsets) - 1, dtype=np.int64)
    np.add.at(removed, seg, lengths - 1)
    new_offsets = offsets.copy()
    new_offsets[1:] -= np.cumsum(removed)
    return out[keep], new_offsets


def run_length_compress(g: Grammar | PostGrammar) -> PostGrammar:
    """Collapse maximal equal-symbol runs in every rule body and in C."""
    pg = to_post_grammar(g) if isinstance(g, Grammar) else g

    s_starts, s_lens = _maximal_runs(pg.seq_symbols, pg.seq_offsets)
    c_starts, c_lens = _maximal_runs(pg.c_symbols, pg.c_offsets)
    if len(s_starts) == 0 and len(c_starts) == 0:
        return pg

    bases = np.concatenate(
        [pg.seq_symbols[s_starts], pg.c_symbols[c_starts]]
    ).astype(np.uint64)
    lens = np.concatenate([s_lens, c_lens]).astype(np.uint64)
    code = (bases << np.uint64(32)) | lens
    uniq, first, inverse, counts = np.unique(
        code, return_index=True, return_inverse=True, return_counts=True
    )
    worthwhile = ((uniq & np.uint64(0xFFFFFFFF)) >= 3) | (counts >= 2)

    # fresh run ids in first-appearance order, after all existing ids
    kept = np.flatnonzero(worthwhile)
    kept = kept[np.argsort(first[kept], kind="stable")]
    id_of_uniq = np.zeros(len(uniq), dtype=np.int64)
    id_of_uniq[kept] = pg.total_ids + 1 + np.arange(len(kept))
    inst_ids = id_of_uniq[inverse]
    use = inst_ids > 0

    n_s = len(s_starts)
    seq_symbols, seq_offsets = _rewrite_runs(
        pg.seq_symbols,
        pg.seq_offsets,
        s_starts[use[:n_s]],
        s_lens[use[:n_s]],
        inst_ids[:n_s][use[:n_s]],
    )
    c_symbols, c_offsets = _rewrite_runs(
        pg.c_symbols,
        pg.c_offsets,
        c_starts[use[n_s:]],
        c_lens[use[n_s:]],
        inst_ids[n_s:][use[n_s:]],
    )
    new_bases = (uniq[kept] >> np.uint64(32)).astype(RANK_DTYPE)
    new_lens = (uniq[kept] & np.uint64(0xFFFFFFFF)).astype(np.int64)
    return PostGrammar(
        pg.alphabet_size,
        pg.alphabet_map,
        pg.seed,
        pg.fingerprint_bits,
        seq_offsets,
        seq_symbols,
        np.concatenate([pg.run_bases, new_bases]),
        np.concatenate([pg.run_lengths, new_lens]),
        c_offsets,
        c_symbols,
    )


def simplify(pg: PostGrammar) -> PostGrammar:
    """Inline every sequence rule whose single use is in a body or in C."""
    total = pg.total_ids
    occ = np.bincount(pg.seq_symbols, minlength=total + 1)
    occ += np.bincount(pg.c_symbols, minlength=total + 1)
    run_occ = np.bincount(pg.run_bases, minlength=total + 1)

    lo, hi = pg.alphabet_size + 1, pg.alphabet_size + pg.num_seq
    inline = np.zeros(total + 1, dtype=bool)
    ids = np.arange(total + 1)
    inline[(ids >= lo) & (ids <= hi) & (occ == 1) & (run_occ == 0)] = True
    if not inline.any():
        return pg

    seq_symbols = pg.seq_symbols
    seq_offsets = pg.seq_offsets
    c_symbols = pg.c_symbols
    c_offsets = pg.c_offsets
    # iterate to the fixpoint; each pass splices current bodies, and the
    # reference DAG is finite, so the loop is bounded by its depth
    while True:
        lens = np.diff(seq_offsets)
        spliced_any = False
        new = []
        for symbols, offsets in ((seq_symbols, seq_offsets), (c_symbols, c_offsets)):
            todo = inline[symbols]
            if not todo.any():
                new.append((symbols, offsets))
                continue
            spliced_any = True
            local = symbols.astype(np.int64) - lo
            counts = np.where(todo, lens[np.where(todo, local, 0)], 1)
            out = np.empty(int(counts.sum()), dtype=RANK_DTYPE)
            starts = np.cumsum(counts) - counts
            out[starts[~todo]] = symbols[~todo]
            src_starts = seq_offsets[:-1][local[todo]]
            src_lens = counts[todo]
            dst = np.repeat(starts[todo], src_lens) + segment_ranges(src_lens)
            src = np.repeat(src_starts, src_lens) + segment_ranges(src_lens)
            out[dst] = seq_symbols[src]
            seg = np.searchsorted(offsets, np.flatnonzero(todo), side="right") - 1
            grown = np.zeros(len(offsets) - 1, dtype=np.int64)
            np.add.at(grown, seg, src_lens - 1)
            new_offsets = offsets.copy()
            new_offsets[1:] += np.cumsum(grown)
            new.append((out, new_offsets))
        (seq_symbols, seq_offsets), (c_symbols, c_offsets) = new
        if not spliced_any:
            break

    # drop inlined rules and renumber the survivors
    seq_ids = np.arange(lo, hi + 1)
    survivors = ~inline[seq_ids]
    removed_before = np.cumsum(inline[: total + 1])
    old_to_new = ids - removed_before
    keep_rule = np.repeat(survivors, np.diff(seq_offsets))
    new_seq_symbols = old_to_new[seq_symbols[keep_rule]].astype(RANK_DTYPE)
    kept_lens = np.diff(seq_offsets)[survivors]
    new_seq_offsets = np.zeros(len(kept_lens) + 1, dtype=np.int64)
    np.cumsum(kept_lens, out=new_seq_offsets[1:])
    return PostGrammar(
        pg.alphabet_size,
        pg.alphabet_map,
        pg.seed,
        pg.fingerprint_bits,
        new_seq_offsets,
        new_seq_symbols,
        old_to_new[pg.run_bases].astype(RANK_DTYPE),
        pg.run_lengths.copy(),
        c_offsets,
        old_to_new[c_symbols].astype(RANK_DTYPE),
    )


def expand_post(pg: PostGrammar) -> list[bytes]:
    """Expand every compressed string back to raw bytes."""
    sym = pg.c_symbols
    owner = np.repeat(
        np.arange(pg.k, dtype=np.int64), np.diff(pg.c_offsets)
    )
    sigma = pg.alphabet_size
    run_lo = sigma + pg.num_seq
    seq_lens = np.diff(pg.seq_offsets)
    while True:
        is_seq = (sym > sigma) & (sym <= run_lo)
        is_run = sym > run_lo
        if not (is_seq.any() or is_run.any()):
            break
        counts = np.ones(len(sym), dtype=np.int64)
        counts[is_seq] = seq_lens[sym[is_seq].astype(np.int64) - sigma - 1]
        counts[is_run] = pg.run_lengths[sym[is_run].astype(np.int64) - run_lo - 1]
        out = np.empty(int(counts.sum()), dtype=RANK_DTYPE)
        starts = np.cumsum(counts) - counts
        plain = ~(is_seq | is_run)
        out[starts[plain]] = sym[plain]
        if is_seq.any():
            src_starts = pg.seq_offsets[:-1][sym[is_seq].astype(np.int64) - sigma - 1]
            lens = counts[is_seq]
            dst = np.repeat(starts[is_seq], lens) + segment_ranges(lens)
            src = np.repeat(src_starts, lens) + segment_ranges(lens)
            out[dst] = pg.seq_symbols[src]
        if is_run.any():
            lens = counts[is_run]
            dst = np.repeat(starts[is_run], lens) + segment_ranges(lens)
            bases = pg.run_bases[sym[is_run].astype(np.int64) - run_lo - 1]
            out[dst] = np.repeat(bases, lens)
        owner = np.repeat(owner, counts)
        sym = out
    lut = np.frombuffer(pg.alphabet_map, dtype=np.uint8)
    per_string = np.bincount(owner, minlength=pg.k)
    bounds = np.zeros(pg.k + 1, dtype=np.int64)
    np.cumsum(per_string, out=bounds[1:])
    raw = lut[sym.astype(np.int64) - 1]
    return [raw[bounds[j] : bounds[j + 1]].tobytes() for j in range(pg.k)]
