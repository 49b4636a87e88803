"""Merging two grammars built over the same hash family.

Because fingerprints are expansion-determined, two independent builds agree
on phrase boundaries everywhere their inputs overlap, so their rule sets
can be reconciled per level by matching rule bodies.  The absorbing side is
the first argument: its ranks never move, the other grammar's rules are
either mapped onto existing ranks or appended in their original scan order,
and the result compresses the concatenated collection.

Three pairings are legal:
  * two root grammars;
  * two buffer grammars built against the same frozen sink (their shared
    sink ranks pass through untouched);
  * a root sink absorbing a buffer that was built against it.
The merged C is the absorber's C followed by the other side's, remapped.
"""

from __future__ import annotations

import numpy as np

from .errors import IncompatibleGrammarsError
from .grammar import RANK_DTYPE, Grammar, LevelTable


def _check_compatible(ga: Grammar, gb: Grammar) -> None:
    if not ga.family.compatible_with(gb.family):
        raise IncompatibleGrammarsError(
            f"seed mismatch: {ga.seed:#x} vs {gb.seed:#x}"
        )
    if ga.alphabet_map != gb.alphabet_map:
        raise IncompatibleGrammarsError("alphabet maps differ")
    if gb.sink_counts is None:
        if ga.sink_counts is not None:
            raise IncompatibleGrammarsError("cannot absorb a root into a buffer")
        return
    if ga.sink_counts is not None:
        depth = min(len(ga.sink_counts), len(gb.sink_counts))
        if ga.sink_counts[:depth] != gb.sink_counts[:depth]:
            raise IncompatibleGrammarsError("buffers were built over different sinks")
        return
    # sink absorbing its own buffer: the recorded bases must equal the
    # sink's current table sizes, i.e. the sink really was frozen
    for i in range(1, gb.num_levels + 1):
        if gb.base_at(i) != ga.level_count(i):
            raise IncompatibleGrammarsError(
                f"buffer expected {gb.base_at(i)} sink rules at level {i}, "
                f"sink has {ga.level_count(i)}"
            )


def merge_grammars(ga: Grammar, gb: Grammar) -> Grammar:
    """Absorb gb into ga; returns ga, mutated.  gb is left untouched."""
    _check_compatible(ga, gb)

    cb_levels = gb.c_levels.copy()
    cb_ranks = gb.c_ranks.copy()
    remap = np.empty(0, dtype=RANK_DTYPE)  # prior level: gb local -> merged rank

    for i in range(1, gb.num_levels + 1):
        while ga.num_levels < i:
            ga.levels.append(LevelTable())
            ga.fingerprints.append(np.empty(0, dtype=np.uint64))
            if ga.sink_counts is not None:
                ga.sink_counts.append(gb.base_at(ga.num_levels))

        gb_lvl = gb.levels[i - 1]
        ident_below = gb.alphabet_size if i == 1 else gb.base_at(i - 1)
        syms = gb_lvl.symbols
        if len(remap):
            syms = syms.copy()
            above = syms > ident_below
            syms[above] = remap[syms[above].astype(np.int64) - ident_below - 1]

        ga_lvl = ga.levels[i - 1]
        ga_idx = ga_lvl.ensure_index()
        ga_base = ga.base_at(i)
        blob = syms.tobytes()
        offs = gb_lvl.offsets
        gb_fp = gb.fingerprints[i]
        m = np.empty(gb_lvl.count, dtype=RANK_DTYPE)
        new_keys: list[bytes] = []
        new_fp: list[int] = []
        get = ga_idx.get
        for x in range(gb_lvl.count):
            key = blob[4 * int(offs[x]) : 4 * int(offs[x + 1])]
            lr = get(key)
            if lr is None:
                lr = len(ga_idx) + 1
                ga_idx[key] = lr
                new_keys.append(key)
                new_fp.append(gb_fp[x])
            m[x] = ga_base + lr
        if new_keys:
            ga_lvl.append_bodies(new_keys)
            ga.fingerprints[i] = np.concatenate(
                [ga.fingerprints[i], np.array(new_fp, dtype=np.uint64)]
            )

        gb_base = gb.base_at(i)
        mask = cb_levels == i
        if mask.any():
            v = cb_ranks[mask]
            above = v > gb_base
            v[above] = m[v[above].astype(np.int64) - gb_base - 1]
            cb_ranks[mask] = v
        remap = m

    ga.c_levels = np.concatenate([ga.c_levels, cb_levels])
    ga.c_ranks = np.concatenate([ga.c_ranks, cb_ranks])
    return ga
