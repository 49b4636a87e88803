"""Multi-round grammar construction.

Each round fingerprints every active sequence, finds phrase breaks, and
replaces each phrase by a rank at the next level.  Distinct phrases get
ranks in first-occurrence order under a single left-to-right scan of the
collection, which makes a build a pure function of (input, seed).  A string
leaves the game once its sequence has length 1; its (level, rank) pair
lands in C at the string's original position.

The same round loop serves two callers.  A plain build fills a fresh root
grammar.  A buffered build extends a buffer grammar against a frozen
read-only sink: phrase lookups consult the sink's tables first, misses go
into the buffer with ranks offset above the sink's per-level counts, and
the buffer can absorb several chunks across calls as long as the sink does
not move underneath it.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import parsing
from ._util import segment_ranges
from .errors import CapacityError, IncompatibleGrammarsError
from .grammar import (
    MAX_RANK,
    RANK_DTYPE,
    Collection,
    Grammar,
    LevelTable,
    combined_fingerprints,
)
from .hashing import HashFamily

# trace(level, string_ids, text_offsets): break positions of one round,
# reported as offsets into the original strings.  Testing hook.
TraceFn = Callable[[int, np.ndarray, np.ndarray], None]


def build_grammar(
    collection: Collection, family: HashFamily, trace: TraceFn | None = None
) -> Grammar:
    """Compress a collection into a fresh root grammar."""
    g = Grammar.empty(collection.alphabet_size, collection.alphabet_map, family)
    _run_rounds(collection, g, None, trace)
    return g


def build_grammar_buffered(
    collection: Collection,
    family: HashFamily,
    own: Grammar,
    sink: Grammar,
) -> Grammar:
    """Extend a buffer grammar with one more chunk, reusing sink rules.

    The sink is read-only here and must stay frozen for the whole life of
    the buffer.  Returns `own`, mutated.
    """
    if not family.compatible_with(sink.family) or not family.compatible_with(
        own.family
    ):
        raise IncompatibleGrammarsError("hash families disagree")
    if (
        collection.alphabet_map != own.alphabet_map
        or collection.alphabet_map != sink.alphabet_map
    ):
        raise IncompatibleGrammarsError("alphabet maps disagree")
    if own.sink_counts is None:
        if own.num_levels:
            raise IncompatibleGrammarsError("own grammar was built as a root")
        own.sink_counts = []
    _run_rounds(collection, own, sink, None)
    return own


def _get_level(own: Grammar, level: int, sink: Grammar | None) -> LevelTable:
    while own.num_levels < level:
        new_level = own.num_levels + 1
        own.levels.append(LevelTable())
        own.fingerprints.append(np.empty(0, dtype=np.uint64))
        if own.sink_counts is not None:
            own.sink_counts.append(
                sink.level_count(new_level) if sink is not None else 0
            )
    return own.levels[level - 1]


def _run_rounds(
    coll: Collection, own: Grammar, sink: Grammar | None, trace: TraceFn | None
) -> None:
    k = coll.k
    c_levels = np.zeros(k, dtype=RANK_DTYPE)
    c_ranks = np.zeros(k, dtype=RANK_DTYPE)

    lengths = np.fromiter((len(s) for s in coll.strings), dtype=np.int64, count=k)
    done = lengths == 1
    for sid in np.flatnonzero(done):
        c_ranks[sid] = coll.strings[sid][0]

    active_ids = np.flatnonzero(~done)
    arr = (
        np.concatenate([coll.strings[i] for i in active_ids])
        if len(active_ids)
        else np.empty(0, dtype=RANK_DTYPE)
    )
    bounds = np.zeros(len(active_ids) + 1, dtype=np.int64)
    np.cumsum(lengths[active_ids], out=bounds[1:])
    text_off = np.empty(0, dtype=np.int64)
    if trace is not None and len(arr):
        text_off = segment_ranges(lengths[active_ids])

    level = 0
    while len(active_ids):
        level += 1
        fps = combined_fingerprints(own, sink, level - 1, arr)
        starts = parsing.phrase_starts(fps, bounds[:-1])

        if trace is not None:
            start_mask = np.zeros(len(arr), dtype=bool)
            start_mask[bounds[:-1]] = True
            brk = starts[~start_mask[starts]]
            sidx = np.searchsorted(bounds, brk, side="right") - 1
            trace(level, active_ids[sidx], text_off[brk])

        lvl = _get_level(own, level, sink)
        base = own.base_at(level)
        own_idx = lvl.ensure_index()
        sink_idx = None
        if sink is not None and level <= sink.num_levels:
            sink_idx = sink.levels[level - 1].ensure_index()

        buf = arr.tobytes()
        cuts = starts.tolist()
        cuts.append(len(arr))
        n_phrases = len(starts)
        out: list[int] = []
        new_keys: list[bytes] = []
        if sink_idx is None and base == 0:
            get = own_idx.get
            for t in range(n_phrases):
                key = buf[4 * cuts[t] : 4 * cuts[t + 1]]
                r = get(key)
                if r is None:
                    r = len(own_idx) + 1
                    own_idx[key] = r
                    new_keys.append(key)
                out.append(r)
        else:
            sget = sink_idx.get if sink_idx is not None else lambda _key: None
            oget = own_idx.get
            for t in range(n_phrases):
                key = buf[4 * cuts[t] : 4 * cuts[t + 1]]
                r = sget(key)
                if r is None:
                    lr = oget(key)
                    if lr is None:
                        lr = len(own_idx) + 1
                        own_idx[key] = lr
                        new_keys.append(key)
                    r = base + lr
                out.append(r)
        if base + len(own_idx) > MAX_RANK:
            raise CapacityError(f"level {level} outgrew 32-bit ranks")

        if new_keys:
            blob = b"".join(new_keys)
            new_syms = np.frombuffer(blob, dtype=RANK_DTYPE)
            new_lens = np.fromiter(
                (len(kk) >> 2 for kk in new_keys), dtype=np.int64, count=len(new_keys)
            )
            new_offs = np.empty(len(new_keys), dtype=np.int64)
            np.cumsum(new_lens, out=new_offs)
            lvl.symbols = np.concatenate([lvl.symbols, new_syms])
            lvl.offsets = np.concatenate([lvl.offsets, lvl.offsets[-1] + new_offs])
            child_fp = combined_fingerprints(own, sink, level - 1, new_syms)
            local_offs = np.zeros(len(new_keys) + 1, dtype=np.int64)
            local_offs[1:] = new_offs
            fresh = own.family.ragged_fingerprint(level, child_fp, local_offs)
            own.fingerprints[level] = np.concatenate(
                [own.fingerprints[level], fresh]
            )

        arr = np.fromiter(out, dtype=RANK_DTYPE, count=n_phrases)
        per_string = np.diff(np.searchsorted(starts, bounds))
        new_bounds = np.zeros(len(active_ids) + 1, dtype=np.int64)
        np.cumsum(per_string, out=new_bounds[1:])
        if trace is not None:
            text_off = text_off[starts]

        finished = per_string == 1
        if finished.any():
            fin_ids = active_ids[finished]
            c_levels[fin_ids] = level
            c_ranks[fin_ids] = arr[new_bounds[:-1][finished]]
            keep = ~finished
            sym_keep = np.repeat(keep, per_string)
            arr = arr[sym_keep]
            if trace is not None:
                text_off = text_off[sym_keep]
            active_ids = active_ids[keep]
            bounds = np.zeros(len(active_ids) + 1, dtype=np.int64)
            np.cumsum(per_string[keep], out=bounds[1:])
        else:
            bounds = new_bounds

    own.c_levels = np.concatenate([own.c_levels, c_levels])
    own.c_ranks = np.concatenate([own.c_ranks, c_ranks])
