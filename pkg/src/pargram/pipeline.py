"""Parallel compression driver.

Work is organized in phases.  Each phase freezes the current sink grammar,
hands string-aligned chunks to a pool of worker threads, and each worker
accumulates its chunks into a private buffer grammar that reuses sink
ranks.  When the estimated resident size of sink plus buffers crosses the
configured threshold (or input runs out), the phase quiesces: buffers are
folded together in worker order and absorbed into the sink, which then
unfreezes for the next phase.

Because phrase boundaries depend only on string content and the shared
hash family, the set of rules produced is independent of how strings are
grouped into chunks, buffers, and phases.  Compressed-string entries are
tagged with their input position and restored to input order at the end,
so any schedule yields a grammar canonically equal to the serial build.

Workers hold the GIL only between numpy calls; the parallelism is modest
but real for large chunks, and the phase structure is what bounds memory
regardless of thread count.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .builder import build_grammar_buffered
from .grammar import Collection, Grammar
from .hashing import derive_family
from .merger import merge_grammars

logger = logging.getLogger("pargram")

# splitmix64 increment; an arbitrary but fixed default seed
DEFAULT_SEED = 0x9E3779B97F4A7C15

DEFAULT_THRESHOLD = 512 << 20
DEFAULT_CHUNK = 1 << 20


@dataclass
class PipelineConfig:
    workers: int = 1
    mem_threshold: int = DEFAULT_THRESHOLD
    chunk_size: int = DEFAULT_CHUNK
    seed: int = DEFAULT_SEED
    fingerprint_bits: int = 61
    verbose: bool = False
    # test hook: sleep up to this many seconds per chunk to shake schedules
    jitter: float = 0.0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if self.mem_threshold < 1:
            raise ValueError("mem_threshold must be positive")


def space_estimate(g: Grammar) -> int:
    """Deterministic overapproximation of the bytes a grammar occupies.

    Counts the rule arrays, fingerprints, compressed strings, and the
    body-lookup dict (slot plus key object per rule).  Monotone in every
    component, so phase thresholds trigger the same way on every run with
    the same chunking.
    """
    rules = g.total_rules
    syms = g.total_rule_symbols
    arrays = 4 * syms + 8 * (rules + g.num_levels) + 8 * (rules + g.alphabet_size)
    index = rules * 96 + syms * 4
    return arrays + index + 16 * g.k


def _alphabet_of(records: list[bytes]) -> bytes:
    present = np.zeros(256, dtype=bool)
    for r in records:
        present[np.frombuffer(r, dtype=np.uint8)] = True
    return bytes(np.flatnonzero(present).tolist())


def _chunk_records(records: list[bytes], chunk_size: int):
    """Split into runs of whole strings of roughly chunk_size bytes."""
    start = 0
    while start < len(records):
        end = start
        total = 0
        while end < len(records) and (total < chunk_size or end == start):
            total += len(records[end])
            end += 1
        yield start, records[start:end]
        start = end


@dataclass
class _Phase:
    sink: Grammar
    buffers: list[Grammar]
    provenance: list[list[np.ndarray]]
    estimates: list[int]
    quiesce: threading.Event = field(default_factory=threading.Event)
    errors: list[BaseException] = field(default_factory=list)


def _worker(
    idx: int,
    phase: _Phase,
    jobs: "queue.Queue",
    amap: bytes,
    cfg: PipelineConfig,
    budget: int,
) -> None:
    rng = np.random.default_rng(idx) if cfg.jitter > 0 else None
    buf = phase.buffers[idx]
    while True:
        item = jobs.get()
        if item is None:
            return
        if phase.errors:
            continue  # drain without working
        first, recs = item
        if rng is not None:
            time.sleep(float(rng.random()) * cfg.jitter)
        try:
            coll = Collection.from_bytes(recs, alphabet_map=amap)
            build_grammar_buffered(coll, phase.sink.family, buf, phase.sink)
        except BaseException as exc:  # propagated after join
            phase.errors.append(exc)
            continue
        phase.provenance[idx].append(
            np.arange(first, first + len(recs), dtype=np.int64)
        )
        phase.estimates[idx] = space_estimate(buf)
        if sum(phase.estimates) > budget:
            phase.quiesce.set()


def compress_records(records: list[bytes], cfg: PipelineConfig) -> Grammar:
    """Compress a string collection into a root grammar.

    The result has one compressed entry per input string, in input order,
    and is canonically equal to a single-threaded whole-input build for
    every worker count, chunk size, and memory threshold.
    """
    family = derive_family(cfg.seed, 8, cfg.fingerprint_bits)
    amap = _alphabet_of(records)
    sink = Grammar.empty(len(amap), amap, family)
    order: list[np.ndarray] = []

    chunks = _chunk_records(records, cfg.chunk_size)
    pending = next(chunks, None)
    phase_no = 0
    while pending is not None:
        phase_no += 1
        sink_size = space_estimate(sink)
        budget = max(cfg.mem_threshold - sink_size, cfg.mem_threshold // 16)
        phase = _Phase(
            sink,
            [Grammar.empty(len(amap), amap, family) for _ in range(cfg.workers)],
            [[] for _ in range(cfg.workers)],
            [0] * cfg.workers,
        )
        jobs: queue.Queue = queue.Queue(maxsize=2 * cfg.workers)
        threads = [
            threading.Thread(
                target=_worker, args=(i, phase, jobs, amap, cfg, budget)
            )
            for i in range(cfg.workers)
        ]
        for t in threads:
            t.start()
        fed = 0
        while pending is not None and not phase.quiesce.is_set() and not phase.errors:
            jobs.put(pending)
            fed += 1
            pending = next(chunks, None)
        for _ in threads:
            jobs.put(None)
        for t in threads:
            t.join()
        if phase.errors:
            raise phase.errors[0]

        merged: Grammar | None = None
        for i, buf in enumerate(phase.buffers):
            if buf.k == 0:
                continue
            merged = buf if merged is None else merge_grammars(merged, buf)
            order.extend(phase.provenance[i])
        if merged is not None:
            merge_grammars(sink, merged)
        if cfg.verbose:
            logger.info(
                "phase %d: %d chunks, %d rules, ~%.1f MiB",
                phase_no, fed, sink.total_rules, space_estimate(sink) / 2**20,
            )

    if sink.k != len(records):
        raise AssertionError("pipeline lost strings")  # pragma: no cover
    if order:
        perm = np.concatenate(order)
        inverse = np.empty(len(perm), dtype=np.int64)
        inverse[perm] = np.arange(len(perm))
        sink.c_levels = sink.c_levels[inverse]
        sink.c_ranks = sink.c_ranks[inverse]
    return sink
