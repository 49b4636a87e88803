"""Postprocessing ablation: serialized size with each pass toggled.

Runs three corpus flavours (repetitive, run-heavy, uniform random) through
every combination of the run-length and inlining passes and prints the
serialized final-format size plus rule counts for each cell.
"""

import argparse

import numpy as np

from pargram import codec
from pargram.grammar import canonicalize
from pargram.pipeline import PipelineConfig, compress_records
from pargram.postprocess import run_length_compress, simplify, to_post_grammar


def corpora(rng: np.random.Generator, scale: int):
    base = rng.integers(97, 101, 50 * scale, dtype=np.uint8)
    reps = []
    for _ in range(60):
        s = base.copy()
        hits = rng.random(len(s)) < 0.002
        s[hits] = rng.integers(97, 101, int(hits.sum()), dtype=np.uint8)
        reps.append(s.tobytes())
    runny = []
    for _ in range(40):
        parts = []
        for _ in range(4):
            parts.append(rng.integers(97, 101, 30, dtype=np.uint8).tobytes())
            parts.append(b"N" * int(rng.integers(50, 40 * scale)))
        runny.append(b"".join(parts))
    random_ = [
        rng.integers(0, 256, 20 * scale, dtype=np.uint8).tobytes()
        for _ in range(50)
    ]
    return {"repetitive": reps, "run-heavy": runny, "random": random_}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scale", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print("corpus\trl\tsimp\trules\tbytes")
    for name, records in corpora(rng, args.scale).items():
        g = canonicalize(compress_records(records, PipelineConfig()))
        flat = to_post_grammar(g)
        for use_rl in (False, True):
            for use_simp in (False, True):
                pg = flat
                if use_rl:
                    pg = run_length_compress(pg)
                if use_simp:
                    pg = simplify(pg)
                blob = codec.serialize_post(pg, codec.Framing(True, 0, False))
                print(
                    f"{name}\t{int(use_rl)}\t{int(use_simp)}"
                    f"\t{pg.num_rules}\t{len(blob)}"
                )


if __name__ == "__main__":
    main()
