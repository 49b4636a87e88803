"""Merge-time scaling against combined grammar size.

Builds grammar pairs over random inputs of doubling size, times absorbing
one into a copy of the other, and reports the least-squares line through
(combined size, median time) along with its R^2.
"""

import argparse
import gc
import time

import numpy as np

from pargram.builder import build_grammar
from pargram.grammar import Collection
from pargram.hashing import derive_family
from pargram.merger import merge_grammars


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes-mib", type=int, nargs="+", default=[1, 2, 4, 8, 16])
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    family = derive_family(args.seed, 12)
    amap = bytes(range(256))
    xs, ys = [], []
    print("mib\tcombined_size\tmedian_s")
    for mib in args.sizes_mib:
        half = mib << 19
        ga = build_grammar(
            Collection.from_bytes(
                [rng.integers(0, 256, half, dtype=np.uint8).tobytes()], amap
            ),
            family,
        )
        gb = build_grammar(
            Collection.from_bytes(
                [rng.integers(0, 256, half, dtype=np.uint8).tobytes()], amap
            ),
            family,
        )
        size = (
            ga.total_rules + gb.total_rules
            + ga.total_rule_symbols + gb.total_rule_symbols
        )
        times = []
        for _ in range(args.reps):
            ga2 = ga.copy()
            for lvl in ga2.levels:
                lvl.ensure_index()
            gc.collect()
            t0 = time.perf_counter()
            merge_grammars(ga2, gb)
            times.append(time.perf_counter() - t0)
        med = float(np.median(times))
        print(f"{mib}\t{size}\t{med:.3f}")
        xs.append(size)
        ys.append(med)

    x, y = np.array(xs), np.array(ys)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    r2 = 1 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2)
    print(f"fit: t = {slope:.3e} * size + {intercept:.4f}, R^2 = {r2:.4f}")


if __name__ == "__main__":
    main()
