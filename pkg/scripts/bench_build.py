"""Build-time scaling on uniform random input.

Prints one row per input size with the median wall time over repeated
builds and the time ratio to the previous (half-sized) row; a content-blind
linear-time compressor keeps that ratio near 2.
"""

import argparse
import gc
import time

import numpy as np

from pargram.builder import build_grammar
from pargram.grammar import Collection
from pargram.hashing import derive_family


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes-mib", type=int, nargs="+", default=[2, 4, 8, 16, 32])
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    family = derive_family(args.seed, 12)
    print("mib\trules\tmedian_s\tmib_per_s\tratio")
    prev = None
    for mib in args.sizes_mib:
        data = rng.integers(0, 256, mib << 20, dtype=np.uint8).tobytes()
        coll = Collection.from_bytes([data], alphabet_map=bytes(range(256)))
        times = []
        rules = 0
        for _ in range(args.reps):
            gc.collect()
            t0 = time.perf_counter()
            g = build_grammar(coll, family)
            times.append(time.perf_counter() - t0)
            rules = g.total_rules
        med = float(np.median(times))
        ratio = f"{med / prev:.2f}" if prev else "-"
        print(f"{mib}\t{rules}\t{med:.3f}\t{mib / med:.2f}\t{ratio}")
        prev = med


if __name__ == "__main__":
    main()
