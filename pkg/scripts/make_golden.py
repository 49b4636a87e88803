"""Regenerate the committed golden grammar files used by the format
stability test.  Only run this when the serialized format version is
deliberately changed; the point of the files is that they never move."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from tests.test_acceptance import GOLDEN_CASES, GOLDEN_DIR, _golden_bytes


def main() -> None:
    GOLDEN_DIR.mkdir(exist_ok=True)
    for name, gen_seed, hash_seed, final in GOLDEN_CASES:
        path = GOLDEN_DIR / f"{name}.pgr"
        blob = _golden_bytes(gen_seed, hash_seed, final)
        path.write_bytes(blob)
        print(f"{path} {len(blob)} bytes")


if __name__ == "__main__":
    main()
