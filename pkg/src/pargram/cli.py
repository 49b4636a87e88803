"""Command line front end.

Subcommands: compress, decompress, merge, stats, verify.  Compression is
deterministic for a given seed: the grammar is canonicalized before
serialization, so the output bytes do not depend on thread count, chunk
size, or memory threshold.

Exit codes: 0 on success, 2 for usage errors, 1 for bad or incompatible
data (corrupt files, empty strings in the input, mismatched seeds).
"""

from __future__ import annotations

import argparse
import logging
import secrets
import sys

from . import codec
from .errors import FormatError, PargramError
from .grammar import Grammar, canonicalize, validate
from .merger import merge_grammars
from .pipeline import DEFAULT_SEED, PipelineConfig, compress_records
from .postprocess import run_length_compress, simplify, to_post_grammar

SUFFIX = ".pgr"


def _read_input(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as fh:
        return fh.read()


def _write_output(path: str, data: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
        return
    with open(path, "wb") as fh:
        fh.write(data)


def _parse_seed(text: str) -> int:
    if text == "random":
        return secrets.randbits(64)
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def _cmd_compress(args) -> int:
    data = _read_input(args.input)
    sep = args.sep if args.mode == "raw" else 0x0A
    records, framing = codec.read_records(data, args.mode, sep)
    cfg = PipelineConfig(
        workers=args.threads,
        mem_threshold=args.mem_threshold << 20,
        chunk_size=args.chunk_size,
        seed=args.seed,
        fingerprint_bits=32 if args.fp32 else 61,
        verbose=args.verbose,
    )
    g = canonicalize(compress_records(records, cfg))
    if args.no_rl and args.no_simp:
        blob = codec.serialize_grammar(g, framing, args.keep_fingerprints)
    else:
        if args.keep_fingerprints:
            print(
                "pargram: --keep-fingerprints only applies to mergeable "
                "output, ignoring", file=sys.stderr,
            )
        pg = to_post_grammar(g)
        if not args.no_rl:
            pg = run_length_compress(pg)
        if not args.no_simp:
            pg = simplify(pg)
        blob = codec.serialize_post(pg, framing)
    out = args.output or (args.input + SUFFIX if args.input != "-" else "-")
    _write_output(out, blob)
    if args.verbose:
        ratio = len(data) / len(blob)
        print(
            f"pargram: {len(data)} -> {len(blob)} bytes ({ratio:.2f}x)",
            file=sys.stderr,
        )
    return 0


def _default_decompressed_name(path: str) -> str:
    if path == "-":
        return "-"
    if path.endswith(SUFFIX):
        return path[: -len(SUFFIX)]
    return path + ".out"


def _cmd_decompress(args) -> int:
    obj, framing = codec.deserialize(_read_input(args.input))
    data = codec.decompress(obj, framing)
    _write_output(args.output or _default_decompressed_name(args.input), data)
    return 0


def _cmd_merge(args) -> int:
    merged: Grammar | None = None
    framing = None
    for path in args.inputs:
        obj, fr = codec.deserialize(_read_input(path))
        if not isinstance(obj, Grammar):
            raise FormatError(
                f"{path} holds a final-format grammar, which cannot be "
                "merged; recompress it with --no-rl --no-simp"
            )
        if merged is None:
            merged, framing = obj, fr
        else:
            if (fr.raw_mode, fr.separator) != (framing.raw_mode, framing.separator):
                raise FormatError(f"{path} uses a different record framing")
            merge_grammars(merged, obj)
            framing = codec.Framing(fr.raw_mode, fr.separator, fr.trailing)
    blob = codec.serialize_grammar(
        canonicalize(merged), framing, args.keep_fingerprints
    )
    _write_output(args.output, blob)
    return 0


def _cmd_stats(args) -> int:
    data = _read_input(args.input)
    obj, framing = codec.deserialize(data)
    rows: list[tuple[str, object]] = [
        ("file_bytes", len(data)),
        ("format", "mergeable" if isinstance(obj, Grammar) else "final"),
        ("strings", obj.k),
        ("alphabet_size", obj.alphabet_size),
        ("seed", f"{obj.seed:#018x}"),
        ("mode", "raw" if framing.raw_mode else "line"),
        ("separator", framing.separator),
        ("trailing_separator", int(framing.trailing)),
    ]
    if isinstance(obj, Grammar):
        rows += [
            ("fingerprint_bits", obj.family.fingerprint_bits),
            ("levels", obj.num_levels),
            ("rules", obj.total_rules),
            ("rule_symbols", obj.total_rule_symbols),
            ("c_entries", obj.k),
        ]
        for i, lvl in enumerate(obj.levels, start=1):
            rows.append((f"level_{i}_rules", lvl.count))
    else:
        rows += [
            ("fingerprint_bits", obj.fingerprint_bits),
            ("sequence_rules", obj.num_seq),
            ("run_rules", obj.num_runs),
            ("rules", obj.num_rules),
            ("total_symbols", obj.total_symbols),
            ("c_symbols", len(obj.c_symbols)),
        ]
    for key, value in rows:
        print(f"{key}\t{value}")
    return 0


def _cmd_verify(args) -> int:
    obj, framing = codec.deserialize(_read_input(args.input))
    if isinstance(obj, Grammar):
        problems = validate(obj)
        if problems:
            for p in problems:
                print(f"pargram: {args.input}: {p}", file=sys.stderr)
            return 1
    data = codec.decompress(obj, framing)
    print(f"{args.input}: ok, {obj.k} strings, {len(data)} bytes")
    if args.against:
        original = _read_input(args.against)
        if data != original:
            print(
                f"pargram: {args.input} does not reproduce {args.against}",
                file=sys.stderr,
            )
            return 1
        print(f"{args.input}: matches {args.against}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pargram",
        description="Mergeable grammar compression for string collections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="compress a string collection")
    c.add_argument("input", help="input file, or - for stdin")
    c.add_argument("-o", "--output", help=f"output file (default: INPUT{SUFFIX})")
    c.add_argument("-p", "--threads", type=int, default=1, metavar="N")
    c.add_argument(
        "-t", "--mem-threshold", type=int, default=512, metavar="MIB",
        help="buffer memory budget in MiB before a merge pass (default 512)",
    )
    c.add_argument(
        "-s", "--seed", type=_parse_seed, default=DEFAULT_SEED, metavar="SEED",
        help="64-bit hash seed, or 'random' (default: fixed)",
    )
    c.add_argument(
        "-m", "--mode", choices=("line", "raw"), default="line",
        help="record framing: newline-separated lines, or --sep in raw mode",
    )
    c.add_argument(
        "--sep", type=int, default=0x00, metavar="BYTE",
        help="separator byte value for raw mode (default 0)",
    )
    c.add_argument("--chunk-size", type=int, default=1 << 20, metavar="BYTES")
    c.add_argument(
        "--no-rl", action="store_true", help="skip run-length rule extraction"
    )
    c.add_argument(
        "--no-simp", action="store_true", help="skip single-use rule inlining"
    )
    c.add_argument(
        "--keep-fingerprints", action="store_true",
        help="store fingerprints in mergeable output instead of recomputing",
    )
    c.add_argument(
        "--fp32", action="store_true",
        help="use 32-bit fingerprints (smaller, higher collision odds)",
    )
    c.add_argument("-v", "--verbose", action="store_true")
    c.set_defaults(func=_cmd_compress)

    d = sub.add_parser("decompress", help="restore the original bytes")
    d.add_argument("input")
    d.add_argument("-o", "--output")
    d.set_defaults(func=_cmd_decompress)

    m = sub.add_parser("merge", help="merge mergeable-format grammars")
    m.add_argument("inputs", nargs="+", metavar="INPUT")
    m.add_argument("-o", "--output", required=True)
    m.add_argument("--keep-fingerprints", action="store_true")
    m.set_defaults(func=_cmd_merge)

    s = sub.add_parser("stats", help="print grammar statistics")
    s.add_argument("input")
    s.set_defaults(func=_cmd_stats)

    v = sub.add_parser(
        "verify", help="check integrity, optionally against the original"
    )
    v.add_argument("input")
    v.add_argument("--against", help="original file to compare the expansion to")
    v.set_defaults(func=_cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if getattr(args, "verbose", False):
        logging.basicConfig(
            level=logging.INFO, stream=sys.stderr, format="pargram: %(message)s"
        )
    try:
        return args.func(args)
    except PargramError as exc:
        print(f"pargram: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"pargram: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
