"""Serialized grammar formats, record framing, and decompression.

Two container formats share a header layout and a trailing checksum but
hold different payloads; docs/format.md pins every field bit-exactly.

  * mergeable (magic "PGRM"): the level-partitioned grammar as built, rule
    bodies packed in per-level bit widths.  Fingerprint arrays are omitted
    by default and recomputed from the seed on load; a flag keeps them.
  * final (magic "PGRF"): the flattened PostGrammar after the shrinking
    passes, everything packed in global bit widths with explicit offset
    tables, which is the long-term storage form.

Integers are little-endian throughout.  Bit-packed streams store fields
LSB-first and pad to a byte boundary.  The footer is the first 8 bytes of
the SHA-256 of everything before it; a mismatch fails the load before any
value is produced.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, GrammarIntegrityError, IngestionError
from .grammar import RANK_DTYPE, Grammar, LevelTable
from .hashing import derive_family
from .postprocess import PostGrammar, expand_post, to_post_grammar

MAGIC_MERGEABLE = b"PGRM"
MAGIC_FINAL = b"PGRF"
FORMAT_VERSION = 1

_FLAG_FINGERPRINTS = 1
_FLAG_FP32 = 2
_FLAG_TRAILING = 4
_FLAG_RAW_MODE = 8

_PACK_CHUNK = 1 << 20


@dataclass(frozen=True)
class Framing:
    """How the original byte stream was cut into strings."""

    raw_mode: bool = False
    separator: int = 0x0A
    trailing: bool = True


# ---------------------------------------------------------------- records

def read_records(data: bytes, framing_mode: str = "line", separator: int = 0x00):
    """Split input bytes into non-empty records.

    Returns (records, Framing).  Line mode cuts on newlines; raw mode cuts
    on the given separator byte, which therefore cannot occur inside any
    record.  Empty records are refused rather than silently dropped.
    """
    if framing_mode not in ("line", "raw"):
        raise IngestionError(f"unknown mode {framing_mode!r}")
    raw = framing_mode == "raw"
    sep_val = separator if raw else 0x0A
    if not 0 <= sep_val <= 255:
        raise IngestionError("separator must be one byte")
    if len(data) == 0:
        raise IngestionError("input is empty")
    sep = bytes([sep_val])
    trailing = data.endswith(sep)
    body = data[: -1] if trailing else data
    records = body.split(sep)
    if any(len(r) == 0 for r in records):
        raise IngestionError("empty string in input (consecutive separators)")
    return records, Framing(raw, sep_val, trailing)


def write_records(records: list[bytes], framing: Framing) -> bytes:
    sep = bytes([framing.separator])
    out = sep.join(records)
    return out + sep if framing.trailing else out


# ---------------------------------------------------------------- low level

def _encode_varints(values) -> bytes:
    v = np.asarray(values, dtype=np.uint64)
    if len(v) == 0:
        return b""
    nbytes = np.ones(len(v), dtype=np.int64)
    t = v >> np.uint64(7)
    while t.any():
        nbytes[t > 0] += 1
        t >>= np.uint64(7)
    starts = np.cumsum(nbytes) - nbytes
    out = np.zeros(int(nbytes.sum()), dtype=np.uint8)
    for b in range(int(nbytes.max())):
        mask = nbytes > b
        byte = ((v[mask] >> np.uint64(7 * b)) & np.uint64(0x7F)).astype(np.uint8)
        cont = (nbytes[mask] - 1 > b).astype(np.uint8) << 7
        out[starts[mask] + b] = byte | cont
    return out.tobytes()


def _decode_varints(data: np.ndarray, offset: int, count: int):
    """Read `count` varints from data starting at offset."""
    if count == 0:
        return np.empty(0, dtype=np.int64), offset
    tail = data[offset:]
    ends = np.flatnonzero((tail & 0x80) == 0)[:count]
    if len(ends) < count:
        raise FormatError("truncated varint stream")
    starts = np.empty(count, dtype=np.int64)
    starts[0] = 0
    starts[1:] = ends[:-1] + 1
    lens = ends - starts + 1
    if int(lens.max()) > 10:
        raise FormatError("oversized varint")
    vals = np.zeros(count, dtype=np.uint64)
    for b in range(int(lens.max())):
        mask = lens > b
        vals[mask] |= (tail[starts[mask] + b] & np.uint64(0x7F)).astype(
            np.uint64
        ) << np.uint64(7 * b)
    return vals.astype(np.int64), offset + int(ends[-1]) + 1


def _width(max_value: int) -> int:
    return max(1, int(max_value).bit_length())


def _pack_bits(values: np.ndarray, width: int) -> bytes:
    """Pack values into width-bit fields, LSB first, padded to whole bytes."""
    if len(values) == 0:
        return b""
    v = values.astype(np.uint64)
    shifts = np.arange(width, dtype=np.uint64)
    parts = []
    for lo in range(0, len(v), _PACK_CHUNK):
        chunk = v[lo : lo + _PACK_CHUNK]
        bits = ((chunk[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
        parts.append(bits.ravel())
    return np.packbits(np.concatenate(parts), bitorder="little").tobytes()


def _unpack_bits(data: np.ndarray, offset: int, count: int, width: int):
    """Inverse of _pack_bits; returns (values as int64, new offset)."""
    if count == 0:
        return np.empty(0, dtype=np.int64), offset
    nbytes = (count * width + 7) // 8
    if offset + nbytes > len(data):
        raise FormatError("truncated bit-packed stream")
    bits = np.unpackbits(
        data[offset : offset + nbytes], bitorder="little", count=count * width
    )
    shifts = np.arange(width, dtype=np.uint64)
    out = np.empty(count, dtype=np.uint64)
    for lo in range(0, count, _PACK_CHUNK):
        hi = min(lo + _PACK_CHUNK, count)
        block = bits[lo * width : hi * width].reshape(hi - lo, width)
        out[lo:hi] = (block.astype(np.uint64) << shifts[None, :]).sum(
            axis=1, dtype=np.uint64
        )
    return out.astype(np.int64), offset + nbytes


def _checksum(blob: bytes) -> bytes:
    return hashlib.sha256(blob).digest()[:8]


# ---------------------------------------------------------------- serialize

def _header(
    magic: bytes, g_seed: int, fp_bits: int, sigma: int, alphabet: bytes,
    k: int, framing: Framing, fingerprints_stored: bool,
) -> bytes:
    flags = 0
    if fingerprints_stored:
        flags |= _FLAG_FINGERPRINTS
    if fp_bits == 32:
        flags |= _FLAG_FP32
    if framing.trailing:
        flags |= _FLAG_TRAILING
    if framing.raw_mode:
        flags |= _FLAG_RAW_MODE
    return b"".join(
        [
            magic,
            struct.pack(
                "<BBBQH", FORMAT_VERSION, flags, framing.separator,
                g_seed & 0xFFFFFFFFFFFFFFFF, sigma,
            ),
            alphabet,
            struct.pack("<Q", k),
        ]
    )


def serialize_grammar(
    g: Grammar, framing: Framing = Framing(), keep_fingerprints: bool = False
) -> bytes:
    """Mergeable format.  The grammar must be a root."""
    if not g.is_root:
        raise GrammarIntegrityError("buffer grammars cannot be serialized")
    parts = [
        _header(
            MAGIC_MERGEABLE, g.seed, g.family.fingerprint_bits, g.alphabet_size,
            g.alphabet_map, g.k, framing, keep_fingerprints,
        ),
        struct.pack("<H", g.num_levels),
    ]
    for lvl in g.levels:
        parts.append(struct.pack("<Q", lvl.count))
    prev_count = g.alphabet_size
    for lvl in g.levels:
        parts.append(_encode_varints(lvl.body_lengths()))
        parts.append(_pack_bits(lvl.symbols - 1, _width(prev_count - 1)))
        prev_count = lvl.count
    cpairs = np.empty(2 * g.k, dtype=np.int64)
    cpairs[0::2] = g.c_levels
    cpairs[1::2] = g.c_ranks
    parts.append(_encode_varints(cpairs))
    if keep_fingerprints:
        for fp in g.fingerprints:
            parts.append(fp.astype("<u8").tobytes())
    blob = b"".join(parts)
    return blob + _checksum(blob)


def serialize_post(pg: PostGrammar, framing: Framing = Framing()) -> bytes:
    """Final format."""
    parts = [
        _header(
            MAGIC_FINAL, pg.seed, pg.fingerprint_bits, pg.alphabet_size,
            pg.alphabet_map, pg.k, framing, False,
        )
    ]
    g_seq = len(pg.seq_symbols)
    c_len = len(pg.c_symbols)
    parts.append(_encode_varints([pg.num_seq, pg.num_runs, g_seq, c_len]))
    w_sym = _width(pg.total_ids - 1)
    w_soff = _width(g_seq)
    w_coff = _width(c_len)
    parts.append(_pack_bits(pg.seq_offsets, w_soff))
    parts.append(_pack_bits(pg.seq_symbols - 1, w_sym))
    parts.append(_pack_bits(pg.run_bases - 1, w_sym))
    parts.append(_encode_varints(pg.run_lengths))
    parts.append(_pack_bits(pg.c_offsets, w_coff))
    parts.append(_pack_bits(pg.c_symbols - 1, w_sym))
    blob = b"".join(parts)
    return blob + _checksum(blob)


# -------------------------------------------------------------- deserialize

def _parse_header(data: bytes):
    if len(data) < 25:
        raise FormatError("file too short")
    magic = data[:4]
    if magic not in (MAGIC_MERGEABLE, MAGIC_FINAL):
        raise FormatError("not a grammar file (bad magic)")
    version, flags, sep, seed, sigma = struct.unpack("<BBBQH", data[4:17])
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    if len(data) < 17 + sigma + 8:
        raise FormatError("file too short for its alphabet")
    alphabet = data[17 : 17 + sigma]
    (k,) = struct.unpack("<Q", data[17 + sigma : 25 + sigma])
    framing = Framing(
        bool(flags & _FLAG_RAW_MODE), sep, bool(flags & _FLAG_TRAILING)
    )
    fp_bits = 32 if flags & _FLAG_FP32 else 61
    return magic, flags, seed, sigma, alphabet, k, framing, fp_bits, 25 + sigma


def deserialize(data: bytes):
    """Load either format.  Returns (Grammar | PostGrammar, Framing)."""
    if len(data) < 33:
        raise FormatError("file too short")
    if _checksum(data[:-8]) != data[-8:]:
        raise FormatError("checksum mismatch, file is corrupt")
    magic, flags, seed, sigma, alphabet, k, framing, fp_bits, pos = _parse_header(
        data
    )
    if sigma < 1:
        raise FormatError("empty alphabet")
    body = np.frombuffer(data[:-8], dtype=np.uint8)
    if magic == MAGIC_MERGEABLE:
        g = _read_mergeable(body, data, pos, seed, sigma, alphabet, k, fp_bits, flags)
        return g, framing
    pg = _read_final(body, pos, seed, sigma, alphabet, k, fp_bits)
    return pg, framing


def _read_mergeable(body, data, pos, seed, sigma, alphabet, k, fp_bits, flags):
    if pos + 2 > len(body):
        raise FormatError("truncated level table")
    (num_levels,) = struct.unpack("<H", data[pos : pos + 2])
    pos += 2
    counts = []
    for _ in range(num_levels):
        if pos + 8 > len(body):
            raise FormatError("truncated level table")
        counts.append(struct.unpack("<Q", data[pos : pos + 8])[0])
        pos += 8
    family = derive_family(seed, num_levels + 1, fp_bits)
    g = Grammar.empty(sigma, alphabet, family)
    prev_count = sigma
    for count in counts:
        lengths, pos = _decode_varints(body, pos, count)
        if count and int(lengths.min()) < 1:
            raise FormatError("empty rule body")
        raw, pos = _unpack_bits(body, pos, int(lengths.sum()), _width(prev_count - 1))
        symbols = (raw + 1).astype(RANK_DTYPE)
        if count and int(symbols.max()) > prev_count:
            raise FormatError("rule body references a missing rank")
        offsets = np.zeros(count + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        g.levels.append(LevelTable(symbols, offsets))
        prev_count = count
    cpairs, pos = _decode_varints(body, pos, 2 * k)
    g.c_levels = cpairs[0::2].astype(RANK_DTYPE)
    g.c_ranks = cpairs[1::2].astype(RANK_DTYPE)
    if k and int(g.c_levels.max()) > num_levels:
        raise FormatError("compressed entry references a missing level")
    if flags & _FLAG_FINGERPRINTS:
        g.fingerprints = []
        for count in [sigma] + counts:
            nbytes = 8 * count
            if pos + nbytes > len(body):
                raise FormatError("truncated fingerprint array")
            g.fingerprints.append(
                np.frombuffer(data[pos : pos + nbytes], dtype="<u8").astype(np.uint64)
            )
            pos += nbytes
    else:
        for i, lvl in enumerate(g.levels, start=1):
            child = g.fingerprints[i - 1][lvl.symbols.astype(np.int64) - 1]
            g.fingerprints.append(family.ragged_fingerprint(i, child, lvl.offsets))
    if pos != len(body):
        raise FormatError("trailing bytes after grammar body")
    return g


def _read_final(body, pos, seed, sigma, alphabet, k, fp_bits):
    head, pos = _decode_varints(body, pos, 4)
    ns, nr, g_seq, c_len = (int(x) for x in head)
    total_ids = sigma + ns + nr
    w_sym = _width(total_ids - 1)
    w_soff = _width(g_seq)
    w_coff = _width(c_len)
    seq_offsets, pos = _unpack_bits(body, pos, ns + 1, w_soff)
    seq_symbols, pos = _unpack_bits(body, pos, g_seq, w_sym)
    run_bases, pos = _unpack_bits(body, pos, nr, w_sym)
    run_lengths, pos = _decode_varints(body, pos, nr)
    c_offsets, pos = _unpack_bits(body, pos, k + 1, w_coff)
    c_symbols, pos = _unpack_bits(body, pos, c_len, w_sym)
    if pos != len(body):
        raise FormatError("trailing bytes after grammar body")
    pg = PostGrammar(
        sigma, alphabet, seed, fp_bits,
        seq_offsets, (seq_symbols + 1).astype(RANK_DTYPE),
        (run_bases + 1).astype(RANK_DTYPE), run_lengths,
        c_offsets, (c_symbols + 1).astype(RANK_DTYPE),
    )
    if (seq_offsets[0] != 0 or (ns and np.any(np.diff(seq_offsets) < 1))
            or int(seq_offsets[-1]) != g_seq):
        raise FormatError("broken rule offsets")
    if c_offsets[0] != 0 or np.any(np.diff(c_offsets) < 1) or int(c_offsets[-1]) != c_len:
        raise FormatError("broken string offsets")
    for arr in (pg.seq_symbols, pg.run_bases, pg.c_symbols):
        if len(arr) and int(arr.max()) > total_ids:
            raise FormatError("symbol id out of range")
    if nr and int(run_lengths.min()) < 2:
        raise FormatError("run shorter than two symbols")
    return pg


# -------------------------------------------------------------- decompress

def expand_strings(g: Grammar | PostGrammar) -> list[bytes]:
    """Expand every compressed string of either representation."""
    pg = to_post_grammar(g) if isinstance(g, Grammar) else g
    return expand_post(pg)


def decompress(obj: Grammar | PostGrammar, framing: Framing) -> bytes:
    """Reproduce the exact original byte stream, framing included."""
    return write_records(expand_strings(obj), framing)
