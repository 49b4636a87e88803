"""Mergeable grammar compression for string collections.

The package compresses a collection of strings into a level-partitioned
grammar whose shape depends only on string content and a hash seed, so
grammars built independently over different collections can be merged
without re-reading any text.  See README.md for the command line tool and
docs/format.md for the serialized layouts.
"""

from .builder import build_grammar, build_grammar_buffered
from .codec import (
    Framing,
    decompress,
    deserialize,
    expand_strings,
    read_records,
    serialize_grammar,
    serialize_post,
    write_records,
)
from .errors import (
    CapacityError,
    FormatError,
    GrammarIntegrityError,
    IncompatibleGrammarsError,
    IngestionError,
    PargramError,
)
from .grammar import (
    Collection,
    Grammar,
    canonicalize,
    grammars_equivalent,
    validate,
)
from .hashing import HashFamily, derive_family
from .merger import merge_grammars
from .pipeline import DEFAULT_SEED, PipelineConfig, compress_records, space_estimate
from .postprocess import (
    PostGrammar,
    expand_post,
    run_length_compress,
    simplify,
    to_post_grammar,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "Collection",
    "DEFAULT_SEED",
    "FormatError",
    "Framing",
    "Grammar",
    "GrammarIntegrityError",
    "HashFamily",
    "IncompatibleGrammarsError",
    "IngestionError",
    "PargramError",
    "PipelineConfig",
    "PostGrammar",
    "build_grammar",
    "build_grammar_buffered",
    "canonicalize",
    "compress_records",
    "decompress",
    "derive_family",
    "deserialize",
    "expand_post",
    "expand_strings",
    "grammars_equivalent",
    "merge_grammars",
    "read_records",
    "run_length_compress",
    "serialize_grammar",
    "serialize_post",
    "simplify",
    "space_estimate",
    "to_post_grammar",
    "validate",
    "write_records",
]
