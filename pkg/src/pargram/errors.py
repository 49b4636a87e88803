"""Exception types shared across the package."""


class PargramError(Exception):
    """Base class for all package-specific failures."""


class IngestionError(PargramError):
    """Input bytes cannot form a valid string collection."""


class GrammarIntegrityError(PargramError):
    """A grammar value violates its structural invariants."""


class IncompatibleGrammarsError(PargramError):
    """Two grammars cannot be merged (seed, alphabet, or mode mismatch)."""


class FormatError(PargramError):
    """A serialized file is corrupt, truncated, or of the wrong kind."""


class CapacityError(PargramError):
    """A per-level rank outgrew its 32-bit storage cell."""
