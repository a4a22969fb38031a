"""Exception hierarchy shared by all modules and mapped to CLI exit codes."""


class SlipError(Exception):
    """Base class for all package errors."""


class SchemaError(SlipError):
    """Data does not match the expected trial/model layout."""


class ParseError(SchemaError):
    """A file could not be parsed; message names the line or field."""


class ValidationError(SchemaError):
    """Parsed data violates a domain invariant."""


class VersionError(SchemaError):
    """Model archive and input data disagree on format or feature layout."""


class ConfigError(SlipError, ValueError):
    """Invalid parameter or configuration."""


class StratificationError(ConfigError):
    pass


class FilterError(ConfigError):
    pass


class DecompositionError(ConfigError):
    pass


class ScoreError(ConfigError):
    pass


class RankingError(ConfigError):
    pass


class TrainingError(SlipError, ValueError):
    """Training input rejected (non-finite values, single class, ...)."""


class NumericError(SlipError, ArithmeticError):
    """Linear solve failed; message carries a condition estimate."""
