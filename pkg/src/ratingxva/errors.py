"""Exception hierarchy.

Two families matter to the command line: validation problems (bad input,
exit code 2) and numeric failures (exit code 3).
"""


class RatingXVAError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(RatingXVAError, ValueError):
    """Input violates a documented invariant."""


class NumericError(RatingXVAError, ArithmeticError):
    """A numerical procedure failed or produced an unusable result."""


# rating_model
class RowSumError(ValidationError):
    pass


class NegativeEntry(ValidationError):
    pass


class NonAbsorbingDefault(ValidationError):
    pass


class LogDivergence(NumericError):
    pass


class EmbeddingFailure(NumericError):
    pass


# markov_copula
class NegativeIntensity(NumericError):
    pass


# instruments
class EvalAfterMaturity(ValidationError):
    pass


class NoRoot(NumericError):
    pass


# xva_engine
class InconsistentPathSet(ValidationError):
    pass


class InsufficientPaths(ValidationError):
    pass


class MissingBaseline(ValidationError):
    pass


class ConfigError(ValidationError):
    """Scenario file could not be parsed or validated."""
