"""Exception hierarchy shared across the package.

Every error raised by bhlr derives from :class:`BhlrError`, so callers can
catch the whole family with one clause.  The CLI maps these onto exit codes
(config -> 1, data -> 2, numeric -> 3).
"""


class BhlrError(Exception):
    """Base class for all bhlr errors."""


class ConfigError(BhlrError):
    """Invalid or inconsistent configuration."""


class DomainError(BhlrError):
    """Value outside the domain of a generating function.

    ``index`` identifies the offending tuple when the violation was found
    while scanning a hypernetwork, else it is None.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class LengthMismatch(BhlrError):
    """Paired sequences of unequal length."""


class DimMismatch(BhlrError):
    """Vectors of unequal dimension where equal dimension is required."""


class OutOfRange(BhlrError):
    """Node id outside [0, n)."""


class ParseError(BhlrError):
    """Malformed input file; ``line`` is the 1-based offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class DuplicateEdge(BhlrError):
    """The same canonical hyperedge appears more than once in an edge file."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ShapeError(BhlrError):
    """Tensor shape inconsistent with its values."""


class UnsupportedKind(BhlrError):
    """Operation not defined for this divergence/model kind."""


class EmptyPositiveSlice(BhlrError):
    """No positive-weight index available to the minibatch sampler."""


class NonFiniteGradient(BhlrError):
    """A gradient contained NaN or infinity."""


class NonBinaryWeights(BhlrError):
    """Operation requires {0, 1} weights."""


class SingleClass(BhlrError):
    """ROC-AUC needs both a positive and a negative example."""
