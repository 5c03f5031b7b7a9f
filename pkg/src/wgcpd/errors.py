"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`WgcpdError`.
Input problems also derive from :class:`ValueError` so callers that only care
about "bad input" can catch that.
"""


class WgcpdError(Exception):
    """Base class for library errors."""


class InputError(WgcpdError, ValueError):
    """Malformed or inconsistent input."""


class MixedKinds(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class AsymmetricAdjacency(InputError):
    pass


class TooShort(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NotSquare(InputError):
    pass


class NegativeEntry(InputError):
    pass


class NonzeroDiagonal(InputError):
    pass


class AsymmetryBeyondTolerance(InputError):
    pass


class KindMismatch(InputError):
    pass


class SubintervalTooShort(InputError):
    pass


class PartitionInvalid(InputError):
    pass


class OutOfRange(InputError):
    pass


class NotSorted(InputError):
    pass


class DegenerateDispersion(WgcpdError):
    """The dispersion estimate s_hat vanished, so a scaled statistic is undefined."""


class EmptySpectrum(WgcpdError):
    """No positive eigenvalue survived truncation (constant data)."""


class NumericalError(WgcpdError):
    """A linear-algebra routine failed."""


class SingularSystem(NumericalError):
    pass


class NegativeAffinity(NumericalError):
    pass


class EigenFailure(NumericalError):
    pass
