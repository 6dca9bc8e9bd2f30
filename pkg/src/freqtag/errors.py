"""Exception types shared across the package."""


class FreqtagError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(FreqtagError, ValueError):
    """A binary input (CIFAR batch, tensor container) is malformed."""


class GraphError(FreqtagError, ValueError):
    """A model graph document is invalid; the message names the offending node."""


class NumericError(FreqtagError, ArithmeticError):
    """A forward pass produced non-finite values; the message names the node."""


class AlignmentError(FreqtagError, ValueError):
    """A frequency does not sit on a spectral bin (coherent sampling violated)."""


class BaselineError(FreqtagError, ValueError):
    """Fewer than two usable baseline bins remain around a target bin."""
