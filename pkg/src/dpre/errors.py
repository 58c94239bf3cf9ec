"""Exception types shared across the package.

The CLI maps these onto exit codes (see cli.EXIT_*), so estimator and kernel
code should raise the most specific type available rather than ValueError.
"""


class DpreError(Exception):
    """Base class for package errors."""


class WindowViolationError(DpreError):
    """Field access or kernel sweep outside the declared window."""


class ResourceCapError(DpreError):
    """A computation would exceed a configured memory or horizon cap."""


class DegenerateInputError(DpreError):
    """Input is structurally invalid (all-masked weights, empty grids, ...)."""


class InsufficientDataError(DpreError):
    """Not enough usable points for a fit or calibration."""


class OracleMismatchError(DpreError):
    """A brute-force oracle disagreed with the fast implementation."""


class JensenViolationError(DpreError):
    """The Jensen / fractional-moment ordering failed beyond tolerance.

    mean(log W)/n <= (1/(n*theta)) * log(mean W^theta) must hold for every
    Monte Carlo batch up to floating-point slack; a violation indicates a
    bug in the sampler or the aggregation, never statistics.
    """
