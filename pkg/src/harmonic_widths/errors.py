"""Exception hierarchy.

Errors fall into two families: ``InputError`` for violated preconditions
(bad weights, coarse grids, malformed symbols) and ``NumericalFailure`` for
computations that ran but did not meet their accuracy contract. The CLI maps
the first family to exit status 1 and the second to exit status 2.
"""

from __future__ import annotations


class HarmonicWidthsError(Exception):
    """Base class for all package errors."""


class InputError(HarmonicWidthsError, ValueError):
    """A precondition on the inputs does not hold."""


class NumericalFailure(HarmonicWidthsError, ArithmeticError):
    """A numerical routine failed its residual or convergence contract."""


class NonPositiveWeight(InputError):
    pass


class GridTooCoarse(InputError):
    pass


class ZeroWronskian(InputError):
    pass


class DependentBasis(InputError):
    pass


class InsufficientSpectrum(InputError):
    pass


class NotHomogeneous(InputError):
    pass


class NotElliptic(InputError):
    pass


class OddSymbol(InputError):
    pass


class DivisionByZeroPolynomial(InputError, ZeroDivisionError):
    pass


class WeightVanishes(InputError):
    pass


class ConfigError(InputError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class EigenFailure(NumericalFailure):
    pass


class ResidualTooLarge(NumericalFailure):
    pass


class SingularSystem(NumericalFailure):
    pass


class IoFailure(HarmonicWidthsError, OSError):
    pass
