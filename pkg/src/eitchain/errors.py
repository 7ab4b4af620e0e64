"""Exception hierarchy shared by all solver modules."""


class EitChainError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(EitChainError, ArithmeticError):
    """A numerical failure inside a solver (CLI exit code 3)."""


class DegeneratePole(NumericalError):
    """The atomic response diverges: the frequency sits on a dressed-state pole."""


class SingularElement(NumericalError):
    """A transfer-matrix element has a vanishing denominator."""


class SingularSystem(NumericalError):
    """The dense jump-condition system is numerically singular."""


class QuadratureFailure(NumericalError):
    """Adaptive quadrature could not reach the requested tolerance."""


class PoleAtDressedState(NumericalError):
    """A dispersion relation is singular at this frequency."""


class DegenerateFit(NumericalError):
    """<ln T> does not decay with N, so no localization length can be fitted."""


class InvalidRegime(EitChainError, ValueError):
    """A closed form was called outside the parameter regime where it holds."""


class ConfigError(EitChainError, ValueError):
    """Malformed or inconsistent experiment configuration (CLI exit code 2)."""
