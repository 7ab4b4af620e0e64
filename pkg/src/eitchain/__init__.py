"""Single-photon transport through chains of driven Lambda-type emitters in 1D waveguides."""
from .errors import (
    ConfigError,
    DegenerateFit,
    DegeneratePole,
    EitChainError,
    InvalidRegime,
    NumericalError,
    PoleAtDressedState,
    QuadratureFailure,
    SingularElement,
    SingularSystem,
)
from .model import AtomParams, ChainConfig, WaveguideParams, convert_widths, varpi

__all__ = [
    "AtomParams",
    "ChainConfig",
    "WaveguideParams",
    "convert_widths",
    "varpi",
    "ConfigError",
    "DegenerateFit",
    "DegeneratePole",
    "EitChainError",
    "InvalidRegime",
    "NumericalError",
    "PoleAtDressedState",
    "QuadratureFailure",
    "SingularElement",
    "SingularSystem",
]
