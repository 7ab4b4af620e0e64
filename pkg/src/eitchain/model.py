"""Shared parameter types, unit conventions and the atomic response function.

Units
-----
Frequencies are dimensionless multiples of a reference frequency chosen per
experiment (the transition frequency for spectra, the waveguide width for the
chiral disorder studies). Velocities are dimensionless with ``v_r = 1`` by
default. Lengths (atom positions, lattice constants) are in units of

    lambda = 2 pi v_r / omega_unit,

so that at ``omega = 1`` and a spacing of 0.5 the free propagation phase
``q L`` equals pi.

Width conventions
-----------------
The solvers use the widths that appear in the regularized jump conditions:
``gamma2`` enters the response as ``omega - omega2 + i gamma2`` and the
waveguide widths are ``Gamma = V**2 / (2 v)`` per propagation direction.
The symmetric single-emitter closed form and the band dispersion relations are
written in a different normalization, where the excited-state width is a
population rate and the waveguide widths are four times larger. Use
:func:`convert_widths` with ``convention="closed_form"`` to translate
parameters quoted in that normalization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DegeneratePole

EPS = np.finfo(float).eps
ABS_POLE_FLOOR = 1e-30

WIDTH_CONVENTIONS = ("model", "closed_form")


def convert_widths(gamma2, gamma_r, gamma_l, convention="model"):
    """Return ``(gamma2, gamma_r, gamma_l)`` expressed in the solver convention."""
    if convention == "model":
        return gamma2, gamma_r, gamma_l
    if convention == "closed_form":
        return gamma2 / 2.0, gamma_r / 4.0, gamma_l / 4.0
    raise ValueError(f"unknown width convention {convention!r}; expected one of {WIDTH_CONVENTIONS}")


def vanishes(value, scale):
    """True where ``|value|`` is indistinguishable from zero at rounding level ``scale``.

    Works elementwise on arrays. The absolute floor keeps exact zeros detected
    even when every term is tiny.
    """
    return np.abs(value) <= np.maximum(ABS_POLE_FLOOR, 8.0 * EPS * np.abs(scale))


def _check_finite_nonneg(name, value):
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class AtomParams:
    """Physical parameters of one Lambda-type emitter.

    ``omega3`` defaults to ``omega2`` (two-photon resonance at the bare
    transition) and then tracks ``omega2`` under frequency disorder.
    """

    omega2: float
    omega3: float | None = None
    rabi: float = 0.0
    gamma2: float = 0.0
    gamma_r: float = 0.0
    gamma_l: float = 0.0
    position: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.omega2) or self.omega2 <= 0:
            raise ValueError(f"omega2 must be finite and > 0, got {self.omega2!r}")
        if self.omega3 is not None and not math.isfinite(self.omega3):
            raise ValueError(f"omega3 must be finite, got {self.omega3!r}")
        for name in ("rabi", "gamma2", "gamma_r", "gamma_l"):
            _check_finite_nonneg(name, getattr(self, name))
        if not math.isfinite(self.position):
            raise ValueError(f"position must be finite, got {self.position!r}")

    @property
    def omega3_eff(self) -> float:
        return self.omega2 if self.omega3 is None else self.omega3

    @property
    def chiral(self) -> bool:
        return self.gamma_l == 0.0

    def at(self, position: float) -> "AtomParams":
        return replace(self, position=position)


@dataclass(frozen=True)
class WaveguideParams:
    """Waveguide dispersion: ``q_R = (omega - omega0)/v_r``, ``q_L = (omega - omega0)/v_l``.

    ``v_l = 0`` selects the chiral (right-moving only) solver.
    """

    v_r: float = 1.0
    v_l: float = 0.0
    omega0: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.v_r) or self.v_r <= 0:
            raise ValueError(f"v_r must be finite and > 0, got {self.v_r!r}")
        _check_finite_nonneg("v_l", self.v_l)
        if not math.isfinite(self.omega0):
            raise ValueError(f"omega0 must be finite, got {self.omega0!r}")

    @property
    def chiral(self) -> bool:
        return self.v_l == 0.0

    @property
    def wavelength(self) -> float:
        """Length unit lambda = 2 pi v_r (unit reference frequency)."""
        return 2.0 * math.pi * self.v_r

    def q_r(self, omega):
        return (omega - self.omega0) / self.v_r

    def q_l(self, omega):
        if self.v_l == 0.0:
            raise ValueError("q_l is undefined for a chiral waveguide (v_l = 0)")
        return (omega - self.omega0) / self.v_l

    def propagation_phase(self, omega, dx):
        """Half round-trip phase ``(q_R + q_L) * dx / 2`` for a spacing ``dx`` in units of lambda."""
        return 0.5 * (self.q_r(omega) + self.q_l(omega)) * self.wavelength * dx


@dataclass(frozen=True)
class ChainConfig:
    """An ordered chain of emitters (positions strictly increasing)."""

    atoms: tuple[AtomParams, ...]
    lattice_constant: float = 0.5
    _positions: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise ValueError("a chain needs at least one atom")
        object.__setattr__(self, "atoms", atoms)
        if not math.isfinite(self.lattice_constant) or self.lattice_constant <= 0:
            raise ValueError(f"lattice_constant must be > 0, got {self.lattice_constant!r}")
        x = np.array([a.position for a in atoms], dtype=float)
        if np.any(np.diff(x) <= 0):
            raise ValueError("atom positions must be strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "_positions", x)

    @classmethod
    def periodic(cls, atom: AtomParams, n: int, lattice_constant: float) -> "ChainConfig":
        """``n`` copies of ``atom`` at ``x_j = j * lattice_constant``, ``j = 1..n``."""
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        atoms = tuple(atom.at(j * lattice_constant) for j in range(1, n + 1))
        return cls(atoms, lattice_constant)

    @property
    def n(self) -> int:
        return len(self.atoms)

    @property
    def positions(self) -> np.ndarray:
        return self._positions

    def resized(self, n: int) -> "ChainConfig":
        """Periodic chain of ``n`` atoms built from the first atom of this chain."""
        return ChainConfig.periodic(self.atoms[0], n, self.lattice_constant)

    def __add__(self, other: "ChainConfig") -> "ChainConfig":
        """Concatenate, shifting ``other`` to start one lattice constant after this chain."""
        shift = self.atoms[-1].position + self.lattice_constant - other.atoms[0].position
        moved = tuple(a.at(a.position + shift) for a in other.atoms)
        return ChainConfig(self.atoms + moved, self.lattice_constant)


def response_denominator(omega, omega2, omega3, rabi, gamma2):
    """``(omega - omega2 + i gamma2)(omega - omega3) - (rabi/2)**2`` and its rounding scale."""
    d2 = omega - omega2 + 1j * gamma2
    d3 = omega - omega3
    den = d2 * d3 - (0.5 * rabi) ** 2
    scale = (
        (np.abs(omega) + np.abs(omega2) + gamma2) * np.abs(d3)
        + (np.abs(omega) + np.abs(omega3)) * np.abs(d2)
        + (0.5 * rabi) ** 2
    )
    return den, scale


def varpi(omega: float, atom: AtomParams) -> complex:
    """Atomic response after eliminating the excited-state amplitude.

    ``(omega - omega3) / [(omega - omega2 + i gamma2)(omega - omega3) - (rabi/2)**2]``

    Raises
    ------
    DegeneratePole
        If the denominator vanishes (only possible for ``gamma2 = 0`` on a
        dressed-state pole ``omega - omega2 = +-rabi/2``).
    """
    den, scale = response_denominator(omega, atom.omega2, atom.omega3_eff, atom.rabi, atom.gamma2)
    if vanishes(den, scale):
        raise DegeneratePole(f"atomic response diverges at omega={omega!r}")
    return complex((omega - atom.omega3_eff) / den)


def chain_arrays(chain: ChainConfig, attrs: Sequence[str]) -> dict[str, np.ndarray]:
    """Per-atom parameter arrays, e.g. ``chain_arrays(c, ["omega2", "gamma2"])``."""
    out = {}
    for name in attrs:
        src = "omega3_eff" if name == "omega3" else name
        out[name] = np.array([getattr(a, src) for a in chain.atoms], dtype=float)
    return out
