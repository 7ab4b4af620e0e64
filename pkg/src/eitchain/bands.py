"""Bloch dispersion of periodic emitter chains and band/gap classification.

For a periodic chain the Bloch factor ``exp(iKL)`` is an eigenvalue of the
single-cell transfer matrix. The closed-form dispersion relations below hold
for lossless emitters (``gamma2 = 0``) with ``omega3 = omega2``; they are
written with ``Lambda**2 = delta2**2 - (rabi/2)**2`` and widths in the
``closed_form`` convention (four times the solver widths).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bidirectional import local_elements
from .errors import InvalidRegime, NumericalError, PoleAtDressedState, SingularElement
from .model import EPS, AtomParams, WaveguideParams, vanishes

RELATIONS = ("closed_form", "transfer")


@dataclass(frozen=True)
class DispersionPoint:
    omega: float
    cos_KL: float
    K_real: float
    K_imag: float
    allowed: bool


def dispersion_point(omega: float, cos_kl: float, L: float) -> DispersionPoint:
    """Reduced-zone Bloch wavenumber from ``cos(KL)``; ``L`` in units of lambda."""
    if abs(cos_kl) <= 1.0:
        return DispersionPoint(omega, cos_kl, math.acos(cos_kl) / L, 0.0, True)
    k_real = 0.0 if cos_kl > 0 else math.pi / L
    return DispersionPoint(omega, cos_kl, k_real, math.acosh(abs(cos_kl)) / L, False)


def _check_lossless(atom):
    if atom.gamma2 != 0.0:
        raise InvalidRegime("dispersion relations hold for gamma2 = 0 only")
    if atom.omega3_eff != atom.omega2:
        raise InvalidRegime("dispersion relations assume omega3 = omega2")


def _lambda_sq(omega, atom):
    d = omega - atom.omega2
    lam2 = d * d - (0.5 * atom.rabi) ** 2
    scale = (abs(omega) + atom.omega2) * abs(d) + (0.5 * atom.rabi) ** 2
    return d, lam2, scale


def cos_KL_symmetric(omega: float, atom: AtomParams, wg: WaveguideParams, L: float) -> float:
    """``cos(qL) + (delta2 Gamma / (2 Lambda**2)) sin(qL)`` for a symmetric waveguide."""
    _check_lossless(atom)
    if atom.gamma_r != atom.gamma_l or wg.v_r != wg.v_l:
        raise InvalidRegime("symmetric dispersion needs gamma_r == gamma_l and v_r == v_l")
    d, lam2, scale = _lambda_sq(omega, atom)
    if vanishes(lam2, scale):
        raise PoleAtDressedState(f"dispersion relation is singular at omega={omega!r}")
    gamma = 4.0 * atom.gamma_r
    ql = wg.q_r(omega) * wg.wavelength * L
    return math.cos(ql) + d * gamma / (2.0 * lam2) * math.sin(ql)


def cos_KL_general(omega: float, atom: AtomParams, wg: WaveguideParams, L: float) -> float:
    """Closed-form right-hand side for unequal left/right couplings.

    ``[(Lambda^4 - (G_R^2 - G_L^2)(d/4)^2) cos(phi) + (Lambda^2 G_R d / 2) sin(phi)]
    / [Lambda^4 + (G_R - G_L)^2 (d/4)^2]`` with ``phi = (q_R + q_L) L / 2``.
    For ``G_R = G_L`` it equals :func:`cos_KL_symmetric`; for unequal couplings
    it is not an eigenvalue identity of the transfer matrix (compare
    :func:`cos_KL_transfer`).
    """
    _check_lossless(atom)
    d, lam2, scale = _lambda_sq(omega, atom)
    gr, gl = 4.0 * atom.gamma_r, 4.0 * atom.gamma_l
    den = lam2 * lam2 + (gr - gl) ** 2 * (d / 4.0) ** 2
    if vanishes(den, scale * scale + (gr + gl) ** 2 * d * d):
        raise PoleAtDressedState(f"dispersion relation is singular at omega={omega!r}")
    phi = wg.propagation_phase(omega, L)
    num = (lam2 * lam2 - (gr * gr - gl * gl) * (d / 4.0) ** 2) * math.cos(phi) + (lam2 * gr * d / 2.0) * math.sin(phi)
    return num / den


def cell_matrix(omega: float, atom: AtomParams, wg: WaveguideParams, L: float) -> np.ndarray:
    """Dense single-cell transfer matrix (one emitter plus one lattice spacing)."""
    m11, m12, m21, m22, _, singular, pole = local_elements(
        omega, atom.omega2, atom.omega3_eff, atom.rabi, atom.gamma2,
        atom.gamma_r, atom.gamma_l, wg.v_r, wg.v_l,
    )
    if singular:
        exc = PoleAtDressedState if pole else SingularElement
        raise exc(f"cell transfer matrix is singular at omega={omega!r}")
    phi = wg.propagation_phase(omega, L)
    ep, em = np.exp(1j * phi), np.exp(-1j * phi)
    return np.array([[m11 * ep, m12 * em], [m21 * ep, m22 * em]], dtype=complex)


def cos_KL_transfer(omega: float, atom: AtomParams, wg: WaveguideParams, L: float) -> float:
    """``trace / (2 sqrt(det))`` of the cell matrix.

    The eigenvalues are ``sqrt(det) exp(+-iK'L)`` with ``cos(K'L)`` returned
    here; ``K'`` differs from the Bloch wavenumber by a constant shift when
    ``det != 1`` (unequal couplings), which leaves the band/gap classification
    unchanged.
    """
    _check_lossless(atom)
    m = cell_matrix(omega, atom, wg, L)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    c = (m[0, 0] + m[1, 1]) / (2.0 * np.sqrt(det))
    return float(c.real)


@dataclass
class BandScan:
    """Result of :func:`scan_bands`."""

    points: list[DispersionPoint]
    poles: list[float] = field(default_factory=list)
    skipped: list[float] = field(default_factory=list)
    gaps: list[tuple[float, float]] = field(default_factory=list)
    bands: list[tuple[float, float]] = field(default_factory=list)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def _runs(points, allowed):
    out = []
    start = None
    prev = None
    for p in points:
        if p.allowed == allowed:
            if start is None:
                start = p.omega
            prev = p.omega
        elif start is not None:
            out.append((start, prev))
            start = None
    if start is not None:
        out.append((start, prev))
    return out


def scan_bands(omega_grid, atom: AtomParams, wg: WaveguideParams, L: float, symmetric: bool,
               relation: str = "closed_form") -> BandScan:
    """Evaluate the dispersion on a strictly increasing grid and extract bands and gaps.

    Grid points on a dressed-state pole are skipped and listed in
    ``skipped``; the analytic pole positions ``omega2 +- rabi/2`` inside the
    grid range are listed in ``poles``. A gap is a maximal run of evaluated
    points with ``|cos KL| > 1``.
    """
    if relation not in RELATIONS:
        raise ValueError(f"unknown relation {relation!r}; expected one of {RELATIONS}")
    grid = np.asarray(omega_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("omega_grid must be a non-empty strictly increasing sequence")
    if relation == "transfer":
        fn = cos_KL_transfer
    else:
        fn = cos_KL_symmetric if symmetric else cos_KL_general
    scan = BandScan(points=[])
    for w in grid:
        try:
            c = fn(float(w), atom, wg, L)
        except NumericalError:
            scan.skipped.append(float(w))
            continue
        scan.points.append(dispersion_point(float(w), c, L))
    lo, hi = grid[0], grid[-1]
    for p in sorted({atom.omega2 - 0.5 * atom.rabi, atom.omega2 + 0.5 * atom.rabi}):
        if lo - 4 * EPS * abs(lo) <= p <= hi + 4 * EPS * abs(hi):
            scan.poles.append(p)
    scan.gaps = _runs(scan.points, False)
    scan.bands = _runs(scan.points, True)
    return scan
