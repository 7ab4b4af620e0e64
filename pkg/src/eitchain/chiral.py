"""Single-photon transport through emitters in a chiral (one-way) waveguide.

Each emitter multiplies the right-moving amplitude by a hop factor, so the
chain transmission is a product over atoms and does not depend on positions.
For Gaussian disorder in the detuning the ensemble averages reduce to
one-dimensional Gaussian integrals, evaluated here by adaptive quadrature.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .errors import DegeneratePole, InvalidRegime, QuadratureFailure
from .model import AtomParams, ChainConfig, chain_arrays, response_denominator, vanishes

LOG_UNDERFLOW = -745.0
GAUSS_SPAN = 12.0
QUAD_LIMIT = 5000  # subintervals; 21 nodes each keeps us far below 1e6 evaluations


def hop_factor_terms(omega, omega2, omega3, rabi, gamma2, gamma):
    """Numerator, denominator and pole mask of the hop factor (vectorized)."""
    den0, scale = response_denominator(omega, omega2, omega3, rabi, gamma2)
    u = omega - omega3
    num = den0 - 1j * u * gamma
    den = den0 + 1j * u * gamma
    return num, den, vanishes(den, scale + np.abs(u) * gamma)


def hop_factor(omega: float, atom: AtomParams) -> complex:
    """Amplitude ratio across one emitter, ``phi(x_j + 0) / phi(x_j - 0)``.

    The waveguide width is ``atom.gamma_r``; ``gamma_l`` is ignored.
    """
    num, den, pole = hop_factor_terms(
        omega, atom.omega2, atom.omega3_eff, atom.rabi, atom.gamma2, atom.gamma_r
    )
    if pole:
        raise DegeneratePole(f"chiral hop factor is singular at omega={omega!r}")
    return complex(num / den)


def _abs2(z):
    return z.real * z.real + z.imag * z.imag


def log_hop_power(omega, omega2, omega3, rabi, gamma2, gamma):
    """``ln |T_j|**2`` elementwise; ``-inf`` on exact transmission zeros, ``nan`` on poles."""
    num, den, pole = hop_factor_terms(omega, omega2, omega3, rabi, gamma2, gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(_abs2(num)) - np.log(_abs2(den))
    return np.where(pole, np.nan, out)


def chain_log_transmission(omega: float, chain: ChainConfig) -> float:
    """``ln T`` for a chiral chain, summed in log space."""
    p = chain_arrays(chain, ["omega2", "omega3", "rabi", "gamma2", "gamma_r"])
    logs = log_hop_power(omega, p["omega2"], p["omega3"], p["rabi"], p["gamma2"], p["gamma_r"])
    if np.any(np.isnan(logs)):
        raise DegeneratePole(f"chiral hop factor is singular at omega={omega!r}")
    return float(np.sum(logs))


def chain_transmission(omega: float, chain: ChainConfig) -> float:
    """Chain transmission ``prod_j |T_j|**2``; reported as 0 below ``exp(-745)``."""
    log_t = chain_log_transmission(omega, chain)
    return 0.0 if log_t < LOG_UNDERFLOW else math.exp(log_t)


def tau(delta2, rabi, gamma2, Gamma):
    """Hop factor with ``omega3 = omega2`` written in the detuning ``delta2``."""
    lam2 = np.square(delta2) - (0.5 * rabi) ** 2
    return (lam2 + 1j * (gamma2 - Gamma) * delta2) / (lam2 + 1j * (gamma2 + Gamma) * delta2)


def tau_sq(delta2, rabi, gamma2, Gamma):
    """``|tau|**2`` without forming the complex ratio.

    At ``rabi = 0, delta2 = 0`` the ratio is 0/0; its limit
    ``((gamma2 - Gamma)/(gamma2 + Gamma))**2`` is returned there.
    """
    lam2 = np.square(delta2) - (0.5 * rabi) ** 2
    d2 = np.square(delta2)
    num = lam2 * lam2 + (gamma2 - Gamma) ** 2 * d2
    den = lam2 * lam2 + (gamma2 + Gamma) ** 2 * d2
    s = gamma2 + Gamma
    limit = ((gamma2 - Gamma) / s) ** 2 if s > 0 else 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den == 0, limit, num / np.where(den == 0, 1.0, den))
    return out if np.ndim(out) else float(out)


def _quad(f, a, b, points, rtol=1e-8):
    inner = []
    for p in sorted(p for p in set(points) if a < p < b):
        # breakpoints closer than rounding noise only produce degenerate subintervals
        if not inner or p - inner[-1] > 1e-9 * (b - a):
            inner.append(p)
    res = integrate.quad(
        f, a, b, points=inner or None, epsabs=1e-15, epsrel=1e-10, limit=QUAD_LIMIT, full_output=1
    )
    val, err = res[0], res[1]
    # QUADPACK flags roundoff near log singularities even when its error estimate is fine
    if len(res) > 3 and not (math.isfinite(val) and err <= rtol * abs(val) + 1e-14):
        raise QuadratureFailure(res[3].splitlines()[0] if res[3] else "quadrature did not converge")
    return val


_NORM = 1.0 / math.sqrt(2.0 * math.pi)


def _gauss_average(g, mean, sigma, singular):
    """``<g>`` over ``N(mean, sigma**2)``, integrated in the standardized variable."""
    def f(z):
        return _NORM * math.exp(-0.5 * z * z) * g(mean + sigma * z)

    return _quad(f, -GAUSS_SPAN, GAUSS_SPAN, [(p - mean) / sigma for p in singular])


def avg_tau_sq(mean_delta2: float, sigma: float, rabi: float, gamma2: float, Gamma: float) -> float:
    """Gaussian average of ``|tau|**2`` over the detuning.

    The integral runs over ``mean +- 12 sigma`` with breakpoints at the EIT
    point and the dressed-state dips.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma!r}")
    if sigma == 0:
        return float(tau_sq(mean_delta2, rabi, gamma2, Gamma))
    val = _gauss_average(lambda d: tau_sq(d, rabi, gamma2, Gamma), mean_delta2, sigma,
                         [0.0, 0.5 * rabi, -0.5 * rabi])
    return min(1.0, max(0.0, val))


def avg_chain_transmission(n: int, avg: float) -> float:
    """``avg ** n`` evaluated as ``exp(n ln avg)``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= avg <= 1.0:
        raise ValueError(f"avg must lie in [0, 1], got {avg!r}")
    if avg == 0.0:
        return 0.0
    return math.exp(n * math.log(avg))


def xi_inverse_chiral(
    mean_delta2: float, sigma: float, rabi: float, Gamma: float, *, gamma2: float | None = None
) -> float:
    """Inverse localization length ``-<ln |tau|**2>`` at critical coupling.

    Uses the rescaled detuning ``x = delta2 / (2 Gamma)``, for which
    ``|tau|**2 = (x**2 - c)**2 / ((x**2 - c)**2 + x**2)`` with
    ``c = rabi**2 / (16 Gamma**2)``. The logarithm is singular at
    ``x = +-sqrt(c)``; the domain is split there before quadrature.

    Raises
    ------
    InvalidRegime
        If ``gamma2`` is given and differs from ``Gamma``.
    """
    if gamma2 is not None and gamma2 != Gamma:
        raise InvalidRegime("closed-form localization length requires critical coupling gamma2 == Gamma")
    if Gamma <= 0:
        raise ValueError(f"Gamma must be > 0, got {Gamma!r}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma!r}")
    c = rabi * rabi / (16.0 * Gamma * Gamma)

    def log_tau_sq(x):
        s = x * x - c
        return 2.0 * math.log(abs(s)) - math.log(s * s + x * x) if s != 0.0 else -math.inf

    x0 = mean_delta2 / (2.0 * Gamma)
    if sigma == 0:
        return -log_tau_sq(x0)
    root = math.sqrt(c)
    val = -_gauss_average(log_tau_sq, x0, sigma / (2.0 * Gamma), [-root, 0.0, root])
    return max(0.0, val)
