"""Single-photon scattering in a bidirectional waveguide via 2x2 transfer matrices.

Amplitudes are phase-stripped so that one matrix per emitter maps
``(t_{j-1}, r_j)`` on its left to ``(t_j, r_{j+1})`` on its right. The
reference origin is ``x_0 = 0``, where the incoming amplitude is 1.

Per-atom matrix elements, with ``u = omega - omega3``,
``D = (omega - omega2 + i gamma2) u - (rabi/2)**2``, ``S = Gamma_R + Gamma_L``,
``A = Gamma_R - Gamma_L`` and ``g = sqrt(Gamma_R Gamma_L)``::

    m11 = (D - i S u) / (D + i A u)        m12 = -2i sqrt(v_L/v_R) g u / (D + i A u)
    m21 =  2i sqrt(v_R/v_L) g u / (D + i A u)   m22 = (D + i S u) / (D + i A u)

times ``exp(+i phi)`` on the first column and ``exp(-i phi)`` on the second.
These follow from solving the regularized jump conditions and are identical to
the ``alpha``/``beta`` representation for ``m11`` and ``m12``; the
``variant="printed"`` option evaluates the alternative ``m21``/``m22`` with
``(1 - alpha_R)`` and ``(1 + beta_L beta_R)`` for comparison only (it is not
flux conserving).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePole, SingularElement, SingularSystem
from .model import AtomParams, ChainConfig, WaveguideParams, response_denominator, vanishes, varpi

VARIANTS = ("derived", "printed")
NORM_BAND = (0.5, 2.0)
MAX_COND = 1e14


def _max_abs(m):
    return float(np.max(np.abs(m)))


@dataclass(frozen=True)
class TransferMatrix:
    """A 2x2 complex matrix stored as ``exp(log_scale) * m`` with ``max|m|`` in [0.5, 2]."""

    m: np.ndarray
    log_scale: float = 0.0

    def __post_init__(self):
        m = np.array(self.m, dtype=complex).reshape(2, 2)
        if not np.all(np.isfinite(m)):
            raise SingularElement("transfer matrix has non-finite elements")
        scale = self.log_scale
        peak = _max_abs(m)
        if peak == 0.0:
            raise SingularElement("transfer matrix is identically zero")
        if not NORM_BAND[0] <= peak <= NORM_BAND[1]:
            m = m / peak
            scale += math.log(peak)
        m.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "log_scale", float(scale))

    @classmethod
    def identity(cls):
        return cls(np.eye(2, dtype=complex))

    def dense(self) -> np.ndarray:
        return self.m * math.exp(self.log_scale)

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        return TransferMatrix(self.m @ other.m, self.log_scale + other.log_scale)

    def log_det(self) -> complex:
        """Complex logarithm of the determinant of the full (scaled) matrix."""
        m = self.m
        return cmath.log(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]) + 2.0 * self.log_scale


@dataclass(frozen=True)
class ScatterResult:
    """Phase-stripped field amplitudes and the transmission/reflection probabilities.

    ``t_amplitudes[j-1]`` is the right-moving amplitude after atom ``j`` and
    ``r_amplitudes[j-1]`` the left-moving amplitude before atom ``j``.
    ``log_T`` stays meaningful when ``T`` underflows.
    """

    t_amplitudes: np.ndarray
    r_amplitudes: np.ndarray
    T: float
    R: float
    log_T: float

    @property
    def t(self) -> complex:
        return complex(self.t_amplitudes[-1])

    @property
    def r(self) -> complex:
        return complex(self.r_amplitudes[0])


def local_numerators(omega, omega2, omega3, rabi, gamma2, gamma_r, gamma_l, v_r, v_l):
    """Element numerators ``n_ij`` and the scalars ``den`` and ``e`` (vectorized).

    The phase-free matrix is ``n / den`` with ``den = D + i A u`` and its
    determinant is ``e / den`` with ``e = D - i A u``. Products of numerators
    stay finite where ``den`` vanishes, which is how a perfectly reflecting
    emitter enters a chain. For ``rabi = 0`` the common factor ``u`` is
    divided out. ``zero`` flags emitters whose numerator matrix vanishes.
    """
    d, scale = response_denominator(omega, omega2, omega3, rabi, gamma2)
    u = omega - omega3
    two_level = np.asarray(rabi) == 0
    if np.any(two_level):
        d = np.where(two_level, omega - omega2 + 1j * gamma2, d)
        scale = np.where(two_level, np.abs(omega) + np.abs(omega2) + gamma2, scale)
        u = np.where(two_level, 1.0, u)
    # on two-photon resonance the matrix is exactly the identity, even if (rabi/2)**2 underflows
    d = np.where((u == 0) & ~two_level, 1.0 + 0j, d)
    s = gamma_r + gamma_l
    a = gamma_r - gamma_l
    g = np.sqrt(gamma_r * gamma_l)
    n11 = d - 1j * s * u
    n12 = -2j * math.sqrt(v_l / v_r) * g * u
    n21 = 2j * math.sqrt(v_r / v_l) * g * u
    n22 = d + 1j * s * u
    ref = scale + np.abs(u) * s
    zero = (n11 == 0) & (n12 == 0) & (n21 == 0) & (n22 == 0)
    return n11, n12, n21, n22, d + 1j * a * u, d - 1j * a * u, ref, zero


def local_elements(omega, omega2, omega3, rabi, gamma2, gamma_r, gamma_l, v_r, v_l):
    """Phase-free matrix elements, determinant and singularity mask (vectorized).

    The last entry flags singular elements caused by a vanishing ``den``
    (a pole of the atomic response) rather than a vanishing numerator.
    """
    n11, n12, n21, n22, den, e, ref, zero = local_numerators(
        omega, omega2, omega3, rabi, gamma2, gamma_r, gamma_l, v_r, v_l
    )
    singular = vanishes(den, ref) | zero
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / den
        out = (n11 * inv, n12 * inv, n21 * inv, n22 * inv, e * inv)
    return out + (singular, singular & ~zero)


def alpha_beta(omega: float, atom: AtomParams):
    """``(alpha_R, alpha_L, beta_R, beta_L)`` from the atomic response."""
    w = varpi(omega, atom)
    gr, gl = atom.gamma_r, atom.gamma_l
    g = math.sqrt(gr * gl)
    alpha_r = (1 - 1j * gr * w) / (1 + 1j * gr * w)
    alpha_l = (1 + 1j * gl * w) / (1 - 1j * gl * w)
    beta_r = g * w / (1 + 1j * gr * w)
    beta_l = g * w / (1 - 1j * gl * w)
    return alpha_r, alpha_l, beta_r, beta_l


def _printed_elements(omega, atom, wg):
    ar, al, br, bl = alpha_beta(omega, atom)
    bb = br * bl
    for den in (1 - bb, 1 + bb):
        if abs(den) < 1e-30:
            raise SingularElement(f"matrix element denominator vanishes at omega={omega!r}")
    s1 = math.sqrt(wg.v_l / wg.v_r)
    m11 = (ar + bb) / (1 - bb)
    m12 = -1j * s1 * br * (1 + al) / (1 - bb)
    m21 = 1j / s1 * bl * (1 - ar) / (1 + bb)
    m22 = (al - bb) / (1 + bb)
    return m11, m12, m21, m22


def _require_bidirectional(wg):
    if wg.v_l <= 0:
        raise ValueError("bidirectional solver needs v_l > 0; use the chiral module for v_l = 0")


def _atom_elements(omega, atom, wg, variant):
    if variant == "printed":
        m11, m12, m21, m22 = _printed_elements(omega, atom, wg)
        return m11, m12, m21, m22, m11 * m22 - m12 * m21
    if variant != "derived":
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    m11, m12, m21, m22, det, singular, pole = local_elements(
        omega, atom.omega2, atom.omega3_eff, atom.rabi, atom.gamma2,
        atom.gamma_r, atom.gamma_l, wg.v_r, wg.v_l,
    )
    if singular:
        exc = DegeneratePole if pole else SingularElement
        raise exc(f"transfer matrix is singular at omega={omega!r}")
    return complex(m11), complex(m12), complex(m21), complex(m22), complex(det)


def local_transfer_matrix(
    omega: float, atom: AtomParams, spacing_phase: float, wg: WaveguideParams, variant: str = "derived"
) -> TransferMatrix:
    """Transfer matrix of one emitter including the propagation phase ``spacing_phase``."""
    _require_bidirectional(wg)
    m11, m12, m21, m22, _ = _atom_elements(omega, atom, wg, variant)
    ep = cmath.exp(1j * spacing_phase)
    em = cmath.exp(-1j * spacing_phase)
    return TransferMatrix(np.array([[m11 * ep, m12 * em], [m21 * ep, m22 * em]]))


def _spacing_phases(omega, chain, wg):
    x = chain.positions
    dx = np.diff(np.concatenate(([0.0], x)))
    return wg.propagation_phase(omega, dx)


def _atom_numerators(omega, atom, wg, variant):
    """Per-emitter ``(n11, n12, n21, n22, e)`` with ``t``-factor ``e``.

    A chain transmits ``t_N = prod(e_j) / (prod N_j)_22``.
    """
    if variant == "printed":
        m11, m12, m21, m22 = _printed_elements(omega, atom, wg)
        return m11, m12, m21, m22, m11 * m22 - m12 * m21
    if variant != "derived":
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    n11, n12, n21, n22, _, e, _, zero = local_numerators(
        omega, atom.omega2, atom.omega3_eff, atom.rabi, atom.gamma2,
        atom.gamma_r, atom.gamma_l, wg.v_r, wg.v_l,
    )
    if zero:
        raise SingularElement(f"emitter is decoupled and on resonance at omega={omega!r}")
    return complex(n11), complex(n12), complex(n21), complex(n22), complex(e)


def _clog(z):
    return cmath.log(z) if z != 0 else complex(-math.inf, 0.0)


def chain_scatter(
    omega: float, chain: ChainConfig, wg: WaveguideParams, variant: str = "derived"
) -> ScatterResult:
    """Transmission, reflection and interior amplitudes of an N-atom chain.

    Each emitter matrix is written as ``N_j / den_j`` and only the numerators
    are multiplied, in log-scaled form. With boundary data ``t_0 = 1`` and
    ``r_{N+1} = 0`` the closure is ``r_1 = -P21/P22`` and
    ``t_N = prod(e_j) / P22`` with ``P = N_N ... N_1`` and ``e_j = det(N_j)/den_j``.
    This stays finite on an emitter pole, where that emitter reflects
    perfectly. Interior amplitudes come from the suffix products
    ``Q_j = N_N ... N_{j+1}`` via
    ``(t_j, r_{j+1}) = prod_{k<=j}(e_k) (Q22, -Q21) / P22``, which involves no
    cancellation inside band gaps.
    """
    _require_bidirectional(wg)
    n = chain.n
    phases = _spacing_phases(omega, chain, wg)
    mats = []
    loge = np.empty(n, dtype=complex)
    for j, atom in enumerate(chain.atoms):
        m11, m12, m21, m22, e = _atom_numerators(omega, atom, wg, variant)
        ep = cmath.exp(1j * phases[j])
        em = cmath.exp(-1j * phases[j])
        mats.append((m11 * ep, m12 * em, m21 * ep, m22 * em))
        loge[j] = _clog(e)

    # suffix products Q_j, j = N .. 0, stored normalized with their log scales
    q = [None] * (n + 1)
    qs = np.zeros(n + 1)
    q[n] = (1 + 0j, 0j, 0j, 1 + 0j)
    for j in range(n, 0, -1):
        a11, a12, a21, a22 = q[j]
        b11, b12, b21, b22 = mats[j - 1]
        c = (a11 * b11 + a12 * b21, a11 * b12 + a12 * b22, a21 * b11 + a22 * b21, a21 * b12 + a22 * b22)
        peak = max(abs(v) for v in c)
        if not math.isfinite(peak) or peak == 0.0:
            raise SingularElement(f"transfer-matrix product degenerated at omega={omega!r}")
        q[j - 1] = tuple(v / peak for v in c)
        qs[j - 1] = qs[j] + math.log(peak)
    prefix_loge = np.concatenate(([0j], np.cumsum(loge)))

    p22 = q[0][3]
    if p22 == 0:
        raise SingularElement(f"M22 vanishes at omega={omega!r}")
    log_p22 = qs[0] + cmath.log(p22)
    r1 = -q[0][2] / p22

    t_amp = np.empty(n, dtype=complex)
    r_amp = np.empty(n, dtype=complex)
    r_amp[0] = r1
    with np.errstate(invalid="ignore"):
        for j in range(1, n + 1):
            lead = prefix_loge[j] + qs[j] - log_p22
            amp = np.exp(lead) if math.isfinite(lead.real) else 0j
            t_amp[j - 1] = amp * q[j][3]
            if j < n:
                r_amp[j] = -amp * q[j][2]
    log_T = 2.0 * (prefix_loge[n] - log_p22).real
    T = math.exp(log_T) if log_T > -745.0 else 0.0
    return ScatterResult(t_amp, r_amp, T, abs(r1) ** 2, log_T)


def single_atom_closed_form(delta2: float, rabi: float, gamma2: float, Gamma_R: float, Gamma_L: float):
    """Closed-form ``(t, r)`` of one emitter in a symmetric waveguide.

    Parameters are in the ``closed_form`` width convention (see
    :func:`eitchain.model.convert_widths`)::

        t = [d (d + i gamma2/2) - (rabi/2)**2] / den
        r = -i d sqrt(Gamma_R Gamma_L) / 2 / den
        den = d (d + i (gamma2/2 + (Gamma_R + Gamma_L)/4)) - (rabi/2)**2
    """
    den = delta2 * (delta2 + 1j * (gamma2 / 2 + (Gamma_R + Gamma_L) / 4)) - (rabi / 2) ** 2
    t = (delta2 * (delta2 + 1j * gamma2 / 2) - (rabi / 2) ** 2) / den
    r = (-1j * delta2 * math.sqrt(Gamma_R * Gamma_L) / 2) / den
    return complex(t), complex(r)


def direct_jump_solver(omega: float, chain: ChainConfig, wg: WaveguideParams) -> ScatterResult:
    """Solve all jump conditions at once as a dense 2N x 2N linear system.

    Unknowns are the raw amplitudes ``t_1..t_N`` and ``r_1..r_N``; at atom
    ``j`` with couplings ``V_R = sqrt(2 v_R Gamma_R)``, ``V_L = sqrt(2 v_L Gamma_L)``::

        -i v_R [phi_R(+) - phi_R(-)] + V_R w (V_R <phi_R> + V_L <phi_L>) = 0
         i v_L [phi_L(+) - phi_L(-)] + V_L w (V_L <phi_L> + V_R <phi_R>) = 0

    where ``<.>`` is the average of the two one-sided limits. O(N^3); meant
    as an independent check of :func:`chain_scatter`.
    """
    _require_bidirectional(wg)
    n = chain.n
    v_r, v_l = wg.v_r, wg.v_l
    x = chain.positions * wg.wavelength
    q_r, q_l = wg.q_r(omega), wg.q_l(omega)
    a = np.zeros((2 * n, 2 * n), dtype=complex)
    b = np.zeros(2 * n, dtype=complex)

    def t_col(j):  # t_j, j = 1..n
        return j - 1

    def r_col(j):  # r_j, j = 1..n
        return n + j - 1

    for j in range(1, n + 1):
        atom = chain.atoms[j - 1]
        w = varpi(omega, atom)
        vr_c = math.sqrt(2 * v_r * atom.gamma_r)
        vl_c = math.sqrt(2 * v_l * atom.gamma_l)
        e_r = cmath.exp(1j * q_r * x[j - 1])
        e_l = cmath.exp(-1j * q_l * x[j - 1])
        # coefficients of (phi_R+, phi_R-, phi_L+, phi_L-)
        rows = (
            (-1j * v_r + vr_c * w * vr_c / 2, 1j * v_r + vr_c * w * vr_c / 2, vr_c * w * vl_c / 2, vr_c * w * vl_c / 2),
            (vl_c * w * vr_c / 2, vl_c * w * vr_c / 2, 1j * v_l + vl_c * w * vl_c / 2, -1j * v_l + vl_c * w * vl_c / 2),
        )
        for k, (c_rp, c_rm, c_lp, c_lm) in enumerate(rows):
            row = 2 * (j - 1) + k
            a[row, t_col(j)] += c_rp * e_r
            if j == 1:
                b[row] -= c_rm * e_r  # t_0 = 1
            else:
                a[row, t_col(j - 1)] += c_rm * e_r
            if j < n:  # r_{n+1} = 0
                a[row, r_col(j + 1)] += c_lp * e_l
            a[row, r_col(j)] += c_lm * e_l

    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > MAX_COND:
        raise SingularSystem(f"jump-condition system is singular (cond={cond:.3g}) at omega={omega!r}")
    sol = np.linalg.solve(a, b)
    t_raw, r_raw = sol[:n], sol[n:]
    half = 0.5 * (q_r + q_l)
    x_prev = np.concatenate(([0.0], x[:-1]))
    t_amp = t_raw * np.exp(1j * half * x)
    r_amp = r_raw * np.exp(-1j * half * x_prev)
    T = abs(t_amp[-1]) ** 2
    return ScatterResult(t_amp, r_amp, T, abs(r_amp[0]) ** 2, math.log(T) if T > 0 else -math.inf)


def flux_defect(result: ScatterResult, wg: WaveguideParams) -> float:
    """``(v_R T + v_L R - v_R) / v_R``; zero for lossless emitters."""
    return (wg.v_r * result.T + wg.v_l * result.R - wg.v_r) / wg.v_r


def batch_log_transmission(omega, positions, omega2, omega3, rabi, gamma2, gamma_r, gamma_l, wg):
    """``(ln T, ln R)`` for a batch of chains sharing ``omega`` (rows = realizations).

    ``positions`` has shape ``(B, N)``; ``omega2``/``omega3`` broadcast to it.
    Numerator matrices are multiplied and renormalized after every step (see
    :func:`chain_scatter`). A row that contains a perfectly reflecting emitter
    gives ``ln T = -inf``; rows with a decoupled resonant emitter come back
    as ``nan``.
    """
    _require_bidirectional(wg)
    positions = np.asarray(positions, dtype=float)
    nb, n = positions.shape
    omega2 = np.broadcast_to(np.asarray(omega2, dtype=float), (nb, n))
    omega3 = np.broadcast_to(np.asarray(omega3, dtype=float), (nb, n))
    uniform = bool(np.all(omega2 == omega2[0, 0]) and np.all(omega3 == omega3[0, 0]))
    if uniform:
        fixed = local_numerators(omega, omega2[0, 0], omega3[0, 0], rabi, gamma2, gamma_r, gamma_l, wg.v_r, wg.v_l)

    a11 = np.ones(nb, dtype=complex)
    a12 = np.zeros(nb, dtype=complex)
    a21 = np.zeros(nb, dtype=complex)
    a22 = np.ones(nb, dtype=complex)
    log_scale = np.zeros(nb)
    log_e = np.zeros(nb)
    bad = np.zeros(nb, dtype=bool)
    prev = np.zeros(nb)
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(n):
            x = positions[:, j]
            phi = wg.propagation_phase(omega, x - prev)
            prev = x
            if uniform:
                m11, m12, m21, m22, _, e, _, zero = fixed
            else:
                m11, m12, m21, m22, _, e, _, zero = local_numerators(
                    omega, omega2[:, j], omega3[:, j], rabi, gamma2, gamma_r, gamma_l, wg.v_r, wg.v_l
                )
            bad |= zero
            ep = np.exp(1j * phi)
            em = np.conj(ep)
            t11, t12, t21, t22 = m11 * ep, m12 * em, m21 * ep, m22 * em
            a11, a12, a21, a22 = (
                t11 * a11 + t12 * a21,
                t11 * a12 + t12 * a22,
                t21 * a11 + t22 * a21,
                t21 * a12 + t22 * a22,
            )
            peak = np.maximum(np.maximum(np.abs(a11), np.abs(a12)), np.maximum(np.abs(a21), np.abs(a22)))
            bad |= ~(peak > 0) | ~np.isfinite(peak)
            peak = np.where(bad, 1.0, peak)
            a11, a12, a21, a22 = a11 / peak, a12 / peak, a21 / peak, a22 / peak
            log_scale = log_scale + np.log(peak)
            log_e = log_e + np.log(np.abs(e))
        abs22 = np.abs(a22)
        bad |= abs22 == 0
        log_t = 2.0 * (log_e - log_scale - np.log(abs22))
        log_r = 2.0 * (np.log(np.abs(a21)) - np.log(abs22))
    log_t = np.where(bad, np.nan, log_t)
    log_r = np.where(bad, np.nan, log_r)
    return log_t, log_r
