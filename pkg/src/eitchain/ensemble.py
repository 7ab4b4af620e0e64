"""Monte Carlo disorder averages of the transmission and localization lengths.

Every realization ``k`` draws its random numbers from its own Philox stream
keyed by ``(seed, k)``, so a realization is a pure function of the seed and
its index. Work is split into fixed-size chunks that may run on any number
of threads; results land in a pre-sized buffer and are reduced in index
order, which makes the statistics bit-identical for every thread count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from .bidirectional import batch_log_transmission
from .chiral import LOG_UNDERFLOW, log_hop_power
from .errors import DegenerateFit, NumericalError
from .model import ChainConfig, WaveguideParams, chain_arrays

CHUNK = 1024
COINCIDENT_BUMP = 1e-12
U64_MAX = 2**64 - 1


class DisorderKind(str, Enum):
    POSITION = "position"
    FREQUENCY = "frequency"


@dataclass(frozen=True)
class DisorderSpec:
    """Gaussian disorder in either the atom positions or the transition frequency.

    For ``POSITION`` the mean is the lattice spacing (units of lambda) and must
    match the template's lattice constant when given as nonzero. For
    ``FREQUENCY`` the mean is the detuning offset: atom ``j`` gets
    ``omega2_j = omega2 - (mean + sigma z_j)``, so a photon at the template
    ``omega2`` sees ``delta2_j ~ N(mean, sigma**2)``. An explicit ``omega3``
    is shifted by the same amount.
    """

    kind: DisorderKind
    mean: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DisorderKind(self.kind))
        if not math.isfinite(self.mean):
            raise ValueError(f"mean must be finite, got {self.mean!r}")
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma!r}")


@dataclass(frozen=True)
class EnsembleStats:
    realizations: int
    mean_T: float
    stderr_T: float
    mean_lnT: float
    stderr_lnT: float
    xi_fixed_N: float
    base_seed: int
    n: int
    n_underflow: int = 0
    n_excluded: int = 0


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed <= U64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def substream(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for realization ``index``."""
    key = np.array([_check_seed(seed), _check_seed(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _normals(seed, start, count, n):
    z = np.empty((count, n))
    for i in range(count):
        z[i] = substream(seed, start + i).standard_normal(n)
    return z


def _sorted_positions(x):
    x = np.sort(x, axis=-1)
    # restore strict ordering after ties
    for j in range(1, x.shape[-1]):
        tie = x[..., j] <= x[..., j - 1]
        if np.any(tie):
            x[..., j] = np.where(tie, x[..., j - 1] + COINCIDENT_BUMP, x[..., j])
    return x


def _check_template(template, spec):
    if spec.kind is DisorderKind.POSITION and spec.mean != 0.0 and spec.mean != template.lattice_constant:
        raise ValueError(
            f"position-disorder mean {spec.mean!r} differs from the lattice constant {template.lattice_constant!r}"
        )


def sample_chain(template: ChainConfig, spec: DisorderSpec, seed: int, index: int) -> ChainConfig:
    """One disordered realization of ``template``; a pure function of ``(seed, index)``."""
    _check_template(template, spec)
    if spec.sigma == 0.0:
        return template
    z = substream(seed, index).standard_normal(template.n)
    if spec.kind is DisorderKind.POSITION:
        x = _sorted_positions((template.positions + spec.sigma * z)[None, :])[0]
        atoms = tuple(a.at(float(p)) for a, p in zip(template.atoms, x))
    else:
        shift = spec.mean + spec.sigma * z
        atoms = tuple(
            a.__class__(
                omega2=a.omega2 - float(s),
                omega3=None if a.omega3 is None else a.omega3 - float(s),
                rabi=a.rabi, gamma2=a.gamma2, gamma_r=a.gamma_r, gamma_l=a.gamma_l, position=a.position,
            )
            for a, s in zip(template.atoms, shift)
        )
    return ChainConfig(atoms, template.lattice_constant)


def _uniform(values, name):
    if np.any(values != values[0]):
        raise ValueError(f"bidirectional ensembles need a common {name} for all atoms")
    return float(values[0])


def _chunk_log_t(template, spec, omega, wg, seed, start, count):
    """``ln T`` for realizations ``start .. start+count-1`` (nan where a solver failed)."""
    p = chain_arrays(template, ["omega2", "omega3", "rabi", "gamma2", "gamma_r", "gamma_l"])
    tracks = np.array([a.omega3 is None for a in template.atoms])
    n = template.n
    omega2 = np.broadcast_to(p["omega2"], (count, n))
    omega3 = np.broadcast_to(p["omega3"], (count, n))
    positions = np.broadcast_to(template.positions, (count, n))
    if spec.sigma > 0.0:
        z = _normals(seed, start, count, n)
        if spec.kind is DisorderKind.POSITION:
            positions = _sorted_positions(template.positions + spec.sigma * z)
        else:
            shift = spec.mean + spec.sigma * z
            omega2 = omega2 - shift
            omega3 = np.where(tracks, omega2, omega3 - shift)
    elif spec.kind is DisorderKind.FREQUENCY and spec.mean != 0.0:
        omega2 = omega2 - spec.mean
        omega3 = np.where(tracks, omega2, omega3 - spec.mean)

    if wg.chiral:
        logs = log_hop_power(omega, omega2, omega3, p["rabi"], p["gamma2"], p["gamma_r"])
        return np.sum(logs, axis=-1)
    log_t, _ = batch_log_transmission(
        omega, positions, omega2, omega3,
        _uniform(p["rabi"], "rabi"), _uniform(p["gamma2"], "gamma2"),
        _uniform(p["gamma_r"], "gamma_r"), _uniform(p["gamma_l"], "gamma_l"), wg,
    )
    return log_t


def _mean_stderr(values):
    # shift by the first value so identical samples give an exact mean and zero spread
    x0 = values[0]
    dev = values - x0
    mean_dev = float(np.mean(dev))
    n = values.size
    var = float(np.sum((dev - mean_dev) ** 2)) / (n - 1)
    return x0 + mean_dev, math.sqrt(var / n)


def resolve_threads(threads=None) -> int:
    """Worker count from the argument, then ``EITCHAIN_THREADS``, then 1."""
    if threads is None:
        env = os.environ.get("EITCHAIN_THREADS")
        threads = int(env) if env else 1
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def run_ensemble(template: ChainConfig, spec: DisorderSpec, omega: float, wg: WaveguideParams,
                 realizations: int, seed: int, threads: int | None = None) -> EnsembleStats:
    """Disorder-averaged ``T`` and ``ln T`` over ``realizations`` samples.

    ``ln T`` is kept in log space, so realizations with ``T`` below the double
    range still contribute their true logarithm; they are counted in
    ``n_underflow`` and contribute ``T = 0``. Realizations where a solver hit
    a singularity are dropped and counted in ``n_excluded``.
    """
    if realizations < 2:
        raise ValueError(f"realizations must be >= 2, got {realizations}")
    seed = _check_seed(seed)
    _check_template(template, spec)
    threads = resolve_threads(threads)
    buf = np.empty(realizations)
    starts = list(range(0, realizations, CHUNK))

    def work(start):
        count = min(CHUNK, realizations - start)
        buf[start:start + count] = _chunk_log_t(template, spec, omega, wg, seed, start, count)

    if threads == 1 or len(starts) == 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))

    ok = ~np.isnan(buf)
    n_excluded = int(realizations - np.count_nonzero(ok))
    raw = buf[ok]
    if raw.size < 2:
        raise NumericalError(f"only {raw.size} usable realizations out of {realizations}")
    n_underflow = int(np.count_nonzero(raw < LOG_UNDERFLOW))
    log_t = np.where(np.isneginf(raw), LOG_UNDERFLOW, raw)
    t = np.where(log_t <= LOG_UNDERFLOW, 0.0, np.exp(log_t))
    mean_t, se_t = _mean_stderr(t)
    mean_l, se_l = _mean_stderr(log_t)
    xi = -template.n / mean_l if mean_l < 0 else math.inf
    return EnsembleStats(
        realizations=realizations, mean_T=mean_t, stderr_T=se_t, mean_lnT=mean_l, stderr_lnT=se_l,
        xi_fixed_N=xi, base_seed=seed, n=template.n, n_underflow=n_underflow, n_excluded=n_excluded,
    )


@dataclass(frozen=True)
class SlopeFit:
    xi: float
    r_squared: float
    slope: float
    intercept: float
    n_list: tuple[int, ...]
    stats: tuple[EnsembleStats, ...] = field(repr=False)


def fit_ln_t_vs_n(template: ChainConfig, spec: DisorderSpec, omega: float, wg: WaveguideParams,
                  n_list, realizations: int, seed: int, threads: int | None = None) -> SlopeFit:
    """Least-squares fit ``<ln T> = a + b N``; every N uses the same base seed."""
    n_list = tuple(int(n) for n in n_list)
    if len(set(n_list)) < 4 or list(n_list) != sorted(set(n_list)):
        raise ValueError("n_list needs at least 4 distinct ascending values")
    runs = tuple(run_ensemble(template.resized(n), spec, omega, wg, realizations, seed, threads) for n in n_list)
    y = np.array([s.mean_lnT for s in runs])
    x = np.array(n_list, dtype=float)
    if np.all(y == y[0]):
        raise DegenerateFit("<ln T> is independent of N; no decay to fit")
    fit = stats.linregress(x, y)
    if fit.slope >= 0:
        raise DegenerateFit(f"<ln T> does not decrease with N (slope {fit.slope:.3g})")
    return SlopeFit(-1.0 / fit.slope, fit.rvalue ** 2, fit.slope, fit.intercept, n_list, runs)


def xi_from_slope(template: ChainConfig, spec: DisorderSpec, omega: float, wg: WaveguideParams,
                  n_list, realizations: int, seed: int, threads: int | None = None) -> tuple[float, float]:
    """Localization length ``-1/b`` from the ``<ln T>`` vs ``N`` slope and the fit's R**2."""
    fit = fit_ln_t_vs_n(template, spec, omega, wg, n_list, realizations, seed, threads)
    return fit.xi, fit.r_squared
