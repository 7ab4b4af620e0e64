"""Command-line front end: ``eitchain spectrum|bands|ensemble|analytic|preset``.

Results go to a CSV file; a single JSON summary object is printed on stdout.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import bands as bands_mod
from .bidirectional import chain_scatter
from .chiral import avg_chain_transmission, avg_tau_sq, chain_transmission, xi_inverse_chiral
from .config import ExperimentConfig, _lookup, load_config, preset_path, with_value
from .ensemble import DisorderSpec, fit_ln_t_vs_n, resolve_threads, run_ensemble
from .errors import ConfigError, InvalidRegime, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

SPECTRUM_CHIRAL = ("omega", "T")
SPECTRUM_BIDIR = ("omega", "T", "R")
BANDS_COLS = ("omega", "cos_KL", "K_real", "K_imag", "allowed")
ENSEMBLE_COLS = ("x_value", "mean_T", "stderr_T", "mean_lnT", "stderr_lnT", "xi")
ANALYTIC_COLS = ("sigma", "avg_tau_sq", "avg_T_N", "xi_analytic")


def fmt(value) -> str:
    """Shortest round-trip text for a CSV cell; nan is rejected."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        raise NumericalError("refusing to write nan to the output")
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def _jsonable(obj):
    """Recursively turn numpy scalars and infinities into strict-JSON values."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if not math.isfinite(obj) else float(obj)
    return obj


# -- modes --------------------------------------------------------------------

def run_spectrum(cfg: ExperimentConfig):
    """Rows ``(omega, T[, R])`` for a periodic chain."""
    wg = cfg.waveguide_params()
    chain = cfg.chain_config()
    rows = []
    for w in cfg.grid():
        w = float(w)
        try:
            if wg.chiral:
                rows.append((w, chain_transmission(w, chain)))
            else:
                res = chain_scatter(w, chain, wg)
                rows.append((w, res.T, res.R))
        except NumericalError as exc:
            raise type(exc)(f"spectrum failed at omega={w!r}: {exc}") from exc
    header = SPECTRUM_CHIRAL if wg.chiral else SPECTRUM_BIDIR
    return header, rows, {"points": len(rows)}


def run_bands(cfg: ExperimentConfig):
    """Rows ``(omega, cos_KL, K_real, K_imag, allowed)`` plus band/gap intervals."""
    if cfg.atom.gamma2 != 0.0:
        print("warning: band structure is computed for gamma2 = 0; ignoring atom.gamma2", file=sys.stderr)
        cfg = with_value(cfg, "atom.gamma2", 0.0)
    wg = cfg.waveguide_params()
    if wg.chiral:
        raise ConfigError("bands mode needs a bidirectional waveguide (waveguide.v_l > 0)")
    atom = cfg.atom_params()
    symmetric = atom.gamma_r == atom.gamma_l and wg.v_r == wg.v_l
    try:
        scan = bands_mod.scan_bands(cfg.grid(), atom, wg, cfg.chain.lattice_constant, symmetric, cfg.bands.relation)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [(p.omega, p.cos_KL, p.K_real, p.K_imag, p.allowed) for p in scan.points]
    summary = {
        "symmetric": symmetric,
        "relation": cfg.bands.relation,
        "gaps": [list(g) for g in scan.gaps],
        "bands": [list(b) for b in scan.bands],
        "poles": scan.poles,
        "skipped": scan.skipped,
    }
    return BANDS_COLS, rows, summary


def _disorder(cfg):
    d = cfg.disorder
    return DisorderSpec(d.kind, d.mean, d.sigma)


def run_ensemble_cmd(cfg: ExperimentConfig, threads: int | None = None):
    """Rows ``(x_value, mean_T, stderr_T, mean_lnT, stderr_lnT, xi)`` along the sweep axis."""
    wg = cfg.waveguide_params()
    e = cfg.ensemble
    axis = cfg.sweep.axis
    rows = []
    runs = []
    summary = {"axis": axis}
    if axis == "n":
        fit = fit_ln_t_vs_n(cfg.chain_config(), _disorder(cfg), e.omega, wg, e.n_list, e.realizations, e.seed, threads)
        runs = list(fit.stats)
        xs = fit.n_list
        summary.update(fit_xi=fit.xi, fit_r_squared=fit.r_squared, fit_slope=fit.slope, fit_intercept=fit.intercept)
    else:
        xs = [float(x) for x in cfg.grid()]
        for x in xs:
            run_cfg = with_value(cfg, "disorder.sigma" if axis == "sigma" else "ensemble.omega", x)
            spec = _disorder(run_cfg)
            runs.append(run_ensemble(cfg.chain_config(), spec, run_cfg.ensemble.omega, wg, e.realizations, e.seed, threads))
    for x, s in zip(xs, runs):
        rows.append((x, s.mean_T, s.stderr_T, s.mean_lnT, s.stderr_lnT, s.xi_fixed_N))
    summary.update(
        excluded=sum(s.n_excluded for s in runs),
        underflow=sum(s.n_underflow for s in runs),
    )
    return ENSEMBLE_COLS, rows, summary


def run_chiral_analytic(cfg: ExperimentConfig):
    """Rows ``(sigma, avg_tau_sq, avg_T_N, xi_analytic)`` from quadrature."""
    atom = cfg.atom_params()
    n = cfg.chain.n
    mean = cfg.disorder.mean
    rows = []
    for s in cfg.grid():
        s = float(s)
        try:
            avg = avg_tau_sq(mean, s, atom.rabi, atom.gamma2, atom.gamma_r)
            inv = xi_inverse_chiral(mean, s, atom.rabi, atom.gamma_r, gamma2=atom.gamma2)
        except NumericalError as exc:
            raise type(exc)(f"analytic average failed at sigma={s!r}: {exc}") from exc
        except InvalidRegime as exc:
            raise ConfigError(f"analytic mode: {exc}") from exc
        rows.append((s, avg, avg_chain_transmission(n, avg), math.inf if inv == 0.0 else 1.0 / inv))
    return ANALYTIC_COLS, rows, {"points": len(rows)}


def _dispatch(cfg, threads):
    if cfg.mode == "spectrum":
        return run_spectrum(cfg)
    if cfg.mode == "bands":
        return run_bands(cfg)
    if cfg.mode == "ensemble":
        return run_ensemble_cmd(cfg, threads)
    return run_chiral_analytic(cfg)


def run_config(cfg: ExperimentConfig, threads: int | None = None):
    """Evaluate ``cfg`` (expanding any series); returns ``(header, rows, summary)``."""
    cfg.validate()
    keys = cfg.series.keys()
    if not keys:
        return _dispatch(cfg, threads)
    header = None
    rows = []
    summaries = []
    for group in cfg.series.groups():
        sub = cfg
        for key, value in zip(keys, group):
            sub = with_value(sub, key, value)
        sub.series.key, sub.series.values = None, ""
        sub.validate()
        section, name = _lookup(sub, keys[0])
        v = getattr(section, name)
        h, r, s = _dispatch(sub, threads)
        header = ("series",) + tuple(h)
        rows.extend((v,) + tuple(row) for row in r)
        summaries.append({"value": v, "values": dict(zip(keys, group)), **s})
    summary = {"series_key": cfg.series.key, "series": summaries}
    if cfg.mode == "ensemble":
        summary["excluded"] = sum(s["excluded"] for s in summaries)
        summary["underflow"] = sum(s["underflow"] for s in summaries)
    return header, rows, summary


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eitchain", description="Single-photon transport through Lambda-atom chains.")
    p.add_argument("command", choices=("spectrum", "bands", "ensemble", "analytic", "preset"))
    p.add_argument("name", nargs="?", help="preset name (preset command only)")
    p.add_argument("--config", help="config file with key = value lines")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", help="CSV output path (default <preset or mode>.csv)")
    p.add_argument("--seed", type=int, help="base seed, overrides ensemble.seed")
    p.add_argument("--threads", type=int, help="worker threads for ensembles (fallback: EITCHAIN_THREADS)")
    return p


def _resolve(args):
    if args.command == "preset":
        if not args.name:
            raise ConfigError("preset command needs a preset name")
        cfg = load_config(preset_path(args.name))
        if args.config:
            cfg = load_config(args.config, base=cfg)
        label = args.name
    else:
        if args.name:
            raise ConfigError(f"unexpected argument {args.name!r}")
        cfg = load_config(args.config)
        cfg.mode = args.command
        label = args.command
    cfg = load_config(None, args.overrides, base=cfg)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg.ensemble.seed = args.seed
    return cfg, label


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg, label = _resolve(args)
        threads = resolve_threads(args.threads)
        header, rows, summary = run_config(cfg, threads)
        out = Path(args.out or f"{label}.csv")
        write_csv(out, header, rows)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidRegime, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    trailer = {
        "mode": cfg.mode,
        "name": label,
        "output": str(out),
        "rows": len(rows),
        "parameters": cfg.as_dict(),
        "seed": cfg.ensemble.seed,
        "realizations": cfg.ensemble.realizations if cfg.mode == "ensemble" else 0,
        "threads": threads,
        "duration_s": time.perf_counter() - start,
        "summary": summary,
    }
    print(json.dumps(_jsonable(trailer)))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
