"""Experiment configuration: flat ``key = value`` files with ``#`` comments.

Keys are ``section.field`` paths, e.g. ``atom.rabi = 0.2`` or
``disorder.kind = frequency``. Lists are comma-separated. Later assignments
(``--set`` overrides) replace earlier ones.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import get_type_hints

import numpy as np

from .errors import ConfigError
from .model import WIDTH_CONVENTIONS, AtomParams, ChainConfig, WaveguideParams, convert_widths

MODES = ("spectrum", "bands", "ensemble", "analytic")
AXES = {"spectrum": ("omega",), "bands": ("omega",), "ensemble": ("omega", "sigma", "n"), "analytic": ("sigma",)}
PRESET_DIR = Path(__file__).with_name("presets")


@dataclass
class AtomSection:
    omega2: float = 1.0
    omega3: float | None = None
    rabi: float = 0.2
    gamma2: float = 0.1
    gamma_r: float = 0.1
    gamma_l: float = 0.0
    width_convention: str = "model"


@dataclass
class WaveguideSection:
    v_r: float = 1.0
    v_l: float = 0.0
    omega0: float = 0.0


@dataclass
class ChainSection:
    n: int = 1
    lattice_constant: float = 0.5


@dataclass
class SweepSection:
    axis: str = "omega"
    start: float = 0.5
    stop: float = 1.5
    points: int = 2001


@dataclass
class EnsembleSection:
    realizations: int = 10000
    seed: int = 0
    omega: float = 1.0
    n_list: tuple[int, ...] = ()


@dataclass
class DisorderSection:
    kind: str = "frequency"
    mean: float = 0.0
    sigma: float = 0.0


@dataclass
class BandsSection:
    relation: str = "closed_form"


@dataclass
class SeriesSection:
    """Repeat the run once per value group.

    ``key`` is one key or a comma-separated list; ``values`` separates groups
    with ``;`` (with a single key, commas separate groups as well), e.g.
    ``key = atom.gamma_r, atom.gamma_l`` and ``values = 0.4, 0.04; 0.1, 0.01``.
    """

    key: str | None = None
    values: str = ""

    def keys(self) -> list[str]:
        return [k.strip() for k in self.key.split(",")] if self.key else []

    def groups(self) -> list[tuple[float, ...]]:
        text = self.values.strip()
        if not text:
            return []
        keys = self.keys()
        try:
            if ";" in text or len(keys) > 1:
                groups = [tuple(float(v) for v in g.split(",")) for g in text.split(";") if g.strip()]
            else:
                groups = [(float(v),) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"series.values: {exc}") from exc
        for g in groups:
            if len(g) != len(keys):
                raise ConfigError(f"series.values: group {g} does not match {len(keys)} series key(s)")
        return groups


@dataclass
class ExperimentConfig:
    """Resolved experiment settings; defaults reproduce the critical-coupling single-atom spectrum."""

    mode: str = "spectrum"
    atom: AtomSection = field(default_factory=AtomSection)
    waveguide: WaveguideSection = field(default_factory=WaveguideSection)
    chain: ChainSection = field(default_factory=ChainSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    disorder: DisorderSection = field(default_factory=DisorderSection)
    bands: BandsSection = field(default_factory=BandsSection)
    series: SeriesSection = field(default_factory=SeriesSection)

    # -- derived objects ---------------------------------------------------
    def atom_params(self) -> AtomParams:
        a = self.atom
        gamma2, gamma_r, gamma_l = convert_widths(a.gamma2, a.gamma_r, a.gamma_l, a.width_convention)
        return AtomParams(a.omega2, a.omega3, a.rabi, gamma2, gamma_r, gamma_l)

    def waveguide_params(self) -> WaveguideParams:
        w = self.waveguide
        return WaveguideParams(w.v_r, w.v_l, w.omega0)

    def chain_config(self, n: int | None = None) -> ChainConfig:
        return ChainConfig.periodic(self.atom_params(), self.chain.n if n is None else n, self.chain.lattice_constant)

    def grid(self) -> np.ndarray:
        s = self.sweep
        return np.linspace(s.start, s.stop, s.points)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode: unknown value {self.mode!r}; expected one of {MODES}")
        if self.atom.width_convention not in WIDTH_CONVENTIONS:
            raise ConfigError(f"atom.width_convention: expected one of {WIDTH_CONVENTIONS}")
        if self.sweep.axis not in AXES[self.mode]:
            raise ConfigError(f"sweep.axis: {self.sweep.axis!r} is not valid in {self.mode} mode")
        if self.sweep.points < 1:
            raise ConfigError("sweep.points: must be >= 1")
        if self.sweep.points == 1 and self.sweep.start != self.sweep.stop:
            raise ConfigError("sweep.points: a single point needs sweep.start == sweep.stop")
        if self.sweep.points > 1 and not self.sweep.stop > self.sweep.start:
            raise ConfigError("sweep.stop: must exceed sweep.start")
        if self.mode == "ensemble" and self.sweep.axis == "n" and len(self.ensemble.n_list) < 4:
            raise ConfigError("ensemble.n_list: the n axis needs at least 4 chain lengths")
        if self.disorder.kind not in ("position", "frequency"):
            raise ConfigError("disorder.kind: expected position or frequency")
        if self.series.values.strip() and self.series.key is None:
            raise ConfigError("series.key: required when series.values is set")
        for key in self.series.keys():
            if key.startswith("series.") or key == "mode":
                raise ConfigError(f"series.key: {key!r} cannot be varied")
            _lookup(self, key)
        if self.series.key is not None and not self.series.groups():
            raise ConfigError("series.values: required when series.key is set")
        try:
            self.atom_params()
            self.waveguide_params()
            self.chain_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


def _lookup(cfg, key):
    parts = key.split(".")
    if len(parts) == 1 and parts[0] == "mode":
        return cfg, "mode"
    if len(parts) != 2:
        raise ConfigError(f"{key}: keys have the form section.field")
    section = getattr(cfg, parts[0], None)
    if section is None or not dataclasses.is_dataclass(section):
        raise ConfigError(f"{key}: unknown section {parts[0]!r}")
    if parts[1] not in {f.name for f in dataclasses.fields(section)}:
        raise ConfigError(f"{key}: unknown key")
    return section, parts[1]


def _convert(raw: str, hint, key):
    raw = raw.strip()
    text = str(hint)
    try:
        if "None" in text and raw.lower() in ("none", ""):
            return None
        if text.startswith("tuple"):
            inner = int if "int" in text else float
            return tuple(inner(v) for v in raw.split(",") if v.strip())
        if "float" in text:
            value = float(raw)
            if math.isnan(value):
                raise ValueError("nan is not allowed")
            return value
        if "int" in text:
            return int(raw)
        if "bool" in text:
            if raw.lower() not in ("true", "false"):
                raise ValueError("expected true or false")
            return raw.lower() == "true"
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from exc
    return raw


def set_value(cfg: ExperimentConfig, key: str, raw: str) -> None:
    """Assign ``raw`` (text) to ``key`` with type conversion."""
    section, name = _lookup(cfg, key.strip())
    hint = get_type_hints(type(section))[name]
    setattr(section, name, _convert(raw, hint, key.strip()))


def apply_text(cfg: ExperimentConfig, text: str, source: str = "<config>") -> ExperimentConfig:
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        try:
            set_value(cfg, key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from exc
    return cfg


def load_config(path=None, overrides=(), base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Defaults, then the file at ``path``, then ``key=value`` overrides."""
    cfg = base or ExperimentConfig()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from exc
        apply_text(cfg, text, str(p))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        set_value(cfg, key, value)
    return cfg


def preset_names() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.cfg"))


def preset_path(name: str) -> Path:
    p = PRESET_DIR / f"{name}.cfg"
    if not p.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return p


def with_value(cfg: ExperimentConfig, key: str, value) -> ExperimentConfig:
    """Deep copy of ``cfg`` with one typed value replaced."""
    out = dataclasses.replace(cfg, **{
        f.name: dataclasses.replace(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)
        if dataclasses.is_dataclass(getattr(cfg, f.name))
    })
    section, name = _lookup(out, key)
    hint = str(get_type_hints(type(section))[name])
    if "int" in hint and "tuple" not in hint:
        if float(value) != int(value):
            raise ConfigError(f"{key}: series value {value!r} is not an integer")
        value = int(value)
    setattr(section, name, value)
    return out
