"""Flat ``section.key = value`` run configuration.

Example::

    experiment = small-perturbation
    domain.dim = 2
    domain.L = 3.14159
    domain.Nx = 32
    ic.kind = random_perturbation
    ic.mean = 0.7
    integrator.dt = 1e-3

Lines starting with ``#`` are comments.  Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .integrator import IntegratorConfig
from .model import ModelParams
from .spectral import Domain

IC_KINDS = ("constant_plus_modes", "random_perturbation", "tanh_interface", "from_snapshot")


@dataclass
class DomainConfig:
    dim: int = 2
    L: float = 3.141592653589793
    l: float = 3.141592653589793
    h: float = 3.141592653589793
    Nx: int = 32
    Ny: int = 32
    Nz: int = 1
    epsilon: float = 1.0
    gamma: float = 1.0

    def build(self) -> Domain:
        return Domain.from_sizes(self.dim, self.L, self.l, self.h, self.Nx, self.Ny, self.Nz,
                                 self.epsilon, self.gamma)


@dataclass
class ModelConfig:
    advection: bool = True
    padding: int = 2


@dataclass
class ICConfig:
    kind: str = "constant_plus_modes"
    mean: float = 0.0
    amplitude: float = 0.0
    seed: int = 0
    q: float = 2.0
    # (mode index tuple, physical amplitude) pairs
    modes: list = field(default_factory=list)
    h2_norm: float | None = None
    x0: float | None = None
    axis: int = 0
    snapshot: str = ""


@dataclass
class OutputConfig:
    directory: str = "chhs-out"
    snapshot_times: list = field(default_factory=list)
    csv_every: int = 1
    emit_plots: bool = False


@dataclass
class RunConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    ic: ICConfig = field(default_factory=ICConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    experiment: str = ""

    def build_domain(self) -> Domain:
        return self.domain.build()

    def model_params(self) -> ModelParams:
        return ModelParams(epsilon=self.domain.epsilon, gamma=self.domain.gamma,
                           advection_enabled=self.model.advection,
                           dealias_padding=self.model.padding)


_SECTIONS = {
    "domain": DomainConfig,
    "model": ModelConfig,
    "ic": ICConfig,
    "integrator": IntegratorConfig,
    "output": OutputConfig,
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _parse_bool(text):
    t = text.lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_optional(conv):
    def parse(text):
        if text.lower() in ("none", ""):
            return None
        return conv(text)
    return parse


def _parse_float_list(text):
    text = text.strip()
    if not text:
        return []
    return [float(t) for t in text.split(",")]


def _parse_modes(text):
    """``"1,0:1e-4; 2,1:0.5"`` -> ``[((1, 0), 1e-4), ((2, 1), 0.5)]``."""
    out = []
    for item in filter(None, (s.strip() for s in text.split(";"))):
        idx, _, amp = item.partition(":")
        if not amp:
            raise ValueError(f"mode entry {item!r} lacks ':amplitude'")
        out.append((tuple(int(i) for i in idx.split(",")), float(amp)))
    return out


def _fmt_modes(modes):
    return "; ".join(f"{','.join(str(i) for i in idx)}:{amp!r}" for idx, amp in modes)


_PARSERS = {
    ("integrator", "max_steps"): _parse_optional(int),
    ("ic", "h2_norm"): _parse_optional(float),
    ("ic", "x0"): _parse_optional(float),
    ("ic", "modes"): _parse_modes,
    ("output", "snapshot_times"): _parse_float_list,
}


def _converter(section, name, default):
    special = _PARSERS.get((section, name))
    if special:
        return special
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    return str


def _format(section, name, value):
    if (section, name) == ("ic", "modes"):
        return _fmt_modes(value)
    if (section, name) == ("output", "snapshot_times"):
        return ", ".join(repr(float(v)) for v in value)
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> RunConfig:
    values: dict[str, dict[str, object]] = {s: {} for s in _SECTIONS}
    experiment = ""
    defaults = {s: cls() for s, cls in _SECTIONS.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError("expected 'key = value'", line=lineno)
        if key == "experiment":
            experiment = value
            continue
        section, _, name = key.partition(".")
        if section not in _SECTIONS or not name:
            raise ConfigError("unknown section", key=key, line=lineno)
        known = {f.name for f in dataclasses.fields(_SECTIONS[section])}
        if name not in known:
            raise ConfigError("unknown key", key=key, line=lineno)
        conv = _converter(section, name, getattr(defaults[section], name))
        try:
            values[section][name] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), key=key, line=lineno) from None
    try:
        sections = {s: _SECTIONS[s](**v) for s, v in values.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(experiment=experiment, **sections)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    if cfg.ic.kind not in IC_KINDS:
        raise ConfigError(f"unknown kind {cfg.ic.kind!r}; expected one of {IC_KINDS}", key="ic.kind")
    if cfg.domain.dim not in (2, 3):
        raise ConfigError("dimension must be 2 or 3", key="domain.dim")
    if cfg.model.padding not in (1, 2):
        raise ConfigError("padding must be 1 or 2", key="model.padding")
    if cfg.output.csv_every < 1:
        raise ConfigError("csv_every must be >= 1", key="output.csv_every")
    try:
        cfg.build_domain()
    except ValueError as exc:
        raise ConfigError(str(exc), key="domain") from None


def serialize_config(cfg: RunConfig) -> str:
    lines = [f"experiment = {cfg.experiment}"]
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        for f in dataclasses.fields(obj):
            lines.append(f"{section}.{f.name} = {_format(section, f.name, getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())
