"""Experiment configuration: INI-style text with flat sections.

Every key is listed in ``SCHEMA`` with its type and, for optional keys, the
default applied when it is absent. Keys without a default are required.
Unknown sections or keys are rejected.

Sections: ``[network]``, ``[cache]``, ``[grid]``, ``[solver]``,
``[terminal]``, ``[simulation]``, ``[run]`` and one or more content sections
named ``[content]`` or ``[content.<label>]``. Experiments use the first
content section as their base content.
"""
from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .costs import TerminalCost
from .dynamics import CacheSpec, ContentSpec
from .geometry import NetworkParams, ParameterError
from .solver import GridSpec


class ConfigError(ValueError):
    pass


REQUIRED = object()
POLICY_NAMES = ("mf", "popularity", "random", "exhaustive")


def _float(s: str) -> float:
    s = s.strip()
    # allow the reception radius to be written as in the parameter list
    if s.lower().endswith("/sqrt(pi)"):
        return float(s[: -len("/sqrt(pi)")]) / math.sqrt(math.pi)
    return float(s)


def _int(s: str) -> int:
    return int(s.strip())


def _count(s: str) -> int | float:
    """Positive integer, or ``inf`` for the vanishing-interaction limit."""
    return math.inf if s.strip().lower() == "inf" else int(s.strip())


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _str(s: str) -> str:
    return s.strip()


def _names(s: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in s.split(",") if p.strip())


SCHEMA: dict[str, dict[str, tuple]] = {
    "network": {
        "lambda_b": (_float, REQUIRED),
        "lambda_u": (_float, REQUIRED),
        "radius_R": (_float, REQUIRED),
        "alpha": (_float, REQUIRED),
        "n_antennas": (_int, 1),
        "tx_power": (_float, 1.0),
        "noise_power": (_float, 1e-4),
    },
    "content": {
        "u": (_float, REQUIRED),
        "a": (_float, REQUIRED),
        "eta": (_float, REQUIRED),
        "size_L": (_float, 1.0),
        "n_similar": (_count, REQUIRED),
        "x0": (_float, REQUIRED),
    },
    "cache": {
        "capacity_C": (_float, 1.0),
        "discard_mu": (_float, REQUIRED),
        "gamma": (_float, REQUIRED),
        "backhaul_B": (_float, REQUIRED),
        "q0": (_float, REQUIRED),
        "q0_std": (_float, REQUIRED),
    },
    "grid": {
        "horizon_T": (_float, 2.0),
        "n_t": (_int, 200),
        "n_x": (_int, 41),
        "n_q": (_int, 51),
    },
    "solver": {
        "tolerance": (_float, 1e-4),
        "max_iters": (_int, 50),
        "damping": (_float, 0.5),
    },
    "terminal": {
        "form": (_str, "unused"),
        "weight": (_float, 6.0),
        "knee": (_float, 0.5),
    },
    "simulation": {
        "n_sbs": (_int, 3),
        "n_runs": (_int, 1000),
        "n_steps": (_int, 1000),
        "exhaustive_delta": (_float, 0.05),
        "inline_solve": (_bool, True),
    },
    "run": {
        "seed": (_int, 0),
        "out": (_str, "results"),
        "policies": (_names, POLICY_NAMES),
    },
}


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-4
    max_iters: int = 50
    damping: float = 0.5

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ParameterError("tolerance must be > 0")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")
        if not 0 < self.damping <= 1:
            raise ParameterError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class SimSettings:
    n_sbs: int = 3
    n_runs: int = 1000
    n_steps: int = 1000
    exhaustive_delta: float = 0.05
    inline_solve: bool = True

    def __post_init__(self):
        if self.n_sbs < 1:
            raise ParameterError("n_sbs must be >= 1")
        if self.n_runs < 2:
            raise ParameterError("n_runs must be >= 2")
        if self.n_steps < 1:
            raise ParameterError("n_steps must be >= 1")
        if not 0 < self.exhaustive_delta <= 1:
            raise ParameterError("exhaustive_delta must lie in (0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    net: NetworkParams = field(default_factory=NetworkParams)
    contents: tuple[ContentSpec, ...] = (ContentSpec(),)
    content_labels: tuple[str, ...] = ("",)
    cache: CacheSpec = field(default_factory=CacheSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    solver: SolverSettings = field(default_factory=SolverSettings)
    terminal: TerminalCost = field(default_factory=lambda: TerminalCost("unused", 6.0, 0.5))
    sim: SimSettings = field(default_factory=SimSettings)
    seed: int = 0
    out: str = "results"
    policies: tuple[str, ...] = POLICY_NAMES

    def __post_init__(self):
        if not self.contents:
            raise ConfigError("at least one content section is required")
        if len(self.content_labels) != len(self.contents):
            raise ConfigError("one label per content")
        unknown = [p for p in self.policies if p not in POLICY_NAMES]
        if unknown:
            raise ConfigError(f"policies: unknown policy {unknown[0]!r} (valid: {', '.join(POLICY_NAMES)})")
        if not self.policies:
            raise ConfigError("policies: at least one policy must be selected")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def content(self) -> ContentSpec:
        return self.contents[0]

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        return self if seed is None else replace(self, seed=seed)

    def digest(self) -> str:
        return hashlib.sha256(serialize_config(self).encode()).hexdigest()


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


# -- parsing -----------------------------------------------------------------

def _section_values(name: str, schema: dict, items: dict[str, str]) -> dict:
    unknown = sorted(set(items) - set(schema))
    if unknown:
        raise ConfigError(f"[{name}] unknown key {unknown[0]!r}")
    out = {}
    for key, (conv, default) in schema.items():
        if key in items:
            try:
                out[key] = conv(items[key])
            except ValueError as exc:
                raise ConfigError(f"[{name}] {key}: cannot parse {items[key]!r} ({exc})") from None
        elif default is REQUIRED:
            raise ConfigError(f"[{name}] missing required key {key!r}")
        else:
            out[key] = default
    return out


def _build(kind: str, name: str, factory, values: dict):
    try:
        return factory(**values)
    except (ParameterError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def parse_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",), default_section="__none__")
    parser.optionxform = str  # keys are case sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    sections: dict[str, dict] = {}
    contents, labels = [], []
    for sec in parser.sections():
        items = dict(parser.items(sec))
        if sec == "content" or sec.startswith("content."):
            values = _section_values(sec, SCHEMA["content"], items)
            contents.append(_build("content", sec, ContentSpec, values))
            labels.append(sec.partition(".")[2])
        elif sec in SCHEMA:
            sections[sec] = _section_values(sec, SCHEMA[sec], items)
        else:
            raise ConfigError(f"unknown section [{sec}]")
    for sec in ("network", "cache"):
        if sec not in sections:
            raise ConfigError(f"missing required section [{sec}]")
    if not contents:
        raise ConfigError("missing required section [content]")
    for sec in ("grid", "solver", "terminal", "simulation", "run"):
        sections.setdefault(sec, _section_values(sec, SCHEMA[sec], {}))
    net = _build("network", "network", NetworkParams, sections["network"])
    cache = _build("cache", "cache", CacheSpec, sections["cache"])
    grid = _build("grid", "grid", GridSpec, sections["grid"])
    solver = _build("solver", "solver", SolverSettings, sections["solver"])
    terminal = _build("terminal", "terminal", TerminalCost, sections["terminal"])
    sim = _build("simulation", "simulation", SimSettings, sections["simulation"])
    run = sections["run"]
    try:
        return ExperimentConfig(net, tuple(contents), tuple(labels), cache, grid, solver, terminal,
                                sim, run["seed"], run["out"], run["policies"])
    except ParameterError as exc:
        raise ConfigError(f"[run] {exc}") from None


def parse_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


# -- serialization -----------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(value)
    return str(value)


def _record(obj, keys) -> dict[str, str]:
    return {k: _fmt(getattr(obj, k)) for k in keys}


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse_config_text(serialize_config(c)) == c."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["network"] = _record(cfg.net, SCHEMA["network"])
    for spec, label in zip(cfg.contents, cfg.content_labels):
        cp["content." + label if label else "content"] = _record(spec, SCHEMA["content"])
    cp["cache"] = _record(cfg.cache, SCHEMA["cache"])
    cp["grid"] = _record(cfg.grid, SCHEMA["grid"])
    cp["solver"] = _record(cfg.solver, SCHEMA["solver"])
    cp["terminal"] = _record(cfg.terminal, SCHEMA["terminal"])
    cp["simulation"] = _record(cfg.sim, SCHEMA["simulation"])
    cp["run"] = {"seed": str(cfg.seed), "out": cfg.out, "policies": _fmt(cfg.policies)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def flatten(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """(section.key, value) pairs in canonical order, for metadata files."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(serialize_config(cfg))
    return [(f"{sec}.{k}", v) for sec in cp.sections() for k, v in cp.items(sec)]

