"""Run configuration: flat ``key = value`` sections, defaults, presets."""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .channel import RadioConfig
from .congestion import ControllerParams, Kind, Table
from .errors import ConfigError
from .sbsps import GrantBreakingPolicy, SpsParams
from .scenario import ScenarioConfig


@dataclass(frozen=True)
class MetricsConfig:
    bin_width: float = 50.0  # m
    sample_period: int = 100  # ms
    awareness_inner: float = 200.0  # m
    awareness_outer: float = 300.0  # m
    cam_lifetime: int = 1000  # ms
    ipg_horizon: float = 600.0  # m; IPG only for pairs closer than this
    collision_range: float = 0.0  # m; 0 selects the noise-limited decode range
    verify_meters: bool = False

    def validate(self) -> None:
        if self.bin_width <= 0:
            raise ConfigError("bin_width", "must be > 0")
        if self.sample_period <= 0 or 100 % self.sample_period and self.sample_period % 100:
            raise ConfigError("sample_period", "must be a positive divisor or multiple of 100")
        if not 0 <= self.awareness_inner < self.awareness_outer:
            raise ConfigError("awareness_inner", "ring needs 0 <= inner < outer")
        if self.cam_lifetime <= 0:
            raise ConfigError("cam_lifetime", "must be > 0")
        if self.collision_range < 0:
            raise ConfigError("collision_range", "must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    sps: SpsParams = field(default_factory=SpsParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    grant_breaking: GrantBreakingPolicy = field(default_factory=GrantBreakingPolicy)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    seeds: tuple[int, ...] = (1,)
    output_dir: str = "out"

    def validate(self) -> "RunConfig":
        self.scenario.validate()
        self.radio.validate()
        self.sps.validate()
        self.metrics.validate()
        if self.sps.num_subchannels != self.radio.num_subchannels or \
                self.sps.subchannels_per_tx != self.radio.subchannels_per_tx:
            raise ConfigError("num_subchannels", "radio and sps blocks disagree")
        c = self.controller
        if not 0 <= c.adaptive_target <= 1:
            raise ConfigError("adaptive_target", "must lie in [0, 1]")
        if not 0 < c.rate_min <= c.rate_max:
            raise ConfigError("rate_min", "needs 0 < rate_min <= rate_max")
        if not 0 < c.adaptive_alpha <= 1:
            raise ConfigError("adaptive_alpha", "must lie in (0, 1]")
        if c.table is Table.ETSI and not 1 <= c.priority <= 8:
            raise ConfigError("priority", "must lie in [1, 8]")
        if self.grant_breaking.reselect_after < 1:
            raise ConfigError("reselect_after", "must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed required")
        return self

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, scenario=replace(self.scenario, seed=seed), seeds=(seed,))


# section name -> (RunConfig attribute, key aliases)
SECTIONS = {
    "scenario": "scenario",
    "radio": "radio",
    "sps": "sps",
    "controller": "controller",
    "grant_breaking": "grant_breaking",
    "metrics": "metrics",
}
# keys of the controller section that are spelled differently from the dataclass
CONTROLLER_ALIASES = {"controller": "kind", "kind": "kind", "target": "adaptive_target",
                      "shift": "aggressive_shift"}
RUN_KEYS = ("name", "seeds", "output_dir")


def _convert(kind, raw: str, key: str, line: int | None):
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is Kind:
            return Kind.parse(text)
        if kind is Table:
            return Table.parse(text)
        if kind is str:
            return text
    except ConfigError as exc:
        raise ConfigError(key, str(exc).split(": ", 1)[-1], line) from None
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r}", line) from None
    raise ConfigError(key, "unsupported field type", line)


_TYPE_NAMES = {"int": int, "float": float, "bool": bool, "str": str, "Kind": Kind, "Table": Table}


def _field_types(cls) -> dict:
    out = {}
    for f in fields(cls):
        t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
        t = t.split("|")[0].strip()
        out[f.name] = _TYPE_NAMES.get(t, float)
    return out


def _line_index(text: str) -> dict:
    """Map (section, key) to the 1-based line it appears on."""
    index = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            index[(section, m.group(1).strip().lower())] = no
    return index


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse an INI-style document into a fully resolved, validated RunConfig."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       default_section="__defaults__")
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("document", str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    lines = _line_index(text)
    cfg = base or RunConfig()
    updates: dict = {}
    for section in parser.sections():
        sec = section.strip().lower()
        if sec == "run":
            for key, raw in parser.items(section):
                line = lines.get((sec, key))
                if key == "name":
                    updates["name"] = raw.strip()
                elif key == "output_dir":
                    updates["output_dir"] = raw.strip()
                elif key == "seeds":
                    try:
                        updates["seeds"] = tuple(int(s) for s in raw.replace(",", " ").split())
                    except ValueError:
                        raise ConfigError("seeds", f"cannot parse {raw!r}", line) from None
                else:
                    raise ConfigError(key, "unknown key in [run]", line)
            continue
        if sec not in SECTIONS:
            raise ConfigError(section, "unknown section", lines.get((sec, None)))
        attr = SECTIONS[sec]
        block = getattr(cfg, attr)
        types = _field_types(type(block))
        changes = {}
        for key, raw in parser.items(section):
            line = lines.get((sec, key))
            name = CONTROLLER_ALIASES.get(key, key) if sec == "controller" else key
            if name not in types:
                raise ConfigError(key, f"unknown key in [{sec}]", line)
            changes[name] = _convert(types[name], raw, key, line)
        updates[attr] = replace(block, **changes)
    cfg = replace(cfg, **updates)
    # radio and sps share the subchannel layout; keep them in step
    if "radio" in updates and "sps" not in updates:
        cfg = replace(cfg, sps=replace(cfg.sps, num_subchannels=cfg.radio.num_subchannels,
                                       subchannels_per_tx=cfg.radio.subchannels_per_tx,
                                       rsrp_threshold=cfg.radio.rsrp_threshold))
    try:
        cfg.validate()
    except ConfigError as exc:
        sec = next((s for s, a in SECTIONS.items()
                    if exc.field in _field_types(type(getattr(cfg, a)))), None)
        if exc.line is None and sec is not None:
            raise ConfigError(exc.field, str(exc).split(": ", 1)[-1], lines.get((sec, exc.field))) from None
        raise
    return cfg


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: RunConfig) -> str:
    """Resolved configuration as a document that :func:`parse_config` accepts."""
    out = ["[run]", f"name = {cfg.name}", f"seeds = {' '.join(map(str, cfg.seeds))}",
           f"output_dir = {cfg.output_dir}", ""]
    for sec, attr in SECTIONS.items():
        out.append(f"[{sec}]")
        block = getattr(cfg, attr)
        for f in fields(block):
            value = getattr(block, f.name)
            if isinstance(value, (Kind, Table)):
                value = value.value
            elif isinstance(value, float):
                value = repr(value)
            name = "controller" if (sec == "controller" and f.name == "kind") else f.name
            out.append(f"{name} = {value}")
        out.append("")
    return "\n".join(out)


def as_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)
