"""Experiment presets: the comparison sets behind each figure and table.

A preset is a list of variants, each a small set of overrides applied on top
of a base :class:`RunConfig`. ``--desk-scale`` swaps the scenario for a
reduced one so a whole preset runs in minutes on one core.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .config import RunConfig
from .congestion import Kind, Table
from .errors import ConfigError

DESK_SEEDS = (1, 2, 3, 4, 5)
DESK_DURATION = 20000  # ms


@dataclass(frozen=True)
class Variant:
    name: str
    controller: dict = field(default_factory=dict)
    grant_breaking: dict = field(default_factory=dict)
    desk_vehicles: int = 100

    def apply(self, base: RunConfig) -> RunConfig:
        cfg = replace(base, name=self.name,
                      controller=replace(base.controller, **self.controller),
                      grant_breaking=replace(base.grant_breaking, **self.grant_breaking))
        return cfg.validate()


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    description: str
    variants: tuple

    def configs(self, base: RunConfig | None = None, desk: bool = False,
                seeds: tuple | None = None) -> list[RunConfig]:
        base = base or RunConfig()
        out = []
        for v in self.variants:
            cfg = desk_scale(base, v.desk_vehicles) if desk else base
            if seeds is not None:
                cfg = replace(cfg, seeds=tuple(seeds))
            out.append(v.apply(cfg))
        return out


def desk_scale(base: RunConfig, vehicles: int = 100) -> RunConfig:
    """Same road and radio, fewer vehicles, 20 s, five seeds."""
    scn = base.scenario
    scn = replace(scn, density=vehicles / scn.road_length, sim_duration=DESK_DURATION,
                  warmup=min(scn.warmup, DESK_DURATION // 2))
    return replace(base, scenario=scn, seeds=DESK_SEEDS)


NO_DCC = Variant("NoDcc", {"kind": Kind.NO_DCC})
REACTIVE = Variant("DccReactive", {"kind": Kind.REACTIVE})
REACTIVE_GB = Variant("DccReactiveGB", {"kind": Kind.REACTIVE}, {"enabled": True})
ADAPTIVE_68 = Variant("DccAdaptive68", {"kind": Kind.ADAPTIVE, "adaptive_target": 0.68})
ADAPTIVE_60 = Variant("DccAdaptive60", {"kind": Kind.ADAPTIVE, "adaptive_target": 0.60})
ADAPTIVE_20 = Variant("DccAdaptive20", {"kind": Kind.ADAPTIVE, "adaptive_target": 0.20})
DROP_ETSI = Variant("DropEtsi", {"kind": Kind.DROP_ETSI, "table": Table.ETSI})
DROP_3GPP = Variant("Drop3gpp", {"kind": Kind.DROP_3GPP, "table": Table.GPP3})
DROP_AGGRESSIVE = Variant("DropAggressive", {"kind": Kind.DROP_AGGRESSIVE, "table": Table.AGGRESSIVE})
RRI_LOOKUP = Variant("RriLookup", {"kind": Kind.RRI_LOOKUP})
RRI_CR_LIMIT = Variant("RriCrLimit", {"kind": Kind.RRI_CR_LIMIT, "table": Table.GPP3})
RRI_CR_LIMIT_AGGRESSIVE = Variant("RriCrLimitAggressive",
                                  {"kind": Kind.RRI_CR_LIMIT, "table": Table.AGGRESSIVE})

CBR20 = (NO_DCC, ADAPTIVE_20, REACTIVE, DROP_AGGRESSIVE, RRI_LOOKUP, RRI_CR_LIMIT_AGGRESSIVE)
# 100 vehicles cannot load the channel past 2/3, so the 60% set runs denser
CBR60 = tuple(replace(v, desk_vehicles=200) for v in (NO_DCC, ADAPTIVE_60, RRI_CR_LIMIT))

PRESETS = {p.name: p for p in (
    ExperimentPreset("fig3", "grant breaking: NoDcc vs DCC Reactive with and without grant breaking",
                     (NO_DCC, REACTIVE_GB, REACTIVE)),
    ExperimentPreset("fig4", "DCC variants: NoDcc, Reactive, Adaptive at 68% and 20% targets",
                     (NO_DCC, REACTIVE, ADAPTIVE_68, ADAPTIVE_20)),
    ExperimentPreset("fig5", "packet dropping: NoDcc and the ETSI, 3GPP and aggressive CR tables",
                     (NO_DCC, DROP_ETSI, DROP_3GPP, DROP_AGGRESSIVE)),
    ExperimentPreset("cbr20", "six-mechanism comparison at roughly 20% CBR", CBR20),
    ExperimentPreset("cbr60", "NoDcc, DCC Adaptive and RriCrLimit at roughly 60% CBR", CBR60),
    ExperimentPreset("table4", "colliding grants per mechanism, 20% and 60% rows", CBR20 + CBR60[1:]),
    ExperimentPreset("table6", "neighbour awareness 200-300 m per mechanism, 20% and 60% rows",
                     CBR20 + CBR60[1:]),
)}


def list_presets() -> list[tuple[str, str]]:
    return [(p.name, p.description) for p in PRESETS.values()]


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
