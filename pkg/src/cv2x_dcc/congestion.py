"""CBR/CR measurement and the congestion-control variants.

Every controller is a small per-vehicle state machine. Rate controllers
(Reactive, Adaptive) and the dropping controllers gate packets at the MAC;
the RRI controllers never gate but pick the reservation interval the grant is
re-tuned to at its next transmission.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

ALLOWED_RRIS = tuple(range(100, 1001, 100))
DEFAULT_RRI = 100

CBR_WINDOW = 100
CR_PAST_WINDOW = 500
CR_FUTURE_WINDOW = 500  # includes the current subframe
CR_WINDOW = CR_PAST_WINDOW + CR_FUTURE_WINDOW


class Kind(str, enum.Enum):
    NO_DCC = "NoDcc"
    REACTIVE = "Reactive"
    ADAPTIVE = "Adaptive"
    DROP_ETSI = "DropEtsi"
    DROP_3GPP = "Drop3gpp"
    DROP_AGGRESSIVE = "DropAggressive"
    RRI_LOOKUP = "RriLookup"
    RRI_CR_LIMIT = "RriCrLimit"

    @classmethod
    def parse(cls, text: str) -> "Kind":
        for k in cls:
            if k.value.lower() == text.strip().lower():
                return k
        raise ConfigError("controller", f"unknown controller {text!r}")

    @property
    def is_rate(self) -> bool:
        return self in (Kind.REACTIVE, Kind.ADAPTIVE)

    @property
    def is_drop(self) -> bool:
        return self in (Kind.DROP_ETSI, Kind.DROP_3GPP, Kind.DROP_AGGRESSIVE)

    @property
    def is_rri(self) -> bool:
        return self in (Kind.RRI_LOOKUP, Kind.RRI_CR_LIMIT)


class ReactiveState(str, enum.Enum):
    RELAXED = "Relaxed"
    ACTIVE1 = "Active1"
    ACTIVE2 = "Active2"
    ACTIVE3 = "Active3"
    RESTRICTIVE = "Restrictive"


class Table(str, enum.Enum):
    ETSI = "etsi"
    GPP3 = "3gpp"
    AGGRESSIVE = "aggressive"

    @classmethod
    def parse(cls, text: str) -> "Table":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ConfigError("table", f"unknown CR limit table {text!r}") from None


# -- lookup tables ----------------------------------------------------------

# (upper bound, state, T_off ms); intervals are [lo, hi)
REACTIVE_TABLE = (
    (0.3, ReactiveState.RELAXED, 100),
    (0.4, ReactiveState.ACTIVE1, 200),
    (0.5, ReactiveState.ACTIVE2, 400),
    (0.6, ReactiveState.ACTIVE3, 500),
    (math.inf, ReactiveState.RESTRICTIVE, 1000),
)

# (upper bound, limit per priority group 1-2, 3-5, 6-8); intervals are (lo, hi]
ETSI_CR_TABLE = (
    (0.3, (None, None, None)),
    (0.65, (None, 0.03, 0.02)),
    (0.8, (0.02, 0.006, 0.004)),
    (math.inf, (0.002, 0.003, 0.002)),
)

# the printed table has no row for (0.775, 0.8]; the 1.2e-3 row is extended over it
GPP3_CR_TABLE = (
    (0.65, None),
    (0.675, 1.6e-3),
    (0.7, 1.5e-3),
    (0.725, 1.4e-3),
    (0.75, 1.3e-3),
    (0.8, 1.2e-3),
    (0.825, 1.1e-3),
    (0.85, 1.1e-3),
    (0.875, 1.0e-3),
    (math.inf, 0.8e-3),
)

AGGRESSIVE_SHIFT = 0.45


def reactive_lookup(cbr: float) -> tuple[ReactiveState, int]:
    for hi, state, t_off in REACTIVE_TABLE:
        if cbr < hi:
            return state, t_off
    raise AssertionError("unreachable")


def rri_lookup_target(cbr: float) -> int:
    """Reactive T_off values reused as reservation intervals."""
    return reactive_lookup(cbr)[1]


def _priority_column(priority: int) -> int:
    if 1 <= priority <= 2:
        return 0
    if 3 <= priority <= 5:
        return 1
    if 6 <= priority <= 8:
        return 2
    raise ConfigError("priority", f"must lie in [1, 8], got {priority}")


def cr_limit(table: Table | str, cbr: float, priority: int = 7,
             shift: float = AGGRESSIVE_SHIFT) -> float | None:
    """Maximum CR for the measured CBR; ``None`` means no limit."""
    if not isinstance(table, Table):
        table = Table.parse(table)
    if table is Table.ETSI:
        col = _priority_column(priority)
        for hi, limits in ETSI_CR_TABLE:
            if cbr <= hi:
                return limits[col]
    else:
        offset = shift if table is Table.AGGRESSIVE else 0.0
        for hi, limit in GPP3_CR_TABLE:
            if cbr <= hi - offset:
                return limit
    raise AssertionError("unreachable")


def steady_state_cr(rri: int, subchannels_per_tx: int, num_subchannels: int) -> float:
    return subchannels_per_tx * (1000.0 / rri) / (1000.0 * num_subchannels)


def rri_crlimit_target(cbr: float, s: int, n: int, table: Table | str = Table.GPP3,
                       priority: int = 7, shift: float = AGGRESSIVE_SHIFT) -> int:
    limit = cr_limit(table, cbr, priority, shift)
    if limit is None:
        return DEFAULT_RRI
    for rri in ALLOWED_RRIS:
        if steady_state_cr(rri, s, n) <= limit + 1e-12:
            return rri
    return ALLOWED_RRIS[-1]


# -- meters -----------------------------------------------------------------

class CbrMeter:
    """Sliding-window channel busy ratio for one or many vehicles.

    ``flags`` passed to :meth:`update` are busy flags per subchannel, shape
    ``(n_sub,)`` for a single meter or ``(n_vehicles, n_sub)``.
    """

    def __init__(self, num_subchannels: int, n_vehicles: int = 1, window: int = CBR_WINDOW):
        self.window = window
        self.num_subchannels = num_subchannels
        self.ring = np.zeros((n_vehicles, window, num_subchannels), dtype=bool)
        self.busy = np.zeros(n_vehicles, dtype=np.int64)
        self.pos = 0

    def update(self, flags) -> np.ndarray:
        flags = np.asarray(flags, dtype=bool).reshape(self.ring.shape[0], self.num_subchannels)
        old = self.ring[:, self.pos, :]
        self.busy += flags.sum(axis=1) - old.sum(axis=1)
        self.ring[:, self.pos, :] = flags
        self.pos = (self.pos + 1) % self.window
        return self.cbr

    @property
    def cbr(self) -> np.ndarray:
        return self.busy / (self.window * self.num_subchannels)

    def recount(self) -> np.ndarray:
        """Brute-force ratio over the raw window contents."""
        return self.ring.sum(axis=(1, 2)) / (self.window * self.num_subchannels)


def update_cbr(meter: CbrMeter, subframe_busy_flags):
    cbr = meter.update(subframe_busy_flags)
    return float(cbr[0]) if cbr.shape[0] == 1 else cbr


def projected_usage(next_opportunity: int, rri: int, rrc: int, subchannels: int,
                    now: int, horizon: int = CR_FUTURE_WINDOW) -> int:
    """Subchannels a grant will use in ``[now, now + horizon - 1]``."""
    last = now + horizon - 1
    if rrc <= 0 or next_opportunity > last or next_opportunity < now:
        return 0
    return min(rrc, (last - next_opportunity) // rri + 1) * subchannels


class CrMeter:
    """Channel occupancy ratio: own past use plus the grant's projected use."""

    def __init__(self, num_subchannels: int, n_vehicles: int = 1):
        self.num_subchannels = num_subchannels
        self.ring = np.zeros((n_vehicles, CR_PAST_WINDOW), dtype=np.int16)
        self.past = np.zeros(n_vehicles, dtype=np.int64)
        self.pos = 0

    def push(self, own_usage) -> None:
        """Record one subframe of own subchannel use (per vehicle)."""
        usage = np.asarray(own_usage, dtype=np.int16).reshape(self.ring.shape[0])
        self.past += usage - self.ring[:, self.pos]
        self.ring[:, self.pos] = usage
        self.pos = (self.pos + 1) % CR_PAST_WINDOW

    def cr(self, vehicle: int, grant, now: int) -> float:
        future = 0
        if grant is not None:
            future = projected_usage(grant.next_opportunity, grant.rri, grant.rrc,
                                     len(grant.subchannels), now)
        return (int(self.past[vehicle]) + future) / (CR_WINDOW * self.num_subchannels)


def update_cr(meter: CrMeter, own_usage, grant, now: int = 0, vehicle: int = 0) -> float:
    meter.push(own_usage)
    return meter.cr(vehicle, grant, now + 1)


# -- controllers ------------------------------------------------------------

@dataclass
class ControllerParams:
    kind: Kind = Kind.NO_DCC
    table: Table = Table.GPP3
    priority: int = 7
    aggressive_shift: float = AGGRESSIVE_SHIFT
    adaptive_target: float = 0.68
    adaptive_alpha: float = 0.1
    adaptive_gain: float = 50.0  # Hz per unit CBR error
    adaptive_epoch: int = 200  # ms
    rate_min: float = 1.0
    rate_max: float = 10.0
    hysteresis_up: int = 1000  # ms
    hysteresis_down: int = 5000  # ms
    control_period: int = 100  # ms

    @property
    def drop_table(self) -> Table:
        return {Kind.DROP_ETSI: Table.ETSI, Kind.DROP_3GPP: Table.GPP3,
                Kind.DROP_AGGRESSIVE: Table.AGGRESSIVE}.get(self.kind, self.table)


@dataclass
class ControllerState:
    kind: Kind = Kind.NO_DCC
    reactive_state: ReactiveState = ReactiveState.RELAXED
    t_off: float = 100.0
    adaptive_rate: float = 10.0
    current_rri: int = DEFAULT_RRI
    over_threshold_since: int | None = None
    under_threshold_since: int | None = None
    last_tx_time: int | None = None
    cbr: float = 0.0
    samples: int = 0  # CBR samples seen so far
    cbr_smoothed: float | None = None  # load estimate driving the adaptive rate
    params: ControllerParams = field(default_factory=ControllerParams, repr=False)

    @classmethod
    def initial(cls, params: ControllerParams) -> "ControllerState":
        return cls(kind=params.kind, adaptive_rate=params.rate_max, params=params,
                   t_off=1000.0 / params.rate_max if params.kind is Kind.ADAPTIVE else 100.0)


class Decision(enum.Enum):
    TRANSMIT = "transmit"
    DELAY = "delay"
    DROP = "drop"


@dataclass(frozen=True)
class GateResult:
    decision: Decision
    until: float | None = None  # earliest allowed transmission time for DELAY


def adaptive_update(state: ControllerState, cbr: float, target: float | None = None) -> float:
    p = state.params
    if target is None:
        target = p.adaptive_target
    rate = (1.0 - p.adaptive_alpha) * state.adaptive_rate + p.adaptive_gain * (target - cbr)
    state.adaptive_rate = min(max(rate, p.rate_min), p.rate_max)
    state.t_off = 1000.0 / state.adaptive_rate
    return state.adaptive_rate


def hysteresis_step(state: ControllerState, desired_rri: int, now: int) -> int:
    p = state.params
    if desired_rri > state.current_rri:
        state.under_threshold_since = None
        if state.over_threshold_since is None:
            state.over_threshold_since = now
        if now - state.over_threshold_since >= p.hysteresis_up:
            state.current_rri = desired_rri
            state.over_threshold_since = None
    elif desired_rri < state.current_rri:
        state.over_threshold_since = None
        if state.under_threshold_since is None:
            state.under_threshold_since = now
        if now - state.under_threshold_since >= p.hysteresis_down:
            state.current_rri = desired_rri
            state.under_threshold_since = None
    else:
        state.over_threshold_since = None
        state.under_threshold_since = None
    return state.current_rri


def control_step(state: ControllerState, cbr: float, now: int, s: int, n: int,
                 adaptive_due: bool | None = None) -> None:
    """Per-epoch controller update from the latest CBR sample."""
    p = state.params
    if adaptive_due is None:
        adaptive_due = now % p.adaptive_epoch == 0
    prev = state.cbr if state.samples else cbr
    state.cbr = cbr
    state.samples += 1
    kind = state.kind
    if kind is Kind.REACTIVE:
        state.reactive_state, state.t_off = reactive_lookup(cbr)
    elif kind is Kind.ADAPTIVE:
        if adaptive_due:
            # ETSI smoothing: mean of the last two samples, then halfway to the old estimate
            pair = 0.5 * (cbr + prev)
            old = state.cbr_smoothed
            state.cbr_smoothed = pair if old is None else 0.5 * old + 0.5 * pair
            adaptive_update(state, state.cbr_smoothed)
    elif kind is Kind.RRI_LOOKUP:
        hysteresis_step(state, rri_lookup_target(cbr), now)
    elif kind is Kind.RRI_CR_LIMIT:
        desired = rri_crlimit_target(cbr, s, n, p.table, p.priority, p.aggressive_shift)
        hysteresis_step(state, desired, now)


def gate_packet(state: ControllerState, cbr: float, cr: float, now: float) -> GateResult:
    kind = state.kind
    if kind.is_rate:
        if state.last_tx_time is not None and now - state.last_tx_time < state.t_off:
            return GateResult(Decision.DELAY, state.last_tx_time + state.t_off)
        return GateResult(Decision.TRANSMIT)
    if kind.is_drop:
        p = state.params
        limit = cr_limit(p.drop_table, cbr, p.priority, p.aggressive_shift)
        if limit is not None and cr > limit:
            return GateResult(Decision.DROP)
    return GateResult(Decision.TRANSMIT)
