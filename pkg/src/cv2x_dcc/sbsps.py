"""Mode 4 sensing-based semi-persistent scheduling (SB-SPS)."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .congestion import ALLOWED_RRIS
from .errors import ConfigError, SchedulingError

SENSING_WINDOW = 1000
NEVER = -10**9


class SelectionContext(str, enum.Enum):
    HAD_FREE = "HadFreeCandidates"
    NO_FREE = "NoFreeCandidates"


class Action(str, enum.Enum):
    TRANSMIT = "transmit"
    MISS = "miss"
    BREAK = "break"
    KEEP = "keep"
    RESELECT = "reselect"


@dataclass(frozen=True)
class SpsParams:
    num_subchannels: int = 3
    subchannels_per_tx: int = 2
    t1: int = 4
    t2: int = 100
    candidate_fraction: float = 0.2
    rsrp_threshold: float = -126.0  # dBm
    threshold_step: float = 3.0  # dB
    rrc_min: int = 5
    rrc_max: int = 15
    keep_probability: float = 0.0

    def validate(self) -> None:
        if not 0 < self.t1 <= self.t2:
            raise ConfigError("t2", "selection window needs 0 < t1 <= t2")
        if not 0 < self.candidate_fraction <= 1:
            raise ConfigError("candidate_fraction", "must lie in (0, 1]")
        if not 0 <= self.keep_probability <= 1:
            raise ConfigError("keep_probability", "must lie in [0, 1]")
        if not 0 <= self.rrc_min <= self.rrc_max:
            raise ConfigError("rrc_min", "must satisfy 0 <= rrc_min <= rrc_max")


@dataclass(frozen=True)
class GrantBreakingPolicy:
    enabled: bool = False
    reselect_after: int = 1  # consecutive unused reservations tolerated


@dataclass(frozen=True)
class Sci:
    source: int
    announced_rri: int
    reserved_subchannels: range
    rrc_snapshot: int
    sent_at: int = 0
    grant_id: int = -1


_grant_ids = itertools.count(1)


@dataclass
class Grant:
    owner: int
    next_opportunity: int  # absolute subframe of the next reserved opportunity
    subchannels: range
    rri: int
    rrc: int
    created_at: int
    selection_context: SelectionContext = SelectionContext.HAD_FREE
    id: int = field(default_factory=lambda: next(_grant_ids))
    alive: bool = True
    missed: int = 0
    consecutive_missed: int = 0
    # (subframe, transmitted) for every reserved opportunity processed
    history: list = field(default_factory=list)
    retuned_at: list = field(default_factory=list)

    @property
    def subframe_offset(self) -> int:
        return self.next_opportunity % self.rri

    def sci(self, now: int) -> Sci:
        return Sci(self.owner, self.rri, self.subchannels, self.rrc, now, self.id)

    def last_selection_before(self, t: int) -> int:
        """Most recent creation or retune time not after ``t``."""
        times = [self.created_at] + [r for r in self.retuned_at if r <= t]
        return max(times)

    def last_opportunity_before(self, t: int):
        """``(subframe, transmitted)`` of the last opportunity strictly before ``t``."""
        for rec in reversed(self.history):
            if rec[0] < t:
                return rec
        return None


class SensingWindow:
    """One vehicle's view of the trailing 1000 subframes.

    ``srssi`` is a ring of linear S-RSSI (mW) per subchannel indexed by
    ``subframe % 1000``; SCIs are stored one slot per source (the newest
    decoded SCI of a source supersedes the older one).
    """

    def __init__(self, srssi: np.ndarray, sci_time: np.ndarray, sci_rri: np.ndarray,
                 sci_rrc: np.ndarray, sci_start: np.ndarray, sci_width: np.ndarray,
                 sci_rsrp: np.ndarray):
        self.srssi = srssi
        self.sci_time = sci_time
        self.sci_rri = sci_rri
        self.sci_rrc = sci_rrc
        self.sci_start = sci_start
        self.sci_width = sci_width
        self.sci_rsrp = sci_rsrp

    @classmethod
    def empty(cls, num_subchannels: int, n_sources: int, noise_mw: float) -> "SensingWindow":
        return cls(
            np.full((SENSING_WINDOW, num_subchannels), noise_mw),
            np.full(n_sources, NEVER, dtype=np.int64),
            np.zeros(n_sources, dtype=np.int64),
            np.zeros(n_sources, dtype=np.int64),
            np.zeros(n_sources, dtype=np.int64),
            np.zeros(n_sources, dtype=np.int64),
            np.full(n_sources, -math.inf),
        )

    def record(self, subframe: int, srssi_mw) -> None:
        self.srssi[subframe % SENSING_WINDOW] = srssi_mw

    def add_sci(self, sci: Sci, received_at: int, rsrp: float) -> None:
        s = sci.source
        self.sci_time[s] = received_at
        self.sci_rri[s] = sci.announced_rri
        self.sci_rrc[s] = sci.rrc_snapshot
        self.sci_start[s] = sci.reserved_subchannels.start
        self.sci_width[s] = len(sci.reserved_subchannels)
        self.sci_rsrp[s] = rsrp

    def reservations(self, now: int):
        """Next announced reservation of each SCI heard within the window.

        Only the immediately following reservation of an SCI is projected,
        and only while the announcing grant still has reservations left.
        """
        live = (self.sci_time >= now - SENSING_WINDOW) & (self.sci_rrc > 0)
        idx = np.flatnonzero(live)
        at = self.sci_time[idx] + self.sci_rri[idx]
        keep = at >= now
        idx = idx[keep]
        return idx, at[keep], self.sci_start[idx], self.sci_width[idx], self.sci_rsrp[idx]

    def phase_average(self) -> np.ndarray:
        """Mean S-RSSI (mW) per 100-subframe phase and subchannel, shape (100, n_sub)."""
        n_sub = self.srssi.shape[1]
        return self.srssi.reshape(SENSING_WINDOW // 100, 100, n_sub).mean(axis=0)


@dataclass(frozen=True)
class Selection:
    """Diagnostics of one resource selection."""

    total: int
    free: int
    eligible: int
    threshold: float
    pool: int


def draw_rrc(rng: np.random.Generator, params: SpsParams) -> int:
    return int(rng.integers(params.rrc_min, params.rrc_max + 1))


def select_resources(sw: SensingWindow, rri: int, now: int, rng: np.random.Generator,
                     params: SpsParams = SpsParams(), owner: int = -1,
                     end: int | None = None, diagnostics: list | None = None) -> Grant:
    if rri not in ALLOWED_RRIS:
        raise ConfigError("rri", f"{rri} not in allowed set")
    s = params.subchannels_per_tx
    n_starts = params.num_subchannels - s + 1
    first = now + params.t1
    last = now + params.t2
    if end is not None:
        last = min(last, end - 1)
    if last < first or n_starts < 1:
        raise SchedulingError(f"empty selection window at subframe {now}")
    subframes = np.arange(first, last + 1)
    starts = np.arange(n_starts)
    total = subframes.size * n_starts
    rrc = draw_rrc(rng, params)

    # strongest reservation RSRP landing on each candidate or its repetitions
    idx, at, rstart, rwidth, rsrp = sw.reservations(now)
    worst = np.full((subframes.size, n_starts), -math.inf)
    if idx.size:
        lag = at[:, None] - subframes[None, :]
        reps = max(rrc, 1)
        hit = (lag >= 0) & (lag % rri == 0) & (lag // rri < reps)
        overlap = (rstart[:, None] < starts[None, :] + s) & (starts[None, :] < (rstart + rwidth)[:, None])
        both = hit[:, :, None] & overlap[:, None, :]
        if both.any():
            worst = np.where(both, rsrp[:, None, None], -math.inf).max(axis=0)

    need = params.candidate_fraction * total
    threshold = params.rsrp_threshold
    eligible = worst <= threshold
    free = int(eligible.sum())
    while eligible.sum() < need:
        threshold += params.threshold_step
        eligible = worst <= threshold
    context = SelectionContext.HAD_FREE if free >= need else SelectionContext.NO_FREE

    # rank by average S-RSSI over the candidate's subchannels
    phase = sw.phase_average()[subframes % 100]  # (n_sf, n_sub)
    csum = np.concatenate([np.zeros((phase.shape[0], 1)), np.cumsum(phase, axis=1)], axis=1)
    metric = (csum[:, starts + s] - csum[:, starts]) / s
    values = np.sort(metric[eligible])
    k = max(1, math.ceil(params.candidate_fraction * total))
    cutoff = values[min(k, values.size) - 1]
    pool = np.flatnonzero((eligible & (metric <= cutoff)).ravel())
    choice = int(pool[rng.integers(pool.size)])
    sf_i, st = divmod(choice, n_starts)
    if diagnostics is not None:
        diagnostics.append(Selection(total, free, int(eligible.sum()), threshold, pool.size))
    return Grant(owner=owner, next_opportunity=int(subframes[sf_i]),
                 subchannels=range(int(st), int(st) + s), rri=rri, rrc=rrc,
                 created_at=now, selection_context=context)


def on_reserved_opportunity(grant: Grant, has_packet: bool, gb: GrantBreakingPolicy,
                            now: int | None = None) -> Action:
    if now is None:
        now = grant.next_opportunity
    if has_packet:
        grant.history.append((now, True))
        grant.rrc -= 1
        grant.consecutive_missed = 0
        grant.next_opportunity = now + grant.rri
        return Action.TRANSMIT
    grant.history.append((now, False))
    grant.consecutive_missed += 1
    if gb.enabled and grant.consecutive_missed >= gb.reselect_after:
        grant.alive = False
        return Action.BREAK
    grant.rrc -= 1
    grant.missed += 1
    grant.next_opportunity = now + grant.rri
    return Action.MISS


def grant_break_check(inter_arrival: float, rri: int) -> bool:
    """Whether a packet inter-arrival gap breaks a grant (sl-reselectAfter = 1)."""
    return inter_arrival > 2 * rri - 2


def on_rrc_expiry(grant: Grant, keep_probability: float, rng: np.random.Generator,
                  params: SpsParams = SpsParams()) -> Action:
    if rng.random() < keep_probability:
        grant.rrc = draw_rrc(rng, params)
        return Action.KEEP
    grant.alive = False
    return Action.RESELECT


def retune_rri(grant: Grant, new_rri: int, now: int) -> Grant:
    if new_rri not in ALLOWED_RRIS:
        raise ConfigError("rri", f"{new_rri} not in allowed set {ALLOWED_RRIS}")
    if new_rri != grant.rri:
        grant.rri = new_rri
        grant.retuned_at.append(now)
    grant.next_opportunity = now + grant.rri
    return grant
