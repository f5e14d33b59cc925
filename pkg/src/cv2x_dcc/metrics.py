"""Reported quantities: PDR by distance, IPG, awareness and colliding grants."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class FailureCause(str, enum.Enum):
    SINR = "Sinr"
    HALF_DUPLEX = "HalfDuplex"
    COLLISION = "Collision"


class CollisionCause(str, enum.Enum):
    MT = "MT"
    NF = "NF"
    TSIM = "TSim"


@dataclass(frozen=True)
class TxRecord:
    tx_id: int
    source: int
    subframe: int
    subchannels: range
    position: float


@dataclass(frozen=True)
class RxOutcome:
    tx_id: int
    receiver: int
    distance: float
    decoded: bool
    failure_cause: FailureCause | None = None


@dataclass(frozen=True)
class CollidingGrantEvent:
    grant_a: int
    grant_b: int
    owner_a: int
    owner_b: int
    first_subframe: int
    cause: CollisionCause
    distance: float = 0.0


# -- PDR --------------------------------------------------------------------

class PdrAccumulator:
    """Per-bin decoded/total counters, plus failure causes."""

    def __init__(self, bin_width: float = 50.0, max_range: float = 600.0):
        if bin_width <= 0:
            raise ValueError("bin_width must be > 0")
        self.bin_width = bin_width
        self.nbins = int(math.ceil(max_range / bin_width)) + 1
        self.decoded = np.zeros(self.nbins, dtype=np.int64)
        self.total = np.zeros(self.nbins, dtype=np.int64)
        self.causes = {c: np.zeros(self.nbins, dtype=np.int64) for c in FailureCause}

    def add(self, distance: np.ndarray, decoded: np.ndarray, cause: np.ndarray | None = None) -> None:
        """``cause`` holds FailureCause indices (0..2) for undecoded entries."""
        bins = np.minimum((distance // self.bin_width).astype(np.int64), self.nbins - 1)
        self.total += np.bincount(bins, minlength=self.nbins)
        self.decoded += np.bincount(bins[decoded], minlength=self.nbins)
        if cause is not None:
            failed = ~decoded
            for i, c in enumerate(FailureCause):
                self.causes[c] += np.bincount(bins[failed & (cause == i)], minlength=self.nbins)

    def rows(self):
        out = []
        for b in np.flatnonzero(self.total):
            lo = b * self.bin_width
            out.append((lo, lo + self.bin_width, int(self.decoded[b]), int(self.total[b]),
                        self.decoded[b] / self.total[b]))
        return out


def pdr_by_distance(outcomes: Iterable[RxOutcome], bin_width: float = 50.0):
    """``(bin_lo, bin_hi, decoded, total, pdr)`` for every non-empty bin."""
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    counts: dict[int, list[int]] = {}
    for o in outcomes:
        b = int(o.distance // bin_width)
        c = counts.setdefault(b, [0, 0])
        c[0] += int(o.decoded)
        c[1] += 1
    return [(b * bin_width, (b + 1) * bin_width, d, n, d / n)
            for b, (d, n) in sorted(counts.items())]


def mean_pdr(rows, lo: float = 0.0, hi: float = math.inf) -> float:
    """Unweighted mean of per-bin PDR over bins whose lower edge lies in [lo, hi)."""
    vals = [r[4] for r in rows if lo <= r[0] < hi]
    return float(np.mean(vals)) if vals else math.nan


# -- IPG --------------------------------------------------------------------

def ipg(receptions: Iterable[tuple[int, int, int]]) -> np.ndarray:
    """Gaps between successive successful receptions per (receiver, source).

    ``receptions`` are ``(receiver, source, subframe)`` decode events.
    """
    last: dict[tuple[int, int], int] = {}
    gaps = []
    for rx, src, t in sorted(receptions, key=lambda r: r[2]):
        key = (rx, src)
        if key in last:
            gaps.append(t - last[key])
        last[key] = t
    return np.asarray(gaps, dtype=np.int64)


def ipg_cdf(gaps: np.ndarray, counts: np.ndarray | None = None):
    gaps = np.asarray(gaps)
    if counts is None:
        counts = np.ones_like(gaps)
    order = np.argsort(gaps, kind="stable")
    values, idx = np.unique(gaps[order], return_index=True)
    cum = np.cumsum(np.asarray(counts)[order])
    total = cum[-1] if cum.size else 1
    ends = np.append(idx[1:], gaps.size) - 1
    return values, cum[ends] / total


class IpgAccumulator:
    """Multiset of (receiver, source, gap) triples, compacted periodically."""

    def __init__(self, n: int, max_gap: int):
        self.n = n
        self.span = max_gap + 1
        self._chunks: list[np.ndarray] = []
        self._pending = 0
        self._keys = np.zeros(0, dtype=np.int64)
        self._counts = np.zeros(0, dtype=np.int64)

    def add(self, rx: np.ndarray, src: int, gaps: np.ndarray) -> None:
        if rx.size:
            self._chunks.append((rx.astype(np.int64) * self.n + src) * self.span + gaps)
            self._pending += rx.size
            if self._pending > 2_000_000:
                self._compact()

    def _compact(self) -> None:
        if not self._chunks:
            return
        keys = np.concatenate([self._keys] + self._chunks)
        counts = np.concatenate([self._counts] + [np.ones(c.size, dtype=np.int64) for c in self._chunks])
        self._keys, inv = np.unique(keys, return_inverse=True)
        self._counts = np.bincount(inv, weights=counts).astype(np.int64)
        self._chunks = []
        self._pending = 0

    def table(self):
        """Arrays ``(rx, src, gap, count)`` sorted by rx, src, gap."""
        self._compact()
        gap = self._keys % self.span
        pair = self._keys // self.span
        return pair // self.n, pair % self.n, gap, self._counts

    def mean(self) -> float:
        _, _, gap, count = self.table()
        return float((gap * count).sum() / count.sum()) if count.size else math.nan


# -- awareness --------------------------------------------------------------

def awareness(last_heard: np.ndarray, distances: np.ndarray, now: int,
              ring: tuple[float, float] = (200.0, 300.0), lifetime: int = 1000):
    """Per-vehicle awareness fraction at one sampling instant.

    ``last_heard[rx, src]`` is the subframe of the last decode (very negative
    when never heard). Returns ``(vehicles, fractions)`` for vehicles with at
    least one neighbour in the ring.
    """
    in_ring = (distances >= ring[0]) & (distances <= ring[1])
    np.fill_diagonal(in_ring, False)
    fresh = (now - last_heard) <= lifetime
    neighbours = in_ring.sum(axis=1)
    heard = (in_ring & fresh).sum(axis=1)
    vehicles = np.flatnonzero(neighbours)
    return vehicles, heard[vehicles] / neighbours[vehicles]


def awareness_summary(fractions) -> tuple[float, float]:
    f = np.asarray(fractions, dtype=float)
    if f.size == 0:
        return math.nan, math.nan
    return float(f.mean()), float(f.std())


# -- colliding grants -------------------------------------------------------

def _missed_before(silent, selector, t: int) -> bool:
    """Whether ``silent``'s grant was quiet at its last opportunity before
    ``selector`` last selected or re-tuned its resource."""
    ts = selector.last_selection_before(t)
    if ts < silent.created_at:
        return False
    rec = silent.last_opportunity_before(ts)
    return rec is not None and not rec[1]


def classify_collision(grant_a, grant_b, t: int) -> CollisionCause:
    """Cause of a colliding grant pair first observed at subframe ``t``.

    Precedence is MT > NF > TSim.
    """
    from .sbsps import SelectionContext

    if _missed_before(grant_a, grant_b, t) or _missed_before(grant_b, grant_a, t):
        return CollisionCause.MT
    if SelectionContext.NO_FREE in (grant_a.selection_context, grant_b.selection_context):
        return CollisionCause.NF
    return CollisionCause.TSIM


def colliding_grant_totals(events: Iterable[CollidingGrantEvent]) -> tuple[int, int, int, int]:
    mt = nf = tsim = 0
    for e in events:
        if e.cause is CollisionCause.MT:
            mt += 1
        elif e.cause is CollisionCause.NF:
            nf += 1
        else:
            tsim += 1
    return mt + nf + tsim, mt, nf, tsim
