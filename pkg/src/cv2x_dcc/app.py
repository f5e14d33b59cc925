"""Periodic CAM generation and the single-slot transmit buffer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CAM_SIZE = 190  # bytes
CAM_PERIOD = 100  # ms


@dataclass(frozen=True)
class Cam:
    source: int
    seq: int
    generated_at: int
    size: int = CAM_SIZE


class TxBuffer:
    """Holds at most one pending CAM; a newer CAM displaces the older one."""

    __slots__ = ("pending",)

    def __init__(self):
        self.pending: Cam | None = None

    def __bool__(self):
        return self.pending is not None

    def pop(self) -> Cam | None:
        cam, self.pending = self.pending, None
        return cam


def enqueue(buffer: TxBuffer, cam: Cam) -> bool:
    replaced = buffer.pending is not None
    buffer.pending = cam
    return replaced


class CamSource:
    """Per-vehicle periodic CAM generator with a random phase offset."""

    def __init__(self, vehicle: int, phase: int, period: int = CAM_PERIOD):
        if not 0 <= phase < period:
            raise ValueError(f"phase {phase} outside [0, {period})")
        self.vehicle = vehicle
        self.phase = phase
        self.period = period
        self.seq = 0
        self.generated = 0

    def due(self, now: int) -> bool:
        return now >= self.phase and (now - self.phase) % self.period == 0

    def generation_times(self, until: int) -> range:
        return range(self.phase, until, self.period)


def generate_cam(source: CamSource, now: int) -> Cam:
    source.seq += 1
    source.generated += 1
    return Cam(source=source.vehicle, seq=source.seq, generated_at=now)


def draw_phases(n: int, rng: np.random.Generator, period: int = CAM_PERIOD) -> np.ndarray:
    return rng.integers(0, period, size=n)
