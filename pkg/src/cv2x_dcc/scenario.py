"""Highway scenario: multilane torus road with constant-speed vehicles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

KMH = 1000.0 / 3600.0


@dataclass(frozen=True)
class ScenarioConfig:
    road_length: float = 600.0  # m
    lanes_per_direction: int = 3
    lane_width: float = 3.5  # m
    density: float = 0.46  # vehicles per meter of road
    speed: float = 50.0 * KMH  # m/s
    sim_duration: int = 20_000  # ms
    warmup: int = 5_000  # ms
    seed: int = 1

    def validate(self) -> None:
        if not self.road_length > 0:
            raise ConfigError("road_length", "must be > 0")
        if self.lanes_per_direction < 1:
            raise ConfigError("lanes_per_direction", "must be >= 1")
        if not self.density > 0:
            raise ConfigError("density", "must be > 0")
        if self.speed < 0:
            raise ConfigError("speed", "must be >= 0")
        if self.lane_width <= 0:
            raise ConfigError("lane_width", "must be > 0")
        if self.sim_duration <= 0:
            raise ConfigError("sim_duration", "must be > 0")
        if not 0 <= self.warmup < self.sim_duration:
            raise ConfigError("warmup", "must lie in [0, sim_duration)")
        if self.vehicle_count < 1:
            raise ConfigError("density", "yields no vehicles for this road length")

    @property
    def vehicle_count(self) -> int:
        return int(round(self.density * self.road_length))

    @property
    def total_lanes(self) -> int:
        return 2 * self.lanes_per_direction


@dataclass(frozen=True)
class VehicleState:
    id: int
    lane: int
    position: float  # initial position along the road, m
    direction: int  # +1 or -1
    speed: float = 0.0
    road_length: float = 600.0
    lateral: float = 0.0  # lateral offset of the lane centre, m


def lane_offset(lane: int, config: ScenarioConfig) -> float:
    """Lateral coordinate of a lane centre.

    Lanes ``0..k-1`` drive in +x, ``k..2k-1`` in -x; the two carriageways are
    separated by one lane width.
    """
    k = config.lanes_per_direction
    if lane < k:
        return lane * config.lane_width
    return (lane + 1) * config.lane_width


def build_scenario(config: ScenarioConfig, rng: np.random.Generator | None = None) -> list[VehicleState]:
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = config.vehicle_count
    lanes = config.total_lanes
    per_lane = [n // lanes + (1 if i < n % lanes else 0) for i in range(lanes)]
    vehicles = []
    vid = 0
    for lane, count in enumerate(per_lane):
        if count == 0:
            continue
        spacing = config.road_length / count
        start = rng.uniform(0.0, spacing)
        jitter = rng.uniform(-0.25 * spacing, 0.25 * spacing, size=count)
        positions = np.mod(start + spacing * np.arange(count) + jitter, config.road_length)
        direction = 1 if lane < config.lanes_per_direction else -1
        for pos in positions:
            vehicles.append(VehicleState(
                id=vid, lane=lane, position=float(pos), direction=direction,
                speed=config.speed, road_length=config.road_length,
                lateral=lane_offset(lane, config),
            ))
            vid += 1
    return vehicles


def position_at(vehicle: VehicleState, t: float) -> float:
    """Position along the road (m) at time ``t`` in milliseconds."""
    x = vehicle.position + vehicle.direction * vehicle.speed * t / 1000.0
    return math.fmod(x, vehicle.road_length) % vehicle.road_length


def _axis_gap(xa, xb, road_length):
    dx = np.abs(np.asarray(xa) - np.asarray(xb)) % road_length
    return np.minimum(dx, road_length - dx)


def pair_distance(a: VehicleState, b: VehicleState, t: float) -> float:
    dx = float(_axis_gap(position_at(a, t), position_at(b, t), a.road_length))
    return math.hypot(dx, a.lateral - b.lateral)


class Fleet:
    """Vectorized view of a vehicle list for the simulation loop."""

    def __init__(self, vehicles: list[VehicleState]):
        self.vehicles = vehicles
        self.n = len(vehicles)
        self.x0 = np.array([v.position for v in vehicles])
        self.velocity = np.array([v.direction * v.speed for v in vehicles])
        self.y = np.array([v.lateral for v in vehicles])
        self.road_length = vehicles[0].road_length if vehicles else 1.0

    def positions(self, t: float) -> np.ndarray:
        return np.mod(self.x0 + self.velocity * (t / 1000.0), self.road_length)

    def distances_from(self, idx, x: np.ndarray) -> np.ndarray:
        """Distances (len(idx) x n) from vehicles ``idx`` to every vehicle."""
        idx = np.atleast_1d(idx)
        dx = _axis_gap(x[idx, None], x[None, :], self.road_length)
        dy = self.y[idx, None] - self.y[None, :]
        return np.hypot(dx, dy)

    def distance_matrix(self, x: np.ndarray) -> np.ndarray:
        return self.distances_from(np.arange(self.n), x)
