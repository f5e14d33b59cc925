"""Radio channel: WINNER+ B1 LOS path loss, noise, S-RSSI and SINR decoding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0
RB_BANDWIDTH_HZ = 180e3
THERMAL_NOISE_DBM_HZ = -174.0
D_MIN = 3.0


@dataclass(frozen=True)
class RadioConfig:
    carrier_frequency: float = 5.9  # GHz
    bandwidth: float = 10.0  # MHz
    num_subchannels: int = 3
    rbs_per_subchannel: int = 16
    subchannels_per_tx: int = 2
    tx_power: float = 23.0  # dBm
    noise_figure: float = 9.0  # dB
    shadowing_sigma_los: float = 3.0  # dB, taken as sigma (not variance)
    antenna_height: float = 1.5  # m
    environment_height: float = 1.0  # m, subtracted from antenna heights (h' = h - h_E)
    mcs_index: int = 6
    sinr_threshold: float = 2.8  # dB
    srssi_threshold: float = -90.0  # dBm
    rsrp_threshold: float = -126.0  # dBm
    range_cap: float = 600.0  # m

    def validate(self) -> None:
        if self.num_subchannels < 1:
            raise ConfigError("num_subchannels", "must be >= 1")
        if self.rbs_per_subchannel < 1:
            raise ConfigError("rbs_per_subchannel", "must be >= 1")
        if not 1 <= self.subchannels_per_tx <= self.num_subchannels:
            raise ConfigError("subchannels_per_tx", "must lie in [1, num_subchannels]")
        used_hz = self.num_subchannels * self.rbs_per_subchannel * RB_BANDWIDTH_HZ
        if used_hz > self.bandwidth * 1e6 + 1e-6:
            raise ConfigError("bandwidth", f"{used_hz / 1e6:.2f} MHz of subchannels exceeds {self.bandwidth} MHz")
        for name in ("tx_power", "noise_figure", "sinr_threshold", "srssi_threshold", "rsrp_threshold"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(name, "must be finite")
        if self.carrier_frequency <= 0:
            raise ConfigError("carrier_frequency", "must be > 0")
        if self.environment_height < 0:
            raise ConfigError("environment_height", "must be >= 0")
        if self.antenna_height <= self.environment_height:
            raise ConfigError("antenna_height", "must exceed the environment height")
        if self.shadowing_sigma_los < 0:
            raise ConfigError("shadowing_sigma_los", "must be >= 0")
        if self.range_cap <= 0:
            raise ConfigError("range_cap", "must be > 0")

    @property
    def effective_height(self) -> float:
        return self.antenna_height - self.environment_height

    @property
    def breakpoint_distance(self) -> float:
        h_eff = self.effective_height
        return 4.0 * h_eff * h_eff * self.carrier_frequency * 1e9 / SPEED_OF_LIGHT


@dataclass(frozen=True)
class RxSample:
    rsrp: float
    rssi: float
    sinr: float
    decoded: bool


# -- unit helpers -----------------------------------------------------------

def dbm_to_mw(p):
    return np.power(10.0, np.asarray(p, dtype=float) / 10.0)


def mw_to_dbm(p):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(p, dtype=float))


def power_sum_dbm(powers_dbm) -> float:
    """Sum powers given in dBm in the linear domain."""
    powers = np.asarray(powers_dbm, dtype=float)
    if powers.size == 0:
        return -math.inf
    return float(mw_to_dbm(dbm_to_mw(powers).sum()))


# -- propagation ------------------------------------------------------------

def first_slope_loss(d, carrier_frequency: float = 5.9):
    return 22.7 * np.log10(d) + 41.0 + 20.0 * math.log10(carrier_frequency / 5.0)


def second_slope_loss(d, carrier_frequency: float = 5.9, effective_height: float = 0.5):
    h_eff = effective_height
    return (40.0 * np.log10(d) + 9.45 - 17.3 * math.log10(h_eff) - 17.3 * math.log10(h_eff)
            + 2.7 * math.log10(carrier_frequency / 5.0))


def pathloss(d, config: RadioConfig = RadioConfig()):
    """WINNER+ B1 LOS path loss in dB; scalar or array distances in meters.

    Distances below 3 m are clamped to 3 m.
    """
    scalar = np.ndim(d) == 0
    d = np.maximum(np.asarray(d, dtype=float), D_MIN)
    near = first_slope_loss(d, config.carrier_frequency)
    far = second_slope_loss(d, config.carrier_frequency, config.effective_height)
    loss = np.where(d <= config.breakpoint_distance, near, far)
    return float(loss) if scalar else loss


def received_power(tx_power: float, d, shadow=0.0, config: RadioConfig = RadioConfig()):
    return tx_power - pathloss(d, config) + shadow


def noise_floor(config: RadioConfig = RadioConfig()) -> float:
    """Thermal noise plus noise figure over one subchannel, in dBm."""
    bw_hz = config.rbs_per_subchannel * RB_BANDWIDTH_HZ
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bw_hz) + config.noise_figure


def subchannel_srssi(contributions, noise_dbm: float) -> float:
    """Total received power on one subchannel in one subframe (dBm)."""
    return power_sum_dbm(list(contributions) + [noise_dbm])


def sinr_db(signal_dbm: float, interferer_powers, noise_dbm: float) -> float:
    denom = dbm_to_mw(noise_dbm) + dbm_to_mw(np.asarray(interferer_powers, dtype=float)).sum()
    return float(signal_dbm - mw_to_dbm(denom))


def decode(target_rx: RxSample | float, interferer_powers, config: RadioConfig = RadioConfig(),
           receiver_transmitting: bool = False) -> bool:
    """SINR threshold decision; a transmitting receiver never decodes (half duplex)."""
    if receiver_transmitting:
        return False
    signal = target_rx.rsrp if isinstance(target_rx, RxSample) else float(target_rx)
    return sinr_db(signal, interferer_powers, noise_floor(config)) >= config.sinr_threshold


def decode_range(config: RadioConfig = RadioConfig(), step: float = 0.01) -> float:
    """Largest distance at which a lone, unshadowed transmission still decodes."""
    budget = config.tx_power - noise_floor(config) - config.sinr_threshold
    lo, hi = D_MIN, 1e5
    if pathloss(lo, config) > budget:
        return 0.0
    while hi - lo > step:
        mid = 0.5 * (lo + hi)
        if pathloss(mid, config) <= budget:
            lo = mid
        else:
            hi = mid
    return lo
