"""Seeded synthetic 10-minute SCADA data with planted generator-heating faults."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr

from .errors import ConfigError
from .scada import (
    AMBIENT_CHANNEL,
    ORIGINAL_CHANNELS,
    PERIOD_SECONDS,
    StatusEvent,
    TimeSeriesTable,
)

AIR_DENSITY = 1.225
POWER_COEFFICIENT = 0.42
CUT_IN = 3.5
CUT_OUT = 25.0
TIP_SPEED_RATIO = 7.0
WIND_AR = 0.8
ROWS_PER_DAY = 144

FAULT_CODE = "GEN_HEATING"
RUN_CODE = "RUN"

# channel: (baseline degC, gain per unit load degC, ambient coupling, noise std degC)
TEMPERATURE_MODEL = {
    "temp_gen_stator": (30.0, 40.0, 1.0, 0.6),
    "temp_gen_rotor": (27.0, 38.0, 1.0, 0.6),
    "temp_nacelle": (8.0, 10.0, 1.0, 0.5),
    "temp_front_hub_bearing": (12.0, 14.0, 0.9, 0.5),
    "temp_rear_hub_bearing": (10.0, 12.0, 0.9, 0.5),
    "temp_nacelle_control_cabinet": (14.0, 6.0, 0.8, 0.4),
    "temp_control_cabinet": (20.0, 3.0, 0.4, 0.4),
    "temp_tower": (4.0, 2.0, 0.95, 0.4),
    "temp_transformer": (18.0, 28.0, 0.9, 0.6),
}
# Share of the stator excess that reaches the rotor, one row later.
ROTOR_FAULT_SHARE = 0.4
FAULT_RISE_ROWS = 2
FAULT_DECAY_ROWS = 0.5
# First-order thermal lag between electrical load and component temperatures.
THERMAL_TIME_ROWS = 6.0


@dataclass(frozen=True)
class FaultEpisode:
    start_row: int
    duration_rows: int
    severity: float

    def __post_init__(self):
        if self.start_row < 0:
            raise ConfigError("fault episode start_row must be >= 0")
        if self.duration_rows < 1:
            raise ConfigError("fault episode duration_rows must be positive")
        if not self.severity > 0:
            raise ConfigError("fault episode severity must be > 0")

    @property
    def end_row(self) -> int:
        return self.start_row + self.duration_rows


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_rows: int = 20000
    rated_power: float = 900.0
    rotor_diameter: float = 52.0
    weibull_shape: float = 2.0
    weibull_scale: float = 8.0
    fault_episodes: tuple[FaultEpisode, ...] = ()
    noise_scale: dict = field(default_factory=dict)
    missing_probability: float = 0.0
    start_time: datetime = datetime(2015, 1, 1)

    def __post_init__(self):
        object.__setattr__(self, "fault_episodes", tuple(self.fault_episodes))
        if self.n_rows < 12:
            raise ConfigError("n_rows must be >= 12")
        if not self.rated_power > 0:
            raise ConfigError("rated_power must be > 0")
        if not self.rotor_diameter > 0:
            raise ConfigError("rotor_diameter must be > 0")
        if not (self.weibull_shape > 0 and self.weibull_scale > 0):
            raise ConfigError("Weibull parameters must be > 0")
        if not 0.0 <= self.missing_probability < 1.0:
            raise ConfigError("missing_probability must be in [0, 1)")
        unknown = set(self.noise_scale) - set(ORIGINAL_CHANNELS)
        if unknown:
            raise ConfigError(f"noise_scale names unknown channel '{sorted(unknown)[0]}'")
        episodes = sorted(self.fault_episodes, key=lambda e: e.start_row)
        for e in episodes:
            if e.end_row > self.n_rows:
                raise ConfigError(f"fault episode at row {e.start_row} runs past n_rows")
        for a, b in zip(episodes, episodes[1:]):
            if b.start_row < a.end_row:
                raise ConfigError(
                    f"overlapping fault episodes at rows {a.start_row} and {b.start_row}"
                )

    @property
    def swept_area(self) -> float:
        return math.pi * (self.rotor_diameter / 2) ** 2


def plan_fault_episodes(
    n_rows: int,
    count: int,
    seed: int,
    min_rows: int = 4,
    max_rows: int = 12,
    severity: tuple[float, float] = (12.0, 25.0),
) -> tuple[FaultEpisode, ...]:
    """Spread ``count`` non-overlapping episodes over the series, one per equal block."""
    if count < 0 or min_rows < 1 or max_rows < min_rows:
        raise ConfigError("invalid fault plan")
    if count == 0:
        return ()
    block = n_rows // count
    if block < max_rows + 8:
        raise ConfigError(f"{count} episodes of up to {max_rows} rows do not fit in {n_rows} rows")
    rng = np.random.default_rng([seed, 0xFA017])
    episodes = []
    for k in range(count):
        duration = int(rng.integers(min_rows, max_rows + 1))
        # keep clear of block edges so decay tails never touch the next episode
        start = k * block + int(rng.integers(6, block - duration - 1))
        sev = float(rng.uniform(*severity))
        episodes.append(FaultEpisode(start, duration, round(sev, 3)))
    return tuple(episodes)


def power_curve(v, rated_power, swept_area):
    """Capped cubic power curve in kW, zero outside [cut-in, cut-out]."""
    v = np.asarray(v, dtype=np.float64)
    p = 0.5 * AIR_DENSITY * swept_area * v**3 * POWER_COEFFICIENT / 1000.0
    p = np.minimum(p, rated_power)
    return np.where((v >= CUT_IN) & (v <= CUT_OUT), p, 0.0)


def _rated_wind(rated_power, swept_area):
    return (rated_power * 1000.0 / (0.5 * AIR_DENSITY * swept_area * POWER_COEFFICIENT)) ** (1 / 3)


def _rotor_speed(v, rated_power, rotor_diameter, swept_area):
    radius = rotor_diameter / 2
    rpm = TIP_SPEED_RATIO * np.asarray(v) * 60.0 / (2 * math.pi * radius)
    rated_rpm = TIP_SPEED_RATIO * _rated_wind(rated_power, swept_area) * 60.0 / (2 * math.pi * radius)
    rpm = np.minimum(rpm, rated_rpm)
    return np.where((v >= CUT_IN) & (v <= CUT_OUT), rpm, 0.0)


def _ar1(rng, n, phi, std):
    """Stationary AR(1) series with marginal standard deviation ``std``."""
    eps = rng.standard_normal(n) * std * math.sqrt(1 - phi**2)
    eps[0] = rng.standard_normal() * std
    return lfilter([1.0], [1.0, -phi], eps)


def _ordered_triple(lo, mid, hi):
    stacked = np.stack([lo, mid, hi])
    return stacked.min(axis=0), mid, stacked.max(axis=0)


def fault_excess(n_rows, episodes):
    """Stator and rotor temperature excess (degC) produced by the fault episodes."""
    stator = np.zeros(n_rows)
    for e in episodes:
        rise = min(FAULT_RISE_ROWS, e.duration_rows)
        j = np.arange(e.duration_rows)
        ramp = e.severity * np.minimum(1.0, (j + 1) / rise)
        stator[e.start_row:e.end_row] = np.maximum(stator[e.start_row:e.end_row], ramp)
        tail = np.arange(1, 7)
        decay = e.severity * np.exp(-tail / FAULT_DECAY_ROWS)
        stop = min(n_rows, e.end_row + len(tail))
        seg = slice(e.end_row, stop)
        stator[seg] = np.maximum(stator[seg], decay[: stop - e.end_row])
    rotor = np.zeros(n_rows)
    rotor[1:] = ROTOR_FAULT_SHARE * stator[:-1]
    return stator, rotor


def generate(config: SynthConfig) -> tuple[TimeSeriesTable, list[StatusEvent]]:
    """Produce the 22 original channels plus matching status events."""
    n = config.n_rows
    rng = np.random.default_rng([config.seed, 0x5CADA])
    noise = {c: float(config.noise_scale.get(c, 1.0)) for c in ORIGINAL_CHANNELS}
    area = config.swept_area
    cols: dict[str, np.ndarray] = {}

    # wind: AR(1) Gaussian pushed through the Weibull quantile function
    z = _ar1(rng, n, WIND_AR, 1.0)
    u = np.clip(ndtr(z), 1e-12, 1 - 1e-12)
    v_avg = config.weibull_scale * (-np.log1p(-u)) ** (1 / config.weibull_shape)
    gust_up = 0.10 + 0.10 * np.abs(rng.standard_normal(n)) * noise["wind_speed_max"]
    gust_down = 0.10 + 0.10 * np.abs(rng.standard_normal(n)) * noise["wind_speed_min"]
    v_max = v_avg * (1 + gust_up)
    v_min = v_avg * np.clip(1 - gust_down, 0.0, 1.0)
    cols["wind_speed_min"], cols["wind_speed_avg"], cols["wind_speed_max"] = v_min, v_avg, v_max

    rpm = [_rotor_speed(v, config.rated_power, config.rotor_diameter, area) for v in (v_min, v_avg, v_max)]
    rpm_avg = np.clip(rpm[1] * (1 + 0.01 * noise["rotor_speed_avg"] * rng.standard_normal(n)), 0, None)
    cols["rotor_speed_min"], cols["rotor_speed_avg"], cols["rotor_speed_max"] = _ordered_triple(
        rpm[0], rpm_avg, rpm[2]
    )

    p = [power_curve(v, config.rated_power, area) for v in (v_min, v_avg, v_max)]
    p_avg = np.clip(p[1] * (1 + 0.02 * noise["power_avg"] * rng.standard_normal(n)), 0, config.rated_power)
    cols["power_min"], cols["power_avg"], cols["power_max"] = _ordered_triple(p[0], p_avg, p[2])

    energy_diff = np.round(p_avg / 6.0, 3)
    cols["energy_total"] = np.round(1.0e6 + np.cumsum(energy_diff), 3)
    cols["energy_diff"] = energy_diff

    heading = rng.uniform(0, 360) + np.cumsum(rng.standard_normal(n) * 5.0 * noise["nacelle_position"])
    cols["nacelle_position"] = np.mod(heading, 360.0)

    t = np.arange(n)
    ambient = (
        10.0
        + 8.0 * np.sin(2 * math.pi * t / (ROWS_PER_DAY * 365.0))
        + 4.0 * np.sin(2 * math.pi * (t / ROWS_PER_DAY - 0.3))
        + _ar1(rng, n, 0.95, 1.0 * noise[AMBIENT_CHANNEL])
    )
    a = math.exp(-1.0 / THERMAL_TIME_ROWS)
    load_now = p_avg / config.rated_power
    load = lfilter([1 - a], [1.0, -a], load_now, zi=[a * load_now[0]])[0]
    stator_excess, rotor_excess = fault_excess(n, config.fault_episodes)
    for c, (base, gain, coupling, std) in TEMPERATURE_MODEL.items():
        temp = base + gain * load + coupling * ambient + _ar1(rng, n, 0.7, std * noise[c])
        if c == "temp_gen_stator":
            temp = temp + stator_excess
        elif c == "temp_gen_rotor":
            temp = temp + rotor_excess
        cols[c] = temp
    cols[AMBIENT_CHANNEL] = ambient

    values = np.column_stack([cols[c] for c in ORIGINAL_CHANNELS])
    if config.missing_probability > 0:
        miss_rng = np.random.default_rng([config.seed, 0x0DD])
        values[miss_rng.random(values.shape) < config.missing_probability] = np.nan
    table = TimeSeriesTable(config.start_time, ORIGINAL_CHANNELS, values)

    period = timedelta(seconds=PERIOD_SECONDS)
    events = [StatusEvent(config.start_time, RUN_CODE, False)]
    for e in sorted(config.fault_episodes, key=lambda e: e.start_row):
        events.append(StatusEvent(config.start_time + e.start_row * period, FAULT_CODE, True))
        events.append(StatusEvent(config.start_time + e.end_row * period, RUN_CODE, False))
    return table, events
