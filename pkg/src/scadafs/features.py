"""Constructed feature families: differences, lags, moving statistics and
knowledge-based quantities derived from the 22 original SCADA channels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError
from .scada import (
    NACELLE_CHANNEL,
    ORIGINAL_CHANNELS,
    POWER_CHANNELS,
    WIND_CHANNELS,
    FeatureDescriptor,
    FeatureMatrix,
    TimeSeriesTable,
)

STATS = ("moving_mean", "moving_std", "moving_median")

_TRIPLES = {
    "wind_speed": ("wind_speed_min", "wind_speed_avg", "wind_speed_max"),
    "rotor_speed": ("rotor_speed_min", "rotor_speed_avg", "rotor_speed_max"),
    "power": ("power_min", "power_avg", "power_max"),
}

# (minuend, subtrahend) for every difference column, in output order.
DIFFERENCE_PAIRS = tuple(
    pair
    for lo, avg, hi in _TRIPLES.values()
    for pair in ((hi, lo), (hi, avg), (avg, lo))
) + (
    ("temp_gen_stator", "temp_gen_rotor"),
    ("temp_gen_rotor", "temp_nacelle"),
    ("temp_gen_rotor", "temp_transformer"),
    ("temp_gen_stator", "temp_nacelle"),
    ("temp_gen_stator", "temp_transformer"),
    ("temp_front_hub_bearing", "temp_rear_hub_bearing"),
    ("temp_nacelle", "temp_tower"),
    ("temp_nacelle_control_cabinet", "temp_control_cabinet"),
)

STATOR_ROTOR_DIFF = "temp_gen_stator-temp_gen_rotor"


def difference_id(a: str, b: str) -> str:
    return f"{a}-{b}"


def lag_id(channel: str, k: int) -> str:
    return f"{channel}_lag{k}"


def moving_id(channel: str, stat: str, window: int) -> str:
    return f"{channel}_{stat}_w{window}"


@dataclass(frozen=True)
class KnowledgeConfig:
    air_density: float = 1.225
    swept_area: float = math.pi * (52.0 / 2) ** 2

    def __post_init__(self):
        if not (self.air_density > 0 and self.swept_area > 0):
            raise ConfigError("air_density and swept_area must be > 0")


@dataclass(frozen=True)
class ConstructionConfig:
    lag_steps: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    stat_windows: tuple[int, ...] = (2, 3, 6)
    stats: tuple[str, ...] = STATS
    knowledge: KnowledgeConfig = field(default_factory=KnowledgeConfig)

    def __post_init__(self):
        lags = tuple(sorted(set(int(k) for k in self.lag_steps)))
        windows = tuple(sorted(set(int(w) for w in self.stat_windows)))
        stats = tuple(s for s in STATS if s in set(self.stats))
        if not lags or not windows or not stats:
            raise ConfigError("lag_steps, stat_windows and stats must be non-empty")
        if lags[0] < 1:
            raise ConfigError("lag must be >= 1")
        if windows[0] < 2:
            raise ConfigError("stat windows must be >= 2 rows")
        unknown = set(self.stats) - set(STATS)
        if unknown:
            raise ConfigError(f"unknown statistic '{sorted(unknown)[0]}'")
        object.__setattr__(self, "lag_steps", lags)
        object.__setattr__(self, "stat_windows", windows)
        object.__setattr__(self, "stats", stats)


def build_difference_features(table: TimeSeriesTable) -> FeatureMatrix:
    cols, catalog = [], []
    for a, b in DIFFERENCE_PAIRS:
        cols.append(table.column(a) - table.column(b))
        catalog.append(FeatureDescriptor(difference_id(a, b), "difference", f"{a} minus {b}"))
    return FeatureMatrix(catalog, np.column_stack(cols))


def shift(values: np.ndarray, k: int) -> np.ndarray:
    """Column shifted down by ``k`` rows, NaN-padded at the top."""
    out = np.full(len(values), np.nan)
    if k < len(values):
        out[k:] = values[: len(values) - k]
    return out


def build_lag_features(table: TimeSeriesTable, lag_steps) -> FeatureMatrix:
    lag_steps = sorted(set(int(k) for k in lag_steps))
    if not lag_steps or lag_steps[0] < 1:
        raise ConfigError("lag must be >= 1")
    cols, catalog = [], []
    for c in table.channel_ids:
        x = table.column(c)
        for k in lag_steps:
            cols.append(shift(x, k))
            catalog.append(FeatureDescriptor(lag_id(c, k), "lag", f"{c} delayed {10 * k} min"))
    return FeatureMatrix(catalog, np.column_stack(cols))


def moving_stat(values: np.ndarray, window: int, stat: str) -> np.ndarray:
    """Trailing statistic over the last ``window`` rows, current row included.

    Rows without a full window, or with a missing value inside it, are NaN.
    ``moving_std`` divides by ``window``; ``moving_var`` is its square.
    """
    n = len(values)
    out = np.full(n, np.nan)
    if n < window:
        return out
    view = sliding_window_view(values, window)
    if stat == "moving_mean":
        res = view.mean(axis=1)
    elif stat == "moving_std":
        res = view.std(axis=1)
    elif stat == "moving_var":
        res = view.std(axis=1) ** 2
    elif stat == "moving_median":
        res = np.median(view, axis=1)
    else:
        raise ConfigError(f"unknown statistic '{stat}'")
    res[np.isnan(view).any(axis=1)] = np.nan
    out[window - 1:] = res
    return out


def build_moving_stats(table: TimeSeriesTable, windows, stats=STATS) -> FeatureMatrix:
    windows = sorted(set(int(w) for w in windows))
    if not windows or windows[0] < 2:
        raise ConfigError("stat windows must be >= 2 rows")
    stats = [s for s in STATS if s in set(stats)]
    cols, catalog = [], []
    for c in table.channel_ids:
        x = table.column(c)
        for w in windows:
            for s in stats:
                cols.append(moving_stat(x, w, s))
                catalog.append(
                    FeatureDescriptor(moving_id(c, s, w), "moving_stat", f"{10 * w}-min trailing {s[7:]} of {c}")
                )
    return FeatureMatrix(catalog, np.column_stack(cols))


def available_power(v, cfg: KnowledgeConfig) -> np.ndarray:
    """Kinetic power flux through the swept area, in kW (power channels are kW)."""
    return 0.5 * cfg.air_density * cfg.swept_area * np.asarray(v, dtype=np.float64) ** 3 / 1000.0


def build_knowledge_features(table: TimeSeriesTable, cfg: KnowledgeConfig = KnowledgeConfig()) -> FeatureMatrix:
    cols, catalog = [], []
    avail = {}
    for v_ch, tag in zip(WIND_CHANNELS, ("min", "avg", "max")):
        avail[tag] = available_power(table.column(v_ch), cfg)
        cols.append(avail[tag])
        catalog.append(
            FeatureDescriptor(f"available_power_{tag}", "knowledge", f"0.5*rho*A*v^3 [kW] from {v_ch}")
        )
    for p_ch, tag in zip(POWER_CHANNELS, ("min", "avg", "max")):
        denom = avail[tag]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = table.column(p_ch) / denom
        ratio[~(denom >= 1e-3)] = np.nan  # available power below 1 W
        cols.append(ratio)
        catalog.append(
            FeatureDescriptor(f"power_ratio_{tag}", "knowledge", f"{p_ch} / available_power_{tag}")
        )
    theta = np.deg2rad(table.column(NACELLE_CHANNEL))
    cols += [np.sin(theta), np.cos(theta)]
    catalog += [
        FeatureDescriptor("nacelle_sin", "knowledge", f"sin({NACELLE_CHANNEL})"),
        FeatureDescriptor("nacelle_cos", "knowledge", f"cos({NACELLE_CHANNEL})"),
    ]
    return FeatureMatrix(catalog, np.column_stack(cols))


def construct_all(table: TimeSeriesTable, cfg: ConstructionConfig = ConstructionConfig()) -> FeatureMatrix:
    """[originals | differences | lags | moving stats | knowledge] over the 22 original channels."""
    missing = [c for c in ORIGINAL_CHANNELS if not table.has(c)]
    if missing:
        raise ConfigError(f"missing source channel '{missing[0]}'")
    if table.channel_ids != ORIGINAL_CHANNELS:
        cols = [table.channel_ids.index(c) for c in ORIGINAL_CHANNELS]
        table = TimeSeriesTable(table.start_time, ORIGINAL_CHANNELS, table.values[:, cols])
    return FeatureMatrix.hstack(
        [
            table.to_feature_matrix(),
            build_difference_features(table),
            build_lag_features(table, cfg.lag_steps),
            build_moving_stats(table, cfg.stat_windows, cfg.stats),
            build_knowledge_features(table, cfg.knowledge),
        ]
    )
