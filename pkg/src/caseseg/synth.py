"""Synthetic cyclic signals with exact ground-truth cycle labels.

Each cycle is a trapezoid: a linear ramp from 0 up to ``peak``, a dwell at
the peak, a ramp back down to 0 and a dwell at 0. The two ramps share the
``period - 2 * dwell`` remaining samples (the descent gets the odd sample).
"""

from __future__ import annotations

import math

import numpy as np

from .core import ContractError, LabelSegment, SegmentKind, TimeSeries

# 2024-01-10 00:00:00 UTC
DEFAULT_START = 1_704_844_800


def cycle_template(period: int, peak: float, dwell: int) -> np.ndarray:
    ramp_up = (period - 2 * dwell) // 2
    ramp_down = period - 2 * dwell - ramp_up
    up = peak * np.arange(ramp_up) / ramp_up if ramp_up else np.empty(0)
    down = peak * (1.0 - np.arange(1, ramp_down + 1) / ramp_down)
    return np.concatenate([up, np.full(dwell, float(peak)), down, np.zeros(dwell)])


def generate_cyclic_series(
    n_cycles: int,
    period: int = 3000,
    peak: float = 250.0,
    dwell: int = 200,
    noise_sigma: float = 0.0,
    seed=None,
    name: str = "location",
    start_timestamp: int = DEFAULT_START,
) -> tuple[TimeSeries, list[LabelSegment]]:
    """Return ``n_cycles`` concatenated trapezoid cycles and one label per cycle.

    Gaussian noise is added and the result clamped at 0. Only the noise is
    random, so ``noise_sigma=0`` output does not depend on ``seed``.
    """
    if int(n_cycles) != n_cycles or n_cycles < 0:
        raise ContractError(f"n_cycles must be a non-negative integer, got {n_cycles!r}")
    if int(period) != period or int(dwell) != dwell or dwell < 0:
        raise ContractError("period and dwell must be integers, dwell >= 0")
    if period <= 2 * dwell:
        raise ContractError(f"period ({period}) must exceed 2 * dwell ({2 * dwell})")
    if not (math.isfinite(peak) and peak > 0):
        raise ContractError("peak must be positive")
    if not (math.isfinite(noise_sigma) and noise_sigma >= 0):
        raise ContractError("noise_sigma must be >= 0")
    n_cycles, period, dwell = int(n_cycles), int(period), int(dwell)

    values = np.tile(cycle_template(period, peak, dwell), n_cycles)
    if noise_sigma > 0 and values.size:
        rng = np.random.default_rng(seed)
        values = np.maximum(values + rng.normal(0.0, noise_sigma, values.size), 0.0)
    timestamps = start_timestamp + np.arange(values.size, dtype=np.int64)
    labels = [
        LabelSegment(k + 1, k * period, (k + 1) * period - 1, SegmentKind.CYCLE)
        for k in range(n_cycles)
    ]
    return TimeSeries(name, timestamps, values), labels


def inject_outliers(series: TimeSeries, count: int, spike_value: float, seed=None) -> TimeSeries:
    """Overwrite ``count`` distinct, uniformly drawn samples with ``spike_value``."""
    n = len(series)
    if int(count) != count or not 0 <= count <= n:
        raise ContractError(f"count must be an integer in [0, {n}], got {count!r}")
    if n and not spike_value > float(series.values.max()):
        raise ContractError("spike_value must exceed every value in the series")
    if count == 0:
        return series
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=int(count), replace=False)
    values = series.values.copy()
    values[idx] = spike_value
    return TimeSeries(series.name, series.timestamps, values)
