"""Single-pass cycle detection by short-term mean thresholding.

A candidate opens at ``t_p`` (0, or one past the previous pattern) and its
running mean ``y_msh`` over ``values[t_p..t]`` is updated sample by sample.
The candidate is recognised as a pattern at the first ``t`` where

* its length ``t - t_p + 1`` exceeds ``lwz_th``,
* ``y_msh`` exceeds ``y_th``, and
* the mean of the next ``look_ahead`` samples is below ``y_msh - decrease_margin``.

With ``closure="first"`` the pattern ends at that ``t``. With the default
``closure="minimum"`` the end is carried through the decline to the next
local minimum of the look-ahead mean, so consecutive patterns meet where
the signal turns upward again.

:func:`detect_patterns_reference` recomputes every mean from scratch and
exists as a test oracle for :func:`detect_patterns`.
"""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np

from .core import (
    CaseAssignment,
    ContractError,
    DetectorParams,
    DetectorState,
    Pattern,
    TimeSeries,
    check_spans,
)

REFERENCE_MAX_LENGTH = 100_000

SeriesLike = Union[TimeSeries, Sequence[float], np.ndarray]


def _as_array(series: SeriesLike) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=np.float64)


def detector_input(series: SeriesLike, params: DetectorParams) -> list[float]:
    """Values the detector scans: raw readings, or one-sample increments."""
    values = _as_array(series)
    if params.use_increments and values.size:
        values = np.diff(values, prepend=values[0])
    return values.tolist()


def short_term_mean(state: DetectorState, next_value: float) -> DetectorState:
    """Extend the open candidate by one sample (Neumaier-compensated sum)."""
    s, c, x = state.running_sum, state.compensation, float(next_value)
    total = s + x
    if abs(s) >= abs(x):
        c += (s - total) + x
    else:
        c += (x - total) + s
    return DetectorState(t_p=state.t_p, running_sum=total, lwz=state.lwz + 1, compensation=c)


def _forward_mean(values: list[float], t: int, look_ahead: int) -> float:
    # caller guarantees t < len(values) - 1
    window = values[t + 1 : min(t + look_ahead, len(values) - 1) + 1]
    return math.fsum(window) / len(window)


def decrease_follows(series: SeriesLike, t: int, y_msh: float, params: DetectorParams) -> bool:
    """True iff the mean of the next ``look_ahead`` samples after ``t`` is below
    ``y_msh - decrease_margin``. Always False at the last sample."""
    values = series if isinstance(series, list) else _as_array(series).tolist()
    if not 0 <= t < len(values):
        raise ContractError(f"t={t} outside series of length {len(values)}")
    if t == len(values) - 1:
        return False
    return _forward_mean(values, t, params.look_ahead) < y_msh - params.decrease_margin


def _minimum_end(values: list[float], t: int, look_ahead: int, tolerance: float) -> int:
    last = len(values) - 1
    lowest = _forward_mean(values, t, look_ahead)
    e = t + 1
    while e < last:
        f = _forward_mean(values, e, look_ahead)
        if f > lowest + tolerance:
            return e
        if f < lowest:
            lowest = f
        e += 1
    return last


def _snap_starts(values: list[float], patterns: list[Pattern], params: DetectorParams) -> list[Pattern]:
    out = []
    for p in patterns:
        limit = p.end if p.partial else p.end - params.lwz_th
        hi = min(p.start + params.snap_radius, limit)
        start = p.start
        if hi > p.start:
            window = values[p.start : hi + 1]
            start = p.start + int(np.argmin(window))
        out.append(Pattern(p.id, start, p.end, p.mean_at_detection, p.partial))
    return out


def detect_patterns(series: SeriesLike, params: DetectorParams = DetectorParams()) -> list[Pattern]:
    """Detect cyclic patterns in one pass over the series."""
    values = detector_input(series, params)
    n = len(values)
    last = n - 1
    lwz_th, y_th = params.lwz_th, params.y_th
    look_ahead, margin = params.look_ahead, params.decrease_margin
    first_closure = params.closure == "first"
    tolerance = params.effective_rise_tolerance

    patterns: list[Pattern] = []
    t_p = 0
    s = c = 0.0
    t = 0
    while t < n:
        x = values[t]
        total = s + x
        if abs(s) >= abs(x):
            c += (s - total) + x
        else:
            c += (x - total) + s
        s = total
        lwz = t - t_p + 1
        y_msh = (s + c) / lwz
        if (
            lwz > lwz_th
            and y_msh > y_th
            and t < last
            and _forward_mean(values, t, look_ahead) < y_msh - margin
        ):
            end = t if first_closure else _minimum_end(values, t, look_ahead, tolerance)
            patterns.append(Pattern(len(patterns) + 1, t_p, end, y_msh))
            t_p = t = end + 1
            s = c = 0.0
            continue
        t += 1

    if params.emit_partial_tail and t_p < n:
        tail = values[t_p:]
        patterns.append(
            Pattern(len(patterns) + 1, t_p, last, math.fsum(tail) / len(tail), partial=True)
        )
    if params.snap_radius:
        patterns = _snap_starts(values, patterns, params)
    return patterns


def detect_patterns_reference(
    series: SeriesLike, params: DetectorParams = DetectorParams()
) -> list[Pattern]:
    """Quadratic-time oracle: every mean is re-summed over its full index range."""
    values = detector_input(series, params)
    n = len(values)
    if n > REFERENCE_MAX_LENGTH:
        raise ContractError(f"reference detector limited to {REFERENCE_MAX_LENGTH} samples")

    def mean(lo, hi):
        return math.fsum(values[lo : hi + 1]) / (hi - lo + 1)

    def ahead(t):
        return mean(t + 1, min(t + params.look_ahead, n - 1))

    found = []
    t_p = 0
    t = 0
    while t < n:
        lwz = t - t_p + 1
        y_msh = mean(t_p, t)
        decreasing = t + 1 < n and ahead(t) < y_msh - params.decrease_margin
        if lwz > params.lwz_th and y_msh > params.y_th and decreasing:
            end = n - 1
            if params.closure == "first":
                end = t
            else:
                seen = [ahead(t)]
                for e in range(t + 1, n - 1):
                    f = ahead(e)
                    if f > min(seen) + params.effective_rise_tolerance:
                        end = e
                        break
                    seen.append(f)
            found.append(Pattern(len(found) + 1, t_p, end, y_msh))
            t_p = t = end + 1
            continue
        t += 1
    if params.emit_partial_tail and t_p < n:
        found.append(Pattern(len(found) + 1, t_p, n - 1, mean(t_p, n - 1), partial=True))
    if params.snap_radius:
        found = _snap_starts(values, found, params)
    return found


def assign_case_ids(series: Union[SeriesLike, int], patterns: Sequence[Pattern]) -> CaseAssignment:
    """Map every sample to the id of the pattern spanning it (0 = none)."""
    n = series if isinstance(series, (int, np.integer)) else len(_as_array(series))
    check_spans(patterns, n, "pattern")
    ids = np.zeros(n, dtype=np.int64)
    for p in patterns:
        ids[p.start : p.end + 1] = p.id
    return CaseAssignment(ids)
