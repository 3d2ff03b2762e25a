"""Domain types shared by the ingest, detector, eval and synth modules.

Sample indices are 0-based everywhere; pattern and label ids are 1-based.
All spans are inclusive on both ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np


class CasesegError(Exception):
    """Base class for all errors raised by this package."""


class InputError(CasesegError):
    """Malformed or unreadable input data (CLI exit code 2)."""


class SchemaError(InputError):
    """A required column is missing from a table."""

    def __init__(self, column, message: Optional[str] = None):
        self.column = column
        super().__init__(message or f"missing column: {column!r}")


class RowParseError(InputError):
    """A data cell could not be parsed. ``row`` is 1-based over data rows."""

    def __init__(self, row: int, column, cell: str, reason: str = ""):
        self.row = row
        self.column = column
        self.cell = cell
        detail = f" ({reason})" if reason else ""
        super().__init__(f"row {row}: cannot parse {column!r} cell {cell!r}{detail}")


class OrderingError(InputError):
    """Timestamps go backwards."""


class ContractError(CasesegError, ValueError):
    """A precondition of an operation was violated (CLI exit code 3)."""


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A single sensor channel.

    Attributes:
        name: Channel label, e.g. ``"Location"``.
        timestamps: Epoch seconds (int64), non-decreasing.
        values: Finite float64 readings.
    """

    name: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = _frozen_array(self.timestamps, np.int64)
        vs = _frozen_array(self.values, np.float64)
        if ts.shape != vs.shape:
            raise ContractError(
                f"timestamps ({ts.size}) and values ({vs.size}) differ in length"
            )
        if ts.size > 1 and np.any(np.diff(ts) < 0):
            raise ContractError("timestamps must be non-decreasing")
        if not np.all(np.isfinite(vs)):
            raise ContractError("values must be finite")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vs)

    @classmethod
    def from_values(cls, values, name: str = "value", start: int = 0, step: int = 1):
        """Build a series with evenly spaced synthetic timestamps."""
        n = len(values)
        return cls(name, start + step * np.arange(n, dtype=np.int64), values)

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def take(self, mask_or_index) -> "TimeSeries":
        return TimeSeries(self.name, self.timestamps[mask_or_index], self.values[mask_or_index])


@dataclass(frozen=True)
class DetectorParams:
    """Parameters of the short-term-mean pattern detector.

    ``y_th`` and ``lwz_th`` are the minimum pattern height and length.
    ``look_ahead`` and ``decrease_margin`` define how the post-pattern
    decrease is tested. ``closure`` selects where a recognised pattern ends:

    * ``"minimum"`` (default): the end is carried forward from the trigger
      sample to the next local minimum of the look-ahead mean, i.e. the
      point where the forward mean rises more than ``rise_tolerance``
      (defaults to ``y_th``) above its running minimum.
    * ``"first"``: the pattern ends at the first sample meeting all three
      conditions.

    ``use_increments`` runs the detector on one-sample differences instead of
    raw values. ``snap_radius > 0`` moves each pattern start forward to the
    lowest sample within that many samples.
    """

    y_th: float = 10.3
    lwz_th: int = 100
    look_ahead: int = 30
    decrease_margin: float = 0.0
    emit_partial_tail: bool = False
    closure: str = "minimum"
    rise_tolerance: Optional[float] = None
    use_increments: bool = False
    snap_radius: int = 0

    def __post_init__(self):
        if not isinstance(self.lwz_th, (int, np.integer)) or self.lwz_th < 1:
            raise ContractError(f"lwz_th must be an integer >= 1, got {self.lwz_th!r}")
        if not isinstance(self.look_ahead, (int, np.integer)) or self.look_ahead < 1:
            raise ContractError(f"look_ahead must be an integer >= 1, got {self.look_ahead!r}")
        if not math.isfinite(self.y_th):
            raise ContractError("y_th must be finite")
        if not (math.isfinite(self.decrease_margin) and self.decrease_margin >= 0):
            raise ContractError("decrease_margin must be finite and >= 0")
        if self.closure not in ("minimum", "first"):
            raise ContractError(f"closure must be 'minimum' or 'first', got {self.closure!r}")
        if self.rise_tolerance is not None and not (
            math.isfinite(self.rise_tolerance) and self.rise_tolerance >= 0
        ):
            raise ContractError("rise_tolerance must be finite and >= 0")
        if not isinstance(self.snap_radius, (int, np.integer)) or self.snap_radius < 0:
            raise ContractError("snap_radius must be an integer >= 0")

    @property
    def effective_rise_tolerance(self) -> float:
        return self.y_th if self.rise_tolerance is None else self.rise_tolerance


@dataclass(frozen=True)
class DetectorState:
    """Open candidate ``[t_p, t]`` with a compensated running sum."""

    t_p: int
    running_sum: float
    lwz: int
    compensation: float = 0.0

    @classmethod
    def open(cls, t_p: int, first_value: float) -> "DetectorState":
        return cls(t_p=t_p, running_sum=float(first_value), lwz=1)

    @property
    def t(self) -> int:
        return self.t_p + self.lwz - 1

    @property
    def y_msh(self) -> float:
        return (self.running_sum + self.compensation) / self.lwz


@dataclass(frozen=True)
class Pattern:
    id: int
    start: int
    end: int
    mean_at_detection: float
    partial: bool = False

    def __post_init__(self):
        if self.end < self.start:
            raise ContractError(f"pattern {self.id}: end {self.end} < start {self.start}")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


class SegmentKind(str, Enum):
    CYCLE = "cycle"
    OUTLIER = "outlier"


@dataclass(frozen=True)
class LabelSegment:
    id: int
    start: int
    end: int
    kind: SegmentKind = SegmentKind.CYCLE

    def __post_init__(self):
        if self.end < self.start:
            raise ContractError(f"label {self.id}: end {self.end} < start {self.start}")
        object.__setattr__(self, "kind", SegmentKind(self.kind))

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def check_spans(spans: Sequence, length: Optional[int] = None, what: str = "span") -> None:
    """Raise ContractError unless spans are ordered, disjoint and inside [0, length)."""
    prev_end = -1
    for s in spans:
        if s.start < 0 or (length is not None and s.end >= length):
            raise ContractError(f"{what} {s.id} [{s.start}, {s.end}] out of range [0, {length})")
        if s.start <= prev_end:
            raise ContractError(f"{what} {s.id} overlaps or precedes the previous {what}")
        prev_end = s.end


@dataclass(frozen=True, eq=False)
class CaseAssignment:
    """Per-sample case id; 0 marks a sample outside every pattern."""

    case_ids: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "case_ids", _frozen_array(self.case_ids, np.int64))

    def __len__(self) -> int:
        return int(self.case_ids.size)

    def __eq__(self, other):
        if not isinstance(other, CaseAssignment):
            return NotImplemented
        return np.array_equal(self.case_ids, other.case_ids)

    __hash__ = None

    def as_list(self) -> list[Optional[int]]:
        return [int(c) if c else None for c in self.case_ids]

    @property
    def assigned(self) -> np.ndarray:
        return self.case_ids > 0


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ContractError("confusion counts must be non-negative")


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Sample-level comparison of detected patterns with truth segments.

    ``missed_truth_samples`` counts truth-labelled samples that carry no
    predicted case id. They are not part of the headline recall;
    ``recall_with_missed`` is the recall obtained if they were added to FN.
    """

    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float
    overlap: np.ndarray
    matching: list = field(default_factory=list)
    degenerate: bool = False
    truth_kinds: dict = field(default_factory=dict)
    missed_truth_samples: int = 0
    recall_with_missed: float = 0.0

    def to_dict(self) -> dict:
        return {
            "counts": {"tp": self.counts.tp, "fp": self.counts.fp, "fn": self.counts.fn},
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "degenerate": self.degenerate,
            "matching": [
                {"truth_id": t, "pattern_id": p, "truth_kind": self.truth_kinds.get(t, "cycle")}
                for t, p in self.matching
            ],
            "footnote": {
                "missed_truth_samples": self.missed_truth_samples,
                "recall_with_missed": self.recall_with_missed,
            },
        }
