"""Read sensor CSV files into a TimeSeries and drop out-of-range readings.

Timestamps are stored as epoch seconds. Naive wall-clock times (Table-style
``YY.MM.DD HH:MM:SS`` or ISO-8601 without offset) are interpreted as UTC so
that results do not depend on the machine's time zone.
"""

from __future__ import annotations

import calendar
import csv
import io
import math
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO, Iterable, Optional, Union

import numpy as np

from .core import InputError, OrderingError, RowParseError, SchemaError, TimeSeries

TIMESTAMP_FORMATS = ("table", "iso", "epoch")
TABLE_TS_FORMAT = "%y.%m.%d %H:%M:%S"

Column = Union[str, int]
Source = Union[str, os.PathLike, bytes, IO]


@dataclass(frozen=True)
class CsvSpec:
    """Where to find the time and value columns and how to read them.

    Columns may be given by header name or by 0-based position.
    """

    timestamp_col: Column = "timestamp"
    value_col: Column = "value"
    timestamp_format: str = "iso"
    delimiter: str = ","
    decimal_comma: bool = False
    name: Optional[str] = None

    def __post_init__(self):
        if self.timestamp_format not in TIMESTAMP_FORMATS:
            raise ValueError(
                f"timestamp_format must be one of {TIMESTAMP_FORMATS}, got {self.timestamp_format!r}"
            )


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8-sig")
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, "rb") as fh:
                return fh.read().decode("utf-8-sig")
        except OSError as exc:
            raise InputError(f"cannot read {os.fspath(source)!r}: {exc.strerror}") from exc
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8-sig")
    return data.lstrip("﻿")


def _resolve_column(header: list[str], col: Column) -> int:
    if isinstance(col, int):
        if not 0 <= col < len(header):
            raise SchemaError(col, f"column index {col} out of range (header has {len(header)})")
        return col
    stripped = [h.strip() for h in header]
    if col in stripped:
        return stripped.index(col)
    if isinstance(col, str) and col.isdigit() and int(col) < len(header):
        return int(col)
    raise SchemaError(col)


def parse_timestamp(cell: str, fmt: str) -> int:
    """Convert one timestamp cell to epoch seconds. Raises ValueError on failure."""
    cell = cell.strip()
    if fmt == "epoch":
        return int(cell)
    if fmt == "table":
        dt = datetime.strptime(cell, TABLE_TS_FORMAT)
    else:
        dt = datetime.fromisoformat(cell)
    if dt.tzinfo is not None:
        return int(dt.timestamp())
    return calendar.timegm(dt.timetuple())


def format_timestamp(ts: int, fmt: str = "iso") -> str:
    if fmt == "epoch":
        return str(int(ts))
    dt = datetime.fromtimestamp(int(ts), tz=timezone.utc)
    if fmt == "table":
        return dt.strftime(TABLE_TS_FORMAT)
    return dt.strftime("%Y-%m-%dT%H:%M:%S")


def parse_value(cell: str, decimal_comma: bool = False) -> float:
    text = cell.strip()
    if decimal_comma:
        text = text.replace(",", ".")
    if not text:
        raise ValueError("empty cell")
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("non-finite value")
    return value


def read_rows(source: Source, delimiter: str = ",") -> tuple[list[str], list[list[str]]]:
    """Return (header, data rows) of a delimiter-separated table.

    Blank lines are skipped. A source with no header yields ``([], [])``.
    """
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=delimiter)
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        return [], []
    return rows[0], rows[1:]


def parse_csv(source: Source, spec: CsvSpec = CsvSpec()) -> TimeSeries:
    """Parse a header-bearing sensor table into a TimeSeries.

    Raises:
        SchemaError: a configured column does not exist.
        RowParseError: a cell cannot be parsed; ``row`` is the 1-based data row.
        OrderingError: timestamps decrease somewhere.
    """
    header, rows = read_rows(source, spec.delimiter)
    if not header:
        raise SchemaError(spec.value_col, "input has no header row")
    ts_idx = _resolve_column(header, spec.timestamp_col)
    val_idx = _resolve_column(header, spec.value_col)
    name = spec.name or header[val_idx].strip()

    timestamps = np.empty(len(rows), dtype=np.int64)
    values = np.empty(len(rows), dtype=np.float64)
    for i, row in enumerate(rows):
        rownum = i + 1
        for idx, col in ((ts_idx, spec.timestamp_col), (val_idx, spec.value_col)):
            if idx >= len(row):
                raise RowParseError(rownum, col, "", "row too short")
        try:
            timestamps[i] = parse_timestamp(row[ts_idx], spec.timestamp_format)
        except (ValueError, OverflowError) as exc:
            raise RowParseError(rownum, spec.timestamp_col, row[ts_idx], str(exc)) from None
        try:
            values[i] = parse_value(row[val_idx], spec.decimal_comma)
        except ValueError as exc:
            raise RowParseError(rownum, spec.value_col, row[val_idx], str(exc)) from None
        if i and timestamps[i] < timestamps[i - 1]:
            raise OrderingError(
                f"row {rownum}: timestamp {row[ts_idx].strip()!r} is earlier than the previous row"
            )
    return TimeSeries(name, timestamps, values)


def write_csv(series: TimeSeries, dest, timestamp_format: str = "iso") -> None:
    """Write ``timestamp,<name>`` rows that ``parse_csv`` reads back unchanged."""
    close = False
    if isinstance(dest, (str, os.PathLike)):
        dest = open(dest, "w", newline="", encoding="utf-8")
        close = True
    try:
        writer = csv.writer(dest, lineterminator="\n")
        writer.writerow(["timestamp", series.name])
        for ts, v in zip(series.timestamps.tolist(), series.values.tolist()):
            writer.writerow([format_timestamp(ts, timestamp_format), repr(v)])
    finally:
        if close:
            dest.close()


def outlier_mask(series: TimeSeries, cap: float) -> np.ndarray:
    """Boolean mask of samples kept by :func:`clean_outliers`."""
    if not math.isfinite(cap):
        raise ValueError("cap must be finite")
    return series.values <= cap


def clean_outliers(series: TimeSeries, cap: float) -> tuple[TimeSeries, int]:
    """Drop every sample whose value exceeds ``cap``.

    Samples are removed, not clipped, so indices of the result refer to the
    cleaned series.
    """
    keep = outlier_mask(series, cap)
    cleaned = series.take(keep)
    return cleaned, len(series) - len(cleaned)


def iter_data_lines(text: str) -> Iterable[str]:
    """Physical lines of ``text`` after the header, blank lines skipped."""
    lines = [ln for ln in text.splitlines(keepends=True) if ln.strip()]
    return lines[1:]
