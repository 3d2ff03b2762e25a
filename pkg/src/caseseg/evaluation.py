"""Sample-level comparison of detected patterns with ground-truth segments."""

from __future__ import annotations

import csv
import os
from typing import Optional, Sequence

import numpy as np

from .core import (
    ConfusionCounts,
    ContractError,
    EvalReport,
    InputError,
    LabelSegment,
    Pattern,
    RowParseError,
    SchemaError,
    check_spans,
)
from .ingest import read_rows


def overlap_matrix(truth: Sequence[LabelSegment], pred: Sequence[Pattern], length: int) -> np.ndarray:
    """Cell (i, j) is the number of samples shared by truth[i] and pred[j]."""
    check_spans(truth, length, "label")
    check_spans(pred, length, "pattern")
    m = np.zeros((len(truth), len(pred)), dtype=np.int64)
    if not truth or not pred:
        return m
    t_start = np.array([s.start for s in truth])[:, None]
    t_end = np.array([s.end for s in truth])[:, None]
    p_start = np.array([p.start for p in pred])[None, :]
    p_end = np.array([p.end for p in pred])[None, :]
    m[:] = np.clip(np.minimum(t_end, p_end) - np.maximum(t_start, p_start) + 1, 0, None)
    return m


def match_labels(overlap: np.ndarray) -> list[tuple[int, int]]:
    """Greedy one-to-one matching on the overlap matrix.

    Repeatedly takes the largest remaining cell (ties: lowest truth id, then
    lowest pattern id) and retires its row and column. Returns 1-based
    ``(truth_id, pattern_id)`` pairs sorted by truth id.
    """
    work = np.array(overlap, dtype=np.int64, copy=True)
    if work.size == 0:
        return []
    if np.any(work < 0):
        raise ContractError("overlap counts must be non-negative")
    pairs = []
    while True:
        # argmax returns the first maximum in row-major order, which is the tie rule
        flat = int(np.argmax(work))
        i, j = divmod(flat, work.shape[1])
        if work[i, j] <= 0:
            break
        pairs.append((i + 1, j + 1))
        work[i, :] = -1
        work[:, j] = -1
    return sorted(pairs)


def confusion_counts(
    truth: Sequence[LabelSegment],
    pred: Sequence[Pattern],
    matching: Sequence[tuple[int, int]],
    length: int,
) -> ConfusionCounts:
    """Count predicted-labelled samples as TP, FP or FN.

    For each sample carrying a predicted case id: TP if it lies in the truth
    segment matched to that pattern, FP if it lies in some other truth
    segment, FN if it lies in no truth segment or its pattern is unmatched.
    """
    truth_of = _label_array(truth, length)
    pred_of = _label_array(pred, length)
    matched = np.zeros(len(pred) + 1, dtype=np.int64)
    for t_idx, p_idx in matching:
        matched[p_idx] = t_idx
    labelled = pred_of > 0
    truth_at = truth_of[labelled]
    want = matched[pred_of[labelled]]
    tp = int(np.count_nonzero((want > 0) & (truth_at == want)))
    fp = int(np.count_nonzero((want > 0) & (truth_at > 0) & (truth_at != want)))
    fn = int(np.count_nonzero((want == 0) | (truth_at == 0)))
    return ConfusionCounts(tp, fp, fn)


def _label_array(spans, length: int) -> np.ndarray:
    # position-based labels (1..n), independent of the ids stored on the spans
    out = np.zeros(length, dtype=np.int64)
    for k, s in enumerate(spans, start=1):
        out[s.start : s.end + 1] = k
    return out


def _ratio(num: int, den: int) -> tuple[float, bool]:
    return (num / den, False) if den > 0 else (0.0, True)


def metrics(counts: ConfusionCounts) -> tuple[float, float, float, bool]:
    """Precision, recall, F1 and a flag set when any ratio was 0/0."""
    precision, d1 = _ratio(counts.tp, counts.tp + counts.fp)
    recall, d2 = _ratio(counts.tp, counts.tp + counts.fn)
    denom = precision + recall
    f1 = 2 * precision * recall / denom if denom > 0 else 0.0
    return precision, recall, f1, d1 or d2 or denom == 0


def evaluate(truth: Sequence[LabelSegment], pred: Sequence[Pattern], length: int) -> EvalReport:
    """Run overlap, matching, counting and metrics in one call."""
    overlap = overlap_matrix(truth, pred, length)
    matching = match_labels(overlap)
    counts = confusion_counts(truth, pred, matching, length)
    precision, recall, f1, degenerate = metrics(counts)
    missed = int(np.count_nonzero((_label_array(truth, length) > 0) & (_label_array(pred, length) == 0)))
    recall_with_missed, _ = _ratio(counts.tp, counts.tp + counts.fn + missed)
    return EvalReport(
        counts=counts,
        precision=precision,
        recall=recall,
        f1=f1,
        overlap=overlap,
        matching=[(truth[i - 1].id, pred[j - 1].id) for i, j in matching],
        degenerate=degenerate,
        truth_kinds={s.id: s.kind.value for s in truth},
        missed_truth_samples=missed,
        recall_with_missed=recall_with_missed,
    )


def format_percent(x: float) -> str:
    return f"{100 * x:.1f}%"


def format_metrics(report: EvalReport) -> str:
    return (
        f"precision {format_percent(report.precision)}  "
        f"recall {format_percent(report.recall)}  "
        f"F1 {format_percent(report.f1)}"
    )


def labels_from_column(keys: Sequence) -> list[LabelSegment]:
    """One truth segment per maximal run of equal keys (e.g. a tool-id column)."""
    labels: list[LabelSegment] = []
    start = 0
    for i in range(1, len(keys) + 1):
        if i == len(keys) or keys[i] != keys[start]:
            labels.append(LabelSegment(len(labels) + 1, start, i - 1))
            start = i
    return labels


# --- label / pattern files -------------------------------------------------

LABEL_COLUMNS = ("id", "start", "end", "kind")
PATTERN_COLUMNS = ("id", "start", "end", "start_timestamp", "end_timestamp", "mean_at_detection", "partial")


def _columns(header: list[str], required: Sequence[str]) -> dict[str, int]:
    stripped = [h.strip() for h in header]
    out = {}
    for col in required:
        if col not in stripped:
            raise SchemaError(col)
        out[col] = stripped.index(col)
    return out


def _int_cell(row, idx, rownum, col) -> int:
    try:
        return int(row[idx].strip())
    except (ValueError, IndexError):
        raise RowParseError(rownum, col, row[idx] if idx < len(row) else "") from None


def read_labels(source) -> list[LabelSegment]:
    """Read a label CSV with columns ``id,start,end,kind``."""
    header, rows = read_rows(source)
    if not header:
        return []
    cols = _columns(header, LABEL_COLUMNS)
    labels = []
    for n, row in enumerate(rows, start=1):
        kind = row[cols["kind"]].strip() if cols["kind"] < len(row) else ""
        try:
            labels.append(
                LabelSegment(
                    _int_cell(row, cols["id"], n, "id"),
                    _int_cell(row, cols["start"], n, "start"),
                    _int_cell(row, cols["end"], n, "end"),
                    kind,
                )
            )
        except ContractError as exc:
            raise InputError(f"row {n}: {exc}") from None
        except ValueError as exc:
            raise RowParseError(n, "kind", kind, str(exc)) from None
    return labels


def write_labels(labels: Sequence[LabelSegment], dest) -> None:
    with _open_out(dest) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_COLUMNS)
        for s in labels:
            w.writerow([s.id, s.start, s.end, s.kind.value])


def read_patterns(source) -> list[Pattern]:
    """Read the patterns CSV written by the detect command."""
    header, rows = read_rows(source)
    if not header:
        return []
    cols = _columns(header, ("id", "start", "end"))
    stripped = [h.strip() for h in header]
    mean_idx = stripped.index("mean_at_detection") if "mean_at_detection" in stripped else None
    part_idx = stripped.index("partial") if "partial" in stripped else None
    out = []
    for n, row in enumerate(rows, start=1):
        mean = 0.0
        if mean_idx is not None:
            try:
                mean = float(row[mean_idx])
            except (ValueError, IndexError):
                raise RowParseError(n, "mean_at_detection", "") from None
        partial = part_idx is not None and row[part_idx].strip().lower() in ("true", "1")
        try:
            out.append(
                Pattern(
                    _int_cell(row, cols["id"], n, "id"),
                    _int_cell(row, cols["start"], n, "start"),
                    _int_cell(row, cols["end"], n, "end"),
                    mean,
                    partial,
                )
            )
        except ContractError as exc:
            raise InputError(f"row {n}: {exc}") from None
    return out


class _open_out:
    def __init__(self, dest):
        self.dest = dest
        self.fh = None

    def __enter__(self):
        if isinstance(self.dest, (str, os.PathLike)):
            self.fh = open(self.dest, "w", newline="", encoding="utf-8")
            return self.fh
        return self.dest

    def __exit__(self, *exc):
        if self.fh is not None:
            self.fh.close()


def write_overlap_csv(overlap: np.ndarray, dest, truth_ids: Optional[Sequence[int]] = None,
                      pred_ids: Optional[Sequence[int]] = None) -> None:
    """Truth ids as rows, pattern ids as columns, overlap counts as cells."""
    n_truth, n_pred = overlap.shape
    truth_ids = list(truth_ids) if truth_ids is not None else list(range(1, n_truth + 1))
    pred_ids = list(pred_ids) if pred_ids is not None else list(range(1, n_pred + 1))
    with _open_out(dest) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + pred_ids)
        for tid, row in zip(truth_ids, overlap.tolist()):
            w.writerow([tid] + row)


def heatmap_export(overlap: np.ndarray, destination, truth_ids=None, pred_ids=None) -> tuple[str, str]:
    """Write ``<destination>.csv`` and ``<destination>.svg``; return both paths.

    ``destination`` is a path stem; a trailing ``.csv`` or ``.svg`` is dropped.
    """
    from .plotting import heatmap_svg

    stem = os.fspath(destination)
    root, ext = os.path.splitext(stem)
    if ext.lower() in (".csv", ".svg"):
        stem = root
    csv_path, svg_path = stem + ".csv", stem + ".svg"
    write_overlap_csv(overlap, csv_path, truth_ids, pred_ids)
    with open(svg_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(heatmap_svg(overlap, truth_ids, pred_ids))
    return csv_path, svg_path
