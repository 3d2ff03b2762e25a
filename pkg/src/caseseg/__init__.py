"""Case ID detection for process mining on cyclic sensor time series."""

__version__ = "0.1.0"

from .core import (
    CaseAssignment,
    ConfusionCounts,
    ContractError,
    DetectorParams,
    DetectorState,
    EvalReport,
    InputError,
    LabelSegment,
    OrderingError,
    Pattern,
    RowParseError,
    SchemaError,
    SegmentKind,
    TimeSeries,
)
from .detector import (
    assign_case_ids,
    decrease_follows,
    detect_patterns,
    detect_patterns_reference,
    short_term_mean,
)
from .evaluation import confusion_counts, evaluate, heatmap_export, match_labels, metrics, overlap_matrix
from .ingest import CsvSpec, clean_outliers, parse_csv, write_csv
from .synth import generate_cyclic_series, inject_outliers
