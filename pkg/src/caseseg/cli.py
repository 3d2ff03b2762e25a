"""Command-line entry point: ``caseseg {clean,detect,eval,synth}``.

Every option can also be set in a flat JSON config file (``--config`` or the
``CASESEG_CONFIG`` environment variable) using the flag name with or without
the leading dashes, e.g. ``{"y-th": 0.7, "lwz_th": 100}``. Flags given on the
command line override the config file.

Exit codes: 0 success, 2 input error, 3 parameter error.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .core import CasesegError, ContractError, DetectorParams, InputError
from .detector import assign_case_ids, detect_patterns
from .evaluation import evaluate, format_metrics, heatmap_export, read_labels, read_patterns, write_labels
from .ingest import CsvSpec, _read_text, clean_outliers, format_timestamp, iter_data_lines, outlier_mask, parse_csv, read_rows, write_csv
from .plotting import series_overlay_svg
from .synth import generate_cyclic_series

EXIT_OK, EXIT_INPUT, EXIT_PARAM = 0, 2, 3
CONFIG_ENV = "CASESEG_CONFIG"


class ParameterError(CasesegError):
    pass


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _int(v):
    if isinstance(v, bool):
        raise ValueError("boolean given where integer expected")
    if isinstance(v, float) and not v.is_integer():
        raise ValueError(f"not an integer: {v!r}")
    return int(v)


def _column(v):
    return v if isinstance(v, int) else str(v)


def _opt_float(v):
    return None if v is None or v == "" else float(v)


# dest -> (converter, default); the same table drives flags and config keys
OPTIONS = {
    "input": (None, None),
    "output_dir": (str, "."),
    "timestamp_col": (_column, "timestamp"),
    "value_col": (_column, "value"),
    "timestamp_format": (str, "iso"),
    "delimiter": (str, ","),
    "locale_decimal_comma": (_bool, False),
    "y_th": (float, 10.3),
    "lwz_th": (_int, 100),
    "look_ahead": (_int, 30),
    "decrease_margin": (float, 0.0),
    "emit_partial_tail": (_bool, False),
    "closure": (str, "minimum"),
    "rise_tolerance": (_opt_float, None),
    "increments": (_bool, False),
    "snap_radius": (_int, 0),
    "cap": (_opt_float, None),
    "labels": (str, None),
    "length": (_int, None),
    "plot": (_bool, False),
    "cycles": (_int, 5),
    "period": (_int, 3000),
    "peak": (float, 250.0),
    "dwell": (_int, 200),
    "noise_sigma": (float, 2.0),
    "seed": (_int, 42),
    "jobs": (_int, 1),
}

COMMAND_OPTIONS = {
    "clean": ("input", "output_dir", "timestamp_col", "value_col", "timestamp_format", "delimiter",
              "locale_decimal_comma", "cap", "jobs"),
    "detect": ("input", "output_dir", "timestamp_col", "value_col", "timestamp_format", "delimiter",
               "locale_decimal_comma", "y_th", "lwz_th", "look_ahead", "decrease_margin",
               "emit_partial_tail", "closure", "rise_tolerance", "increments", "snap_radius", "cap",
               "plot", "jobs"),
    "eval": ("input", "labels", "length", "output_dir"),
    "synth": ("output_dir", "cycles", "period", "peak", "dwell", "noise_sigma", "seed"),
}

FLAG_OPTIONS = {"locale_decimal_comma", "emit_partial_tail", "increments", "plot"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="caseseg", description="Case ID detection in cyclic sensor time series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "clean": "drop samples above --cap",
        "detect": "detect patterns and write patterns / event-log CSVs",
        "eval": "compare a patterns CSV with a labels CSV",
        "synth": "generate a synthetic cyclic series with labels",
    }
    for name, dests in COMMAND_OPTIONS.items():
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", default=None, help=f"flat JSON config file (fallback: ${CONFIG_ENV})")
        for dest in dests:
            flag = "--" + dest.replace("_", "-")
            if dest == "input":
                if name == "eval":
                    p.add_argument("--input", "--patterns", dest="input", default=None, help="patterns CSV")
                else:
                    p.add_argument(flag, action="append", default=None, help="input CSV (repeatable)")
            elif dest in FLAG_OPTIONS:
                p.add_argument(flag, dest=dest, action="store_const", const=True, default=None)
            else:
                p.add_argument(flag, dest=dest, default=None)
    return parser


def load_config(path) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path!r}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParameterError("config file must contain a flat JSON object")
    return {str(k).lstrip("-").replace("-", "_"): v for k, v in data.items()}


def effective_options(command: str, args: argparse.Namespace) -> dict:
    """Merge built-in defaults, config file and flags (in that order of precedence)."""
    config_path = args.config or os.environ.get(CONFIG_ENV)
    config = load_config(config_path)
    # keys meant for other subcommands are ignored; unknown keys are rejected
    unknown = set(config) - set(OPTIONS)
    if unknown:
        raise ParameterError(f"unknown config keys: {', '.join(sorted(unknown))}")
    out = {}
    for dest in COMMAND_OPTIONS[command]:
        convert, default = OPTIONS[dest]
        flag_value = getattr(args, dest, None)
        raw = flag_value if flag_value is not None else config.get(dest, default)
        if dest == "input":
            if isinstance(raw, str):
                raw = [raw]
            out[dest] = raw
            continue
        try:
            out[dest] = convert(raw) if raw is not None and convert else raw
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"invalid value for --{dest.replace('_', '-')}: {raw!r} ({exc})") from None
    return out


def _csv_spec(opts) -> CsvSpec:
    try:
        return CsvSpec(
            timestamp_col=opts["timestamp_col"],
            value_col=opts["value_col"],
            timestamp_format=opts["timestamp_format"],
            delimiter=opts["delimiter"],
            decimal_comma=opts["locale_decimal_comma"],
        )
    except ValueError as exc:
        raise ParameterError(str(exc)) from None


def _detector_params(opts) -> DetectorParams:
    try:
        return DetectorParams(
            y_th=opts["y_th"],
            lwz_th=opts["lwz_th"],
            look_ahead=opts["look_ahead"],
            decrease_margin=opts["decrease_margin"],
            emit_partial_tail=opts["emit_partial_tail"],
            closure=opts["closure"],
            rise_tolerance=opts["rise_tolerance"],
            use_increments=opts["increments"],
            snap_radius=opts["snap_radius"],
        )
    except ContractError as exc:
        raise ParameterError(str(exc)) from None


def _require_inputs(opts):
    inputs = opts.get("input")
    if not inputs:
        raise ParameterError("--input is required")
    return inputs


def _check_jobs(opts):
    if opts["jobs"] < 1:
        raise ParameterError("--jobs must be >= 1")


def _run_all(func, inputs, jobs):
    """Run ``func`` per input; return the worst exit code."""
    if jobs > 1 and len(inputs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(func, inputs))
    else:
        codes = [func(path) for path in inputs]
    return max(codes, default=EXIT_OK)


def _report_error(exc) -> int:
    print(f"caseseg: error: {exc}", file=sys.stderr)
    if isinstance(exc, (ParameterError, ContractError)):
        return EXIT_PARAM
    return EXIT_INPUT


def _stem(path) -> str:
    return Path(path).name.rsplit(".", 1)[0] if "." in Path(path).name else Path(path).name


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# --- clean -----------------------------------------------------------------

def cmd_clean(opts) -> int:
    inputs = _require_inputs(opts)
    if opts["cap"] is None:
        raise ParameterError("--cap is required")
    spec = _csv_spec(opts)
    _check_jobs(opts)
    out_dir = Path(opts["output_dir"])

    def one(path):
        try:
            series = parse_csv(path, spec)
            keep = outlier_mask(series, opts["cap"])
            text = _read_text(path)
            _, rows = read_rows(io.StringIO(text), spec.delimiter)
            lines = list(iter_data_lines(text))
            out_dir.mkdir(parents=True, exist_ok=True)
            target = out_dir / f"{_stem(path)}.cleaned.csv"
            removed = len(series) - int(keep.sum())
            if len(lines) == len(rows):
                header_line = next(ln for ln in text.splitlines(keepends=True) if ln.strip())
                with open(target, "w", encoding="utf-8", newline="") as fh:
                    fh.write(header_line)
                    fh.writelines(ln for ln, k in zip(lines, keep.tolist()) if k)
            else:
                cleaned, removed = clean_outliers(series, opts["cap"])
                write_csv(cleaned, target, spec.timestamp_format)
        except (CasesegError, OSError, ValueError) as exc:
            return _report_error(exc)
        print(f"{path}: removed_count: {removed}" if len(inputs) > 1 else f"removed_count: {removed}")
        return EXIT_OK

    return _run_all(one, inputs, opts["jobs"])


# --- detect ----------------------------------------------------------------

def patterns_csv(series, patterns) -> str:
    lines = ["id,start,end,start_timestamp,end_timestamp,mean_at_detection,partial"]
    ts = series.timestamps
    for p in patterns:
        lines.append(
            f"{p.id},{p.start},{p.end},{format_timestamp(ts[p.start])},"
            f"{format_timestamp(ts[p.end])},{p.mean_at_detection!r},{'true' if p.partial else 'false'}"
        )
    return "\n".join(lines) + "\n"


def event_log_csv(series, assignment) -> str:
    lines = ["case_id,timestamp,value"]
    ids = assignment.case_ids.tolist()
    ts = series.timestamps.tolist()
    vals = series.values.tolist()
    for cid, t, v in zip(ids, ts, vals):
        if cid:
            lines.append(f"{cid},{format_timestamp(t)},{v!r}")
    return "\n".join(lines) + "\n"


def cmd_detect(opts) -> int:
    inputs = _require_inputs(opts)
    spec = _csv_spec(opts)
    params = _detector_params(opts)
    _check_jobs(opts)
    out_dir = Path(opts["output_dir"])
    echoed = {k: v for k, v in opts.items() if k not in ("input", "output_dir", "jobs")}

    def one(path):
        started = time.perf_counter()
        try:
            series = parse_csv(path, spec)
            removed = None
            if opts["cap"] is not None:
                series, removed = clean_outliers(series, opts["cap"])
            patterns = detect_patterns(series, params)
            assignment = assign_case_ids(series, patterns)
            stem = _stem(path)
            out_dir.mkdir(parents=True, exist_ok=True)
            _write_text(out_dir / f"{stem}.patterns.csv", patterns_csv(series, patterns))
            _write_text(out_dir / f"{stem}.events.csv", event_log_csv(series, assignment))
            if opts["plot"]:
                _write_text(out_dir / f"{stem}.plot.svg", series_overlay_svg(series.values, patterns, title=stem))
            summary = {
                "input": os.fspath(path),
                "series_name": series.name,
                "L": len(series),
                "pattern_count": len(patterns),
                "removed_count": removed,
                "first_timestamp": format_timestamp(series.timestamps[0]) if len(series) else None,
                "last_timestamp": format_timestamp(series.timestamps[-1]) if len(series) else None,
                "params": echoed,
                "detector": asdict(params),
                "wall_time_s": round(time.perf_counter() - started, 6),
            }
            _write_text(out_dir / f"{stem}.summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
        except (CasesegError, OSError, ValueError) as exc:
            return _report_error(exc)
        print(f"{path}: {len(patterns)} patterns in {len(series)} samples")
        return EXIT_OK

    return _run_all(one, inputs, opts["jobs"])


# --- eval ------------------------------------------------------------------

def cmd_eval(opts) -> int:
    inputs = _require_inputs(opts)
    if len(inputs) != 1:
        raise ParameterError("eval takes exactly one patterns file")
    if not opts["labels"]:
        raise ParameterError("--labels is required")
    try:
        patterns = read_patterns(inputs[0])
        labels = read_labels(opts["labels"])
    except (CasesegError, OSError) as exc:
        return _report_error(exc)
    length = opts["length"]
    if length is None:
        length = max([p.end + 1 for p in patterns] + [s.end + 1 for s in labels] + [0])
    if length < 0:
        raise ParameterError("--length must be >= 0")
    try:
        report = evaluate(labels, patterns, length)
    except ContractError as exc:
        # out-of-range or overlapping spans in the files are an input problem
        return _report_error(InputError(str(exc)))
    out_dir = Path(opts["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    doc.update({"length": length, "n_labels": len(labels), "n_patterns": len(patterns)})
    _write_text(out_dir / "report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    heatmap_export(report.overlap, out_dir / "heatmap", [s.id for s in labels], [p.id for p in patterns])
    print(format_metrics(report))
    if report.degenerate:
        print("warning: degenerate counts (a ratio was 0/0)", file=sys.stderr)
    return EXIT_OK


# --- synth -----------------------------------------------------------------

def cmd_synth(opts) -> int:
    try:
        series, labels = generate_cyclic_series(
            opts["cycles"], opts["period"], opts["peak"], opts["dwell"],
            opts["noise_sigma"], opts["seed"], name="value",
        )
    except ContractError as exc:
        raise ParameterError(str(exc)) from None
    out_dir = Path(opts["output_dir"])
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_csv(series, out_dir / "series.csv")
        write_labels(labels, out_dir / "labels.csv")
    except OSError as exc:
        return _report_error(exc)
    print(f"wrote {len(series)} samples and {len(labels)} labels to {out_dir}")
    return EXIT_OK


COMMANDS = {"clean": cmd_clean, "detect": cmd_detect, "eval": cmd_eval, "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = effective_options(args.command, args)
        return COMMANDS[args.command](opts)
    except (CasesegError, OSError) as exc:
        return _report_error(exc)


if __name__ == "__main__":
    sys.exit(main())
