import json
import subprocess
import sys

import pytest

from caseseg import CsvSpec, DetectorParams, detect_patterns, parse_csv
from caseseg.cli import main

SHEARER_EXPORT = """Timestamp;DR;DL;HR;HL;MD right;MD left;Location;Speed
24.01.10 03:43:17;67;61;21;17;1;0;33;4,30
24.01.10 03:43:18;65;60;19;20;1;0;33;4,30
24.01.10 03:43:19;69;61;20;20;1;0;333;4,30
24.01.10 03:43:20;65;62;20;20;1;0;33;4,30
24.01.10 03:43:21;74;61;20;20;1;0;700;4,30
"""


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    assert main(["synth", "--cycles", "5", "--period", "3000", "--peak", "250", "--seed", "42",
                 "--output-dir", str(out)]) == 0
    return out


def run_detect(series, out, *extra):
    return main(["detect", "--input", str(series), "--output-dir", str(out), *extra])


def test_detect_matches_library(synth_dir, tmp_path):
    out = tmp_path / "det"
    assert run_detect(synth_dir / "series.csv", out, "--y-th", "10.3", "--lwz-th", "100") == 0
    summary = json.loads((out / "series.summary.json").read_text())
    lib = detect_patterns(parse_csv(synth_dir / "series.csv", CsvSpec()), DetectorParams(10.3, 100))
    assert summary["pattern_count"] == len(lib) == 5
    assert summary["L"] == 15000
    rows = (out / "series.patterns.csv").read_text().splitlines()
    assert rows[0] == "id,start,end,start_timestamp,end_timestamp,mean_at_detection,partial"
    assert [tuple(map(int, r.split(",")[:3])) for r in rows[1:]] == [(p.id, p.start, p.end) for p in lib]
    events = (out / "series.events.csv").read_text().splitlines()
    assert events[0] == "case_id,timestamp,value"
    assert len(events) - 1 == sum(p.length for p in lib)
    assert events[1].startswith("1,2024-01-10T00:00:00,")


def test_detect_echoes_params(synth_dir, tmp_path):
    out = tmp_path / "det"
    assert run_detect(synth_dir / "series.csv", out, "--y-th", "0.7", "--lwz-th", "100") == 0
    params = json.loads((out / "series.summary.json").read_text())["params"]
    assert params["y_th"] == 0.7 and params["lwz_th"] == 100
    assert params["look_ahead"] == 30 and params["decrease_margin"] == 0.0


def test_detect_missing_column_writes_nothing(synth_dir, tmp_path, capsys):
    out = tmp_path / "det"
    assert run_detect(synth_dir / "series.csv", out, "--value-col", "power") == 2
    assert "power" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


@pytest.mark.parametrize("flag,value", [("--lwz-th", "0"), ("--lwz-th", "abc"), ("--look-ahead", "-2"),
                                        ("--decrease-margin", "-1"), ("--closure", "late")])
def test_detect_invalid_params_exit_3(synth_dir, tmp_path, flag, value):
    assert run_detect(synth_dir / "series.csv", tmp_path / "det", flag, value) == 3


def test_detect_unreadable_input(tmp_path):
    assert run_detect(tmp_path / "nope.csv", tmp_path / "det") == 2


def test_detect_shearer_export_with_cap_and_plot(tmp_path):
    src = tmp_path / "shearer.csv"
    src.write_text(SHEARER_EXPORT)
    out = tmp_path / "det"
    code = run_detect(src, out, "--timestamp-col", "Timestamp", "--value-col", "Location",
                      "--timestamp-format", "table", "--delimiter", ";", "--cap", "300",
                      "--lwz-th", "1", "--plot")
    assert code == 0
    summary = json.loads((out / "shearer.summary.json").read_text())
    assert summary["L"] == 3 and summary["removed_count"] == 2
    assert summary["first_timestamp"] == "2024-01-10T03:43:17"
    assert (out / "shearer.plot.svg").read_text().startswith("<svg")


def test_config_file_and_flag_precedence(synth_dir, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"y-th": 0.7, "lwz_th": 150, "--look-ahead": 20}))
    out = tmp_path / "det"
    assert run_detect(synth_dir / "series.csv", out, "--config", str(cfg), "--lwz-th", "120") == 0
    params = json.loads((out / "series.summary.json").read_text())["params"]
    assert (params["y_th"], params["lwz_th"], params["look_ahead"]) == (0.7, 120, 20)

    monkeypatch.setenv("CASESEG_CONFIG", str(cfg))
    out2 = tmp_path / "det2"
    assert run_detect(synth_dir / "series.csv", out2) == 0
    params = json.loads((out2 / "series.summary.json").read_text())["params"]
    assert (params["y_th"], params["lwz_th"]) == (0.7, 150)


def test_config_errors(synth_dir, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"y-thresh": 1}')
    assert run_detect(synth_dir / "series.csv", tmp_path / "d", "--config", str(bad)) == 3
    bad.write_text("[1, 2]")
    assert run_detect(synth_dir / "series.csv", tmp_path / "d", "--config", str(bad)) == 3
    bad.write_text('{"emit-partial-tail": "maybe"}')
    assert run_detect(synth_dir / "series.csv", tmp_path / "d", "--config", str(bad)) == 3


def test_jobs_process_several_inputs(synth_dir, tmp_path):
    other = tmp_path / "other.csv"
    other.write_text((synth_dir / "series.csv").read_text())
    out = tmp_path / "det"
    code = main(["detect", "--input", str(synth_dir / "series.csv"), "--input", str(other),
                 "--output-dir", str(out), "--jobs", "2"])
    assert code == 0
    assert (out / "series.patterns.csv").read_bytes() == (out / "other.patterns.csv").read_bytes()


def test_clean_counts_and_keeps_rows_verbatim(tmp_path, capsys):
    src = tmp_path / "shearer.csv"
    src.write_text(SHEARER_EXPORT)
    args = ["clean", "--input", str(src), "--output-dir", str(tmp_path / "c"), "--timestamp-col", "Timestamp",
            "--value-col", "Location", "--timestamp-format", "table", "--delimiter", ";"]
    assert main(args + ["--cap", "300"]) == 0
    assert "removed_count: 2" in capsys.readouterr().out
    lines = SHEARER_EXPORT.splitlines(keepends=True)
    assert (tmp_path / "c" / "shearer.cleaned.csv").read_text() == "".join(lines[:3] + lines[4:5])

    assert main(args + ["--cap", "1000"]) == 0
    assert "removed_count: 0" in capsys.readouterr().out
    assert (tmp_path / "c" / "shearer.cleaned.csv").read_bytes() == src.read_bytes()


def test_clean_errors(tmp_path):
    assert main(["clean", "--input", str(tmp_path / "nope.csv"), "--cap", "300"]) == 2
    src = tmp_path / "s.csv"
    src.write_text("timestamp,value\n0,1\n")
    assert main(["clean", "--input", str(src), "--timestamp-format", "epoch"]) == 3
    assert main(["clean", "--input", str(src), "--timestamp-format", "epoch", "--cap", "x"]) == 3


def test_eval_identical_files(tmp_path, capsys):
    labels = tmp_path / "labels.csv"
    labels.write_text("id,start,end,kind\n1,0,9,cycle\n2,10,19,cycle\n")
    pats = tmp_path / "p.csv"
    pats.write_text("id,start,end\n1,0,9\n2,10,19\n")
    out = tmp_path / "ev"
    assert main(["eval", "--input", str(pats), "--labels", str(labels), "--output-dir", str(out)]) == 0
    assert "precision 100.0%  recall 100.0%  F1 100.0%" in capsys.readouterr().out
    report = json.loads((out / "report.json").read_text())
    assert report["counts"] == {"tp": 20, "fp": 0, "fn": 0}
    assert report["degenerate"] is False
    assert (out / "heatmap.csv").read_text() == ",1,2\n1,10,0\n2,0,10\n"
    assert (out / "heatmap.svg").read_text().count("<rect") == 4


def test_eval_prints_one_decimal_percentages(tmp_path, capsys):
    # one truth segment, one pattern: 23448 shared samples, 552 in another
    # truth segment, 977 in none -> P 0.977, R 0.960, F1 0.968
    labels = tmp_path / "labels.csv"
    labels.write_text("id,start,end,kind\n1,0,23447,cycle\n2,23448,23999,outlier\n")
    pats = tmp_path / "p.csv"
    pats.write_text("id,start,end\n1,0,24976\n")
    assert main(["eval", "--patterns", str(pats), "--labels", str(labels), "--output-dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "precision 97.7%  recall 96.0%  F1 96.8%"


def test_eval_empty_patterns_is_degenerate(tmp_path, capsys):
    labels = tmp_path / "labels.csv"
    labels.write_text("id,start,end,kind\n1,0,9,cycle\n")
    pats = tmp_path / "p.csv"
    pats.write_text("id,start,end,start_timestamp,end_timestamp,mean_at_detection,partial\n")
    assert main(["eval", "--input", str(pats), "--labels", str(labels), "--output-dir", str(tmp_path)]) == 0
    captured = capsys.readouterr()
    assert "precision 0.0%  recall 0.0%  F1 0.0%" in captured.out
    assert "degenerate" in captured.err
    assert json.loads((tmp_path / "report.json").read_text())["degenerate"] is True


def test_eval_errors(tmp_path):
    labels = tmp_path / "labels.csv"
    labels.write_text("id,start,kind\n1,0,cycle\n")
    pats = tmp_path / "p.csv"
    pats.write_text("id,start,end\n1,0,9\n")
    assert main(["eval", "--input", str(pats), "--labels", str(labels), "--output-dir", str(tmp_path)]) == 2
    assert main(["eval", "--input", str(pats), "--output-dir", str(tmp_path)]) == 3
    overlapping = tmp_path / "o.csv"
    overlapping.write_text("id,start,end\n1,0,9\n2,5,12\n")
    labels.write_text("id,start,end,kind\n1,0,9,cycle\n")
    assert main(["eval", "--input", str(overlapping), "--labels", str(labels), "--output-dir", str(tmp_path)]) == 2


def test_synth_zero_cycles(tmp_path):
    assert main(["synth", "--cycles", "0", "--output-dir", str(tmp_path)]) == 0
    assert (tmp_path / "series.csv").read_text() == "timestamp,value\n"
    assert (tmp_path / "labels.csv").read_text() == "id,start,end,kind\n"


def test_synth_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--cycles", "5", "--period", "3000", "--peak", "250", "--seed", "42",
                     "--output-dir", str(tmp_path / name)]) == 0
    for f in ("series.csv", "labels.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.mark.parametrize("args", [["--period", "100", "--dwell", "50"], ["--peak", "-1"], ["--cycles", "x"]])
def test_synth_bad_params(tmp_path, args):
    assert main(["synth", "--output-dir", str(tmp_path), *args]) == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "caseseg", "synth", "--cycles", "1", "--output-dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "series.csv").exists()
