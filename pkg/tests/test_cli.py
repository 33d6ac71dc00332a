"""Command line surface, driven through click's runner on the bundled dataset."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from spot.cli import main

TITANIC = str(Path(__file__).resolve().parents[1] / "src" / "spot" / "data" / "titanic.csv")


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, *args, **kw):
    return runner.invoke(main, list(args), **kw)


def rows_of(output: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(output)))


# ---------------------------------------------------------------------------
# ingest

def test_ingest_reports_kinds(runner):
    r = invoke(runner, "ingest", TITANIC)
    assert r.exit_code == 0
    kinds = {}
    for line in r.output.splitlines():
        name, kind, rest = line.split("\t")
        kinds[name] = kind
        assert rest.startswith("confidence=")
    assert kinds["Sex"] == "categorical"
    assert kinds["Embarked"] == "categorical"
    assert kinds["Age"] == "continuous"
    assert kinds["Fare"] == "continuous"
    assert kinds["Name"] == "text"


def test_ingest_json_format(runner):
    r = invoke(runner, "ingest", TITANIC, "--format", "json")
    assert r.exit_code == 0
    report = {e["name"]: e for e in json.loads(r.output)}
    assert report["Sex"]["kind"] == "categorical"
    assert report["Sex"]["overridden"] is False
    assert 0.95 <= report["Age"]["confidence"] <= 1.0


def test_ingest_kind_override(runner):
    r = invoke(runner, "ingest", TITANIC, "--kind", "Survived=categorical")
    assert r.exit_code == 0
    line = next(l for l in r.output.splitlines() if l.startswith("Survived\t"))
    assert "categorical" in line and "(override)" in line


def test_ingest_json_records(runner, tmp_path):
    path = tmp_path / "r.json"
    path.write_text(json.dumps([{"v": i} for i in range(30)]))
    r = invoke(runner, "ingest", str(path), "--format", "json")
    assert r.exit_code == 0
    assert json.loads(r.output)[0]["kind"] == "continuous"


# ---------------------------------------------------------------------------
# describe

def test_describe_text(runner):
    r = invoke(runner, "describe", TITANIC, "Embarked")
    assert r.exit_code == 0
    assert "facet=Embarked kind=categorical" in r.output
    assert "distinct=3 missing=2" in r.output
    assert "S: 644" in r.output


def test_describe_json(runner):
    r = invoke(runner, "describe", TITANIC, "Age", "--format", "json")
    assert r.exit_code == 0
    doc = json.loads(r.output)
    assert doc["name"] == "Age"
    assert doc["kind"] == "continuous"
    assert doc["missingCount"] == 177
    assert doc["min"] == pytest.approx(0.42)


def test_describe_unknown_facet(runner):
    r = invoke(runner, "describe", TITANIC, "Ghost")
    assert r.exit_code == 1
    assert "no facet named 'Ghost'" in r.output


def test_describe_missing_file(runner):
    r = invoke(runner, "describe", "no-such.csv", "Age")
    assert r.exit_code == 1
    assert "error:" in r.output


# ---------------------------------------------------------------------------
# aggregate

def test_aggregate_categorical_counts(runner):
    r = invoke(runner, "aggregate", TITANIC, "--partition", "Sex")
    assert r.exit_code == 0
    counts = {row["Sex"]: int(row["count"]) for row in rows_of(r.output)}
    assert counts == {"female": 314, "male": 577}


def test_aggregate_bins_json(runner):
    r = invoke(
        runner, "aggregate", TITANIC,
        "--partition", "Age:0:80:4",
        "--select", "Sex:{male}",
        "--format", "json",
    )
    assert r.exit_code == 0
    doc = json.loads(r.output)
    assert doc["partitions"] == ["Age"]
    assert [row["keys"][0]["label"] for row in doc["rows"]] == [
        "[0,20)", "[20,40)", "[40,60)", "[60,80)",
    ]
    # filtered totals stay within the male passenger count
    assert sum(row["count"] for row in doc["rows"]) <= 577


def test_aggregate_value_ops(runner):
    r = invoke(
        runner, "aggregate", TITANIC,
        "--partition", "Sex", "--agg", "count", "--agg", "avg:Age",
    )
    assert r.exit_code == 0
    rows = {row["Sex"]: row for row in rows_of(r.output)}
    assert float(rows["female"]["avg_Age"]) == pytest.approx(26.3155, abs=1e-3)
    assert int(rows["male"]["count"]) == 577


def test_aggregate_range_selection_filters(runner):
    r = invoke(runner, "aggregate", TITANIC, "--partition", "Sex", "--select", "Age:[0,18)")
    assert r.exit_code == 0
    counts = {row["Sex"]: int(row["count"]) for row in rows_of(r.output)}
    assert counts["female"] < 314 and counts["male"] < 577


def test_aggregate_datetime_interval(runner, tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "ts,v\n"
        "2021-01-10T00:00:00Z,1\n"
        "2021-01-20T00:00:00Z,2\n"
        "2021-03-01T00:00:00Z,3\n"
        "2022-07-04T00:00:00Z,4\n"
    )
    r = invoke(runner, "aggregate", str(path), "--partition", "ts:year")
    assert r.exit_code == 0
    counts = {row["ts"]: int(row["count"]) for row in rows_of(r.output)}
    assert counts == {"2021-01-01T00:00:00Z": 3, "2022-01-01T00:00:00Z": 1}


def test_aggregate_grammar_errors_exit_2(runner):
    cases = [
        ("--partition", "Age:0:80"),
        ("--partition", "Sex", "--select", "Sex:{male"),
        ("--partition", "Sex", "--agg", "median:Age"),
        ("--partition", "Sex", "--select", "Age:0..18"),
    ]
    for extra in cases:
        r = invoke(runner, "aggregate", TITANIC, *extra)
        assert r.exit_code == 2, extra
        assert "Invalid value" in r.output


def test_aggregate_data_errors_exit_1(runner):
    r = invoke(runner, "aggregate", TITANIC, "--partition", "Ghost")
    assert r.exit_code == 1 and "no facet named 'Ghost'" in r.output

    r = invoke(runner, "aggregate", TITANIC, "--partition", "Name")
    assert r.exit_code == 1 and "text facet" in r.output

    r = invoke(runner, "aggregate", TITANIC, "--partition", "Sex:0:1:4")
    assert r.exit_code == 1 and "continuous" in r.output


# ---------------------------------------------------------------------------
# session export / validate

def test_session_export_and_validate(runner, tmp_path):
    out = tmp_path / "t.spot.json"
    r = invoke(
        runner, "session", "export", TITANIC,
        "--partition", "Age:0:80:4",
        "--partition", "Sex",
        "--select", "Sex:{male}",
        "-o", str(out),
    )
    assert r.exit_code == 0
    assert "wrote" in r.output and str(out) in r.output

    r = invoke(runner, "session", "validate", str(out))
    assert r.exit_code == 0
    assert "valid:" in r.output
    assert "charts=2" in r.output
    assert "stale=false" in r.output


def test_session_export_stdout_shape(runner):
    r = invoke(
        runner, "session", "export", TITANIC,
        "--partition", "Age:0:80:4",
        "--partition", "Sex",
        "--select", "Sex:{male}",
        "-o", "-",
    )
    assert r.exit_code == 0
    doc = json.loads(r.output)
    assert doc["formatVersion"] == 1
    charts = {c["partitions"][0]["facet"]: c for c in doc["charts"]}
    assert set(charts) == {"Age", "Sex"}
    # the selection lands on the chart that partitions its facet
    assert charts["Sex"]["selections"] == {
        "Sex": {"type": "categories", "labels": ["male"]}
    }
    assert charts["Age"]["selections"] == {}
    assert set(doc["cachedResults"]["results"]) == {c["id"] for c in doc["charts"]}


def test_session_export_is_deterministic(runner):
    args = ("session", "export", TITANIC, "--partition", "Sex", "-o", "-")
    assert invoke(runner, *args).output == invoke(runner, *args).output


def test_session_export_orphan_selection_exit_2(runner):
    r = invoke(
        runner, "session", "export", TITANIC,
        "--partition", "Sex", "--select", "Age:[0,18)", "-o", "-",
    )
    assert r.exit_code == 2
    assert "no matching --partition" in r.output


def test_session_validate_rejects_junk(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    r = invoke(runner, "session", "validate", str(bad))
    assert r.exit_code == 1
    assert "formatVersion" in r.output


# ---------------------------------------------------------------------------
# serve

def test_serve_missing_config_exit_1(runner):
    r = invoke(runner, "serve", "--config", "no-such-config.json")
    assert r.exit_code == 1
    assert "error:" in r.output


def test_serve_invalid_config_exit_1(runner, tmp_path):
    bad = tmp_path / "config.json"
    bad.write_text(json.dumps({"datasets": [{"id": "x"}]}))
    r = invoke(runner, "serve", "--config", str(bad))
    assert r.exit_code == 1
    assert "exactly one of file/table" in r.output
