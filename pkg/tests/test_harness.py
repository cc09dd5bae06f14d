import csv
import json

import numpy as np
import pytest

from geofuzz.corpus import bootstrap_corpus
from geofuzz.errors import DataError, ParameterError
from geofuzz.harness import (RESULT_COLUMNS, ExperimentGrid, final_coverage_by_program, report,
                             run_experiment, stable_seed, strides)
from geofuzz.toylang import GenParams, dump_program, generate_program

HEADER = "program_id,config_id,objective,campaign,evaluation,covered_edges,total_edges"


@pytest.fixture
def grid_dir(tmp_path):
    for i in range(2):
        prog, cfg = generate_program(GenParams(seed=40 + i, max_statements=12))
        (tmp_path / f"g{i}.json").write_text(dump_program(prog, cfg))
    return tmp_path


def make_grid(root, **kw):
    d = dict(programs=["g0.json", "g1.json"],
             configs=[{"name": "rec"}, {"name": "flat", "schedule": "default"}],
             objectives=["hitprob", "constant"], campaigns=2, budget=45, seed=1, root=root)
    d.update(kw)
    return ExperimentGrid(**d)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_stable_seed():
    assert stable_seed(0, "a", 1) == stable_seed(0, "a", 1)
    assert stable_seed(0, "a", 1) != stable_seed(0, "a", 2)
    assert stable_seed(5, "a") - stable_seed(0, "a") == 5


def test_strides():
    assert strides(45, 10) == [0, 10, 20, 30, 40, 45]
    assert strides(40, 10) == [0, 10, 20, 30, 40]
    assert strides(3, 10) == [0, 3]


@pytest.mark.parametrize("kw", [
    dict(objectives=[]),
    dict(configs=[]),
    dict(programs=[]),
    dict(campaigns=0),
    dict(objectives=["nope"]),
    dict(configs=[{"name": "a"}, {"name": "a"}]),
])
def test_grid_validation(grid_dir, kw):
    with pytest.raises(ParameterError):
        make_grid(grid_dir, **kw)


def test_missing_program_is_named(grid_dir, tmp_path):
    grid = make_grid(grid_dir, programs=["g0.json", "absent.json"])
    with pytest.raises(FileNotFoundError, match="absent.json"):
        run_experiment(grid, tmp_path / "r.csv")


def test_results_layout_and_determinism(grid_dir, tmp_path):
    grid = make_grid(grid_dir)
    out = tmp_path / "r.csv"
    meta = run_experiment(grid, out)
    text = out.read_text()
    assert text.splitlines()[0] == HEADER == ",".join(RESULT_COLUMNS)
    rows = read_rows(out)
    per_campaign = len(strides(45, 10))
    assert len(rows) == 2 * 2 * 2 * 2 * per_campaign
    assert meta["errors"] == [] and meta["rows"] == len(rows)
    run_experiment(grid, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == out.read_bytes()

    for r in rows:
        assert 0 <= int(r["covered_edges"]) <= int(r["total_edges"]) - 1
    # coverage curves are nondecreasing within a campaign
    by = {}
    for r in rows:
        by.setdefault((r["program_id"], r["config_id"], r["objective"], r["campaign"]), []).append(
            int(r["covered_edges"]))
    assert all(np.all(np.diff(v) >= 0) for v in by.values())


def test_corpus_is_shared_across_configs(grid_dir, tmp_path):
    out = tmp_path / "r.csv"
    run_experiment(make_grid(grid_dir), out)
    start = {}
    for r in read_rows(out):
        if r["evaluation"] == "0":
            start.setdefault((r["program_id"], r["campaign"]), set()).add(r["covered_edges"])
    assert all(len(v) == 1 for v in start.values())


def test_parallel_matches_serial(grid_dir, tmp_path, monkeypatch):
    grid = make_grid(grid_dir, campaigns=1, budget=25)
    run_experiment(grid, tmp_path / "a.csv", parallel=1)
    monkeypatch.setenv("GEOFUZZ_PARALLEL", "2")
    meta = run_experiment(grid, tmp_path / "b.csv", parallel=1)
    assert meta["workers"] == 2
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_failed_campaign_is_quarantined(grid_dir, tmp_path):
    prog, cfg = generate_program(GenParams(seed=40, max_statements=12))
    bootstrap_corpus(prog, cfg, 10, 3, seed=0).dump(grid_dir / "c0.json")
    grid = make_grid(grid_dir, programs=["g0.json", {"program": "g1.json", "corpus": "c0.json"}],
                     campaigns=1)
    out = tmp_path / "r.csv"
    meta = run_experiment(grid, out)
    rows = read_rows(out)
    bad = [r for r in rows if r["program_id"] == "g1"]
    assert len(bad) == 4 and all(r["evaluation"] == "-1" for r in bad)
    assert len(meta["errors"]) == 4
    sidecar = json.loads((tmp_path / "r.csv.meta.json").read_text())
    assert "InputError" in sidecar["errors"][0]["error"]
    assert sidecar["finished"] >= sidecar["started"]
    _, summary = report(out)
    assert all(s["n"] == 1 for s in summary)


def write_results(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        w.writerows(rows)


def test_report_statistics(tmp_path):
    res = tmp_path / "r.csv"
    write_results(res, [
        ["p", "a", "hitprob", 0, 0, 1, 11], ["p", "a", "hitprob", 0, 10, 5, 11],
        ["p", "a", "hitprob", 1, 0, 3, 11], ["p", "a", "hitprob", 1, 10, 7, 11],
        ["q", "a", "hitprob", 0, 0, 2, 5], ["q", "a", "hitprob", 0, 10, 4, 5],
    ])
    curves, summary = report(res, tmp_path / "c.csv", tmp_path / "s.csv")
    final = [0.5, 0.7, 1.0]
    assert summary == [{"config_id": "a", "objective": "hitprob", "evaluation": 10,
                        "mean": pytest.approx(np.mean(final)), "std": pytest.approx(np.std(final)),
                        "n": 3}]
    assert [c["evaluation"] for c in curves] == [0, 10]
    assert curves[0]["mean"] == pytest.approx(np.mean([0.1, 0.3, 0.5]))
    assert read_rows(tmp_path / "s.csv")[0]["n"] == "3"
    by_prog = final_coverage_by_program(res)
    assert by_prog[("a", "hitprob")]["p"] == pytest.approx([0.5, 0.7])


def test_report_single_campaign_has_zero_std(tmp_path):
    res = tmp_path / "r.csv"
    write_results(res, [["p", "a", "hitprob", 0, 0, 3, 11]])
    _, summary = report(res)
    assert summary[0]["std"] == 0.0


def test_report_rejects_inconsistent_totals(tmp_path):
    res = tmp_path / "r.csv"
    write_results(res, [["p", "a", "hitprob", 0, 0, 1, 11], ["p", "b", "hitprob", 0, 0, 1, 12]])
    with pytest.raises(DataError):
        report(res)


def test_report_rejects_bad_header(tmp_path):
    res = tmp_path / "r.csv"
    res.write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        report(res)


def test_grid_load_resolves_relative_paths(grid_dir):
    (grid_dir / "grid.json").write_text(json.dumps(
        {"programs": ["g0.json"], "configs": [{"name": "x"}], "objectives": ["hop"]}))
    grid = ExperimentGrid.load(grid_dir / "grid.json")
    grid.check_files()
    assert grid.program_entries()[0]["id"] == "g0"
