"""Experiment grids (programs x configurations x objectives x campaigns) and
coverage reports."""
from __future__ import annotations

import csv
import json
import logging
import os
import time
import zlib
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus, bootstrap_corpus
from .errors import DataError, ParameterError
from .fuzz_core import CampaignConfig, run_campaign
from .objectives import ObjectiveKind
from .toylang import load_program

log = logging.getLogger(__name__)

RESULT_COLUMNS = ["program_id", "config_id", "objective", "campaign", "evaluation",
                  "covered_edges", "total_edges"]
FAILED = -1


def stable_seed(base: int, *parts) -> int:
    key = "|".join(str(p) for p in parts).encode()
    return (int(base) + zlib.crc32(key)) % (2**63)


@dataclass
class ExperimentGrid:
    programs: list  # paths, or {"program": path, "corpus": path, "id": name}
    configs: list  # [{"name": ..., <CampaignConfig fields>...}]
    objectives: list
    campaigns: int = 1
    budget: int = 1000
    seed: int = 0
    parallel: int = 1
    stride: int = 10
    candidates: int = 41
    landmarks: int = 15
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        if not self.programs:
            raise ParameterError("grid lists no programs")
        if not self.configs:
            raise ParameterError("grid lists no configurations")
        if not self.objectives:
            raise ParameterError("grid lists no objectives")
        if self.campaigns < 1:
            raise ParameterError("campaigns must be >= 1")
        if self.stride < 1:
            raise ParameterError("stride must be >= 1")
        for o in self.objectives:
            ObjectiveKind.parse(o)
        names = [c.get("name") for c in self.configs]
        if None in names or len(set(names)) != len(names):
            raise ParameterError("every configuration needs a unique name")

    @classmethod
    def load(cls, path) -> "ExperimentGrid":
        path = Path(path)
        with open(path) as fh:
            d = json.load(fh)
        d.setdefault("root", path.parent)
        d["root"] = Path(d["root"])
        return cls(**d)

    def program_entries(self) -> list[dict]:
        out = []
        for i, p in enumerate(self.programs):
            entry = {"program": p} if isinstance(p, (str, os.PathLike)) else dict(p)
            prog_path = self.root / entry["program"]
            entry["program"] = str(prog_path)
            if entry.get("corpus"):
                entry["corpus"] = str(self.root / entry["corpus"])
            entry.setdefault("id", Path(prog_path).stem)
            out.append(entry)
        ids = [e["id"] for e in out]
        if len(set(ids)) != len(ids):
            raise ParameterError(f"duplicate program ids: {ids}")
        return out

    def work_items(self) -> list[dict]:
        items = []
        for entry in self.program_entries():
            for conf in self.configs:
                for obj in self.objectives:
                    for k in range(self.campaigns):
                        items.append({
                            "program": entry, "config": conf, "objective": obj,
                            "campaign": k, "budget": self.budget, "stride": self.stride,
                            "seed": stable_seed(self.seed, entry["id"], conf["name"], obj, k),
                            "corpus_seed": stable_seed(self.seed, entry["id"], "corpus", k),
                            "candidates": self.candidates, "landmarks": self.landmarks,
                        })
        return items

    def check_files(self) -> None:
        for e in self.program_entries():
            for key in ("program", "corpus"):
                if e.get(key) and not Path(e[key]).is_file():
                    raise FileNotFoundError(f"{key} file not found: {e[key]}")


def strides(budget: int, stride: int) -> list[int]:
    points = list(range(0, budget + 1, stride))
    if points[-1] != budget:
        points.append(budget)
    return points


def run_work_item(item: dict) -> tuple[list[list], str | None]:
    """Run one campaign; returns CSV rows and an error message (or None)."""
    entry = item["program"]
    ident = [entry["id"], item["config"]["name"], item["objective"], item["campaign"]]
    try:
        program, cfg = load_program(entry["program"])
        if entry.get("corpus"):
            corpus = Corpus.load(entry["corpus"])
        else:
            corpus = bootstrap_corpus(program, cfg, item["candidates"], item["landmarks"],
                                      seed=item["corpus_seed"])
        flags = {k: v for k, v in item["config"].items() if k != "name"}
        flags.update(budget=item["budget"], objective=item["objective"], seed=item["seed"])
        result = run_campaign(CampaignConfig.from_dict(flags), program, cfg, corpus)
    except Exception as exc:  # quarantined: one failed campaign must not sink a grid
        log.error("campaign %s failed: %s", ident, exc)
        return [ident + [FAILED, FAILED, FAILED]], f"{type(exc).__name__}: {exc}"
    total = result.total_edges
    rows = [ident + [e, result.covered_at(e), total]
            for e in strides(item["budget"], item["stride"])]
    return rows, None


def worker_width(requested: int) -> int:
    env = os.environ.get("GEOFUZZ_PARALLEL")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError(f"GEOFUZZ_PARALLEL must be an integer, got {env!r}") from None
    return max(1, int(requested))


def run_experiment(grid: ExperimentGrid, out_csv, parallel: int | None = None) -> dict:
    """Run every campaign of ``grid`` and write ``out_csv``.

    Rows are written in grid order whatever the worker count.  Timestamps
    and failures go to a ``.meta.json`` sidecar next to the CSV.
    """
    grid.check_files()
    items = grid.work_items()
    width = worker_width(parallel if parallel is not None else grid.parallel)
    started = time.time()
    if width == 1:
        results = map(run_work_item, items)
    else:
        pool = ProcessPoolExecutor(max_workers=width)
        results = pool.map(run_work_item, items, chunksize=1)
    errors = []
    n_rows = 0
    try:
        with open(out_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULT_COLUMNS)
            for item, (rows, err) in zip(items, results):
                w.writerows(rows)
                n_rows += len(rows)
                if err:
                    errors.append({"program_id": item["program"]["id"],
                                   "config_id": item["config"]["name"],
                                   "objective": item["objective"],
                                   "campaign": item["campaign"], "error": err})
    finally:
        if width > 1:
            pool.shutdown()
    meta = {
        "started": started, "finished": time.time(), "workers": width,
        "campaigns": len(items), "rows": n_rows, "errors": errors,
    }
    with open(str(out_csv) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
    return meta


# ---------------------------------------------------------------------------
# reporting


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_COLUMNS:
            raise DataError(f"unexpected header {reader.fieldnames}")
        rows = []
        for r in reader:
            for k in ("campaign", "evaluation", "covered_edges", "total_edges"):
                r[k] = int(r[k])
            rows.append(r)
    return rows


def normalized_coverage(covered: int, total_edges: int) -> float:
    return covered / (total_edges - 1)


def report(results_csv, curves_csv=None, summary_csv=None) -> tuple[list[dict], list[dict]]:
    """Mean and standard deviation of normalised coverage per
    (config, objective, evaluation), and at the final evaluation."""
    rows = [r for r in read_results(results_csv) if r["evaluation"] != FAILED]
    totals: dict = {}
    for r in rows:
        t = totals.setdefault(r["program_id"], r["total_edges"])
        if t != r["total_edges"]:
            raise DataError(f"program {r['program_id']} has inconsistent edge totals "
                            f"({t} vs {r['total_edges']})")

    curve_groups = defaultdict(list)
    final: dict = {}
    for r in rows:
        v = normalized_coverage(r["covered_edges"], r["total_edges"])
        if not 0.0 <= v <= 1.0:
            raise DataError(f"normalised coverage {v} out of range in {r}")
        curve_groups[(r["config_id"], r["objective"], r["evaluation"])].append(v)
        ck = (r["program_id"], r["config_id"], r["objective"], r["campaign"])
        if ck not in final or r["evaluation"] > final[ck][0]:
            final[ck] = (r["evaluation"], v)

    curves = [
        {"config_id": c, "objective": o, "evaluation": e, "mean": float(np.mean(v)),
         "std": float(np.std(v)), "n": len(v)}
        for (c, o, e), v in sorted(curve_groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2]))
    ]
    summary_groups = defaultdict(list)
    for (_, c, o, _), (e, v) in final.items():
        summary_groups[(c, o)].append((e, v))
    summary = []
    for (c, o), ev in sorted(summary_groups.items()):
        v = [x for _, x in ev]
        summary.append({"config_id": c, "objective": o, "evaluation": max(e for e, _ in ev),
                        "mean": float(np.mean(v)), "std": float(np.std(v)), "n": len(v)})
    for path, table in ((curves_csv, curves), (summary_csv, summary)):
        if path is not None:
            with open(path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(table[0]) if table else
                                   ["config_id", "objective", "evaluation", "mean", "std", "n"],
                                   lineterminator="\n")
                w.writeheader()
                w.writerows(table)
    return curves, summary


def final_coverage_by_program(results_csv) -> dict:
    """``{(config, objective): {program: [final normalised coverage, ...]}}``."""
    out: dict = defaultdict(lambda: defaultdict(list))
    last: dict = {}
    for r in read_results(results_csv):
        if r["evaluation"] == FAILED:
            continue
        ck = (r["program_id"], r["config_id"], r["objective"], r["campaign"])
        if ck not in last or r["evaluation"] > last[ck][0]:
            last[ck] = (r["evaluation"], normalized_coverage(r["covered_edges"], r["total_edges"]))
    for (p, c, o, _), (_, v) in sorted(last.items()):
        out[(c, o)][p].append(v)
    return out
