"""Command line entry point: ``geofuzz <command> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path


from . import harness
from .corpus import Corpus, bootstrap_corpus, edge_counts
from .errors import GeoFuzzError
from .fuzz_core import CampaignConfig, run_campaign
from .markov_geometry import (commute_time_metric, estimate_chain, hitting_prob_metric,
                              resistance_metric)
from .objectives import ObjectiveKind
from .toylang import GenParams, Trace, dump_program, generate_program, load_program


def _on_off(value: str) -> bool:
    v = value.lower()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {value!r}")


def cmd_gen(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.n_programs):
        params = GenParams(alphabet_size=args.alphabet, max_statements=args.max_statements,
                           max_depth=args.max_depth, seed=args.seed + i)
        program, cfg = generate_program(params)
        stem = out / f"prog_{i:03d}"
        stem.with_suffix(".json").write_text(dump_program(program, cfg) + "\n")
        stem.with_suffix(".txt").write_text(program.source())
        print(f"{stem}.json: {cfg.n} vertices, {len(cfg.edges)} edges, L={program.L}")


def _load_traces(path) -> list[Trace]:
    with open(path) as fh:
        d = json.load(fh)
    if isinstance(d, dict):
        d = d["traces"]
    return [Trace(tuple(int(v) for v in t)) for t in d]


def cmd_metrics(args) -> None:
    program, cfg = load_program(args.program)
    traces = _load_traces(args.traces) if args.traces else []
    counts = edge_counts(cfg, traces)
    chain = estimate_chain(counts, cfg.adjacency, args.smoothing)
    weights = counts + args.smoothing * cfg.adjacency if traces else cfg.adjacency
    metrics = [hitting_prob_metric(chain, args.beta), commute_time_metric(chain),
               resistance_metric(weights)]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "source_vertex", "target_vertex", "distance"])
        for m in metrics:
            for i in range(cfg.n):
                for j in range(cfg.n):
                    w.writerow([m.kind, i, j, repr(float(m.D[i, j]))])


def cmd_bootstrap(args) -> None:
    program, cfg = load_program(args.program)
    corpus = bootstrap_corpus(program, cfg, args.candidates, args.landmarks, seed=args.seed,
                              beta=args.beta)
    corpus.dump(args.out)
    print(f"{args.out}: {len(corpus.inputs)} inputs, landmarks {corpus.landmark_indices}")


def cmd_run(args) -> None:
    program, cfg = load_program(args.program)
    corpus = Corpus.load(args.corpus)
    config = CampaignConfig(
        budget=args.budget, schedule=args.schedule, objective=args.objective,
        bandwidth_adapt=args.bandwidth_adapt, pareto_filter=args.pareto, alpha=args.alpha,
        power_bound=args.power_bound, refresh=args.refresh, beta=args.beta,
        cell_arity=args.cell_arity, lift=args.lift, seed=args.seed,
    )
    result = run_campaign(config, program, cfg, corpus)
    doc = result.to_json()
    doc["totals"] = {
        "evaluations": result.total_evaluations,
        "covered_edges": result.covered_at(result.total_evaluations),
        "coverable_edges": cfg.coverable_edges,
        "elites": len(result.archive),
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
    t = doc["totals"]
    print(f"covered {t['covered_edges']}/{t['coverable_edges']} edges "
          f"after {t['evaluations']} evaluations; {t['elites']} elites")


def cmd_experiment(args) -> None:
    grid = harness.ExperimentGrid.load(args.grid)
    meta = harness.run_experiment(grid, args.out, parallel=args.parallel)
    print(f"{meta['campaigns']} campaigns, {meta['rows']} rows, {len(meta['errors'])} failed")


def cmd_report(args) -> None:
    _, summary = harness.report(args.input, args.curves, args.summary)
    for s in summary:
        print(f"{s['config_id']:>16} {s['objective']:>12}  {s['mean']:.3f} +- {s['std']:.3f} (n={s['n']})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geofuzz", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate toy programs")
    g.add_argument("--n-programs", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--alphabet", type=int, default=8)
    g.add_argument("--max-statements", type=int, default=GenParams.max_statements)
    g.add_argument("--max-depth", type=int, default=GenParams.max_depth)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    m = sub.add_parser("metrics", help="vertex dissimilarities of a program's CFG")
    m.add_argument("--program", required=True)
    m.add_argument("--traces", help="JSON list of traces (or a corpus file)")
    m.add_argument("--beta", type=float, default=0.5)
    m.add_argument("--smoothing", type=float, default=0.5)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_metrics)

    b = sub.add_parser("bootstrap", help="build an initial corpus with landmarks")
    b.add_argument("--program", required=True)
    b.add_argument("--candidates", type=int, default=41)
    b.add_argument("--landmarks", type=int, default=15)
    b.add_argument("--beta", type=float, default=0.5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bootstrap)

    r = sub.add_parser("run", help="run one fuzz campaign")
    r.add_argument("--program", required=True)
    r.add_argument("--corpus", required=True)
    r.add_argument("--budget", type=int, default=1000)
    r.add_argument("--schedule", choices=["default", "entropic", "simtropic"], default="entropic")
    r.add_argument("--objective", choices=[k.value for k in ObjectiveKind], default="hitprob")
    r.add_argument("--bandwidth-adapt", type=_on_off, default=True)
    r.add_argument("--pareto", type=_on_off, default=False)
    r.add_argument("--alpha", type=float, default=0.5)
    r.add_argument("--power-bound", type=int, default=16)
    r.add_argument("--refresh", type=int, default=50)
    r.add_argument("--beta", type=float, default=0.5)
    r.add_argument("--cell-arity", type=int, default=2)
    r.add_argument("--lift", choices=["hausdorff", "edit"], default="hausdorff")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("experiment", help="run an experiment grid")
    e.add_argument("--grid", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--parallel", type=int, default=None)
    e.set_defaults(func=cmd_experiment)

    rp = sub.add_parser("report", help="summarise experiment results")
    rp.add_argument("--in", dest="input", required=True)
    rp.add_argument("--curves")
    rp.add_argument("--summary")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (GeoFuzzError, FileNotFoundError) as exc:
        print(f"geofuzz: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
