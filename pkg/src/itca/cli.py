"""Command-line front end.

Exit status: 0 on success, 2 for usage or configuration problems (bad flags,
missing files, unparsable input, search spaces over the enumeration cap) and
3 when the computation itself fails.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import LINKAGES, hierarchical_combine, kmeans_combine
from .classifiers import USER_KINDS, ClassifierSpec
from .criteria import CRITERIA, derive_seed
from .data import (
    DatasetError,
    SimulationConfig,
    load_csv,
    simulate,
    write_simulation,
)
from .partitions import (
    Partition,
    PartitionError,
    TooManyClasses,
    encode_ordinal,
    enumerate_ordinal,
    hamming,
    parse_partition,
)
from .search import STRATEGIES, SearchConfig, allowed_partitions, make_evaluator, search
from .svg import curve_svg, heatmap_svg
from .theory import region_grid

SUITES = ("k0_6", "k0_8", "k0_20", "custom")
BENCH_STRATEGIES = STRATEGIES + ("greedy_pruned", "bfs_pruned")


class UsageError(Exception):
    """Bad configuration; maps to exit status 2."""


# ---------------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=0, help="base random seed (default 0)")
    g.add_argument("--folds", type=int, default=5, help="cross-validation folds (default 5)")
    g.add_argument("--criterion", action="append", choices=CRITERIA,
                   help="criterion to optimize; repeat to report several (default itca)")
    g.add_argument("--classifier", action="append", choices=USER_KINDS,
                   help="classification algorithm; repeatable in benchmark (default lda)")
    g.add_argument("--strategy", action="append", choices=BENCH_STRATEGIES,
                   help="search strategy; repeatable in benchmark (default greedy, exhaustive in benchmark)")
    order = g.add_mutually_exclusive_group()
    order.add_argument("--ordinal", dest="ordinal", action="store_true", default=None,
                       help="only merge adjacent classes")
    order.add_argument("--nominal", dest="ordinal", action="store_false",
                       help="merge any classes (default)")
    g.add_argument("--prune", action="store_true", help="skip merges that cannot raise ITCA")
    g.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps (default 1)")
    g.add_argument("--out-dir", default="itca_out", help="directory for output files")
    g.add_argument("--config", help="JSON manifest of an earlier run to replay")
    g.add_argument("--n-trees", type=int, default=None, help="random forest size (default 100)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="itca", description=(
        "Search class combinations by information-theoretic classification accuracy."))
    parser.add_argument("--version", action="version", version=f"itca {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="search the best combination for a CSV")
    a.add_argument("csv", help="input CSV with a header row")
    a.add_argument("--label-column", default="label")
    a.add_argument("--forbid", action="append", default=[], metavar="A,B",
                   help="never put original classes A and B together (repeatable)")

    s = sub.add_parser("simulate", parents=[common], help="generate a random-walk dataset")
    s.add_argument("sim_config", help="JSON file with the simulation settings")
    s.add_argument("--output", help="CSV path (default OUT_DIR/simulation.csv)")

    b = sub.add_parser("benchmark", parents=[common], help="run a simulation sweep")
    b.add_argument("suite", choices=SUITES)
    b.add_argument("--partitions", help="custom suite: file with one true partition per line")
    b.add_argument("--limit", type=int, help="only the first N true partitions")
    b.add_argument("--n", type=int, default=2000, help="points per dataset (default 2000)")
    b.add_argument("--d", type=int, default=5, help="feature dimension (default 5)")
    b.add_argument("--step-length", type=float, default=3.0)
    b.add_argument("--sigma", type=float, default=1.5)
    b.add_argument("--instances", type=int, default=50, help="k0_20 suite size (default 50)")

    t = sub.add_parser("theory", parents=[common], help="merge-gain grids over (p1, p2)")
    t.add_argument("algorithm", choices=("oracle", "lda_limit", "lda", "empirical"))
    t.add_argument("--resolution", type=int, default=100)
    t.add_argument("--domain", choices=("omega", "restricted"), default="omega")
    t.add_argument("--separation", type=float, default=10.0)
    t.add_argument("--n", type=int, default=5000, help="points per simulated cell")

    c = sub.add_parser("baselines", parents=[common], help="clustering-based combinations")
    c.add_argument("csv")
    c.add_argument("--label-column", default="label")
    c.add_argument("--k-star", type=int, required=True)
    c.add_argument("--method", choices=("kmeans",) + LINKAGES + ("all",), default="all")
    return parser


_NOT_REPLAYED = {"config", "out_dir", "command", "output"}


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            manifest = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            parser.exit(2, f"itca: error: config file not found: {args.config}\n")
        except json.JSONDecodeError as exc:
            parser.exit(2, f"itca: error: config file is not valid JSON: {exc}\n")
        saved = manifest.get("args", manifest)
        if manifest.get("command", args.command) != args.command:
            parser.exit(2, f"itca: error: manifest is for '{manifest['command']}', not '{args.command}'\n")
        # explicit flags win over the manifest
        explicit = vars(parser.parse_args(argv))
        defaults = vars(build_parser().parse_args([args.command] + _positionals(args)))
        for key, val in saved.items():
            if key in _NOT_REPLAYED or key not in explicit:
                continue
            if explicit[key] == defaults.get(key):
                setattr(args, key, val)
    return args


def _positionals(args) -> list[str]:
    return {
        "analyze": lambda: [args.csv],
        "simulate": lambda: [args.sim_config],
        "benchmark": lambda: [args.suite],
        "theory": lambda: [args.algorithm],
        "baselines": lambda: [args.csv, "--k-star", str(args.k_star)],
    }[args.command]()


# ---------------------------------------------------------------------------
# helpers


def _first(values, default):
    return values[0] if values else default


def _spec(kind: str, args, seed: int) -> ClassifierSpec:
    params = {}
    if kind == "random_forest" and args.n_trees is not None:
        params["n_trees"] = args.n_trees
    return ClassifierSpec(kind, params, seed)


def _forbidden(items) -> tuple:
    pairs = []
    for item in items:
        try:
            a, b = (int(v) for v in item.split(","))
        except ValueError:
            raise UsageError(f"--forbid expects A,B with integer labels, got {item!r}") from None
        pairs.append((a, b))
    return tuple(pairs)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_manifest(out: Path, args, config: dict, outputs: list[Path], started: str) -> Path:
    saved = {k: v for k, v in vars(args).items() if k not in _NOT_REPLAYED}
    manifest = {
        "tool": "itca",
        "version": __version__,
        "command": args.command,
        "args": saved,
        "config": config,
        "seed": args.seed,
        "started": started,
        "finished": _now(),
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _ordinal_flag(args, default: bool) -> bool:
    return default if args.ordinal is None else args.ordinal


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True)


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(args, out: Path) -> list[Path]:
    ds, mapping = load_csv(args.csv, args.label_column)
    criteria = args.criterion or ["itca"]
    strategy = _first(args.strategy, "greedy")
    if strategy not in STRATEGIES:
        raise UsageError(f"analyze supports strategies {', '.join(STRATEGIES)}; use --prune for pruning")
    cfg = SearchConfig(
        strategy=strategy,
        criterion=criteria[0],
        classifier=_spec(_first(args.classifier, "lda"), args, args.seed),
        ordinal=_ordinal_flag(args, False),
        forbidden_merges=_forbidden(args.forbid),
        prune=args.prune,
        folds=args.folds,
        seed=args.seed,
    )
    if cfg.strategy == "exhaustive":
        allowed_partitions(ds.k0, cfg.ordinal, cfg.forbidden_merges)  # cap check up front
    ev = make_evaluator(ds, cfg)
    return _run_analyze(ds, mapping, cfg, criteria, ev, out)


def _run_analyze(ds, mapping, cfg, criteria, ev, out):
    trace_path = out / "trace.jsonl"
    with trace_path.open("w", encoding="utf-8") as fh:
        step = [0]

        def on_step(p, rep):
            row = {"event": "evaluated", "step": step[0], "partition": str(p), "k": p.k,
                   "report": rep.to_dict()}
            if len(criteria) > 1:
                row["other"] = {c: ev.report(c, p).to_dict() for c in criteria[1:]}
            fh.write(_dump(row) + "\n")
            fh.flush()
            step[0] += 1

        try:
            trace = search(ds, cfg, ev, on_step)
        except TooManyClasses as exc:
            raise UsageError(str(exc)) from exc
        for p, reason in trace.pruned:
            fh.write(_dump({"event": "pruned", "partition": str(p), "k": p.k, "reason": reason}) + "\n")
        fh.write(_dump({"event": "best", "partition": str(trace.best), "k": trace.best.k,
                        "value": trace.best_value,
                        "evaluation_count": trace.evaluation_count}) + "\n")

    names = {v: k for k, v in mapping.items()}
    best = trace.best
    ranked = sorted(trace.evaluated, key=lambda t: -t[1].mean)
    summary = {
        "best": str(best),
        "k": best.k,
        "value": trace.best_value,
        "criterion": cfg.criterion,
        "groups": [[names[c] for c in g] for g in best.groups()],
        "label_mapping": mapping,
        "evaluation_count": trace.evaluation_count,
        "pruned_count": len(trace.pruned),
        "top": [{"partition": str(p), "mean": r.mean, "stderr": r.stderr} for p, r in ranked[:10]],
        "search": cfg.to_dict(),
    }
    best_path = out / "best.json"
    best_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    per_k: dict[int, tuple] = {}
    for p, rep in trace.evaluated:
        cur = per_k.get(p.k)
        if cur is None or rep.mean > cur[1].mean:
            per_k[p.k] = (p, rep)
    curve_path = out / "curve.csv"
    with curve_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "partition", "mean", "stderr"])
        for k in sorted(per_k):
            p, rep = per_k[k]
            w.writerow([k, str(p), repr(rep.mean), repr(rep.stderr)])
    svg_path = out / "curve.svg"
    curve_svg(svg_path, [(p.k, r.mean) for p, r in trace.evaluated],
              [(k, per_k[k][1].mean) for k in per_k],
              title=f"{cfg.criterion} by number of combined classes", ylabel=cfg.criterion)
    print(f"best {cfg.criterion} = {trace.best_value:.6f} at {best} "
          f"({trace.evaluation_count} combinations evaluated)")
    return [trace_path, best_path, curve_path, svg_path]


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args, out: Path) -> list[Path]:
    path = Path(args.sim_config)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None
    raw = raw.get("config", raw)
    try:
        cfg = SimulationConfig.from_dict(raw)
    except (TypeError, KeyError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    target = Path(args.output) if args.output else out / "simulation.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    ds = simulate(cfg)
    csv_path, sidecar = write_simulation(ds, cfg, target)
    print(f"wrote {ds.n} x {ds.d} dataset with K0={ds.k0} to {csv_path}")
    return [csv_path, sidecar]


# ---------------------------------------------------------------------------
# benchmark


def suite_partitions(args) -> list[Partition]:
    if args.suite == "k0_6":
        parts = [p for p in enumerate_ordinal(6, include_identity=True) if p.k >= 2]
    elif args.suite == "k0_8":
        parts = [p for p in enumerate_ordinal(8, include_identity=True) if p.k >= 2]
    elif args.suite == "k0_20":
        rng = np.random.default_rng(args.seed)
        parts, seen = [], set()
        while len(parts) < args.instances:
            bits = rng.integers(0, 2, 19)
            if bits.sum() == 0 or tuple(bits) in seen:
                continue
            seen.add(tuple(bits))
            parts.append(Partition(tuple(np.concatenate([[1], 1 + np.cumsum(bits)]).tolist())))
    else:
        if not args.partitions:
            raise UsageError("the custom suite needs --partitions FILE")
        lines = Path(args.partitions).read_text(encoding="utf-8").splitlines()
        parts = [parse_partition(line) for line in lines if line.strip() and not line.startswith("#")]
        if not parts:
            raise UsageError(f"{args.partitions}: no partitions")
    if args.limit is not None:
        parts = parts[: args.limit]
    return parts


def _bench_one(task):
    index, text, sim, cells, folds, seed, rf_trees = task
    true_p = parse_partition(text)
    cfg = SimulationConfig.from_dict({**sim, "true_partition": text,
                                      "seed": derive_seed(seed, text, 0, "dataset")})
    ds = simulate(cfg)
    ordinal = true_p.is_ordinal
    rows = []
    evaluators = {}
    for criterion, strategy, kind in cells:
        prune = strategy.endswith("_pruned")
        base = strategy.replace("_pruned", "")
        params = {"n_trees": rf_trees} if kind == "random_forest" and rf_trees else {}
        scfg = SearchConfig(strategy=base, criterion=criterion,
                            classifier=ClassifierSpec(kind, params, seed),
                            ordinal=True, prune=prune, folds=folds, seed=cfg.seed)
        if kind not in evaluators:
            evaluators[kind] = make_evaluator(ds, scfg)
        trace = search(ds, scfg, evaluators[kind])
        dist = hamming(encode_ordinal(trace.best), encode_ordinal(true_p)) if ordinal else None
        rows.append({
            "index": index, "true_partition": text, "k_star": true_p.k, "criterion": criterion,
            "strategy": strategy, "classifier": kind, "best": str(trace.best),
            "best_value": trace.best_value, "success": int(trace.best == true_p),
            "hamming": dist, "evaluations": trace.evaluation_count,
        })
    return rows


def cmd_benchmark(args, out: Path) -> list[Path]:
    parts = suite_partitions(args)
    criteria = args.criterion or ["itca"]
    strategies = args.strategy or ["exhaustive"]
    if args.prune:
        strategies = [s if s.endswith("_pruned") or s == "exhaustive" else s + "_pruned"
                      for s in strategies]
    kinds = args.classifier or ["lda"]
    if args.suite == "k0_20" and "exhaustive" in strategies:
        raise UsageError("exhaustive search over K0=20 ordinal classes (524,287 combinations) "
                         "is outside desk scale; use greedy or bfs")
    for p in parts:
        if not p.is_ordinal:
            raise UsageError(f"benchmark true partitions must be ordinal, got {p}")
    sim = {"step_length": args.step_length, "sigma": args.sigma, "n": args.n, "d": args.d}
    cells = [(c, s, k) for k in kinds for s in strategies for c in criteria]
    tasks = [(i, str(p), sim, cells, args.folds, args.seed, args.n_trees) for i, p in enumerate(parts)]

    rows_path = out / "instances.jsonl"
    results = []
    with rows_path.open("w", encoding="utf-8") as fh:
        def consume(rows):
            for row in rows:
                fh.write(_dump(row) + "\n")
            fh.flush()
            results.extend(rows)
            print(f"  {rows[0]['true_partition']} done", file=sys.stderr)

        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for rows in pool.map(_bench_one, tasks):
                    consume(rows)
        else:
            for task in tasks:
                consume(_bench_one(task))

    results.sort(key=lambda r: (r["index"], r["classifier"], r["strategy"], r["criterion"]))
    inst_path = out / "instances.csv"
    fields = ["index", "true_partition", "k_star", "criterion", "strategy", "classifier", "best",
              "best_value", "success", "hamming", "evaluations"]
    with inst_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow({**r, "best_value": repr(r["best_value"])})
    table_path = out / "results.csv"
    summary = summarize(results)
    with table_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["classifier", "strategy", "criterion", "successes", "total", "avg_hamming",
                    "max_hamming", "avg_evaluations", "failed_k_star"])
        for row in summary:
            w.writerow(row)
            print(f"{row[0]:>14} {row[1]:>14} {row[2]:>16}  {row[3]}/{row[4]}  "
                  f"avg H {row[5]}  max H {row[6]}  evals {row[7]}")
    return [rows_path, inst_path, table_path]


def summarize(results: list[dict]) -> list[list]:
    groups: dict[tuple, list[dict]] = {}
    for r in results:
        groups.setdefault((r["classifier"], r["strategy"], r["criterion"]), []).append(r)
    out = []
    for key in sorted(groups):
        rs = groups[key]
        ham = [r["hamming"] for r in rs if r["hamming"] is not None]
        failed = sorted({r["k_star"] for r in rs if not r["success"]})
        out.append([*key, sum(r["success"] for r in rs), len(rs),
                    f"{np.mean(ham):.4f}" if ham else "", max(ham) if ham else "",
                    f"{np.mean([r['evaluations'] for r in rs]):.4f}",
                    " ".join(map(str, failed))])
    return out


# ---------------------------------------------------------------------------
# theory


def cmd_theory(args, out: Path) -> list[Path]:
    spec = None
    if args.algorithm == "empirical":
        spec = _spec(_first(args.classifier, "lda"), args, args.seed)

    def progress(i, total):
        print(f"  cell {i}/{total}", file=sys.stderr)

    grid = region_grid(args.algorithm, args.resolution, args.domain, separation=args.separation,
                       classifier=spec, sim={"n": args.n}, folds=args.folds, seed=args.seed,
                       progress=progress if spec is not None else None)
    csv_path = grid.write_csv(out / "grid.csv")
    svg_path = out / "grid.svg"
    heatmap_svg(svg_path, grid.p1, grid.p2, grid.values,
                title=f"{grid.algorithm}: merge region {grid.area_fraction:.4f}",
                cell=None if args.domain == "restricted" else 1.0 / args.resolution)
    area_path = out / "area.json"
    area_path.write_text(json.dumps({"algorithm": grid.algorithm, "domain": grid.domain,
                                     "resolution": grid.resolution, "cells": int(grid.values.size),
                                     "area_fraction": grid.area_fraction}, indent=2,
                                    sort_keys=True) + "\n", encoding="utf-8")
    print(f"{grid.algorithm}: merge region covers {grid.area_fraction:.4f} of {grid.values.size} cells")
    return [csv_path, svg_path, area_path]


# ---------------------------------------------------------------------------
# baselines


def cmd_baselines(args, out: Path) -> list[Path]:
    ds, mapping = load_csv(args.csv, args.label_column)
    if not 1 <= args.k_star <= ds.k0:
        raise UsageError(f"--k-star must lie in 1..{ds.k0}")
    methods = ["kmeans", *LINKAGES] if args.method == "all" else [args.method]
    result = {}
    for m in methods:
        if m == "kmeans":
            p = kmeans_combine(ds, args.k_star, args.seed)
        else:
            p = hierarchical_combine(ds, args.k_star, m)
        result[m] = str(p)
        print(f"{m:>9}: {p}")
    path = out / "baselines.json"
    path.write_text(json.dumps({"k_star": args.k_star, "partitions": result,
                                "label_mapping": mapping}, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return [path]


# ---------------------------------------------------------------------------


_COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
    "theory": cmd_theory,
    "baselines": cmd_baselines,
}

_CONFIG_ERRORS = (UsageError, FileNotFoundError, IsADirectoryError, DatasetError, PartitionError)


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    started = _now()
    if args.folds < 2:
        print("itca: error: --folds must be at least 2", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("itca: error: --jobs must be at least 1", file=sys.stderr)
        return 2
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"itca: error: cannot create output directory: {exc}", file=sys.stderr)
        return 2
    try:
        outputs = _COMMANDS[args.command](args, out)
    except _CONFIG_ERRORS as exc:
        print(f"itca: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # configuration objects validate eagerly, so these are input problems too
        print(f"itca: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report any computation failure
        print(f"itca: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    _write_manifest(out, args, {"outputs": [p.name for p in outputs]}, outputs, started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
