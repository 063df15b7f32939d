"""Command-line entry points: build, evaluate, gen, bench."""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import io
from .core import EuclideanMetric, Params, WeightedPointSet
from .coreset import SampleSizePolicy, build_euclidean, build_metric
from .cost import BudgetError
from .solver import heuristic_solver
from .verify import (certify_robust_coreset, exhaustive_centers, perturbed_centers,
                     random_centers)

EXIT_OK, EXIT_INVALID, EXIT_BELOW_MIN_PASS = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _center_spec(text: str):
    if text == "exhaustive":
        return ("exhaustive", None)
    kind, _, count = text.partition(":")
    if kind in ("random", "perturb") and count.isdigit() and int(count) > 0:
        return (kind, int(count))
    raise argparse.ArgumentTypeError("expected exhaustive, random:N or perturb:N")


def _sizes(text: str):
    try:
        sizes = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("sizes must be comma-separated integers") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="robust-coreset", description="Robust coresets for (k,z)-clustering with outliers.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="construct a coreset")
    b.add_argument("--input", required=True)
    b.add_argument("--metric", choices=["euclidean", "explicit", "auto"], default="auto")
    b.add_argument("--mode", choices=["metric", "euclidean", "auto"], default="auto")
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--z", type=float, default=1.0)
    b.add_argument("--dim-d", type=float, default=1.0)
    b.add_argument("--c0", type=float, default=1.0)
    b.add_argument("--polylog-c", type=float, default=1.0)
    b.add_argument("--sample-override", type=int)
    b.add_argument("--solver", choices=["heuristic", "exact"], default="heuristic")
    b.add_argument("--check", type=int, default=50, help="random center sets for the report check")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out-coreset")
    b.add_argument("--out-report")

    e = sub.add_parser("evaluate", help="certify a coreset against its dataset")
    e.add_argument("--input", required=True)
    e.add_argument("--coreset", required=True)
    e.add_argument("--metric", choices=["euclidean", "explicit", "auto"], default="auto")
    e.add_argument("--k", type=int, default=1)
    e.add_argument("--m", type=int, required=True)
    e.add_argument("--z", type=float, default=1.0)
    e.add_argument("--eps", type=float, required=True)
    e.add_argument("--delta", type=float, default=0.0)
    e.add_argument("--centers", type=_center_spec, default=("random", 200))
    e.add_argument("--pool-size", type=int, default=12)
    e.add_argument("--min-pass", type=float, default=0.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out-report")

    g = sub.add_parser("gen", help="write a synthetic dataset")
    g.add_argument("--kind", choices=io.GENERATORS, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--m", type=int, default=0)
    g.add_argument("--spread", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")

    h = sub.add_parser("bench", help="time coreset construction across sizes")
    h.add_argument("--sizes", type=_sizes, required=True)
    h.add_argument("--repeats", type=int, default=1)
    h.add_argument("--d", type=int, default=2)
    h.add_argument("--k", type=int, default=5)
    h.add_argument("--m", type=int, default=5)
    h.add_argument("--eps", type=float, default=0.2)
    h.add_argument("--mode", choices=["metric", "euclidean"], default="euclidean")
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--out-report")
    return p


def _pick_mode(mode, metric, z):
    if mode != "auto":
        return mode
    return "euclidean" if metric.kind == "euclidean" and 1 <= z <= 2 else "metric"


def _build(X, metric, params, mode, policy_args, solver):
    c0, polylog, override = policy_args
    if mode == "euclidean":
        if metric.kind != "euclidean":
            raise ValueError("euclidean mode needs a Euclidean dataset")
        pol = SampleSizePolicy("euclidean", c0, polylog, override)
        return build_euclidean(X, params, metric, solver=solver, policy=pol)
    pol = SampleSizePolicy("metric", c0, polylog, override)
    return build_metric(X, params, metric, solver=solver, policy=pol)


def _emit(report, path):
    text = json.dumps(report, indent=2, allow_nan=False)
    if path:
        io.write_report(path, report)
    else:
        print(text)


def cmd_build(a) -> int:
    X, metric = io.load_dataset(a.input, a.metric)
    params = Params(a.k, a.m, a.eps, a.z, a.dim_d, a.seed, a.sample_override)
    if a.check < 1:
        raise ValueError("--check must be >= 1")
    mode = _pick_mode(a.mode, metric, a.z)
    rep = _build(X, metric, params, mode, (a.c0, a.polylog_c, a.sample_override), a.solver)
    t0 = time.perf_counter()
    rng = np.random.default_rng([a.seed, 7])
    cert = certify_robust_coreset(X, rep.coreset, a.m, a.z, metric, a.eps, rep.additive_budget,
                                  random_centers(X, a.k, a.check, rng))
    rep.wall_times["check"] = time.perf_counter() - t0
    if a.out_coreset:
        io.write_points(a.out_coreset, rep.coreset)
    config = {"command": "build", "input": a.input, "metric": metric.kind, "mode": mode,
              "k": a.k, "m": a.m, "eps": a.eps, "z": a.z, "dim_d": a.dim_d, "c0": a.c0,
              "polylog_c": a.polylog_c, "sample_override": a.sample_override, "solver": a.solver,
              "n": len(X), "total_weight": X.total_weight,
              "coreset_weight": rep.coreset.total_weight}
    report = io.make_report(config, rep.stage_sizes, rep.sample_sizes_used, rep.delta_ledger,
                            cert.as_dict(), {k: 1000 * v for k, v in rep.wall_times.items()},
                            a.seed, flags=rep.flags)
    _emit(report, a.out_report)
    return EXIT_OK


def cmd_evaluate(a) -> int:
    X, metric = io.load_dataset(a.input, a.metric)
    D = io.load_coreset(a.coreset, metric)
    rng = np.random.default_rng(a.seed)
    kind, count = a.centers
    t0 = time.perf_counter()
    if kind == "exhaustive":
        pool_idx = np.sort(rng.choice(len(X), size=min(a.pool_size, len(X)), replace=False))
        centers = exhaustive_centers(X.points[pool_idx], a.k, metric)
    elif kind == "random":
        centers = random_centers(X, a.k, count, rng)
    else:
        if not isinstance(metric, EuclideanMetric):
            raise ValueError("perturbed centers need a Euclidean dataset")
        opt, _ = heuristic_solver(X, a.k, a.m, a.z, metric, seed=a.seed)
        scale = float(np.std(X.points)) * 0.05 or 1.0
        centers = perturbed_centers(opt, count, rng, scale)
    cert = certify_robust_coreset(X, D, a.m, a.z, metric, a.eps, a.delta, centers)
    config = {"command": "evaluate", "input": a.input, "coreset": a.coreset, "k": a.k, "m": a.m,
              "z": a.z, "eps": a.eps, "delta": a.delta, "centers": f"{kind}:{count or ''}".rstrip(":")}
    report = io.make_report(config, {"input": len(X), "coreset": len(D)}, {}, {"delta": a.delta},
                            cert.as_dict(), {"evaluate": 1000 * (time.perf_counter() - t0)}, a.seed)
    _emit(report, a.out_report)
    return EXIT_OK if cert.pass_rate >= a.min_pass else EXIT_BELOW_MIN_PASS


def cmd_gen(a) -> int:
    pts = io.generate(a.kind, a.n, a.d, a.k, a.m, a.spread, a.seed)
    text = io.format_dataset(pts)
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def run_bench(sizes, repeats=1, d=2, k=5, m=5, eps=0.2, mode="euclidean", seed=0) -> dict:
    rows = []
    for n in sizes:
        pts = io.generate("gaussian_mixture", n, d, k, 0, 1.0, seed)
        X = WeightedPointSet.unweighted(pts)
        metric = EuclideanMetric(d)
        params = Params(k, m, eps, 1.0, 1.0, seed)
        times = []
        for r in range(repeats):
            t0 = time.perf_counter()
            rep = _build(X, metric, params, mode, (1.0, 1.0, None), "heuristic")
            times.append(time.perf_counter() - t0)
        rows.append({"n": n, "build_s": min(times), "all_s": times, "coreset_size": len(rep.coreset)})
    ratios = [rows[i + 1]["build_s"] / rows[i]["build_s"] for i in range(len(rows) - 1)]
    return {"sizes": sizes, "rows": rows, "ratios": ratios}


def cmd_bench(a) -> int:
    if a.repeats < 1:
        raise ValueError("--repeats must be >= 1")
    res = run_bench(a.sizes, a.repeats, a.d, a.k, a.m, a.eps, a.mode, a.seed)
    config = {"command": "bench", "d": a.d, "k": a.k, "m": a.m, "eps": a.eps, "mode": a.mode,
              "repeats": a.repeats}
    report = io.make_report(config, {str(r["n"]): r["coreset_size"] for r in res["rows"]}, {}, {},
                            {}, {str(r["n"]): 1000 * r["build_s"] for r in res["rows"]}, a.seed,
                            bench=res)
    _emit(report, a.out_report)
    return EXIT_OK


COMMANDS = {"build": cmd_build, "evaluate": cmd_evaluate, "gen": cmd_gen, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
    except (ValueError, BudgetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
