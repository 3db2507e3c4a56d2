"""Command-line interface: ``gen``, ``cluster``, ``eval`` and ``compare``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.  Result files never contain timings; build statistics go to
stderr or to the file named by ``--stats``.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import fileio
from .core import (
    InputError,
    InvariantError,
    ThresholdTree,
    as_points,
    check_dims,
    nearest_center_cost,
    route_many,
    split_work,
    tree_cost,
)
from .instances import INSTANCES, generate, solve_reference
from .kmeans import build_kmeans_tree
from .kmedians import build_fast, build_simplified
from .two_means import exact_2means_tree

METHODS = {
    "kmedians": ("median-random", "median-simplified", "imm"),
    "kmeans": ("mean-sweep", "mean-random", "imm"),
    "2means": ("2means-exact",),
}
ALL_METHODS = ("median-random", "median-simplified", "mean-sweep", "mean-random", "imm", "2means-exact")
REFERENCES = ("fixed-centers", "refit", "file")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def cost_objective(objective: str) -> str:
    return "kmeans" if objective == "2means" else objective


def check_method(objective: str, method: str) -> None:
    if objective not in METHODS:
        raise UsageError(f"unknown objective {objective!r}")
    if method not in METHODS[objective]:
        raise UsageError(f"method {method!r} does not apply to objective {objective!r}; "
                         f"choose from {', '.join(METHODS[objective])}")


def build_tree(objective: str, method: str, centers, points=None, seed=None) -> ThresholdTree:
    """Dispatch to the builder for ``method``; points are used only where the method needs them."""
    check_method(objective, method)
    centers = as_points(centers, "centers")
    if points is not None:
        check_dims(points, centers)
    if method in ("mean-sweep", "imm", "2means-exact") and points is None:
        raise UsageError(f"method {method!r} needs --points")
    if method == "median-random":
        return build_fast(centers, seed)
    if method == "median-simplified":
        pool = centers if points is None else np.vstack([centers, points])
        bound = 2.0 * float(np.abs(pool).max()) or 1.0
        return build_simplified(centers, bound, seed)
    if method == "mean-sweep":
        return build_kmeans_tree(points, centers, "sweep")
    if method == "mean-random":
        # the random splitter looks only at the centers
        return build_kmeans_tree(None, centers, "random", seed)
    if method == "imm":
        return build_kmeans_tree(points, centers, "imm", metric="l1" if objective == "kmedians" else "l2")
    if centers.shape[0] != 2:
        raise InputError(f"2means-exact needs exactly 2 centers, got {centers.shape[0]}")
    return exact_2means_tree(points, centers)


def refit_centers(tree: ThresholdTree, points, centers, objective: str) -> np.ndarray:
    """Per-leaf optimal centers (median for k-medians, centroid otherwise); empty leaves keep theirs."""
    leaf_of = tree.center[route_many(tree, points)]
    out = np.array(centers, dtype=np.float64, copy=True)
    update = np.median if objective == "kmedians" else np.mean
    for j in range(tree.k):
        members = points[leaf_of == j]
        if len(members):
            out[j] = update(members, axis=0)
    return out


def evaluate(tree: ThresholdTree, points, centers, objective: str, reference: str = "fixed-centers",
             reference_cost: float | None = None) -> dict:
    obj = cost_objective(objective)
    check_dims(points, centers)
    if reference == "refit":
        report = tree_cost(tree, points, refit_centers(tree, points, centers, obj), obj)
    else:
        report = tree_cost(tree, points, centers, obj)
    if reference == "file":
        if reference_cost is None:
            raise UsageError("--reference file needs --reference-file")
        ref = float(reference_cost)
    else:
        ref = nearest_center_cost(points, centers, obj).total_cost
    report = report.with_reference(ref)
    out = {
        "objective": objective,
        "reference": reference,
        "tree_cost": report.total_cost,
        "reference_cost": ref,
        "ratio": report.ratio,
        "n": int(points.shape[0]),
        "k": tree.k,
        "d": tree.d,
        "height": tree.height(),
    }
    if tree.audit is not None:
        out["audit"] = fileio.to_jsonable(tree.audit)
    return out


def _read_reference(path) -> float:
    obj = fileio.read_json(path)
    if isinstance(obj, dict):
        obj = obj.get("reference_cost")
    if not isinstance(obj, (int, float)) or isinstance(obj, bool) or obj < 0:
        raise InputError(f"{path}: expected a non-negative reference_cost")
    return float(obj)


def _emit_stats(args, stats) -> None:
    text = json.dumps(fileio.to_jsonable(stats), sort_keys=True)
    if getattr(args, "stats", None):
        with open(args.stats, "a") as fh:
            fh.write(text + "\n")
    else:
        print(text, file=sys.stderr)


def _load_inputs(args, need_points: bool):
    points = fileio.read_points(args.points, "points") if args.points else None
    if need_points and points is None:
        raise UsageError("--points is required here")
    if args.centers:
        centers = fileio.read_points(args.centers, "centers")
    elif args.fit_k:
        if points is None:
            raise UsageError("--fit-k needs --points")
        centers = solve_reference(points, args.fit_k, cost_objective(args.objective), args.seed)
        if getattr(args, "out_centers", None):
            fileio.write_points(args.out_centers, centers)
    else:
        raise UsageError("give --centers or --fit-k")
    if points is not None:
        check_dims(points, centers)
    return points, centers


# --- subcommands -------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.instance == "blobs" and (args.d is None or args.n is None):
        raise UsageError("--instance blobs needs --d and --n")
    if args.instance == "imm-adversarial" and args.d is not None:
        raise UsageError("imm-adversarial fixes d = 2(k-1); drop --d")
    bundle = generate(args.instance, args.k, d=args.d, n=args.n, spread=args.spread, seed=args.seed)
    fileio.write_points(args.out_points, bundle.data)
    fileio.write_points(args.out_centers, bundle.centers)
    if args.out_meta:
        meta = {key: val for key, val in bundle.meta.items() if key != "labels"}
        meta["n"] = int(bundle.data.shape[0])
        for objective, cost in bundle.planted_cost.items():
            meta[f"planted_{objective}_cost"] = cost
        fileio.write_json(args.out_meta, meta)
    return 0


def cmd_cluster(args) -> int:
    check_method(args.objective, args.method)
    if args.fit_k and not args.out_centers:
        raise UsageError("--fit-k needs --out-centers so the fitted centers can be evaluated later")
    needs_points = args.method in ("mean-sweep", "imm", "2means-exact") or bool(args.fit_k)
    points, centers = _load_inputs(args, needs_points)
    start = time.perf_counter()
    tree = build_tree(args.objective, args.method, centers, points, args.seed)
    elapsed = time.perf_counter() - start
    fileio.write_tree(args.out_tree, tree)
    _emit_stats(args, {"command": "cluster", "method": args.method, "k": tree.k, "d": tree.d,
                       "splits": len(tree.internal_nodes()), "split_work": split_work(tree),
                       "height": tree.height(), "wall_time_s": elapsed})
    return 0


def cmd_eval(args) -> int:
    points = fileio.read_points(args.points, "points")
    centers = fileio.read_points(args.centers, "centers")
    check_dims(points, centers)
    tree = fileio.read_tree(args.tree, centers)
    if tree.d != points.shape[1]:
        raise InputError(f"tree has d={tree.d} but points have d={points.shape[1]}")
    if args.reference == "file" and not args.reference_file:
        raise UsageError("--reference file needs --reference-file")
    ref = _read_reference(args.reference_file) if args.reference == "file" else None
    report = evaluate(tree, points, centers, args.objective, args.reference, ref)
    if args.out_report:
        fileio.write_json(args.out_report, report)
    else:
        print(json.dumps(fileio.to_jsonable(report), indent=2))
    return 0


COMPARE_COLUMNS = ("row", "method", "trial", "seed", "cost", "ratio", "height", "cost_std", "ratio_std")


def cmd_compare(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise UsageError("--methods is empty")
    for m in methods:
        check_method(args.objective, m)
    if args.reference == "file" and not args.reference_file:
        raise UsageError("--reference file needs --reference-file")
    points, centers = _load_inputs(args, True)
    ref = _read_reference(args.reference_file) if args.reference == "file" else None
    base = 0 if args.seed is None else args.seed
    rows, timings = [], []
    for m in methods:
        costs, ratios = [], []
        for trial in range(args.trials):
            seed = base + trial
            start = time.perf_counter()
            tree = build_tree(args.objective, m, centers, points, seed)
            timings.append({"method": m, "trial": trial, "build_time_s": time.perf_counter() - start})
            rep = evaluate(tree, points, centers, args.objective, args.reference, ref)
            costs.append(rep["tree_cost"])
            ratios.append(rep["ratio"])
            rows.append(["trial", m, trial, seed, repr(rep["tree_cost"]), repr(rep["ratio"]),
                         rep["height"], "", ""])
        rows.append(["summary", m, "", "", repr(float(np.mean(costs))), repr(float(np.mean(ratios))), "",
                     repr(float(np.std(costs))), repr(float(np.std(ratios)))])
    with open(args.out_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_COLUMNS)
        w.writerows(rows)
    _emit_stats(args, {"command": "compare", "timings": timings})
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="explainclust", description="Explainable clustering with threshold trees.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--instance", required=True, choices=INSTANCES)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--d", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--spread", type=float, default=1.0)
    g.add_argument("--seed", type=int)
    g.add_argument("--out-points", required=True)
    g.add_argument("--out-centers", required=True)
    g.add_argument("--out-meta")
    g.set_defaults(func=cmd_gen)

    def inputs(sp):
        sp.add_argument("--objective", required=True, choices=tuple(METHODS))
        sp.add_argument("--points")
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--centers")
        src.add_argument("--fit-k", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--stats", help="append build statistics here instead of stderr")

    c = sub.add_parser("cluster", help="build a threshold tree")
    inputs(c)
    c.add_argument("--method", required=True, choices=ALL_METHODS)
    c.add_argument("--out-tree", required=True)
    c.add_argument("--out-centers", help="where to write centers fitted with --fit-k")
    c.set_defaults(func=cmd_cluster)

    e = sub.add_parser("eval", help="evaluate a tree against a reference cost")
    e.add_argument("--tree", required=True)
    e.add_argument("--points", required=True)
    e.add_argument("--centers", required=True)
    e.add_argument("--objective", required=True, choices=tuple(METHODS))
    e.add_argument("--reference", default="fixed-centers", choices=REFERENCES)
    e.add_argument("--reference-file")
    e.add_argument("--out-report")
    e.set_defaults(func=cmd_eval)

    m = sub.add_parser("compare", help="run several methods over seeded trials")
    inputs(m)
    m.add_argument("--trials", type=int, default=1)
    m.add_argument("--methods", required=True, help="comma-separated method names")
    m.add_argument("--reference", default="fixed-centers", choices=REFERENCES)
    m.add_argument("--reference-file")
    m.add_argument("--out-csv", required=True)
    m.add_argument("--out-centers", help="where to write centers fitted with --fit-k")
    m.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except InvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 3
    except (InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
