"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured numbers
and then asserts, so ``pytest -v`` shows both the verdict and the evidence.
"""
import json
import math
import time

import jsonschema
import numpy as np
import pytest

from explainclust import cli, fileio
from explainclust.core import assign, nearest_center_cost, tree_cost
from explainclust.instances import (
    average_distance_bound,
    brute_force_oracle,
    gen_imm_adversarial,
    gen_kmeans_lb,
    gen_kmedians_lb,
    hamming_matrix,
    kmeans_lb_first_split_check,
    partition_median_cost,
    solve_reference,
)
from explainclust.kmeans import build_kmeans_tree, cost_accounting_sides
from explainclust.kmedians import build_fast, build_simplified
from explainclust.two_means import algebraic_lemma_batch, exact_2means_tree

from conftest import random_instance


def verdict(report, n, ok, detail):
    report(f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {detail}")
    return ok


# --- 1 -------------------------------------------------------------------------

def test_01_sampler_distribution_equivalence(report):
    centers = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    probes = [(1.0, 0.0), (1.0, 1.0), (2.0, 2.0), (0.5, 3.0), (3.0, 0.5)]
    trials = 200_000
    start = time.perf_counter()
    counts = {}
    for name, seed in (("fast", 101), ("simplified", 202)):
        rng = np.random.default_rng(seed)
        c = np.zeros((len(probes), 3), dtype=np.int64)
        for _ in range(trials):
            tree = build_fast(centers, rng) if name == "fast" else build_simplified(centers, 8.0, rng)
            for j, p in enumerate(probes):
                c[j, assign(tree, p)] += 1
        counts[name] = c / trials
    elapsed = time.perf_counter() - start
    tv = 0.5 * np.abs(counts["fast"] - counts["simplified"]).sum(axis=1)
    ok = bool(np.all(tv <= 0.02) and elapsed < 120)
    verdict(report, 1, ok, f"max TV over 5 probes = {tv.max():.4f} (<= 0.02), {elapsed:.0f}s (< 120s)")
    assert ok


# --- 2 -------------------------------------------------------------------------

def test_02_kmedians_work_bound(report):
    start = time.perf_counter()
    worst = {}
    for k in (16, 256, 4096):
        centers = np.random.default_rng(k).normal(size=(k, 8))
        worst[k] = max(build_fast(centers, seed=s).audit.work / (k * math.log(k)) for s in range(20))
    elapsed = time.perf_counter() - start
    ok = all(v <= 1 for v in worst.values()) and elapsed < 60
    detail = ", ".join(f"k={k}: max W/(k ln k)={v:.3f}" for k, v in worst.items())
    verdict(report, 2, ok, f"{detail}; {elapsed:.0f}s (< 60s)")
    assert ok


# --- 3-6 share one suite of 50 random instances ---------------------------------

@pytest.fixture(scope="module")
def kmeans_suite():
    rng = np.random.default_rng(2718)
    suite = []
    timings = {}
    for i in range(50):
        k = int(rng.integers(2, 21))
        d = int(rng.integers(1, 7))
        n = int(rng.integers(k, 501))
        data, centers = random_instance(rng, k, d, n)
        centers = np.unique(centers, axis=0)
        trees = {}
        for method in ("sweep", "random", "imm"):
            t0 = time.perf_counter()
            trees[method] = build_kmeans_tree(data, centers, method, seed=i)
            timings[method] = timings.get(method, 0.0) + time.perf_counter() - t0
        suite.append((data, centers, trees))
    return suite, timings


def test_03_ratio_bound_at_every_sweep_node(report, kmeans_suite):
    suite, timings = kmeans_suite
    nodes = violations = 0
    worst = 0.0
    for data, centers, trees in suite:
        audit = trees["sweep"].audit
        nodes += len(audit.splits)
        violations += len(audit.ratio_bound_violations())
        for s in audit.splits:
            bound = audit.ratio_bound(s)
            if bound > 0 and math.isfinite(bound):
                worst = max(worst, s.mistakes / s.balance / bound)
    ok = violations == 0 and timings["sweep"] < 120
    verdict(report, 3, ok, f"{violations} violations over {nodes} sweep nodes; "
                           f"max (E/f)/(15 ln k cost_cor/C2) = {worst:.4f}; {timings['sweep']:.1f}s")
    assert ok


def test_04_margin_event_probability(report, kmeans_suite):
    suite, timings = kmeans_suite
    probs = [s.p_event for _, _, trees in suite for s in trees["random"].audit.splits]
    ok = min(probs) >= 1 / 3 and timings["random"] < 60
    verdict(report, 4, ok, f"{sum(p < 1 / 3 for p in probs)} violations over {len(probs)} nodes; "
                           f"min P = {min(probs):.4f} (>= 1/3); {timings['random']:.1f}s")
    assert ok


def test_05_cost_accounting(report, kmeans_suite):
    suite, _ = kmeans_suite
    violations = checked = 0
    worst = 0.0
    for data, centers, trees in suite:
        for tree in trees.values():
            cost, bound = cost_accounting_sides(tree, data, centers)
            checked += 1
            worst = max(worst, cost / bound if bound > 0 else 0.0)
            violations += cost > bound * (1 + 1e-9)
    ok = violations == 0
    verdict(report, 5, ok, f"{violations} violations over {checked} trees; max cost/(2 ref + 2 sum E C2) = {worst:.4f}")
    assert ok


def test_06_path_balance(report, kmeans_suite):
    suite, _ = kmeans_suite
    violations = points = 0
    worst = 0.0
    for data, centers, trees in suite:
        k = len(centers)
        for tree in trees.values():
            pb = tree.audit.path_balance
            points += len(pb)
            violations += int(np.sum(pb > k))
            worst = max(worst, pb.max() / k)
    ok = violations == 0
    verdict(report, 6, ok, f"{violations} violations over {points} point-paths; max path-sum/k = {worst:.3f}")
    assert ok


# --- 7 -------------------------------------------------------------------------

def test_07_adversarial_separation(report):
    start = time.perf_counter()
    b = gen_imm_adversarial(10)
    opt = b.planted_cost["kmedians"]
    imm = tree_cost(build_kmeans_tree(b.data, b.centers, "imm", metric="l1"), b.data, b.centers,
                    "kmedians").total_cost / opt
    ratios = np.array([tree_cost(build_fast(b.centers, s), b.data, b.centers, "kmedians").total_cost / opt
                       for s in range(100)])
    elapsed = time.perf_counter() - start
    ok = imm >= 2.5 and ratios.mean() <= imm / 2 and elapsed < 60
    # context only: the same statistic over many more seeds
    long_run = np.mean([tree_cost(build_fast(b.centers, s), b.data, b.centers, "kmedians").total_cost / opt
                        for s in range(100, 5100)])
    verdict(report, 7, ok, f"IMM ratio {imm:.3f} (>= 2.5); median-random mean over seeds 0-99 "
                           f"{ratios.mean():.4f} (<= {imm / 2:.4f}); {elapsed:.1f}s. "
                           f"Info: mean over 5000 further seeds = {long_run:.4f}")
    assert ok


# --- 8 -------------------------------------------------------------------------

def test_08_two_means(report):
    start = time.perf_counter()
    rng = np.random.default_rng(88)
    mismatch = over = 0
    worst_gap = worst_ratio = 0.0
    for _ in range(25):
        data = rng.normal(size=(12, 3)) * rng.uniform(0.5, 2.0, size=3)
        data[:6] += rng.normal(scale=2.0, size=3)
        centers = solve_reference(data, 2, "kmeans", seed=rng)
        cost = tree_cost(exact_2means_tree(data, centers), data, centers, "kmeans").total_cost
        oracle = brute_force_oracle(data, objective="kmeans", mode="tree-opt", centers=centers)
        gap = abs(cost - oracle) / max(oracle, 1e-300)
        worst_gap = max(worst_gap, gap)
        mismatch += gap > 1e-9
        ratio = cost / nearest_center_cost(data, centers, "kmeans").total_cost
        worst_ratio = max(worst_ratio, ratio)
        over += ratio > 3.02
    failures = 0
    trials = 10**6
    lem = np.random.default_rng(8)
    for _ in range(10):
        m = trials // 10
        R = lem.uniform(0, 10, size=(m, 6))
        alpha = lem.uniform(-5, 5, size=(m, 6))
        # rows of length n < 6 are padded with R = 0, which contributes nothing
        width = lem.integers(1, 7, size=m)
        R[np.arange(6)[None, :] >= width[:, None]] = 0.0
        failures += int(np.sum(~algebraic_lemma_batch(R, alpha)))
    elapsed = time.perf_counter() - start
    ok = mismatch == 0 and over == 0 and failures == 0 and elapsed < 180
    verdict(report, 8, ok, f"(a) {mismatch}/25 oracle mismatches, max rel gap {worst_gap:.1e}; "
                           f"(b) max fixed-center ratio {worst_ratio:.3f} (<= 3.02); "
                           f"(c) {failures} failures in {trials} inequality trials; {elapsed:.1f}s")
    assert ok


# --- 9 -------------------------------------------------------------------------

def test_09_kmeans_lower_bound_instance(report):
    start = time.perf_counter()
    growth = {"sweep": [], "random": []}
    first_split_ok = True
    c_at_20 = {}
    for k in (10, 20, 40):
        b = gen_kmeans_lb(k, 48, seed=k)
        first_split_ok &= kmeans_lb_first_split_check(b)
        ref = b.planted_cost["kmeans"]
        sweep = tree_cost(build_kmeans_tree(b.data, b.centers, "sweep"), b.data, b.centers, "kmeans").total_cost / ref
        rand = np.mean([tree_cost(build_kmeans_tree(None, b.centers, "random", seed=s), b.data, b.centers,
                                  "kmeans").total_cost / ref for s in range(5)])
        growth["sweep"].append(sweep - 1)
        growth["random"].append(rand - 1)
        if k == 20:
            c_at_20 = {"sweep": (sweep - 1) / k, "random": (rand - 1) / k}
    elapsed = time.perf_counter() - start
    monotone = all(np.all(np.diff(v) > 0) for v in growth.values())
    ok = first_split_ok and min(c_at_20.values()) > 0.05 and monotone and elapsed < 120
    fmt = lambda v: "/".join(f"{x:.2f}" for x in v)
    verdict(report, 9, ok, f"first-split check {'ok' if first_split_ok else 'FAILED'}; k=20 c: sweep "
                           f"{c_at_20['sweep']:.3f}, random {c_at_20['random']:.3f} (> 0.05); "
                           f"c*k at k=10/20/40: sweep {fmt(growth['sweep'])}, random {fmt(growth['random'])}; "
                           f"{elapsed:.1f}s")
    assert ok


# --- 10 ------------------------------------------------------------------------

def test_10_kmedians_lower_bound_instance(report):
    start = time.perf_counter()
    b = gen_kmedians_lb(64, seed=10, d=60)
    ham = hamming_matrix(b.centers)
    separated = ham[~np.eye(b.k, dtype=bool)].min() >= b.d / 10
    ref = b.planted_cost["kmedians"]
    ratios = [tree_cost(build_fast(b.centers, s), b.data, b.centers, "kmedians").total_cost / ref
              for s in range(50)]
    rng = np.random.default_rng(1010)
    bound_fail = 0
    for _ in range(100):
        labels = rng.integers(0, b.k, size=len(b.data))
        bound_fail += average_distance_bound(b.data, labels) > partition_median_cost(b.data, labels) + 1e-9
    elapsed = time.perf_counter() - start
    ok = separated and np.mean(ratios) >= 1.5 and bound_fail == 0 and elapsed < 120
    verdict(report, 10, ok, f"min Hamming {ham[~np.eye(b.k, dtype=bool)].min()} (>= {b.d / 10:g}); "
                            f"median-random mean ratio {np.mean(ratios):.3f} over 50 seeds (>= 1.5); "
                            f"{bound_fail}/100 partition bound failures; {elapsed:.1f}s")
    assert ok


# --- 11 ------------------------------------------------------------------------

def _best_time(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def test_11_runtime_scaling(report):
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    small, large = rng.normal(size=(2**10, 32)), rng.normal(size=(2**14, 32))
    t_small = _best_time(lambda: build_fast(small, seed=0), 5)
    t_large = _best_time(lambda: build_fast(large, seed=0), 2)
    fast_exp = math.log(t_large / t_small) / math.log(2**4)
    c7, c9 = rng.normal(size=(2**7, 32)), rng.normal(size=(2**9, 32))
    r_small = _best_time(lambda: build_kmeans_tree(None, c7, "random", seed=0), 5)
    r_large = _best_time(lambda: build_kmeans_tree(None, c9, "random", seed=0), 3)
    rand_exp = math.log(r_large / r_small) / math.log(2**2)
    elapsed = time.perf_counter() - start
    ok = fast_exp <= 1.2 and rand_exp <= 2.3 and elapsed < 300
    verdict(report, 11, ok, f"median-random {t_small:.2f}s -> {t_large:.2f}s, exponent {fast_exp:.3f} (<= 1.2); "
                            f"mean-random {r_small * 1e3:.1f}ms -> {r_large * 1e3:.1f}ms, exponent "
                            f"{rand_exp:.3f} (<= 2.3); {elapsed:.0f}s")
    assert ok


# --- 12 ------------------------------------------------------------------------

TREE_SCHEMA = {
    "type": "object",
    "required": ["format_version", "k", "d", "root", "nodes"],
    "properties": {
        "format_version": {"const": 1},
        "k": {"type": "integer", "minimum": 1},
        "d": {"type": "integer", "minimum": 1},
        "root": {"type": "integer", "minimum": 0},
        "nodes": {"type": "array", "minItems": 1, "items": {"oneOf": [
            {"type": "object", "required": ["id", "center"], "additionalProperties": False,
             "properties": {"id": {"type": "integer"}, "center": {"type": "integer"}}},
            {"type": "object", "required": ["id", "dim", "threshold", "left", "right"],
             "additionalProperties": False,
             "properties": {"id": {"type": "integer"}, "dim": {"type": "integer"},
                            "threshold": {"type": "number"}, "left": {"type": "integer"},
                            "right": {"type": "integer"}}},
        ]}},
        "audit": {},
    },
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["objective", "tree_cost", "reference_cost", "ratio", "n", "k", "d", "height"],
    "properties": {"tree_cost": {"type": "number", "minimum": 0},
                   "reference_cost": {"type": "number", "minimum": 0},
                   "ratio": {"type": "number"}, "n": {"type": "integer"}, "k": {"type": "integer"},
                   "d": {"type": "integer"}, "height": {"type": "integer"}},
}


def test_12_cli_round_trips(report, tmp_path):
    run = lambda *a: cli.main([str(x) for x in a])
    gens = {
        "kmedians": ("--instance", "imm-adversarial", "--k", 5),
        "kmeans": ("--instance", "blobs", "--k", 6, "--d", 4, "--n", 300, "--spread", 0.5, "--seed", 1),
        "2means": ("--instance", "blobs", "--k", 2, "--d", 3, "--n", 80, "--spread", 1.0, "--seed", 2),
    }
    failures = []
    pairs = [(o, m) for o, ms in cli.METHODS.items() for m in ms]
    for objective, method in pairs:
        tag = f"{objective}/{method}"
        p, c, t, t2 = (tmp_path / f"{objective}-{method}.{ext}" for ext in ("p.csv", "c.csv", "t.json", "t2.json"))
        codes = [run("gen", *gens[objective], "--out-points", p, "--out-centers", c)]
        codes.append(run("cluster", "--objective", objective, "--method", method, "--points", p, "--centers", c,
                         "--seed", 7, "--out-tree", t, "--stats", tmp_path / "stats.jsonl"))
        codes.append(run("eval", "--tree", t, "--points", p, "--centers", c, "--objective", objective,
                         "--out-report", tmp_path / "r1.json"))
        if codes != [0, 0, 0]:
            failures.append(f"{tag} exit codes {codes}")
            continue
        tree_obj = json.loads(t.read_text())
        rep1 = json.loads((tmp_path / "r1.json").read_text())
        try:
            jsonschema.validate(tree_obj, TREE_SCHEMA)
            jsonschema.validate(rep1, REPORT_SCHEMA)
        except jsonschema.ValidationError as exc:
            failures.append(f"{tag} schema: {exc.message}")
            continue
        points, centers = fileio.read_points(p), fileio.read_points(c)
        # reload, re-serialize and evaluate again
        fileio.write_tree(t2, fileio.read_tree(t, centers))
        if run("eval", "--tree", t2, "--points", p, "--centers", c, "--objective", objective,
               "--out-report", tmp_path / "r2.json") != 0:
            failures.append(f"{tag} re-eval failed")
            continue
        rep2 = json.loads((tmp_path / "r2.json").read_text())
        in_memory = tree_cost(cli.build_tree(objective, method, centers, points, 7), points, centers,
                              cli.cost_objective(objective)).total_cost
        if not (rep1["tree_cost"] == rep2["tree_cost"] == in_memory):
            failures.append(f"{tag} cost drift {rep1['tree_cost']!r} {rep2['tree_cost']!r} {in_memory!r}")
    ok = not failures
    verdict(report, 12, ok, f"{len(pairs) - len(failures)}/{len(pairs)} objective/method pipelines round-trip "
                            f"with exact cost" + ("" if ok else f"; {failures}"))
    assert ok
