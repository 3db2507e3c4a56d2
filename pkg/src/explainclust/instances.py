"""Instance generators, reference solvers and exhaustive oracles.

Three hard instances are provided along with a Gaussian-blob filler:

* ``kmedians-lb``: random ±1 hypercube centers plus every single-coordinate flip.
* ``kmeans-lb``: centers built from independent random permutations, data at
  ``μ_i ± e_j``.  No threshold line can avoid cutting some ``±e_j`` pair.
* ``imm-adversarial``: a construction where greedily minimizing mistakes
  routes many points through a far center.

The brute-force oracles are meant for tiny inputs only and enforce size caps.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import (
    InputError,
    InvariantError,
    _check_objective,
    as_points,
    check_dims,
    ensure_rng,
    nearest_center_cost,
    nearest_centers,
    pairwise_cost,
    point_costs,
)

INSTANCES = ("kmedians-lb", "kmeans-lb", "imm-adversarial", "blobs")
MAX_SEPARATION_ATTEMPTS = 100
PARTITION_MAX_N = 14
TREE_MAX_K = 5
TREE_MAX_CENTER_COORDS = 12


@dataclass
class InstanceBundle:
    data: np.ndarray
    centers: np.ndarray
    planted_cost: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def d(self) -> int:
        return self.centers.shape[1]


def _planted(data, centers, costs: dict) -> dict:
    """Confirm each claimed planted cost against the nearest-center evaluator."""
    for objective, claimed in costs.items():
        got = nearest_center_cost(data, centers, objective).total_cost
        if not math.isclose(got, claimed, rel_tol=1e-9, abs_tol=1e-9):
            raise InvariantError(f"planted {objective} cost {claimed} but evaluator gives {got}")
    return dict(costs)


def hamming_matrix(signs: np.ndarray) -> np.ndarray:
    """Pairwise counts of differing coordinates for ±1 vectors."""
    signs = np.asarray(signs, dtype=np.float64)
    d = signs.shape[1]
    return ((d - signs @ signs.T) / 2).round().astype(np.int64)


def gen_kmedians_lb(k: int, seed=None, d: int | None = None) -> InstanceBundle:
    """Hypercube centers with every one-coordinate flip as data.

    ``d`` defaults to ``ceil(10 log2 k)``.  Centers are redrawn until every pair
    differs in at least ``max(d/10, 2)`` coordinates; the floor of two keeps
    each flip at least as close to its own center as to any other.
    """
    if k < 2:
        raise InputError("kmedians-lb needs k >= 2")
    if d is None:
        d = math.ceil(10 * math.log2(k))
    rng = ensure_rng(seed)
    need = max(d / 10, 2)
    for attempt in range(1, MAX_SEPARATION_ATTEMPTS + 1):
        centers = rng.choice([-1.0, 1.0], size=(k, d))
        ham = hamming_matrix(centers)
        np.fill_diagonal(ham, d)
        if ham.min() >= need:
            break
    else:
        raise InputError(
            f"no {k} hypercube centers in d={d} with pairwise separation {need} "
            f"after {MAX_SEPARATION_ATTEMPTS} attempts"
        )
    flips = np.repeat(centers, d, axis=0)
    j = np.tile(np.arange(d), k)
    flips[np.arange(k * d), j] *= -1
    # rows: each center followed by its d flips
    data = np.concatenate([centers[:, None, :], flips.reshape(k, d, d)], axis=1).reshape(-1, d)
    labels = np.repeat(np.arange(k), d + 1)
    return InstanceBundle(
        data, centers,
        _planted(data, centers, {"kmedians": 2.0 * d * k}),
        {"generator": "kmedians-lb", "k": k, "d": d, "seed": seed, "attempts": attempt,
         "min_hamming": int(ham.min()), "labels": labels},
    )


def gen_kmeans_lb(k: int, d: int | None = None, seed=None) -> InstanceBundle:
    """Centers ``(π_1(i), ..., π_d(i))`` for random permutations π_j of 1..k; data ``μ_i ± e_j``."""
    if k < 2:
        raise InputError("kmeans-lb needs k >= 2")
    if d is None:
        d = max(8 * math.ceil(math.log2(k)), 8)
    rng = ensure_rng(seed)
    centers = np.column_stack([rng.permutation(k) + 1 for _ in range(d)]).astype(np.float64)
    eye = np.eye(d)
    data = np.concatenate([centers[:, None, :] + eye, centers[:, None, :] - eye], axis=1)
    data = data.reshape(-1, d)
    diff = centers[:, None, :] - centers[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dist, np.inf)
    min_dist = float(dist.min())
    return InstanceBundle(
        data, centers,
        _planted(data, centers, {"kmeans": 2.0 * d * k}),
        {"generator": "kmeans-lb", "k": k, "d": d, "seed": seed, "min_center_distance": min_dist,
         "separation_constant": min_dist / (k * math.sqrt(d)),
         "labels": np.repeat(np.arange(k), 2 * d)},
    )


def kmeans_lb_first_split_check(bundle: InstanceBundle) -> bool:
    """True iff every line strictly between two center coordinates separates
    some ``μ_i - e_r`` / ``μ_i + e_r`` pair.

    Center coordinates are integers 1..k, so lines at half-integers cover every
    combinatorially distinct admissible cut.
    """
    c = bundle.centers
    for r in range(bundle.d):
        vals = np.unique(c[:, r])
        for t in (vals[:-1] + vals[1:]) / 2:
            # μ_{i,r} - 1 < t <= μ_{i,r} + 1 puts the pair on opposite sides
            if not np.any((c[:, r] - 1 < t) & (t <= c[:, r] + 1)):
                return False
    return True


def gen_imm_adversarial(k: int) -> InstanceBundle:
    """Deterministic instance on which mistake-greedy splitting pays about k/3 times the optimum."""
    if k < 3:
        raise InputError("imm-adversarial needs k >= 3")
    m = k - 1
    d = 2 * m
    z = np.concatenate([np.zeros(m), np.ones(m)])
    eye = np.eye(d)
    centers = np.vstack([np.zeros(d), eye[:m] + z])
    data = np.vstack([
        np.repeat(centers[1:], 3 * m, axis=0),
        eye[:m],
        np.repeat(eye[m:], 2, axis=0),
    ])
    return InstanceBundle(
        data, centers,
        _planted(data, centers, {"kmedians": 3.0 * m}),
        {"generator": "imm-adversarial", "k": k, "d": d, "seed": None},
    )


def gen_blobs(k: int, d: int, n: int, spread: float, seed=None, box: float = 10.0) -> InstanceBundle:
    """``n`` points in ``k`` Gaussian blobs; point ``i`` belongs to blob ``i % k``."""
    if not n >= k >= 1:
        raise InputError("blobs need n >= k >= 1")
    if d < 1 or spread < 0:
        raise InputError("blobs need d >= 1 and spread >= 0")
    rng = ensure_rng(seed)
    means = rng.uniform(0.0, box, size=(k, d))
    labels = np.arange(n) % k
    data = means[labels] + spread * rng.standard_normal((n, d))
    planted = {obj: nearest_center_cost(data, means, obj).total_cost for obj in ("kmedians", "kmeans")}
    return InstanceBundle(
        data, means, planted,
        {"generator": "blobs", "k": k, "d": d, "n": n, "spread": spread, "seed": seed,
         "labels": labels},
    )


def generate(name: str, k: int, d: int | None = None, n: int | None = None,
             spread: float = 1.0, seed=None) -> InstanceBundle:
    if name == "kmedians-lb":
        return gen_kmedians_lb(k, seed, d)
    if name == "kmeans-lb":
        return gen_kmeans_lb(k, d, seed)
    if name == "imm-adversarial":
        return gen_imm_adversarial(k)
    if name == "blobs":
        if d is None or n is None:
            raise InputError("blobs need both d and n")
        return gen_blobs(k, d, n, spread, seed)
    raise InputError(f"unknown instance {name!r}; expected one of {INSTANCES}")


# --- reference solvers -------------------------------------------------------

def _seed_plus_plus(data: np.ndarray, k: int, objective: str, rng) -> np.ndarray:
    n = data.shape[0]
    chosen = [int(rng.integers(n))]
    dist = point_costs(data, np.broadcast_to(data[chosen[0]], data.shape), objective)
    for _ in range(1, k):
        total = dist.sum()
        if total <= 0:
            # every point already sits on a chosen center; pick unused rows
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rest[0])
        else:
            nxt = int(np.searchsorted(np.cumsum(dist), rng.random() * total, side="right"))
            nxt = min(nxt, n - 1)
        chosen.append(nxt)
        dist = np.minimum(dist, point_costs(data, np.broadcast_to(data[nxt], data.shape), objective))
    return data[chosen].copy()


def _lloyd(data, centers, objective, max_rounds, tol):
    update = np.median if objective == "kmedians" else np.mean
    prev = math.inf
    for _ in range(max_rounds):
        labels = nearest_centers(data, centers, objective)
        for j in range(len(centers)):
            members = data[labels == j]
            if len(members):
                centers[j] = update(members, axis=0)
        cost = nearest_center_cost(data, centers, objective).total_cost
        if prev - cost <= tol * max(prev, 1e-300) or cost == 0:
            break
        prev = cost
    return centers, cost


def solve_reference(data, k: int, objective: str = "kmeans", seed=None,
                    max_rounds: int = 100, tol: float = 1e-6, n_init: int = 10) -> np.ndarray:
    """Best of ``n_init`` runs of k-means++ style seeding followed by Lloyd rounds.

    Lloyd rounds use means, or coordinate-wise medians under ℓ1 for
    ``kmedians``, and stop when the relative improvement drops below ``tol``
    or after ``max_rounds``.  An emptied cluster keeps its previous center.
    """
    data = as_points(data, "data")
    _check_objective(objective)
    if objective == "kcenter":
        objective = "kmeans"
    if k < 1 or data.shape[0] < k:
        raise InputError(f"need 1 <= k <= n, got k={k}, n={data.shape[0]}")
    rng = ensure_rng(seed)
    best, best_cost = None, math.inf
    for _ in range(max(1, n_init)):
        centers, cost = _lloyd(data, _seed_plus_plus(data, k, objective, rng), objective, max_rounds, tol)
        if cost < best_cost:
            best, best_cost = centers, cost
    return best


# --- exhaustive oracles --------------------------------------------------------

def _labelings(n: int, k: int):
    """All maps from n points to k labels with point 0 fixed to label 0, as an (m, n) array."""
    if n == 1:
        return np.zeros((1, 1), dtype=np.int8)
    rest = np.array(list(itertools.product(range(k), repeat=n - 1)), dtype=np.int8)
    return np.hstack([np.zeros((len(rest), 1), dtype=np.int8), rest])


def _partition_opt(data: np.ndarray, k: int, objective: str) -> float:
    n = data.shape[0]
    if k >= n:
        return 0.0
    labs = _labelings(n, k)
    if objective == "kmeans":
        # per-label SSE = Σ‖x‖² - ‖Σx‖²/m, evaluated for all labelings at once
        sq = np.einsum("ij,ij->i", data, data)
        total = np.zeros(len(labs))
        for j in range(k):
            mask = (labs == j).astype(np.float64)
            cnt = mask.sum(axis=1)
            s = mask @ data
            with np.errstate(invalid="ignore", divide="ignore"):
                part = mask @ sq - np.where(cnt > 0, np.einsum("ij,ij->i", s, s) / cnt, 0.0)
            total += part
        return float(max(total.min(), 0.0))
    best = math.inf
    for lab in labs:
        cost = 0.0
        for j in range(k):
            pts = data[lab == j]
            if len(pts):
                if objective == "kmedians":
                    cost += float(np.abs(pts - np.median(pts, axis=0)).sum())
                else:
                    cost = max(cost, _min_enclosing_radius(pts))
        best = min(best, cost)
    return best


def _min_enclosing_radius(pts: np.ndarray) -> float:
    from scipy.optimize import minimize

    if len(pts) == 1:
        return 0.0
    start = pts.mean(axis=0)
    res = minimize(lambda c: np.max(np.sum((pts - c) ** 2, axis=1)), start, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
    return float(math.sqrt(res.fun))


def _tree_opt(data: np.ndarray, centers: np.ndarray, objective: str) -> float:
    """Min fixed-center cost over every threshold tree on the given centers.

    Candidate cuts per node are midpoints between consecutive distinct
    coordinates of the node's centers and the data points inside its box;
    the cost is constant between such values, so nothing is missed.
    """
    k, d = centers.shape
    costs = pairwise_cost(data, centers, objective)
    combine = max if objective == "kcenter" else (lambda a, b: a + b)

    @lru_cache(maxsize=None)
    def solve(cmask: int, pmask: int) -> float:
        members = [i for i in range(k) if cmask >> i & 1]
        pts = [p for p in range(len(data)) if pmask >> p & 1]
        if len(members) == 1:
            col = costs[pts, members[0]]
            if not len(col):
                return 0.0
            return float(col.max() if objective == "kcenter" else col.sum())
        best = math.inf
        node = centers[members]
        for r in range(d):
            a, b = node[:, r].min(), node[:, r].max()
            if not a < b:
                continue
            vals = np.unique(np.concatenate([node[:, r], data[pts, r]]))
            vals = vals[(vals >= a) & (vals <= b)]
            for t in (vals[:-1] + vals[1:]) / 2:
                lc = sum(1 << i for i in members if centers[i, r] < t)
                lp = sum(1 << p for p in pts if data[p, r] < t)
                val = combine(solve(lc, lp), solve(cmask & ~lc, pmask & ~lp))
                best = min(best, val)
        return best

    return solve((1 << k) - 1, (1 << len(data)) - 1)


def brute_force_oracle(data, k: int | None = None, objective: str = "kmeans",
                       mode: str = "partition-opt", centers=None) -> float:
    """Exhaustive optimum for tiny inputs.

    ``partition-opt`` minimizes over every labeling of at most 14 points, each
    part served by its centroid (k-means), coordinate-wise median (k-medians)
    or minimum enclosing ball (k-center).  ``tree-opt`` minimizes the fixed-center
    cost over all threshold trees on at most 5 supplied ``centers``.
    """
    data = as_points(data, "data")
    _check_objective(objective)
    if mode == "partition-opt":
        if k is None or k < 1:
            raise InputError("partition-opt needs k >= 1")
        if data.shape[0] > PARTITION_MAX_N:
            raise InputError(f"partition-opt is capped at n <= {PARTITION_MAX_N}")
        return _partition_opt(data, k, objective)
    if mode == "tree-opt":
        if centers is None:
            raise InputError("tree-opt needs the fixed centers")
        centers = as_points(centers, "centers")
        check_dims(data, centers)
        if centers.shape[0] > TREE_MAX_K:
            raise InputError(f"tree-opt is capped at k <= {TREE_MAX_K}")
        if max(len(np.unique(col)) for col in centers.T) > TREE_MAX_CENTER_COORDS:
            raise InputError(f"tree-opt is capped at {TREE_MAX_CENTER_COORDS} distinct center coordinates")
        if data.shape[0] > 62:
            raise InputError("tree-opt handles at most 62 points")
        return _tree_opt(data, centers, objective)
    raise InputError(f"unknown oracle mode {mode!r}")


# --- hypercube partition bound ------------------------------------------------

def average_distance_bound(points, labels) -> float:
    """¼ Σ_i c_i where c_i is point i's mean ℓ1 distance to the rest of its part (0 if alone)."""
    points = as_points(points, "points")
    labels = np.asarray(labels)
    total = 0.0
    for lab in np.unique(labels):
        pts = points[labels == lab]
        m = len(pts)
        if m < 2:
            continue
        dist = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2)
        total += float(dist.sum() / (m - 1))
    return total / 4


def partition_median_cost(points, labels) -> float:
    """k-medians cost of a partition with each part at its coordinate-wise median."""
    points = as_points(points, "points")
    labels = np.asarray(labels)
    return float(sum(np.abs(points[labels == lab] - np.median(points[labels == lab], axis=0)).sum()
                     for lab in np.unique(labels)))
