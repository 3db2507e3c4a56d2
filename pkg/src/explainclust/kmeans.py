"""Explainable k-means threshold trees.

Three splitters share one tree-growing loop (:func:`build_kmeans_tree`):

``sweep``
    deterministic; minimises mistakes / balance over every distinct threshold.
``imm``
    the greedy baseline that minimises mistakes alone.
``random``
    samples ``(dim, t)`` with density ∝ ``R_r / balance`` restricted to the
    margin intervals that keep ``t`` away from every center coordinate.  Only
    the centers are needed.

Terminology used throughout: for a node, the *correct* points are those that
reach the node and whose nearest center also reaches it.  A split's
*mistakes* are correct points sent to the other side from their nearest
center, and its *balance* is the smaller of the two child center counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    InputError,
    TreeBuilder,
    as_points,
    check_dims,
    check_distinct,
    ensure_rng,
    nearest_center_cost,
    nearest_centers,
    point_costs,
    tree_cost,
)

METHODS = ("sweep", "imm", "random")


@dataclass
class SplitCandidate:
    dim: int
    threshold: float
    mistakes: Optional[int]
    balance: int

    @property
    def ratio(self) -> Optional[float]:
        return None if self.mistakes is None else self.mistakes / self.balance


@dataclass
class MarginIntervals:
    """Admissible thresholds of one node, one row per non-empty gap interval."""

    dim: np.ndarray
    gap: np.ndarray  # 1-based: number of node centers below the interval
    low: np.ndarray
    high: np.ndarray
    weight: np.ndarray  # R_r * length / min(gap, k' - gap)

    @property
    def length(self) -> np.ndarray:
        return self.high - self.low


@dataclass
class SplitRecord:
    node: int
    dim: int
    threshold: float
    n_centers: int
    mistakes: int
    balance: int
    c2: float  # Σ_r R_r(u)^2 over the node's center box
    cor_cost: float  # Σ ‖x - c(x)‖² over the node's correct points
    n_cor: int
    p_event: float  # exact probability that a (r ∝ R², t uniform) draw lands in a margin interval


@dataclass
class KMeansAudit:
    method: str
    k: int
    splits: list[SplitRecord] = field(default_factory=list)
    # per point: Σ balance over the nodes where the point is correct
    path_balance: Optional[np.ndarray] = None
    # Σ ‖x - c(x)‖² over all points (fixed-center optimum for these centers)
    reference_cost: Optional[float] = None

    def ratio_bound(self, rec: SplitRecord) -> float:
        if rec.c2 <= 0:
            return math.inf
        return 15 * math.log(self.k) * rec.cor_cost / rec.c2

    def ratio_bound_violations(self) -> list[SplitRecord]:
        return [s for s in self.splits
                if s.mistakes / s.balance > self.ratio_bound(s) * (1 + 1e-9) + 1e-12]

    def misclassification_charge(self) -> float:
        return float(sum(s.mistakes * s.c2 for s in self.splits))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "reference_cost": self.reference_cost,
            "splits": [vars(s) for s in self.splits],
        }


def margin_log(k: int) -> float:
    # ln k is too small for k <= 2 (margins could swallow whole gaps); clamp at ln 3
    return math.log(max(k, 3))


def _margin_intervals(xs: np.ndarray, L: float) -> MarginIntervals:
    """Intervals for node coordinates ``xs`` of shape (d, k'), each row sorted."""
    d, kp = xs.shape
    extent = xs[:, -1] - xs[:, 0]
    gap = np.arange(1, kp)
    bal = np.minimum(gap, kp - gap).astype(np.float64)
    margin = extent[:, None] / (10 * L * bal[None, :])
    low = xs[:, :-1] + margin
    high = xs[:, 1:] - margin
    length = high - low
    keep = (length > 0) & (extent[:, None] > 0)
    dims = np.broadcast_to(np.arange(d)[:, None], keep.shape)[keep]
    gaps = np.broadcast_to(gap[None, :], keep.shape)[keep]
    weight = (extent[:, None] * length / bal[None, :])[keep]
    return MarginIntervals(dims, gaps, low[keep], high[keep], weight)


def margin_intervals(node_centers, k: Optional[int] = None) -> MarginIntervals:
    """Margin intervals for a node holding ``node_centers`` in a k-center problem."""
    node_centers = as_points(node_centers, "node centers")
    k = node_centers.shape[0] if k is None else k
    return _margin_intervals(np.sort(node_centers.T, axis=1), margin_log(k))


def event_probability(node_centers, k: Optional[int] = None) -> float:
    """Exact P(margin event) when r ∝ R_r² and t is uniform on [a_r, b_r].

    Equals Σ_r R_r · (total interval length in r) / Σ_r R_r².
    """
    node_centers = as_points(node_centers, "node centers")
    if np.all(node_centers.max(axis=0) == node_centers.min(axis=0)):
        raise InputError("all centers in the node coincide")
    k = node_centers.shape[0] if k is None else k
    return _event_from_sorted(np.sort(node_centers.T, axis=1), margin_log(k))


def _sample_margin(iv: MarginIntervals, xs: np.ndarray, rng: np.random.Generator) -> tuple[int, float, int]:
    kp = xs.shape[1]
    total = iv.weight.sum()
    if total > 0:
        cum = np.cumsum(iv.weight)
        j = int(np.searchsorted(cum, rng.random() * total, side="right"))
        j = min(j, len(cum) - 1)
        while iv.weight[j] <= 0:
            j -= 1
        t = iv.low[j] + rng.random() * (iv.high[j] - iv.low[j])
        gap = int(iv.gap[j])
        return int(iv.dim[j]), float(min(max(t, iv.low[j]), iv.high[j])), min(gap, kp - gap)
    # unreachable with distinct centers and the log clamp; keeps the builder total
    extent = xs[:, -1] - xs[:, 0]
    r = int(np.argmax(extent))
    widths = np.diff(xs[r])
    i = int(np.argmax(widths))
    gap = i + 1
    return r, float((xs[r, i] + xs[r, i + 1]) / 2), min(gap, kp - gap)


def random_split(centers, node_centers=None, k: Optional[int] = None, seed=None) -> SplitCandidate:
    """One randomized split of the node holding ``centers[node_centers]``.

    ``k`` is the total number of centers in the problem (sets the margin
    log); it defaults to ``len(centers)``.  ``mistakes`` is left as None
    because the draw does not look at data.
    """
    centers = as_points(centers, "centers")
    node_centers = np.arange(len(centers)) if node_centers is None else np.asarray(node_centers)
    if len(node_centers) < 2:
        raise InputError("a node needs at least two centers to be split")
    k = len(centers) if k is None else k
    xs = np.sort(centers[node_centers].T, axis=1)
    iv = _margin_intervals(xs, margin_log(k))
    r, t, bal = _sample_margin(iv, xs, ensure_rng(seed))
    return SplitCandidate(r, t, None, bal)


def _dim_profile(cvals: np.ndarray, px: np.ndarray, pc: np.ndarray):
    """Candidate thresholds along one dimension with their mistakes and balance.

    ``cvals`` are the node's center coordinates (sorted); ``px`` / ``pc`` the
    coordinates of the correct points and of their nearest centers.
    """
    a, b = cvals[0], cvals[-1]
    if not a < b:
        return None
    inner = px[(px > a) & (px < b)]
    vals = np.unique(np.concatenate([cvals, inner]))
    mids = (vals[:-1] + vals[1:]) / 2
    ok = (mids > vals[:-1]) & (mids < vals[1:])
    mids = mids[ok]
    if mids.size == 0:
        return None
    lo = np.sort(np.minimum(px, pc))
    hi = np.sort(np.maximum(px, pc))
    mistakes = np.searchsorted(lo, mids, side="left") - np.searchsorted(hi, mids, side="left")
    below = np.searchsorted(cvals, mids, side="left")
    balance = np.minimum(below, len(cvals) - below)
    return mids, mistakes, balance


def _best_split(data, centers, nearest, node_centers, cor, use_ratio: bool) -> SplitCandidate:
    node_pts = centers[node_centers]
    best = None
    best_key = None
    for r in range(centers.shape[1]):
        prof = _dim_profile(np.sort(node_pts[:, r]), data[cor, r], centers[nearest[cor], r])
        if prof is None:
            continue
        mids, mistakes, balance = prof
        score = mistakes / balance if use_ratio else mistakes.astype(np.float64)
        j = int(np.argmin(score))  # first minimum = lowest threshold
        key = score[j]
        if best_key is None or key < best_key:
            best_key = key
            best = SplitCandidate(r, float(mids[j]), int(mistakes[j]), int(balance[j]))
    if best is None:
        raise InputError("node centers coincide; no admissible threshold")
    return best


def _prepare(data, centers, node_centers, cor_points, nearest):
    data, centers = as_points(data, "data"), as_points(centers, "centers")
    check_dims(data, centers)
    nearest = nearest_centers(data, centers, "kmeans") if nearest is None else np.asarray(nearest)
    node_centers = np.arange(len(centers)) if node_centers is None else np.asarray(node_centers)
    if len(node_centers) < 2:
        raise InputError("a node needs at least two centers to be split")
    if cor_points is None:
        cor_points = np.flatnonzero(np.isin(nearest, node_centers))
    return data, centers, nearest, node_centers, np.asarray(cor_points, dtype=np.int64)


def sweep_split(data, centers, node_centers=None, cor_points=None, nearest=None) -> SplitCandidate:
    """Exact minimiser of mistakes / balance over all dims and distinct thresholds.

    ``cor_points`` defaults to every point whose nearest center is in the
    node, which is the right set at the root.  Ties go to the lower
    dimension, then the lower threshold.
    """
    args = _prepare(data, centers, node_centers, cor_points, nearest)
    return _best_split(*args, use_ratio=True)


def imm_split(data, centers, node_centers=None, cor_points=None, nearest=None) -> SplitCandidate:
    """Baseline: exact minimiser of mistakes alone, same candidates and tie-breaks."""
    args = _prepare(data, centers, node_centers, cor_points, nearest)
    return _best_split(*args, use_ratio=False)


def count_split(data, centers, nearest, node_centers, cor_points, dim: int, t: float) -> tuple[int, int]:
    """Direct O(n) recount of (mistakes, balance) for one candidate line."""
    x = data[cor_points, dim]
    c = centers[nearest[cor_points], dim]
    mistakes = int(np.sum(((x < t) & (t <= c)) | ((c < t) & (t <= x))))
    cv = centers[node_centers, dim]
    balance = int(min(np.sum(cv <= t), np.sum(cv >= t)))
    return mistakes, balance


def correctly_classified(tree, node: int, data, centers, metric: str = "l2") -> np.ndarray:
    """Indices of points inside ``node``'s region whose nearest center reaches ``node``."""
    centers = as_points(centers, "centers")
    data = np.asarray(data, dtype=np.float64).reshape(-1, centers.shape[1])
    if data.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    check_dims(data, centers)
    inside = np.ones(len(data), dtype=bool)
    for r, t, went_left in tree.constraints(node):
        inside &= (data[:, r] < t) if went_left else (data[:, r] >= t)
    nearest = nearest_centers(data, centers, "kmedians" if metric == "l1" else "kmeans")
    return np.flatnonzero(inside & np.isin(nearest, tree.centers_below(node)))


def build_kmeans_tree(data, centers, method: str = "sweep", seed=None, metric: str = "l2"):
    """Grow a threshold tree until every leaf holds one center.

    ``data`` is required for ``sweep`` and ``imm``; ``random`` ignores it for
    the choice of splits but, when given, still fills the audit.  ``metric``
    picks the nearest-center rule (``"l2"`` or ``"l1"``) used for mistakes.
    The returned tree carries a :class:`KMeansAudit`.
    """
    if method not in METHODS:
        raise InputError(f"unknown method {method!r}; expected one of {METHODS}")
    if metric not in ("l1", "l2"):
        raise InputError(f"unknown metric {metric!r}")
    centers = as_points(centers, "centers")
    check_distinct(centers)
    k, d = centers.shape
    if data is None:
        if method != "random":
            raise InputError(f"method {method!r} needs data")
    else:
        data = as_points(data, "data")
        check_dims(data, centers)
    rng = ensure_rng(seed)
    audit = KMeansAudit(method, k)
    builder = TreeBuilder(k, d)
    root = builder.new_node()

    if data is not None:
        nearest = nearest_centers(data, centers, "kmedians" if metric == "l1" else "kmeans")
        own = point_costs(data, centers[nearest], "kmeans")
        audit.path_balance = np.zeros(len(data), dtype=np.int64)
        audit.reference_cost = float(own.sum())
        cor0 = np.arange(len(data))
    else:
        nearest = own = cor0 = None

    order = np.argsort(centers, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(centers, order, axis=0)
    L = margin_log(k)
    in_node = np.zeros(k, dtype=bool)

    stack = [(root, np.arange(k), cor0)]
    while stack:
        u, members, cor = stack.pop()
        if len(members) == 1:
            builder.make_leaf(u, int(members[0]))
            continue
        # node coordinates sorted per dimension in O(k d) from the global order
        in_node[members] = True
        sel = in_node[order]
        xs = sorted_vals.T[sel.T].reshape(d, len(members))
        in_node[members] = False

        if method == "random":
            iv = _margin_intervals(xs, L)
            r, t, bal = _sample_margin(iv, xs, rng)
            cand = SplitCandidate(r, t, None, bal)
        else:
            cand = _best_split(data, centers, nearest, members, cor, use_ratio=(method == "sweep"))
        r, t = cand.dim, cand.threshold

        go_left = centers[members, r] < t
        left_c, right_c = members[go_left], members[~go_left]
        balance = min(len(left_c), len(right_c))

        if data is not None:
            x_left = data[cor, r] < t
            c_left = centers[nearest[cor], r] < t
            mistakes = int(np.sum(x_left != c_left))
            audit.path_balance[cor] += balance
            extent = xs[:, -1] - xs[:, 0]
            c2 = float(np.dot(extent, extent))
            audit.splits.append(SplitRecord(
                node=u, dim=r, threshold=t, n_centers=len(members), mistakes=mistakes,
                balance=balance, c2=c2, cor_cost=float(own[cor].sum()), n_cor=len(cor),
                p_event=_event_from_sorted(xs, L),
            ))
            keep = x_left == c_left
            cor_l, cor_r = cor[keep & x_left], cor[keep & ~x_left]
        else:
            cor_l = cor_r = None
        lc, rc = builder.make_split(u, r, t)
        stack.append((rc, right_c, cor_r))
        stack.append((lc, left_c, cor_l))
    return builder.finish(audit=audit)


def _event_from_sorted(xs: np.ndarray, L: float) -> float:
    iv = _margin_intervals(xs, L)
    extent = xs[:, -1] - xs[:, 0]
    return float(np.sum(extent[iv.dim] * iv.length) / np.dot(extent, extent))


def cost_accounting_sides(tree, data, centers) -> tuple[float, float]:
    """(k-means cost of the tree, 2·fixed-center cost + 2·Σ mistakes·C₂) from the audit."""
    audit = tree.audit
    if not isinstance(audit, KMeansAudit) or audit.reference_cost is None:
        raise InputError("tree has no k-means audit with data")
    cost = tree_cost(tree, data, centers, "kmeans").total_cost
    ref = nearest_center_cost(data, centers, "kmeans").total_cost
    return cost, 2 * ref + 2 * audit.misclassification_charge()
