"""Points, centers, boxes and threshold trees, plus assignment and cost evaluation.

Every builder in the package produces a :class:`ThresholdTree`.  Internal
nodes hold ``(dim, threshold)``; a point goes left when ``x[dim] < threshold``
and right otherwise.  Each leaf holds exactly one center index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

OBJECTIVES = ("kmedians", "kmeans", "kcenter")

_CHUNK = 1 << 22  # max floats materialised at once by the pairwise routines


class InputError(ValueError):
    """Malformed or inconsistent input (shapes, duplicate centers, bad flags)."""


class InvariantError(RuntimeError):
    """An internal structural guarantee was violated."""


def ensure_rng(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def as_points(points, name: str = "points") -> np.ndarray:
    """Validate and return a float64 ``(n, d)`` array with n, d >= 1."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    return arr


def check_dims(data: np.ndarray, centers: np.ndarray) -> None:
    if data.shape[1] != centers.shape[1]:
        raise InputError(
            f"dimension mismatch: points have d={data.shape[1]}, centers d={centers.shape[1]}"
        )


def check_distinct(centers: np.ndarray) -> None:
    """Builders cannot separate identical centers."""
    if centers.shape[0] < 2:
        return
    srt = centers[np.lexsort(centers.T[::-1])]
    if np.any(np.all(srt[1:] == srt[:-1], axis=1)):
        raise InputError("centers must be pairwise distinct")


def _check_objective(objective: str) -> None:
    if objective not in OBJECTIVES:
        raise InputError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")


@dataclass(frozen=True)
class BoundingBox:
    low: np.ndarray
    high: np.ndarray

    @property
    def extent(self) -> np.ndarray:
        return self.high - self.low


def bounding_box(centers) -> BoundingBox:
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[0] == 0:
        raise InputError("bounding box of an empty center set")
    return BoundingBox(centers.min(axis=0), centers.max(axis=0))


@dataclass
class ThresholdTree:
    """Arena-backed binary threshold tree.

    ``dim[u] == -1`` marks a leaf, whose center index is ``center[u]``.  For
    internal nodes ``left[u]`` / ``right[u]`` are child ids and ``center[u]``
    is -1.  ``audit`` optionally carries per-split instrumentation from the
    builder (see :mod:`explainclust.kmeans`).
    """

    k: int
    d: int
    dim: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    center: np.ndarray
    root: int = 0
    audit: Optional[Any] = field(default=None, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.dim)

    def is_leaf(self, u: int) -> bool:
        return self.dim[u] < 0

    def internal_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.dim >= 0)

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.dim < 0)

    def parents(self) -> np.ndarray:
        par = np.full(self.n_nodes, -1, dtype=np.int64)
        for u in self.internal_nodes():
            par[self.left[u]] = u
            par[self.right[u]] = u
        return par

    def height(self) -> int:
        depth = {self.root: 0}
        stack = [self.root]
        best = 0
        while stack:
            u = stack.pop()
            if self.dim[u] >= 0:
                for v in (self.left[u], self.right[u]):
                    depth[v] = depth[u] + 1
                    best = max(best, depth[v])
                    stack.append(v)
        return best

    def constraints(self, u: int) -> list[tuple[int, float, bool]]:
        """Decisions on the root-to-``u`` path as ``(dim, threshold, went_left)``."""
        par = self.parents()
        out = []
        while par[u] >= 0:
            p = par[u]
            out.append((int(self.dim[p]), float(self.threshold[p]), bool(self.left[p] == u)))
            u = p
        return out[::-1]

    def centers_below(self, u: int) -> np.ndarray:
        found = []
        stack = [u]
        while stack:
            v = stack.pop()
            if self.dim[v] < 0:
                found.append(int(self.center[v]))
            else:
                stack.extend((self.left[v], self.right[v]))
        return np.sort(np.array(found, dtype=np.int64))

    def structurally_equal(self, other: "ThresholdTree") -> bool:
        return (
            self.k == other.k
            and self.d == other.d
            and self.root == other.root
            and np.array_equal(self.dim, other.dim)
            and np.array_equal(self.threshold, other.threshold, equal_nan=True)
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right, other.right)
            and np.array_equal(self.center, other.center)
        )


class TreeBuilder:
    """Grows a ThresholdTree node by node; ``finish`` freezes it into arrays."""

    def __init__(self, k: int, d: int):
        self.k, self.d = k, d
        self.dim: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.center: list[int] = []

    def new_node(self) -> int:
        self.dim.append(-1)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.center.append(-1)
        return len(self.dim) - 1

    def make_leaf(self, u: int, center: int) -> None:
        self.center[u] = int(center)

    def make_split(self, u: int, dim: int, threshold: float) -> tuple[int, int]:
        self.dim[u] = int(dim)
        self.threshold[u] = float(threshold)
        lo, hi = self.new_node(), self.new_node()
        self.left[u], self.right[u] = lo, hi
        return lo, hi

    def finish(self, audit=None) -> ThresholdTree:
        return ThresholdTree(
            k=self.k,
            d=self.d,
            dim=np.array(self.dim, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            center=np.array(self.center, dtype=np.int64),
            audit=audit,
        )


def single_leaf_tree(d: int) -> ThresholdTree:
    b = TreeBuilder(1, d)
    b.make_leaf(b.new_node(), 0)
    return b.finish()


def validate_tree(tree: ThresholdTree, centers=None) -> None:
    """Raise InvariantError unless the tree is well formed.

    Checks reachability, the leaf/center bijection and, when ``centers`` is
    given, that every split strictly separates the centers reaching its node.
    """
    n = tree.n_nodes
    arrays = (tree.dim, tree.threshold, tree.left, tree.right, tree.center)
    if n == 0 or any(len(a) != n for a in arrays):
        raise InvariantError("tree arrays are empty or ragged")
    seen = np.zeros(n, dtype=bool)
    stack = [tree.root]
    while stack:
        u = stack.pop()
        if u < 0 or u >= n or seen[u]:
            raise InvariantError(f"node {u} is out of range or reached twice")
        seen[u] = True
        if tree.dim[u] >= 0:
            if tree.dim[u] >= tree.d or not np.isfinite(tree.threshold[u]):
                raise InvariantError(f"node {u} has an invalid split")
            stack.extend((int(tree.left[u]), int(tree.right[u])))
        elif not 0 <= tree.center[u] < tree.k:
            raise InvariantError(f"leaf {u} has center {tree.center[u]} outside [0, {tree.k})")
    if not seen.all():
        raise InvariantError("tree has unreachable nodes")
    leaf_centers = np.sort(tree.center[tree.dim < 0])
    if not np.array_equal(leaf_centers, np.arange(tree.k)):
        raise InvariantError("leaf centers are not a permutation of range(k)")
    if centers is None:
        return
    centers = np.asarray(centers, dtype=np.float64)
    if centers.shape != (tree.k, tree.d):
        raise InvariantError(f"centers shape {centers.shape} does not match tree ({tree.k}, {tree.d})")
    routed = route_many(tree, centers)
    if not np.array_equal(tree.center[routed], np.arange(tree.k)):
        raise InvariantError("a center is not routed to its own leaf")
    lo = np.empty((n, tree.d))
    hi = np.empty((n, tree.d))
    for u in _postorder(tree):
        if tree.dim[u] < 0:
            lo[u] = hi[u] = centers[tree.center[u]]
            continue
        a, b = int(tree.left[u]), int(tree.right[u])
        np.minimum(lo[a], lo[b], out=lo[u])
        np.maximum(hi[a], hi[b], out=hi[u])
        r, t = tree.dim[u], tree.threshold[u]
        if not (lo[u, r] < t < hi[u, r]):
            raise InvariantError(f"split at node {u} does not strictly separate its centers")


def _postorder(tree: ThresholdTree) -> list[int]:
    order, stack = [], [tree.root]
    while stack:
        u = stack.pop()
        order.append(u)
        if tree.dim[u] >= 0:
            stack.extend((int(tree.left[u]), int(tree.right[u])))
    return order[::-1]


def split_work(tree: ThresholdTree) -> int:
    """Σ over internal nodes of min(#centers left, #centers right)."""
    count = np.zeros(tree.n_nodes, dtype=np.int64)
    work = 0
    for u in _postorder(tree):
        if tree.dim[u] < 0:
            count[u] = 1
        else:
            a, b = count[tree.left[u]], count[tree.right[u]]
            count[u] = a + b
            work += int(min(a, b))
    return work


def assign(tree: ThresholdTree, x) -> int:
    """Center index of the leaf containing ``x``; O(height) comparisons."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != tree.d:
        raise InputError(f"point has dimension {x.shape[0]}, tree expects {tree.d}")
    u = tree.root
    dim, thr, left, right = tree.dim, tree.threshold, tree.left, tree.right
    while dim[u] >= 0:
        u = left[u] if x[dim[u]] < thr[u] else right[u]
    return int(tree.center[u])


def route_many(tree: ThresholdTree, points) -> np.ndarray:
    """Leaf node id for every row of ``points`` (vectorised descent)."""
    points = as_points(points)
    if points.shape[1] != tree.d:
        raise InputError(f"points have dimension {points.shape[1]}, tree expects {tree.d}")
    leaf = np.empty(points.shape[0], dtype=np.int64)
    stack = [(tree.root, np.arange(points.shape[0]))]
    while stack:
        u, idx = stack.pop()
        if tree.dim[u] < 0:
            leaf[idx] = u
            continue
        go_left = points[idx, tree.dim[u]] < tree.threshold[u]
        stack.append((int(tree.left[u]), idx[go_left]))
        stack.append((int(tree.right[u]), idx[~go_left]))
    return leaf


def assign_many(tree: ThresholdTree, points) -> np.ndarray:
    return tree.center[route_many(tree, points)]


def point_costs(points: np.ndarray, targets: np.ndarray, objective: str) -> np.ndarray:
    """Per-point cost of ``points[i]`` served by ``targets[i]``."""
    diff = points - targets
    if objective == "kmedians":
        return np.abs(diff).sum(axis=1)
    if objective == "kmeans":
        return np.einsum("ij,ij->i", diff, diff)
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


@dataclass
class CostReport:
    objective: str
    total_cost: float
    point_index: np.ndarray
    assigned: np.ndarray
    contribution: np.ndarray
    reference_cost: Optional[float] = None

    @property
    def ratio(self) -> Optional[float]:
        if self.reference_cost is None:
            return None
        if self.reference_cost == 0:
            return 1.0 if self.total_cost == 0 else float("inf")
        return self.total_cost / self.reference_cost

    def with_reference(self, reference_cost: float) -> "CostReport":
        return CostReport(
            self.objective, self.total_cost, self.point_index, self.assigned,
            self.contribution, float(reference_cost),
        )


def _report(objective: str, assigned: np.ndarray, contrib: np.ndarray) -> CostReport:
    total = float(contrib.max()) if objective == "kcenter" else float(contrib.sum())
    return CostReport(objective, total, np.arange(len(assigned)), assigned, contrib)


def tree_cost(tree: ThresholdTree, data, centers, objective: str = "kmeans") -> CostReport:
    """Cost of serving each point by the center of the leaf it falls into."""
    _check_objective(objective)
    data, centers = as_points(data, "data"), as_points(centers, "centers")
    check_dims(data, centers)
    if centers.shape[0] != tree.k or tree.d != data.shape[1]:
        raise InputError(f"tree expects k={tree.k}, d={tree.d}; got centers {centers.shape}")
    assigned = assign_many(tree, data)
    return _report(objective, assigned, point_costs(data, centers[assigned], objective))


def pairwise_cost(data: np.ndarray, centers: np.ndarray, objective: str) -> np.ndarray:
    """``(n, k)`` matrix of ℓ1 (kmedians), squared ℓ2 (kmeans) or ℓ2 (kcenter) distances."""
    n, d = data.shape
    k = centers.shape[0]
    out = np.empty((n, k))
    step = max(1, _CHUNK // max(1, k * d))
    for s in range(0, n, step):
        diff = data[s:s + step, None, :] - centers[None, :, :]
        if objective == "kmedians":
            out[s:s + step] = np.abs(diff).sum(axis=2)
        else:
            out[s:s + step] = np.einsum("ijk,ijk->ij", diff, diff)
    if objective == "kcenter":
        np.sqrt(out, out=out)
    return out


def nearest_centers(data, centers, objective: str = "kmeans") -> np.ndarray:
    """Index of the nearest center per point; ties go to the lowest index."""
    _check_objective(objective)
    data, centers = as_points(data, "data"), as_points(centers, "centers")
    check_dims(data, centers)
    return np.argmin(pairwise_cost(data, centers, objective), axis=1)


def nearest_center_cost(data, centers, objective: str = "kmeans") -> CostReport:
    """Reference (unconstrained, fixed-centers) cost: each point to its nearest center."""
    data, centers = as_points(data, "data"), as_points(centers, "centers")
    assigned = nearest_centers(data, centers, objective)
    return _report(objective, assigned, point_costs(data, centers[assigned], objective))
