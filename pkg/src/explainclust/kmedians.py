"""Explainable k-medians: random axis-aligned cuts over the reference centers.

Two builders produce trees with the same per-point assignment distribution:

* :func:`build_simplified` throws uniformly random lines ``{x_r = z}`` with
  ``z`` on ``[-B, B]`` and applies each one to every leaf whose center box it
  cuts.  Hopelessly slow for large ``B``; kept as a reference sampler.
* :func:`build_fast` splits one node at a time, picking the dimension with
  probability proportional to the node's box side and ``z`` uniform inside
  the box.  Per-node ordered indexes make the whole build O(k d log² k).

Neither builder looks at the data points.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate

import numpy as np

from .core import InputError, InvariantError, TreeBuilder, as_points, check_distinct, ensure_rng
from .ordered_index import CoordinateRanks, OrderedCoordinateIndex

MAX_SIMPLIFIED_SAMPLES = 10**9


@dataclass
class KMediansStats:
    n_splits: int = 0
    # Σ over internal nodes of min(|left centers|, |right centers|)
    work: int = 0
    # sampled lines that cut no leaf (simplified builder only)
    rejected: int = 0

    def work_bound(self, k: int) -> float:
        return k * math.log(k) if k > 1 else 0.0


def split_probability_vector(node_centers) -> list[tuple[int, float]]:
    """Dimension weights ``R_r / sum(R)`` for the box of ``node_centers``."""
    node_centers = as_points(node_centers, "node centers")
    if node_centers.shape[0] < 2:
        raise InputError("a node needs at least two centers to be split")
    extent = node_centers.max(axis=0) - node_centers.min(axis=0)
    total = extent.sum()
    if total <= 0:
        raise InputError("all centers in the node coincide")
    return [(r, float(w)) for r, w in enumerate(extent / total)]


def _sample_dimension(rng: np.random.Generator, extent) -> int:
    """Single cumulative-weight inversion; zero-width dimensions are never chosen."""
    cum = list(accumulate(extent))
    r = bisect_right(cum, rng.random() * cum[-1])
    while r >= len(cum) or extent[r] <= 0:  # guards the u*total == total rounding edge
        r -= 1
    return r


def build_fast(centers, seed=None, check: bool = False):
    """Randomized threshold tree with per-node dimension ∝ box side, cut uniform.

    Returns a :class:`~explainclust.core.ThresholdTree` whose ``audit`` is a
    :class:`KMediansStats`.  With ``check=True`` the ordered indexes are
    compared against brute-force bounding boxes after every split.
    """
    centers = as_points(centers, "centers")
    check_distinct(centers)
    rng = ensure_rng(seed)
    k, d = centers.shape
    builder = TreeBuilder(k, d)
    stats = KMediansStats()
    root = builder.new_node()
    if k == 1:
        builder.make_leaf(root, 0)
        return builder.finish(audit=stats)

    ranks = CoordinateRanks(centers)
    stack = [(root, OrderedCoordinateIndex(ranks, np.arange(k)))]
    while stack:
        u, index = stack.pop()
        size = len(index)
        if size == 1:
            builder.make_leaf(u, int(index.members()[0]))
            continue
        lo, hi = index.box()
        extent = [b - a for a, b in zip(lo, hi)]
        r = _sample_dimension(rng, extent)
        a, b = lo[r], hi[r]
        z = rng.uniform(a, b)
        while not (a < z < b) or ranks.hits_coordinate(r, z):
            z = rng.uniform(a, b)
        below = index.count_below(r, z)
        above = size - below
        # rebuild only the smaller side; equal halves rebuild the left
        if below <= above:
            left = index.split_off(r, below, lower=True)
            right = index
        else:
            right = index.split_off(r, above, lower=False)
            left = index
        stats.n_splits += 1
        stats.work += min(below, above)
        if check:
            _check_index(left, centers)
            _check_index(right, centers)
        lc, rc = builder.make_split(u, r, z)
        stack.append((rc, right))
        stack.append((lc, left))
    return builder.finish(audit=stats)


def _check_index(index: OrderedCoordinateIndex, centers: np.ndarray) -> None:
    members = index.members()
    lo, hi = map(np.array, index.box())
    if not (np.array_equal(lo, centers[members].min(axis=0))
            and np.array_equal(hi, centers[members].max(axis=0))):
        raise InvariantError("ordered index min/max disagree with the node's bounding box")
    for sl in index.lists:
        if len(sl) != len(members):
            raise InvariantError("ordered index dimensions hold different member counts")


def build_simplified(centers, bound: float, seed=None, max_samples: int = MAX_SIMPLIFIED_SAMPLES,
                     batch: int = 32):
    """Rejection-style builder: uniform lines over ``[-bound, bound]`` in a uniform dimension.

    Each sampled line splits every current leaf whose center box it strictly
    cuts; lines cutting nothing are discarded.  Samples are drawn ``batch`` at
    a time from the generator, so results depend on ``batch`` as well as the
    seed.
    """
    centers = as_points(centers, "centers")
    check_distinct(centers)
    if not bound > 0:
        raise InputError("bound must be positive")
    if np.abs(centers).max() > bound:
        raise InputError(f"centers are not contained in [-{bound}, {bound}]^d")
    rng = ensure_rng(seed)
    k, d = centers.shape
    builder = TreeBuilder(k, d)
    stats = KMediansStats()
    root = builder.new_node()
    if k == 1:
        builder.make_leaf(root, 0)
        return builder.finish(audit=stats)

    ranks = CoordinateRanks(centers)
    active = [(root, np.arange(k), centers.min(axis=0), centers.max(axis=0))]
    drawn = 0
    while active:
        dims = rng.integers(0, d, size=batch)
        zs = rng.uniform(-bound, bound, size=batch)
        for r, z in zip(dims.tolist(), zs.tolist()):
            drawn += 1
            if drawn > max_samples:
                raise RuntimeError(
                    f"simplified builder gave up after {max_samples} samples "
                    f"with {len(active)} unsplit leaves; use build_fast"
                )
            if ranks.hits_coordinate(r, z):
                continue
            hit = False
            nxt = []
            for u, members, lo, hi in active:
                if not (lo[r] < z < hi[r]):
                    nxt.append((u, members, lo, hi))
                    continue
                hit = True
                go_left = centers[members, r] < z
                nl = int(go_left.sum())
                stats.n_splits += 1
                stats.work += min(nl, len(members) - nl)
                children = builder.make_split(u, r, z)
                for child, part in zip(children, (members[go_left], members[~go_left])):
                    if len(part) == 1:
                        builder.make_leaf(child, int(part[0]))
                    else:
                        pts = centers[part]
                        nxt.append((child, part, pts.min(axis=0), pts.max(axis=0)))
            if not hit:
                stats.rejected += 1
            active = nxt
            if not active:
                break
    return builder.finish(audit=stats)
