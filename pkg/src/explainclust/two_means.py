"""Explainable 2-means: exact single-cut sweeps and the randomized cut distribution.

The randomized cut works in a canonical frame where the first center sits
at the origin and the second at ``(R_1, ..., R_d)`` with every ``R_i >= 0``.
It picks a dimension with probability ∝ ``R_i²`` and cuts at ``R_i * a``
where ``a`` has the piecewise-quadratic CDF :func:`f_cdf` on [0, 1].
"""
from __future__ import annotations

import numpy as np

from .core import (
    InputError,
    ThresholdTree,
    TreeBuilder,
    as_points,
    check_dims,
    ensure_rng,
    point_costs,
)


def f_cdf(x):
    """CDF of the cut position: 0, 2x², 1 - 2(1-x)², 1 on the four pieces."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x <= 0.5, 2 * x**2, 1 - 2 * (1 - x) ** 2)
    out = np.where(x <= 0, 0.0, out)
    return np.where(x >= 1, 1.0, out)


def f_inverse(u):
    u = np.asarray(u, dtype=np.float64)
    return np.where(u <= 0.5, np.sqrt(u / 2), 1 - np.sqrt((1 - u) / 2))


def sample_f(size=None, seed=None):
    """Inverse-transform draws from the cut distribution."""
    return f_inverse(ensure_rng(seed).random(size))


def canonical_frame(centers) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(origin, sign, R)`` with ``x_canon = sign * (x - origin)`` mapping the
    first center to 0 and the second to ``R >= 0``."""
    centers = as_points(centers, "centers")
    if centers.shape[0] != 2:
        raise InputError(f"2-means needs exactly two centers, got {centers.shape[0]}")
    origin = centers[0]
    delta = centers[1] - origin
    sign = np.where(delta < 0, -1.0, 1.0)
    R = np.abs(delta)
    if not np.any(R > 0):
        raise InputError("the two centers coincide")
    return origin, sign, R


def sample_2means_splits(centers, size: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """``size`` independent cuts ``(dims, thresholds)`` in the caller's coordinates."""
    origin, sign, R = canonical_frame(centers)
    rng = ensure_rng(seed)
    w = R**2
    cum = np.cumsum(w)
    dims = np.searchsorted(cum, rng.random(size) * cum[-1], side="right")
    dims = np.minimum(dims, len(R) - 1)
    # a == 0 or 1 would put the cut on a center; measure zero, redraw
    a = sample_f(size, rng)
    bad = (a <= 0) | (a >= 1)
    while np.any(bad):
        a[bad] = sample_f(int(bad.sum()), rng)
        bad = (a <= 0) | (a >= 1)
    thresholds = origin[dims] + sign[dims] * R[dims] * a
    return dims, thresholds


def random_2means_split(centers, seed=None) -> tuple[int, float]:
    dims, thresholds = sample_2means_splits(centers, 1, seed)
    return int(dims[0]), float(thresholds[0])


def split_tree(centers, dim: int, threshold: float) -> ThresholdTree:
    """Two-leaf tree cutting at ``x[dim] = threshold``; the left leaf gets the lower center."""
    centers = as_points(centers, "centers")
    lo_c = 0 if centers[0, dim] < centers[1, dim] else 1
    b = TreeBuilder(2, centers.shape[1])
    left, right = b.make_split(b.new_node(), dim, threshold)
    b.make_leaf(left, lo_c)
    b.make_leaf(right, 1 - lo_c)
    return b.finish()


def _fixed_prefix(data, centers, r):
    """Sorted coordinates and prefix costs for cuts along ``r`` with fixed centers."""
    lo_c = 0 if centers[0, r] < centers[1, r] else 1
    d_lo = point_costs(data, np.broadcast_to(centers[lo_c], data.shape), "kmeans")
    d_hi = point_costs(data, np.broadcast_to(centers[1 - lo_c], data.shape), "kmeans")
    order = np.argsort(data[:, r], kind="stable")
    xs = data[order, r]
    pre_lo = np.concatenate([[0.0], np.cumsum(d_lo[order])])
    pre_hi = np.concatenate([[0.0], np.cumsum(d_hi[order])])
    return xs, pre_lo, pre_hi


def split_costs(data, centers, dims, thresholds) -> np.ndarray:
    """Fixed-center 2-means cost of each cut ``x[dims[j]] = thresholds[j]``."""
    data, centers = as_points(data, "data"), as_points(centers, "centers")
    check_dims(data, centers)
    dims = np.asarray(dims)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    out = np.empty(len(dims))
    for r in np.unique(dims):
        sel = dims == r
        xs, pre_lo, pre_hi = _fixed_prefix(data, centers, r)
        m = np.searchsorted(xs, thresholds[sel], side="left")
        out[sel] = pre_lo[m] + (pre_hi[-1] - pre_hi[m])
    return out


def _midpoints(vals):
    vals = np.unique(vals)
    mids = (vals[:-1] + vals[1:]) / 2
    return mids[(mids > vals[:-1]) & (mids < vals[1:])]


def exact_2means_tree(data, centers) -> ThresholdTree:
    """Best single cut with both centers held fixed, by a per-dimension sweep.

    Every threshold strictly between the two center coordinates is covered
    through the midpoints of consecutive distinct coordinate values, since
    the cost is constant between them.  O(n d² + n d log n).
    """
    data, centers = as_points(data, "data"), as_points(centers, "centers")
    check_dims(data, centers)
    if centers.shape[0] != 2:
        raise InputError(f"2-means needs exactly two centers, got {centers.shape[0]}")
    best = None
    for r in range(data.shape[1]):
        a, b = sorted(centers[:, r])
        if not a < b:
            continue
        col = data[:, r]
        mids = _midpoints(np.concatenate([[a, b], col[(col > a) & (col < b)]]))
        if mids.size == 0:
            continue
        xs, pre_lo, pre_hi = _fixed_prefix(data, centers, r)
        m = np.searchsorted(xs, mids, side="left")
        cost = pre_lo[m] + (pre_hi[-1] - pre_hi[m])
        j = int(np.argmin(cost))
        if best is None or cost[j] < best[0]:
            best = (cost[j], r, float(mids[j]))
    if best is None:
        raise InputError("the two centers coincide")
    return split_tree(centers, best[1], best[2])


def optimal_2means_tree(data) -> tuple[ThresholdTree, np.ndarray]:
    """Best single cut when each side is served by its own centroid.

    Returns the tree and the two refitted centers (left side first).
    """
    data = as_points(data, "data")
    n, d = data.shape
    sq_total = float(np.einsum("ij,ij->", data, data))
    best = None
    for r in range(d):
        order = np.argsort(data[:, r], kind="stable")
        xs = data[order, r]
        pre = np.cumsum(data[order], axis=0)
        mids = _midpoints(xs)
        if mids.size == 0:
            continue
        m = np.searchsorted(xs, mids, side="left")
        left_sum = pre[m - 1]
        right_sum = pre[-1] - left_sum
        nl = m.astype(np.float64)
        cost = sq_total - np.einsum("ij,ij->i", left_sum, left_sum) / nl \
            - np.einsum("ij,ij->i", right_sum, right_sum) / (n - nl)
        j = int(np.argmin(cost))
        if best is None or cost[j] < best[0]:
            best = (cost[j], r, float(mids[j]), left_sum[j] / nl[j], right_sum[j] / (n - nl[j]))
    if best is None:
        raise InputError("all points coincide; no cut leaves both sides non-empty")
    _, r, t, mu_l, mu_r = best
    centers = np.vstack([mu_l, mu_r])
    return split_tree(centers, r, t), centers


def algebraic_lemma_batch(R, alpha) -> np.ndarray:
    """Row-wise check of ΣR²(1-2α)·ΣR²F(α) <= 2·ΣR²·ΣR²α² for 2-D inputs.

    The tolerance scales with the magnitude of the left-hand terms so that
    rounding in the (possibly cancelling) first factor cannot flip a verdict.
    """
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    alpha = np.atleast_2d(np.asarray(alpha, dtype=np.float64))
    if R.shape != alpha.shape:
        raise InputError("R and alpha must have the same shape")
    if np.any(R < 0):
        raise InputError("R must be non-negative")
    w = R**2
    first = np.sum(w * (1 - 2 * alpha), axis=1)
    second = np.sum(w * f_cdf(alpha), axis=1)
    lhs = first * second
    rhs = 2 * np.sum(w, axis=1) * np.sum(w * alpha**2, axis=1)
    scale = np.sum(w * np.abs(1 - 2 * alpha), axis=1) * second
    return lhs <= rhs + 1e-12 * scale


def algebraic_lemma_check(R, alpha) -> bool:
    return bool(algebraic_lemma_batch(np.ravel(R)[None, :], np.ravel(alpha)[None, :])[0])
