"""On-disk formats: point matrices as CSV, trees and reports as JSON.

Floats are written with 17 significant digits (CSV) or Python's shortest
round-trip repr (JSON), so a reloaded tree evaluates bit-identically.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .core import InputError, InvariantError, ThresholdTree, validate_tree

TREE_FORMAT_VERSION = 1


def read_points(path, name: str = "points") -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{name} file {path} is empty")
    header = [h.strip() for h in rows[0]]
    if header != [f"x{j}" for j in range(len(header))]:
        raise InputError(f"{name} file {path}: header must be x0,...,x{{d-1}}, got {','.join(header)}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise InputError(f"{name} file {path} has no rows")
    d = len(header)
    for i, r in enumerate(body, start=2):
        if len(r) != d:
            raise InputError(f"{name} file {path} line {i}: expected {d} values, got {len(r)}")
    try:
        arr = np.array(body, dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{name} file {path}: {exc}") from None
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} file {path} contains non-finite values")
    return arr


def write_points(path, points) -> None:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(points.shape[1])])
        for row in points:
            w.writerow([format(v, ".17g") for v in row])


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and dataclasses for ``json.dump``."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return to_jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=False) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def tree_to_dict(tree: ThresholdTree, include_audit: bool = True) -> dict:
    nodes = []
    for u in range(tree.n_nodes):
        if tree.dim[u] < 0:
            nodes.append({"id": u, "center": int(tree.center[u])})
        else:
            nodes.append({"id": u, "dim": int(tree.dim[u]), "threshold": float(tree.threshold[u]),
                          "left": int(tree.left[u]), "right": int(tree.right[u])})
    out = {"format_version": TREE_FORMAT_VERSION, "k": tree.k, "d": tree.d,
           "root": int(tree.root), "nodes": nodes}
    if include_audit and tree.audit is not None:
        out["audit"] = to_jsonable(tree.audit)
    return out


def _int(node, key):
    v = node.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise InputError(f"tree node {node.get('id')}: {key!r} must be an integer")
    return v


def tree_from_dict(obj, centers=None) -> ThresholdTree:
    """Parse and validate a tree object; ``centers`` adds the separation checks."""
    if not isinstance(obj, dict):
        raise InputError("tree file must hold a JSON object")
    if obj.get("format_version") != TREE_FORMAT_VERSION:
        raise InputError(f"unsupported tree format_version {obj.get('format_version')!r}")
    for key in ("k", "d", "root", "nodes"):
        if key not in obj:
            raise InputError(f"tree file lacks {key!r}")
    k, d, root, nodes = _int(obj, "k"), _int(obj, "d"), _int(obj, "root"), obj["nodes"]
    if not isinstance(nodes, list) or not nodes:
        raise InputError("tree 'nodes' must be a non-empty array")
    m = len(nodes)
    dim = np.full(m, -1, dtype=np.int64)
    threshold = np.full(m, np.nan)
    left = np.full(m, -1, dtype=np.int64)
    right = np.full(m, -1, dtype=np.int64)
    center = np.full(m, -1, dtype=np.int64)
    seen = set()
    for node in nodes:
        if not isinstance(node, dict):
            raise InputError("tree nodes must be JSON objects")
        u = _int(node, "id")
        if not 0 <= u < m or u in seen:
            raise InputError(f"tree node id {u} is out of range or repeated")
        seen.add(u)
        if "center" in node:
            center[u] = _int(node, "center")
            continue
        dim[u] = _int(node, "dim")
        t = node.get("threshold")
        if not isinstance(t, (int, float)) or isinstance(t, bool):
            raise InputError(f"tree node {u}: threshold must be a number")
        threshold[u] = float(t)
        left[u], right[u] = _int(node, "left"), _int(node, "right")
        if not (0 <= dim[u] < d and 0 <= left[u] < m and 0 <= right[u] < m):
            raise InputError(f"tree node {u}: dim or child id out of range")
    if not 0 <= root < m:
        raise InputError("tree root id out of range")
    tree = ThresholdTree(k=k, d=d, dim=dim, threshold=threshold, left=left, right=right,
                         center=center, root=root, audit=obj.get("audit"))
    try:
        validate_tree(tree, centers)
    except InvariantError as exc:
        # a malformed file is a data problem, not an internal failure
        raise InputError(f"invalid tree: {exc}") from None
    return tree


def write_tree(path, tree: ThresholdTree) -> None:
    write_json(path, tree_to_dict(tree))


def read_tree(path, centers=None) -> ThresholdTree:
    return tree_from_dict(read_json(path), centers)
