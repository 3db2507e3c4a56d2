"""Compare explainable trees against the unconstrained clustering they imitate.

Fits k-means centers on Gaussian blobs, then builds one tree per method and
prints its cost relative to plain nearest-center assignment.

    python3 demos/price_of_explainability.py
"""
import numpy as np

from explainclust import build_fast, build_kmeans_tree, gen_blobs, nearest_center_cost, solve_reference, tree_cost

k, d, n = 8, 5, 2000
bundle = gen_blobs(k, d, n, spread=1.5, seed=0)
centers = solve_reference(bundle.data, k, "kmeans", seed=0)

print(f"{n} points, k={k}, d={d}")
for objective in ("kmeans", "kmedians"):
    ref = nearest_center_cost(bundle.data, centers, objective).total_cost
    print(f"\n{objective}: nearest-center cost {ref:.1f}")
    trees = {
        "sweep": build_kmeans_tree(bundle.data, centers, "sweep"),
        "imm": build_kmeans_tree(bundle.data, centers, "imm"),
        "mean-random": build_kmeans_tree(None, centers, "random", seed=1),
        "median-random": build_fast(centers, seed=1),
    }
    for name, tree in trees.items():
        cost = tree_cost(tree, bundle.data, centers, objective).total_cost
        print(f"  {name:<14} ratio {cost / ref:6.3f}   height {tree.height()}")
