"""Explainable 2-means: one threshold, chosen exhaustively or at random.

The exact sweep finds the best single cut for fixed centers. Random cuts
drawn from the piecewise-quadratic distribution are within a factor 3 on
average.

    python3 demos/two_means.py
"""
import numpy as np

from explainclust import nearest_center_cost, solve_reference
from explainclust.two_means import exact_2means_tree, sample_2means_splits, split_costs
from explainclust.core import tree_cost

rng = np.random.default_rng(3)
data = np.vstack([rng.normal(size=(300, 2)) @ [[2.0, 1.2], [0.0, 0.6]],
                  rng.normal(size=(300, 2)) @ [[2.0, 1.2], [0.0, 0.6]] + [3.0, 3.0]])
centers = solve_reference(data, 2, "kmeans", seed=0)
ref = nearest_center_cost(data, centers, "kmeans").total_cost

tree = exact_2means_tree(data, centers)
cost = tree_cost(tree, data, centers, "kmeans").total_cost
print(f"best cut: x{tree.dim[tree.root]} < {tree.threshold[tree.root]:.3f}, ratio {cost / ref:.4f}")

dims, ts = sample_2means_splits(centers, 100_000, seed=4)
costs = split_costs(data, centers, dims, ts)
print(f"random cuts: mean ratio {costs.mean() / ref:.4f}, worst {costs.max() / ref:.4f}")
