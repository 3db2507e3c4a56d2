"""Explainable k-medians, k-means and 2-means clustering with axis-aligned threshold trees."""
from .core import (
    BoundingBox,
    CostReport,
    InputError,
    InvariantError,
    ThresholdTree,
    assign,
    assign_many,
    bounding_box,
    nearest_center_cost,
    split_work,
    tree_cost,
    validate_tree,
)
from .instances import (
    InstanceBundle,
    brute_force_oracle,
    gen_blobs,
    gen_imm_adversarial,
    gen_kmeans_lb,
    gen_kmedians_lb,
    solve_reference,
)
from .kmeans import build_kmeans_tree, imm_split, random_split, sweep_split
from .kmedians import build_fast, build_simplified, split_probability_vector
from .two_means import (
    algebraic_lemma_check,
    exact_2means_tree,
    optimal_2means_tree,
    random_2means_split,
)

__version__ = "0.1.0"
