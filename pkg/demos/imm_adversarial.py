"""The greedy mistake-minimising splitter can be a factor of k off.

On the adversarial instance every split of the first coordinate block costs
one mistake while the correct block costs two, so the greedy rule peels the
origin center away from its own points. The random k-medians builder does
not fall for it.

    python3 demos/imm_adversarial.py
"""
import numpy as np

from explainclust import build_fast, build_kmeans_tree, gen_imm_adversarial, tree_cost

for k in (4, 8, 16, 32):
    b = gen_imm_adversarial(k)
    opt = b.planted_cost["kmedians"]
    imm = build_kmeans_tree(b.data, b.centers, "imm", metric="l1")
    imm_ratio = tree_cost(imm, b.data, b.centers, "kmedians").total_cost / opt
    rnd = np.mean([tree_cost(build_fast(b.centers, s), b.data, b.centers, "kmedians").total_cost / opt
                   for s in range(200)])
    print(f"k={k:>3}  IMM ratio {imm_ratio:6.2f}   median-random mean ratio {rnd:5.2f}")
