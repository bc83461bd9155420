"""Mutual-cover geometry of a feature trajectory vs the taxonomy.

Generates a hierarchical feature trajectory whose superclass separation
appears early and decays at the end, then tracks how well the mutual-cover
distance matrix agrees with taxonomy graph distances (cophenetic correlation)
epoch by epoch.  The terminal epoch has no hierarchy signal left: every
off-diagonal cover distance flattens to the same value.
"""

import numpy as np

from hierkit.hierarchy import graph_distance_matrix, parse_hierarchy
from hierkit.labelspace import build_labelspace, parse_grouping
from hierkit.manifold import (CoverConfig, ccc, cover_similarity, cover_stats,
                              split_query_support, to_distance_matrix)
from hierkit.synth import TrajectoryParams, gen_hierarchical_trajectory

GROUPS, PER_GROUP = 3, 4
EPOCHS = 8
K = 8

edges, classes, grouping = [], [], []
for gi in range(GROUPS):
    edges.append(f"root\tg{gi}")
    grouping.append(f"g{gi}\tg{gi}")
    for j in range(PER_GROUP):
        ci = gi * PER_GROUP + j
        edges.append(f"g{gi}\tn{ci}")
        classes.append(f"{ci}\tn{ci}")
h = parse_hierarchy(edges, classes)
space, _ = build_labelspace(h, parse_grouping(grouping), name="hypernyms")

params = TrajectoryParams(
    epochs=EPOCHS, dimension=24, examples_per_class=2 * K, seed=1,
    hypernym_gap_schedule=[0.2, 1.2, 2.0, 2.0, 1.6, 1.0, 0.5, 0.0],
    hyponym_gap_schedule=np.linspace(0.0, 1.0, EPOCHS),
    noise_schedule=[1.2, 0.8, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0])
trajectory = gen_hierarchical_trajectory(h, space, params)
d_w = graph_distance_matrix(h)

print(f"{h.class_count} classes in {GROUPS} superclasses; "
      f"taxonomy distances take values {sorted({int(v) for v in d_w.values[0, 1:]})}")
print()
print("epoch   self-cover  mutual-cover   ccc(d_F, d_W)   off-diag spread")
for f in trajectory:
    query, support = split_query_support(f, CoverConfig(k=K, seed=0))
    sim = cover_similarity(query, support, CoverConfig(k=K, method="exact"))
    d_f = to_distance_matrix(sim)
    self_cover, mutual = cover_stats(sim)
    off = d_f.values[np.triu_indices(h.class_count, k=1)]
    spread = off.max() - off.min()
    if spread < 1e-9:
        agreement = "   flat matrix"
    else:
        try:
            agreement = f"{ccc(d_f, d_w):13.4f} "
        except ValueError:
            agreement = "    undefined "
    print(f"{f.epoch:5d}   {self_cover:9.3f}   {mutual:11.3f}  {agreement}"
          f"  {spread:15.2e}")

print()
print("the correlation climbs while the superclass gap dominates and the")
print("terminal epoch is flat: with the gap gone, class directions are")
print("mutually orthogonal and no pair is closer than any other")
