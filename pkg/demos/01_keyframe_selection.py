"""
Keyframe selection on a pose graph
==================================

Pick a small set of frames that are both spread out in SE(3) and relevant
to the question, from a smooth random camera trajectory.
"""

import numpy as np

from bevground import GeometryParams, build_banded_affinity, heat_kernel, normalized_laplacian
from bevground.dpp import build_l_ensemble, exact_map, greedy_map, select_keyframes
from bevground.semantic import calibrate_scores, quality_weights
from bevground.synthetic import random_walk_poses, two_cluster_poses

rng = np.random.default_rng(0)
poses = random_walk_poses(120, rng)

# view kernel: banded pose affinities diffused over the graph
W = build_banded_affinity(poses, GeometryParams(sigma_t=1.0, beta=2.0), b=24)
K = heat_kernel(normalized_laplacian(W), tau=2.0)
print("kernel diagonal range:", K.matrix.diagonal().min().round(3), K.matrix.diagonal().max().round(3))

# per-frame relevance, e.g. keyword similarity from an image-text model
raw = rng.uniform(0, 1, len(poses))
q = quality_weights(calibrate_scores(raw, 1.0), alpha=0.5)
L = build_l_ensemble(K, q)

sel = greedy_map(L, 8)
print("selected frames:", sorted(sel.indices))
print("log det of the selection:", round(sel.objective, 4))

# same thing in one call
assert select_keyframes(poses, raw, k=8).indices == sel.indices

# on a small problem the greedy answer can be checked by brute force
small = build_l_ensemble(heat_kernel(normalized_laplacian(build_banded_affinity(poses[:12])), 2.0),
                         quality_weights(calibrate_scores(raw[:12])))
print("greedy:", sorted(greedy_map(small, 4).indices), " exact:", exact_map(small, 4).indices)

# two far-apart groups of views: k=2 takes one from each, until semantics say otherwise
pair = two_cluster_poses(6)
print("uniform relevance:", select_keyframes(pair, np.full(12, 0.5), k=2).indices)
skew = np.r_[np.full(6, 0.1), np.full(6, 0.9)]
print("second group favored:", select_keyframes(pair, skew, k=2, alpha=0.9).indices)
