"""Geometry- and semantics-aware keyframe selection, BEV scene grounding and pose-query rewards."""

from .config import Config
from .dpp import LEnsemble, SelectionResult, build_l_ensemble, exact_map, greedy_map, select_keyframes
from .geometry import GeometryParams, Pose, pose_affinity, pose_distance_sq, rotation_geodesic
from .grounding import FramePoseTable, GroundingParams, QueryResult, bev_similarity, retrieve
from .scene import BevGrid, BevPose, Intrinsics, ObbFrame
from .semantic import QualityWeights, SemanticScores, calibrate_scores, quality_weights
from .view_kernel import BandedAffinity, ViewKernel, build_banded_affinity, heat_kernel, normalized_laplacian

__version__ = "0.1.0"
