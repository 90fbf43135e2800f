"""Fixed-size MAP inference for the quality-modulated viewpoint L-ensemble.

Greedy selection keeps an incremental Cholesky factor of the selected
submatrix, so each step is one rank-one update over all candidates
(Chen et al., "Fast Greedy MAP Inference for Determinantal Point Process").
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import GeometryParams, Pose
from .semantic import SemanticScores, calibrate_scores, quality_weights
from .view_kernel import ViewKernel, build_banded_affinity, heat_kernel, normalized_laplacian

VARIANCE_FLOOR = 1e-12
EXACT_MAX_N = 20


@dataclass(frozen=True)
class LEnsemble:
    matrix: np.ndarray
    ridge: float = 0.0


@dataclass(frozen=True)
class SelectionResult:
    indices: list
    gains: list
    objective: float
    floored: bool = False
    floored_from: int | None = field(default=None)


def build_l_ensemble(K, q, ridge: float = 1e-9) -> LEnsemble:
    """L = Q K Q with Q = diag(q), plus ``ridge`` on the diagonal."""
    Km = K.matrix if isinstance(K, ViewKernel) else np.asarray(K, dtype=float)
    qv = q.q if hasattr(q, "q") else np.asarray(q, dtype=float)
    if Km.ndim != 2 or Km.shape[0] != Km.shape[1] or Km.shape[0] != qv.shape[0]:
        raise ValueError(f"dimension mismatch: kernel {Km.shape} vs quality {qv.shape}")
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    L = qv[:, None] * Km * qv[None, :]
    if ridge:
        L = L + ridge * np.eye(len(qv))
    return LEnsemble(matrix=L, ridge=float(ridge))


def _matrix(L) -> np.ndarray:
    return L.matrix if isinstance(L, LEnsemble) else np.asarray(L, dtype=float)


def greedy_map(L, k: int) -> SelectionResult:
    """Greedy log-det maximization of a size-``k`` subset.

    Ties go to the smallest index. Once the best conditional variance drops
    below 1e-12 the remaining slots are filled with the smallest unselected
    indices and their gains are recorded as log(1e-12).
    """
    M = _matrix(L)
    n = M.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    if not np.all(np.isfinite(M)):
        raise FloatingPointError("kernel contains non-finite entries")

    cis = np.zeros((k, n))
    di2s = np.diag(M).astype(float).copy()
    available = np.ones(n, dtype=bool)
    indices: list[int] = []
    gains: list[float] = []
    floored_from = None

    for step in range(k):
        cand = np.where(available, di2s, -np.inf)
        j = int(np.argmax(cand))
        if not cand[j] >= VARIANCE_FLOOR:
            floored_from = step
            break
        indices.append(j)
        gains.append(math.log(cand[j]))
        available[j] = False
        if step == k - 1:
            break
        # rank-one update: new Cholesky row for every candidate
        e = (M[j] - cis[:step, j] @ cis[:step]) / math.sqrt(di2s[j])
        cis[step] = e
        di2s = di2s - e * e

    if floored_from is not None:
        fill = [i for i in range(n) if available[i]][: k - len(indices)]
        indices.extend(fill)
        gains.extend([math.log(VARIANCE_FLOOR)] * len(fill))

    return SelectionResult(indices=indices, gains=gains, objective=float(math.fsum(gains)),
                           floored=floored_from is not None, floored_from=floored_from)


def exact_map(L, k: int) -> SelectionResult:
    """Exhaustive search over all size-``k`` subsets (n <= 20). Lexicographic ties."""
    M = _matrix(L)
    n = M.shape[0]
    if n > EXACT_MAX_N:
        raise ValueError(f"exact_map limited to n <= {EXACT_MAX_N}, got {n}")
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    best, best_val = None, -np.inf
    for subset in itertools.combinations(range(n), k):
        sign, logdet = np.linalg.slogdet(M[np.ix_(subset, subset)])
        val = logdet if sign > 0 else -np.inf
        if val > best_val:
            best, best_val = subset, val
    if best is None:
        best = tuple(range(k))
    # per-item gains via the chain rule of log det along the lexicographic order
    gains, prev = [], 0.0
    for m in range(1, k + 1):
        sub = best[:m]
        sign, logdet = np.linalg.slogdet(M[np.ix_(sub, sub)])
        cur = logdet if sign > 0 else -np.inf
        gains.append(float(cur - prev))
        prev = cur
    return SelectionResult(indices=list(best), gains=gains, objective=float(best_val))


def select_keyframes(
    poses: Sequence[Pose],
    scores,
    k: int = 32,
    geometry: GeometryParams = GeometryParams(),
    bandwidth: int = 24,
    tau: float = 2.0,
    temperature: float = 1.0,
    alpha: float = 0.5,
    ridge: float = 1e-9,
    trunc_eps: float = 0.0,
) -> SelectionResult:
    """Pose graph -> heat kernel -> calibrated quality -> L-ensemble -> greedy MAP."""
    raw = scores.raw if isinstance(scores, SemanticScores) else np.asarray(scores, dtype=float)
    if len(raw) != len(poses):
        raise ValueError(f"{len(poses)} poses but {len(raw)} semantic scores")
    W = build_banded_affinity(poses, geometry, bandwidth)
    K = heat_kernel(normalized_laplacian(W), tau, trunc_eps)
    q = quality_weights(calibrate_scores(raw, temperature), alpha, temperature)
    return greedy_map(build_l_ensemble(K, q, ridge), k)
