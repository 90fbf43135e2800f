"""Temporal viewpoint graph, normalized Laplacian and heat-diffusion kernel."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import GeometryParams, Pose, pairwise_distance_sq


@dataclass(frozen=True)
class BandedAffinity:
    """Symmetric affinity with W[i, j] = 0 whenever |i - j| > bandwidth.

    Only the upper band is stored: ``bands[d, i] = W[i, i + d]`` for
    ``i < n - d``; the tail of each row is zero padding.
    """

    n: int
    bandwidth: int
    bands: np.ndarray
    computed_entries: int

    def degrees(self) -> np.ndarray:
        deg = self.bands[0].copy()
        for d in range(1, self.bands.shape[0]):
            row = self.bands[d, : self.n - d]
            deg[: self.n - d] += row
            deg[d:] += row
        return deg

    def to_dense(self) -> np.ndarray:
        W = np.diag(self.bands[0])
        for d in range(1, self.bands.shape[0]):
            row = self.bands[d, : self.n - d]
            idx = np.arange(self.n - d)
            W[idx, idx + d] = row
            W[idx + d, idx] = row
        return W


@dataclass(frozen=True)
class ViewKernel:
    n: int
    matrix: np.ndarray
    tau: float


def build_banded_affinity(
    poses: Sequence[Pose], p: GeometryParams = GeometryParams(), b: int = 24
) -> BandedAffinity:
    """Pose affinities kept only inside a temporal band of half-width ``b``.

    Frames must be given in temporal order with ids 0..n-1.
    """
    poses = list(poses)
    n = len(poses)
    if n == 0:
        raise ValueError("pose sequence is empty")
    if b < 0:
        raise ValueError(f"bandwidth must be >= 0, got {b}")
    ids = [x.frame_id for x in poses]
    if ids != list(range(n)):
        raise ValueError("frame ids must be contiguous 0..n-1 in temporal order")
    depth = min(b, n - 1)
    bands = np.zeros((depth + 1, n))
    bands[0] = 1.0
    computed = n
    for d in range(1, depth + 1):
        d_sq = pairwise_distance_sq(poses[: n - d], poses[d:], p)
        bands[d, : n - d] = np.exp(-0.5 * d_sq)
        computed += n - d
    return BandedAffinity(n=n, bandwidth=b, bands=bands, computed_entries=computed)


def normalized_laplacian(W: BandedAffinity) -> np.ndarray:
    """I - D^{-1/2} W D^{-1/2} as a dense symmetric matrix."""
    inv_sqrt = 1.0 / np.sqrt(W.degrees())
    A = W.to_dense() * inv_sqrt[:, None] * inv_sqrt[None, :]
    L = np.eye(W.n) - A
    return 0.5 * (L + L.T)


def heat_kernel(L, tau: float = 2.0, trunc_eps: float = 0.0) -> ViewKernel:
    """exp(-tau L) by symmetric eigendecomposition.

    Negative eigenvalues of ``L`` are round-off and clamped to zero. Entries
    below ``trunc_eps`` in magnitude are zeroed afterwards.
    """
    L = np.asarray(L, dtype=float)
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if trunc_eps < 0:
        raise ValueError(f"trunc_eps must be >= 0, got {trunc_eps}")
    n = L.shape[0]
    if tau == 0:
        return ViewKernel(n=n, matrix=np.eye(n), tau=0.0)
    if not np.all(np.isfinite(L)):
        raise FloatingPointError("Laplacian contains non-finite entries")
    try:
        lam, V = np.linalg.eigh(0.5 * (L + L.T))
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"eigendecomposition failed: {exc}") from exc
    lam = np.clip(lam, 0.0, None)
    K = (V * np.exp(-tau * lam)) @ V.T
    if trunc_eps > 0:
        K[np.abs(K) < trunc_eps] = 0.0
    K = 0.5 * (K + K.T)
    return ViewKernel(n=n, matrix=K, tau=float(tau))


def view_kernel(poses, p: GeometryParams = GeometryParams(), b: int = 24, tau: float = 2.0,
                trunc_eps: float = 0.0) -> ViewKernel:
    return heat_kernel(normalized_laplacian(build_banded_affinity(poses, p, b)), tau, trunc_eps)
