"""Semantic score calibration and diagonal quality weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONSTANT_SCORE = 0.5


@dataclass(frozen=True)
class SemanticScores:
    raw: np.ndarray
    keywords: tuple | None = None
    per_keyword: np.ndarray | None = None

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=float).reshape(-1)
        if raw.size == 0:
            raise ValueError("semantic scores are empty")
        if np.any(raw < 0) or np.any(raw > 1) or not np.all(np.isfinite(raw)):
            raise ValueError("raw semantic scores must lie in [0, 1]")
        object.__setattr__(self, "raw", raw)

    @classmethod
    def from_keywords(cls, per_keyword, keywords=None) -> "SemanticScores":
        per_keyword = np.asarray(per_keyword, dtype=float)
        return cls(aggregate_keyword_scores(per_keyword),
                   tuple(keywords) if keywords is not None else None, per_keyword)

    @classmethod
    def uniform(cls, n: int, value: float = 0.5) -> "SemanticScores":
        return cls(np.full(n, value))


@dataclass(frozen=True)
class QualityWeights:
    q: np.ndarray
    alpha: float
    temperature: float = 1.0


def calibrate_scores(raw, T: float = 1.0) -> np.ndarray:
    """Temperature softmax across frames followed by min-max rescaling to [0, 1].

    A constant softmax output (spread below 1e-12) maps every frame to 0.5.
    """
    s = np.asarray(raw, dtype=float).reshape(-1)
    if s.size == 0:
        raise ValueError("cannot calibrate an empty score vector")
    if not T > 0:
        raise ValueError(f"temperature must be > 0, got {T}")
    z = s / T
    e = np.exp(z - z.max())
    p = e / e.sum()
    lo, hi = p.min(), p.max()
    if hi - lo < 1e-12:
        return np.full(s.size, CONSTANT_SCORE)
    return (p - lo) / (hi - lo)


def quality_weights(calibrated, alpha: float = 0.5, temperature: float = 1.0) -> QualityWeights:
    """q_i = (1 - alpha) + alpha * s_i."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    s = np.asarray(calibrated, dtype=float).reshape(-1)
    if np.any(s < 0) or np.any(s > 1):
        raise ValueError("calibrated scores must lie in [0, 1]")
    return QualityWeights(q=(1.0 - alpha) + alpha * s, alpha=float(alpha), temperature=float(temperature))


def aggregate_keyword_scores(per_keyword) -> np.ndarray:
    """Per-frame max over keywords, clamped to [0, 1]. Shape (frames, keywords)."""
    m = np.asarray(per_keyword, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2 or m.shape[0] == 0:
        raise ValueError("per-keyword score matrix is empty")
    if m.shape[1] == 0:
        raise ValueError("keyword set is empty")
    return np.clip(m.max(axis=1), 0.0, 1.0)


def stub_keyword_scores(forward_dirs, centers, targets) -> np.ndarray:
    """Stand-in for an image-text embedding scorer.

    Scores frame ``i`` against target ``k`` by how directly the camera looks at
    the target: max(0, cos(angle between forward axis and direction to target)).
    """
    f = np.asarray(forward_dirs, dtype=float)
    c = np.asarray(centers, dtype=float)
    out = np.zeros((len(f), len(targets)))
    for k, target in enumerate(targets):
        d = np.asarray(target, dtype=float)[None, :] - c
        d /= np.linalg.norm(d, axis=1, keepdims=True) + 1e-12
        fn = f / (np.linalg.norm(f, axis=1, keepdims=True) + 1e-12)
        out[:, k] = np.clip(np.einsum("ij,ij->i", fn, d), 0.0, 1.0)
    return out
