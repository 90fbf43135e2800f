"""Pipeline configuration with the fixed keyframe-selection hyper-parameters as defaults."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .episode import RewardConfig
from .geometry import GeometryParams
from .grounding import GroundingParams


@dataclass(frozen=True)
class Config:
    # keyframe selection
    sigma_t: float = 1.0
    beta: float = 2.0
    bandwidth: int = 24
    tau: float = 2.0
    temperature: float = 1.0
    alpha: float = 0.5
    k: int = 32
    # pose queries and rewards
    sigma_p: float = 1.0
    tau_s: float = 0.5
    theta_sim: float | None = None  # None -> tau_s
    alpha_s: float = 0.5
    lambda_tool: float = 1.0
    lambda_spatial: float = 1.0
    t_max: int = 6
    # numerics and preprocessing
    ridge: float = 1e-9
    trunc_eps: float = 0.0
    cell_size: float | str = "auto"
    stride: int = 8

    def __post_init__(self):
        if self.theta_sim is None:
            object.__setattr__(self, "theta_sim", self.tau_s)
        checks = [
            (self.sigma_t > 0, "sigma_t > 0"),
            (self.beta >= 0, "beta >= 0"),
            (isinstance(self.bandwidth, int) and self.bandwidth >= 0, "bandwidth is an integer >= 0"),
            (self.tau >= 0, "tau >= 0"),
            (self.temperature > 0, "temperature > 0"),
            (0 <= self.alpha <= 1, "alpha in [0, 1]"),
            (isinstance(self.k, int) and self.k >= 1, "k is an integer >= 1"),
            (self.sigma_p > 0, "sigma_p > 0"),
            (0 < self.tau_s <= 1, "tau_s in (0, 1]"),
            (self.theta_sim > 0, "theta_sim > 0"),
            (self.alpha_s > 0, "alpha_s > 0"),
            (self.lambda_tool >= 0, "lambda_tool >= 0"),
            (self.lambda_spatial >= 0, "lambda_spatial >= 0"),
            (isinstance(self.t_max, int) and self.t_max >= 1, "t_max is an integer >= 1"),
            (self.ridge >= 0, "ridge >= 0"),
            (self.trunc_eps >= 0, "trunc_eps >= 0"),
            (self.cell_size == "auto" or (not isinstance(self.cell_size, str) and self.cell_size > 0),
             "cell_size is 'auto' or > 0"),
            (isinstance(self.stride, int) and self.stride >= 1, "stride is an integer >= 1"),
        ]
        bad = [msg for ok, msg in checks if not ok]
        if bad:
            raise ValueError("invalid config: " + "; ".join(bad))

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "Config":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "Config":
        d = self.to_dict()
        if "tau_s" in changes and "theta_sim" not in changes and self.theta_sim == self.tau_s:
            d["theta_sim"] = None
        d.update(changes)
        return Config.from_dict(d)

    @property
    def geometry(self) -> GeometryParams:
        return GeometryParams(self.sigma_t, self.beta)

    @property
    def grounding(self) -> GroundingParams:
        return GroundingParams(self.sigma_p, self.beta, self.tau_s, self.t_max)

    @property
    def reward(self) -> RewardConfig:
        return RewardConfig(self.lambda_tool, self.lambda_spatial, self.alpha_s, self.theta_sim)

    @property
    def resolved_cell_size(self) -> float | None:
        return None if self.cell_size == "auto" else float(self.cell_size)


def load_config(path: str | Path | None) -> Config:
    return Config() if path is None else Config.load(path)
