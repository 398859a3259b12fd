"""Ensemble reductions, least-squares scaling fits and JSON helpers."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class RunningMoments:
    """Count, mean and sum of squared deviations; merges associatively."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, samples) -> "RunningMoments":
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            return cls()
        mu = float(np.mean(x))
        return cls(int(x.size), mu, float(np.sum((x - mu) ** 2)))

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        n = self.count + other.count
        if n == 0:
            return RunningMoments()
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return RunningMoments(n, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else math.nan

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else math.nan


@dataclass(frozen=True)
class EnsembleStats:
    n_paths: int
    mean: float
    stderr: float
    target: float
    zscore: float
    dt: float

    @classmethod
    def from_moments(cls, mom: RunningMoments, target: float, dt: float) -> "EnsembleStats":
        se = mom.stderr
        if se > 0:
            z = (mom.mean - target) / se
        else:
            z = 0.0 if mom.mean == target else math.copysign(math.inf, mom.mean - target)
        return cls(mom.count, mom.mean, se, float(target), float(z), float(dt))

    @classmethod
    def from_samples(cls, samples, target: float, dt: float) -> "EnsembleStats":
        return cls.from_moments(RunningMoments.of(samples), target, dt)

    def passes(self, k: float = 3.0) -> bool:
        return abs(self.zscore) <= k

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScalingFit:
    xs: np.ndarray
    ys: np.ndarray
    slope: float
    intercept: float
    stderr: float
    r2: float

    def to_dict(self) -> dict:
        return {
            "xs": list(map(float, self.xs)),
            "ys": list(map(float, self.ys)),
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "r2": self.r2,
        }


def ols_fit(xs, ys, weights=None) -> ScalingFit:
    """(Weighted) least-squares line through ``(xs, ys)`` with slope stderr."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points for a fit")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    W = w.sum()
    xm, ym = (w * x).sum() / W, (w * y).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    sst = (w * (y - ym) ** 2).sum()
    r2 = 1.0 - (w * resid**2).sum() / sst if sst > 0 else 1.0
    if x.size > 2:
        s2 = (w * resid**2).sum() / (x.size - 2) * x.size / W
        se = math.sqrt(s2 / sxx)
    else:
        se = math.nan
    return ScalingFit(x, y, float(slope), float(intercept), float(se), float(r2))


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, default=_default, indent=2, sort_keys=True, allow_nan=True)
