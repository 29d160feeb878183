"""Synthetic linear-regression workload.

Features are standard normal, labels are y = zeta . w* + eps with
eps ~ N(0, noise_var). The per-sample gradient is (zeta . w - y) zeta,
i.e. the gradient of half the squared residual; the loss itself is the
full squared residual. Both conventions are kept as they are used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class GroundTruth:
    wstar: np.ndarray
    noise_var: float

    def __post_init__(self):
        if self.noise_var < 0:
            raise ConfigError("noise_var must be nonnegative")

    @property
    def d(self) -> int:
        return self.wstar.shape[0]


@dataclass(frozen=True)
class DataPoint:
    zeta: np.ndarray
    y: float


def gen_ground_truth(d: int, rng: np.random.Generator, noise_var: float = 1e-3) -> GroundTruth:
    if d < 1:
        raise ConfigError("dimension d must be >= 1")
    return GroundTruth(rng.standard_normal(d), noise_var)


def sample_point(gt: GroundTruth, rng: np.random.Generator) -> DataPoint:
    zeta = rng.standard_normal(gt.d)
    eps = math.sqrt(gt.noise_var) * rng.standard_normal() if gt.noise_var > 0 else 0.0
    return DataPoint(zeta, float(zeta @ gt.wstar + eps))


def sample_batch(gt: GroundTruth, rng: np.random.Generator, count: int):
    """Draw `count` points as a feature matrix and label vector.

    All features are drawn before the noise, so a batch is a pure function
    of (stream, count).
    """
    Z = rng.standard_normal((count, gt.d))
    y = Z @ gt.wstar
    if gt.noise_var > 0:
        y += math.sqrt(gt.noise_var) * rng.standard_normal(count)
    return Z, y


def _check(w, zeta):
    if w.shape != zeta.shape:
        raise ConfigError(f"dimension mismatch: w {w.shape} vs zeta {zeta.shape}")


def loss(w, p: DataPoint) -> float:
    w = np.asarray(w, dtype=np.float64)
    _check(w, p.zeta)
    r = float(p.zeta @ w) - p.y
    return r * r


def grad(w, p: DataPoint) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    _check(w, p.zeta)
    return (float(p.zeta @ w) - p.y) * p.zeta


def batch_grad_sum(w: np.ndarray, Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sum of per-sample gradients over a batch."""
    if Z.shape[0] == 0:
        return np.zeros(w.shape[0])
    return Z.T @ (Z @ w - y)


def batch_loss_sum(w: np.ndarray, Z: np.ndarray, y: np.ndarray) -> float:
    r = Z @ w - y
    return float(r @ r)


def error_rate(w, gt: GroundTruth) -> float:
    """||w - w*||^2 / ||w*||^2.

    This is the large-N limit of ||A(w - w*)||^2 / ||A w*||^2 for a Gaussian
    evaluation matrix A, so A never has to be materialized.
    """
    denom = float(gt.wstar @ gt.wstar)
    if denom == 0.0:
        raise ConfigError("error rate undefined for w* = 0")
    diff = np.asarray(w, dtype=np.float64) - gt.wstar
    return float(diff @ diff) / denom
