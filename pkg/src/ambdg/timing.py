"""Shifted-exponential compute-time model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import exp1

from .errors import ConfigError


@dataclass(frozen=True)
class ShiftedExp:
    """Time for one worker to compute b gradients: xi + Exp(lam)."""

    lam: float
    xi: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if self.xi < 0:
            raise ConfigError("xi must be nonnegative")

    @property
    def mean(self) -> float:
        return self.xi + 1.0 / self.lam

    def mean_inverse(self) -> float:
        """E[1 / T] in closed form via the exponential integral."""
        if self.xi == 0:
            return math.inf
        x = self.lam * self.xi
        return self.lam * math.exp(x) * float(exp1(x))


def sample_batch_time(m: ShiftedExp, rng: np.random.Generator) -> float:
    return m.xi + rng.exponential(1.0 / m.lam)


def minibatch_from_time(T_p: float, b: int, T_i: float) -> int:
    """Samples completed in T_p seconds when b samples take T_i seconds."""
    # b * T_p / T_i can land a hair below an integer, e.g. 60*2.5/2.5
    return int(math.floor(b * T_p / T_i + 1e-9))


def expected_epoch_batch(m: ShiftedExp, n: int, b: int, T_p: float) -> float:
    """E[b(t)] = n * b * T_p * E[1/T_i], ignoring the floor."""
    return n * b * T_p * m.mean_inverse()
