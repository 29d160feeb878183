"""Dual averaging with delayed gradients.

The proximal function is psi(w) = 0.5 * ||w||^2 over an unconstrained
feasible set, so the primal step has the closed form w = -alpha * z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError


def as_param(coords, d: int | None = None) -> np.ndarray:
    """Validate and return a float64 parameter vector."""
    w = np.asarray(coords, dtype=np.float64)
    if w.ndim != 1:
        raise ConfigError(f"parameter vector must be 1-D, got shape {w.shape}")
    if d is not None and w.shape[0] != d:
        raise ConfigError(f"dimension mismatch: expected {d}, got {w.shape[0]}")
    if not np.all(np.isfinite(w)):
        raise ConfigError("parameter vector has non-finite coordinates")
    return w


@dataclass(frozen=True)
class AssumptionConstants:
    J: float = 0.0  # Lipschitz constant of F
    L: float = 0.0  # Lipschitz constant of grad f
    sigma2: float = 0.0  # gradient variance bound
    C2: float = 0.0  # psi(w*) <= C2 / 2

    def __post_init__(self):
        for name in ("J", "L", "sigma2", "C2"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")

    @property
    def C(self) -> float:
        return math.sqrt(self.C2)


@dataclass(frozen=True)
class DualAvgState:
    z: np.ndarray
    t: int = 1
    tau: int = 0
    lipschitz_L: float = 0.0
    b_bar: float = 1.0
    w: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.t < 1:
            raise ConfigError("epoch index t must be >= 1")
        if self.tau < 0:
            raise ConfigError("staleness tau must be >= 0")
        if self.lipschitz_L < 0:
            raise ConfigError("L must be nonnegative")
        if not self.b_bar > 0:
            raise ConfigError("b_bar must be positive")
        if self.w is None:
            object.__setattr__(self, "w", np.zeros_like(self.z))

    @classmethod
    def initial(cls, d: int, tau: int = 0, lipschitz_L: float = 0.0, b_bar: float = 1.0):
        return cls(np.zeros(d), 1, tau, lipschitz_L, b_bar)

    @property
    def d(self) -> int:
        return self.z.shape[0]


def step_size(state: DualAvgState, t: int) -> float:
    """alpha(t) = 1 / (L + sqrt((t + tau) / b_bar))."""
    if t < 1:
        raise ConfigError("step_size needs t >= 1")
    return 1.0 / (state.lipschitz_L + math.sqrt((t + state.tau) / state.b_bar))


def dual_update(state: DualAvgState, g_avg) -> DualAvgState:
    """z(t+1) = z(t) + g_avg, where g_avg is the per-sample average gradient.

    The returned state also carries w(t+1) = argmin <z, w> + psi(w) / alpha(t+1).
    """
    g_avg = np.asarray(g_avg, dtype=np.float64)
    if g_avg.shape != state.z.shape:
        raise ConfigError(f"dimension mismatch: z has {state.z.shape}, g has {g_avg.shape}")
    z = state.z + g_avg
    nxt = replace(state, z=z, t=state.t + 1, w=None)
    return replace(nxt, w=primal_update(z, step_size(nxt, nxt.t)))


def primal_update(z, alpha: float) -> np.ndarray:
    return -alpha * np.asarray(z, dtype=np.float64)


def psi(w) -> float:
    w = np.asarray(w, dtype=np.float64)
    return 0.5 * float(w @ w)


def grad_psi(w) -> np.ndarray:
    return np.asarray(w, dtype=np.float64)


def bregman(wstar, w) -> float:
    """D_psi(w*, w) = 0.5 * ||w* - w||^2 for the quadratic proximal function."""
    wstar = np.asarray(wstar, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if wstar.shape != w.shape:
        raise ConfigError(f"dimension mismatch: {wstar.shape} vs {w.shape}")
    diff = wstar - w
    return 0.5 * float(diff @ diff)
