"""Regret, optimality gap, theoretical bounds and trace statistics."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import linreg
from .errors import ConfigError
from .optim import AssumptionConstants

EPOCH_SCHEMES = ("ambdg", "amb", "decentralized")


# --------------------------------------------------------------------------
# regret and optimality gap


def _batches_for_update(trace, k: int):
    """Batch descriptors of update k (1-based), regenerating past the end."""
    if k <= len(trace.batches):
        return trace.batches[k - 1]
    if trace.streams is None or trace.cfg is None:
        raise ConfigError("trace has no stream metadata to regenerate samples")
    if trace.scheme not in EPOCH_SCHEMES:
        return None
    from .hub import epoch_batch_size
    from .trace import BatchRef

    cfg = trace.cfg
    return tuple(
        BatchRef(i, k, epoch_batch_size(cfg, trace.streams, i, k), 0) for i in range(cfg.n)
    )


def regret_from_trace(trace, gt=None) -> np.ndarray:
    """Cumulative regret sum_t sum_s [f(w(t+1), x(t+1, s)) - f(w*, x(t+1, s))].

    Samples of update t+1 are regenerated from their recorded data streams.
    Needs a trace run with ``keep_params=True``. For K-batch async the
    samples after the last update are unknown, so the sequence is one shorter.
    """
    gt = gt if gt is not None else trace.gt
    if trace.params is None:
        raise ConfigError("regret needs parameter snapshots; run with keep_params=True")
    if trace.streams is None:
        raise ConfigError("trace has no stream metadata to regenerate samples")
    out = []
    total = 0.0
    for t, w in enumerate(trace.params, start=1):
        refs = _batches_for_update(trace, t + 1)
        if refs is None:
            break
        for ref in refs:
            Z, y = linreg.sample_batch(gt, trace.streams.data(ref.worker, ref.index), ref.count)
            if ref.count:
                total += linreg.batch_loss_sum(w, Z, y) - linreg.batch_loss_sum(gt.wstar, Z, y)
        out.append(total)
    return np.array(out)


def excess_risk(w, wstar) -> float:
    """F(w) - F(w*) for identity-covariance features: ||w - w*||^2."""
    diff = np.asarray(w, dtype=np.float64) - np.asarray(wstar, dtype=np.float64)
    return float(diff @ diff)


def optimality_gap(trace, gt=None) -> float:
    gt = gt if gt is not None else trace.gt
    return excess_risk(trace.w_hat, gt.wstar)


# --------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class BoundParams:
    constants: AssumptionConstants
    tau: int
    b_bar: float
    b_hat: float
    T: int
    m: float | None = None

    def __post_init__(self):
        if self.m is None:
            object.__setattr__(self, "m", self.T * self.b_bar)
        if self.T < 1 or self.tau < 0:
            raise ConfigError("need T >= 1 and tau >= 0")
        if not (0 < self.b_hat <= self.b_bar * (1 + 1e-12)):
            raise ConfigError(f"need 0 < b_hat <= b_bar, got {self.b_hat}, {self.b_bar}")
        if not math.isclose(self.m, self.T * self.b_bar, rel_tol=1e-9):
            raise ConfigError("m must equal T * b_bar")


def _terms(p: BoundParams):
    c = p.constants
    J, L, C, s2 = c.J, c.L, c.C, c.sigma2
    inv_alpha = L + math.sqrt((p.T + 1 + p.tau) / p.b_bar)
    return (
        p.b_bar * c.C2 / 2 * inv_alpha,
        2 * p.tau * J * C * p.b_bar,
        2 * L * J**2 * (p.tau + 1) ** 2 * p.b_bar**2 * (1 + math.log(p.T)),
        p.b_bar / p.b_hat * s2 * math.sqrt(p.m),
    )


def bound_regret_ambdg(p: BoundParams) -> float:
    return math.fsum(_terms(p))


def bound_gap_ambdg(p: BoundParams) -> float:
    c = p.constants
    J, L, C, s2, m, bb = c.J, c.L, c.C, c.sigma2, p.m, p.b_bar
    inv_alpha = L + math.sqrt((p.T + 1 + p.tau) / bb)
    return bb * math.fsum(
        (
            c.C2 / (2 * m) * inv_alpha,
            2 * p.tau * J * C / m,
            2 * L * J**2 * (p.tau + 1) ** 2 * bb * (1 + math.log(p.T)) / m,
            s2 / (p.b_hat * math.sqrt(m)),
        )
    )


def bound_regret_decentralized(p: BoundParams, delta: float) -> float:
    if delta < 0:
        raise ConfigError("delta must be nonnegative")
    c = p.constants
    inv_alpha = c.L + math.sqrt((p.T + 1 + p.tau) / p.b_bar)
    psi_star = c.C2 / 2
    t = _terms(p)
    return math.fsum(
        (
            p.b_bar * inv_alpha * psi_star,
            t[1],
            t[2],
            t[3],
            2 * c.J * delta * p.b_bar**1.5 * math.sqrt(p.m),
        )
    )


# --------------------------------------------------------------------------
# trace statistics


def staleness_histogram(traces, warmup: int = 0) -> dict[int, float]:
    """Normalized frequency of message staleness, skipping the first updates."""
    if not isinstance(traces, (list, tuple)):
        traces = [traces]
    counts = Counter()
    for tr in traces:
        skip = sum(len(b) for b in tr.batches[:warmup])
        counts.update(tr.message_staleness[skip:])
    total = sum(counts.values())
    if total == 0:
        return {}
    return {k: counts[k] / total for k in sorted(counts)}


def batch_stats(trace_or_records) -> tuple[float, float, float]:
    """(b_hat, b_bar, b_bar / b_hat) over the recorded updates."""
    records = getattr(trace_or_records, "records", trace_or_records)
    b = np.array([r.batch_total for r in records], dtype=np.float64)
    if b.size == 0:
        raise ConfigError("batch statistics of an empty trace")
    b_hat, b_bar = float(b.min()), float(b.mean())
    if b_hat <= 0:
        return b_hat, b_bar, math.inf
    return b_hat, b_bar, b_bar / b_hat


def time_to_error(records, targets) -> dict[float, float | None]:
    """Wall clock of the first record at or below each target (None if never)."""
    out = {}
    for target in targets:
        out[target] = next((r.wall_clock for r in records if r.error_rate <= target), None)
    return out


def speedup(t_fast: float | None, t_slow: float | None) -> float | None:
    if t_fast is None or t_slow is None or t_fast <= 0:
        return None
    return t_slow / t_fast
