"""Discrete-event simulation of a master and n workers.

Three schemes share the event loop:

* ``ambdg``  workers compute for T_p seconds per epoch and never idle; the
  master updates with gradients that are tau = T_c / T_p updates old.
* ``amb``    same epochs, but workers idle until the new parameters arrive.
* ``kbatch_async``  workers compute fixed batches of b_tilde / K samples and
  the master updates after every K received messages, from any workers.

Events are ordered by (time, seq); seq is assigned when an event is scheduled.
Event times of the epoch schemes are computed from closed-form expressions
(never accumulated) so that schedules are reproducible bit for bit.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import linreg
from .config import ExperimentConfig
from .errors import ConfigError, InvariantError
from .linreg import GroundTruth
from .optim import DualAvgState, dual_update
from .streams import Streams
from .timing import minibatch_from_time, sample_batch_time
from .trace import BatchRef, Record, Trace

WORKER_EPOCH_END = "worker_epoch_end"
MASTER_RECEIVE = "master_receive"
MASTER_UPDATE = "master_update"
WORKER_RECEIVE_PARAMS = "worker_receive_params"


def _eps(t: float) -> float:
    return 1e-9 * max(1.0, abs(t))


@dataclass(frozen=True)
class GradientMsg:
    worker: int
    g_sum: np.ndarray
    b_count: int
    epoch: int
    param_version: int
    sent_at: float = 0.0
    data_index: int = 0

    def __post_init__(self):
        if self.b_count < 0:
            raise InvariantError("negative sample count in gradient message")
        if not np.all(np.isfinite(self.g_sum)):
            raise InvariantError(f"non-finite gradient from worker {self.worker}")
        if self.param_version > self.epoch:
            raise InvariantError(
                f"gradient for epoch {self.epoch} computed against future version {self.param_version}"
            )


@dataclass(order=True)
class SimEvent:
    time: float
    seq: int
    kind: str = field(compare=False)
    payload: object = field(compare=False, default=None)


class EventQueue:
    def __init__(self):
        self._heap = []
        self._seq = itertools.count()
        self.now = 0.0

    def schedule(self, time: float, kind: str, payload=None) -> SimEvent:
        if time < self.now - _eps(self.now):
            raise InvariantError(f"event {kind} scheduled in the past ({time} < {self.now})")
        ev = SimEvent(time, next(self._seq), kind, payload)
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> SimEvent:
        ev = heapq.heappop(self._heap)
        self.now = ev.time
        return ev

    def __bool__(self):
        return bool(self._heap)

    def __len__(self):
        return len(self._heap)


def staleness(msg: GradientMsg, master_update_count: int) -> int:
    """Number of master updates between the gradient's parameters and its use."""
    lag = master_update_count - msg.param_version
    if lag < 0:
        raise InvariantError(
            f"message from worker {msg.worker} uses version {msg.param_version} "
            f"but is consumed at update {master_update_count}"
        )
    return lag


class _Worker:
    """Parameter versions a worker has received, with arrival times."""

    def __init__(self, w1: np.ndarray):
        self.received = [(0.0, 1, w1)]

    def receive(self, time: float, version: int, w: np.ndarray):
        self.received.append((time, version, w))

    def params_at(self, time: float):
        """Latest (version, w) that had arrived by `time`."""
        best = None
        for k, (arrival, version, w) in enumerate(self.received):
            if arrival <= time + _eps(time):
                if best is None or version > self.received[best][1]:
                    best = k
        if best is None:
            raise InvariantError("worker has no parameters at time %r" % time)
        _, version, w = self.received[best]
        # anything older can never be chosen again
        self.received = [e for e in self.received if e[1] >= version]
        return version, w


class _Master:
    def __init__(self, cfg: ExperimentConfig, gt: GroundTruth, trace: Trace):
        self.cfg = cfg
        self.gt = gt
        self.trace = trace
        self.state = DualAvgState.initial(
            cfg.d, tau=cfg.step_staleness(), lipschitz_L=cfg.L, b_bar=cfg.step_b_bar()
        )
        self.updates = 0
        self.samples = 0

    @property
    def w(self) -> np.ndarray:
        return self.state.w

    def update(self, now: float, msgs, epoch: int | None = None) -> np.ndarray:
        u = self.updates + 1
        b_total = 0
        g = np.zeros(self.cfg.d)
        stal = []
        for m in msgs:
            if now + _eps(now) < m.sent_at + self.cfg.T_c / 2:
                raise InvariantError("gradient consumed before it could arrive")
            b_total += m.b_count
            g += m.g_sum
            stal.append(staleness(m, u))
        g_avg = g / b_total if b_total > 0 else g
        self.state = dual_update(self.state, g_avg)
        self.updates = u
        self.samples += b_total
        w = self.state.w
        rec = Record(
            wall_clock=now,
            update_index=u,
            epoch=u if epoch is None else epoch,
            staleness=max(stal) if stal else 0,
            batch_total=b_total,
            error_rate=linreg.error_rate(w, self.gt),
            w_norm=float(np.linalg.norm(w)),
            cumulative_samples=self.samples,
        )
        batches = [BatchRef(m.worker, m.data_index, m.b_count, m.param_version) for m in msgs]
        self.trace.append(rec, w, batches, stal)
        return w


def ground_truth(cfg: ExperimentConfig, streams: Streams) -> GroundTruth:
    return linreg.gen_ground_truth(cfg.d, streams.ground_truth(), cfg.noise_var)


def _new_trace(cfg, streams, gt, keep_params) -> Trace:
    return Trace(cfg.scheme, cfg=cfg, streams=streams, gt=gt, params=[] if keep_params else None)


def _horizon_reached(cfg: ExperimentConfig, updates: int) -> bool:
    return cfg.horizon_updates is not None and updates >= cfg.horizon_updates


def _past_horizon(cfg: ExperimentConfig, time: float) -> bool:
    return cfg.horizon_seconds is not None and time > cfg.horizon_seconds + _eps(time)


def epoch_batch_size(cfg: ExperimentConfig, streams: Streams, worker: int, epoch: int) -> int:
    """b_i(t) for the epoch schemes, from the (worker, epoch) timing stream."""
    T_i = sample_batch_time(cfg.timing, streams.timing(worker, epoch))
    return minibatch_from_time(cfg.T_p, cfg.b, T_i)


def _gradient(cfg, streams, gt, worker, index, count, w):
    Z, y = linreg.sample_batch(gt, streams.data(worker, index), count)
    return linreg.batch_grad_sum(w, Z, y)


def _run_epochs(cfg: ExperimentConfig, streams: Streams, gt: GroundTruth, idle: bool, keep_params: bool) -> Trace:
    T_p, T_c, n = cfg.T_p, cfg.T_c, cfg.n
    half = T_c / 2
    trace = _new_trace(cfg, streams, gt, keep_params)
    master = _Master(cfg, gt, trace)
    workers = [_Worker(master.w) for _ in range(n)]
    q = EventQueue()
    inbox: dict[int, list] = {}

    if idle:
        def start_time(k):
            return (k - 1) * T_p + (k - 1) * T_c

        def end_time(k):
            return k * T_p + (k - 1) * T_c
    else:
        def start_time(k):
            return (k - 1) * T_p

        def end_time(k):
            return k * T_p

    def schedule_epoch(i, k):
        if cfg.horizon_updates is not None and k > cfg.horizon_updates:
            return
        if _past_horizon(cfg, end_time(k) + half):
            return
        q.schedule(end_time(k), WORKER_EPOCH_END, (i, k))

    for i in range(n):
        schedule_epoch(i, 1)

    while q:
        ev = q.pop()
        now = ev.time
        if ev.kind == WORKER_EPOCH_END:
            i, k = ev.payload
            version, w = workers[i].params_at(start_time(k))
            b_i = epoch_batch_size(cfg, streams, i, k)
            g = _gradient(cfg, streams, gt, i, k, b_i, w)
            msg = GradientMsg(i, g, b_i, k, version, sent_at=now, data_index=k)
            q.schedule(now + half, MASTER_RECEIVE, msg)
            if not idle:
                schedule_epoch(i, k + 1)
        elif ev.kind == MASTER_RECEIVE:
            msg = ev.payload
            inbox.setdefault(msg.epoch, []).append(msg)
            if len(inbox[msg.epoch]) == n:
                q.schedule(now, MASTER_UPDATE, msg.epoch)
        elif ev.kind == MASTER_UPDATE:
            k = ev.payload
            if k != master.updates + 1:
                raise InvariantError(f"epoch {k} completed out of order")
            if _past_horizon(cfg, now):
                break
            msgs = sorted(inbox.pop(k), key=lambda m: m.worker)
            w = master.update(now, msgs, epoch=k)
            if _horizon_reached(cfg, master.updates):
                break
            for i in range(n):
                q.schedule(now + half, WORKER_RECEIVE_PARAMS, (i, master.updates + 1, w))
        elif ev.kind == WORKER_RECEIVE_PARAMS:
            i, version, w = ev.payload
            workers[i].receive(now, version, w)
            if idle:
                schedule_epoch(i, version)
        else:
            raise InvariantError(f"unknown event kind {ev.kind}")
    return trace


def _setup(cfg: ExperimentConfig, replication: int, scheme: str):
    cfg.validate()
    if cfg.scheme != scheme:
        cfg = cfg.with_(scheme=scheme)
    streams = Streams(cfg.root_seed, replication)
    return cfg, streams, ground_truth(cfg, streams)


def run_ambdg(cfg: ExperimentConfig, replication: int = 0, keep_params: bool = False) -> Trace:
    cfg, streams, gt = _setup(cfg, replication, "ambdg")
    return _run_epochs(cfg, streams, gt, idle=False, keep_params=keep_params)


def run_amb(cfg: ExperimentConfig, replication: int = 0, keep_params: bool = False) -> Trace:
    cfg, streams, gt = _setup(cfg, replication, "amb")
    return _run_epochs(cfg, streams, gt, idle=True, keep_params=keep_params)


def run_kbatch_async(cfg: ExperimentConfig, replication: int = 0, keep_params: bool = False) -> Trace:
    cfg, streams, gt = _setup(cfg, replication, "kbatch_async")
    if cfg.K is None or cfg.b_tilde is None or cfg.b_tilde % cfg.K:
        raise ConfigError("kbatch_async needs K dividing b_tilde")
    n, K, half = cfg.n, cfg.K, cfg.T_c / 2
    per_msg = cfg.b_tilde // K
    trace = _new_trace(cfg, streams, gt, keep_params)
    master = _Master(cfg, gt, trace)
    workers = [_Worker(master.w) for _ in range(n)]
    q = EventQueue()
    inbox: list[GradientMsg] = []
    pending_update = False

    def start_batch(i, j, start):
        T_i = sample_batch_time(cfg.timing, streams.timing(i, j))
        end = start + per_msg * T_i / cfg.b
        if _past_horizon(cfg, end + half):
            return
        q.schedule(end, WORKER_EPOCH_END, (i, j, start))

    for i in range(n):
        start_batch(i, 1, 0.0)

    while q:
        ev = q.pop()
        now = ev.time
        if ev.kind == WORKER_EPOCH_END:
            i, j, start = ev.payload
            version, w = workers[i].params_at(start)
            g = _gradient(cfg, streams, gt, i, j, per_msg, w)
            # version <= epoch always holds here: a version is at most updates + 1
            msg = GradientMsg(i, g, per_msg, master.updates + 1, version, sent_at=now, data_index=j)
            q.schedule(now + half, MASTER_RECEIVE, msg)
            start_batch(i, j + 1, now)
        elif ev.kind == MASTER_RECEIVE:
            inbox.append(ev.payload)
            if len(inbox) >= K and not pending_update:
                pending_update = True
                q.schedule(now, MASTER_UPDATE)
        elif ev.kind == MASTER_UPDATE:
            pending_update = False
            if _past_horizon(cfg, now):
                break
            msgs, inbox[:] = inbox[:K], inbox[K:]
            w = master.update(now, msgs)
            if _horizon_reached(cfg, master.updates):
                break
            for i in range(n):
                q.schedule(now + half, WORKER_RECEIVE_PARAMS, (i, master.updates + 1, w))
            if len(inbox) >= K:
                pending_update = True
                q.schedule(now, MASTER_UPDATE)
        elif ev.kind == WORKER_RECEIVE_PARAMS:
            i, version, w = ev.payload
            workers[i].receive(now, version, w)
        else:
            raise InvariantError(f"unknown event kind {ev.kind}")
    return trace


RUNNERS = {
    "ambdg": run_ambdg,
    "amb": run_amb,
    "kbatch_async": run_kbatch_async,
}


def run_scheme(cfg: ExperimentConfig, replication: int = 0, keep_params: bool = False) -> Trace:
    try:
        runner = RUNNERS[cfg.scheme]
    except KeyError:
        raise ConfigError(f"no hub runner for scheme {cfg.scheme!r}") from None
    return runner(cfg, replication, keep_params)
