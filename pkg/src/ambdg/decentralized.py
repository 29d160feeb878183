"""Masterless AMB-DG: gossip consensus on the dual variables.

Each node mixes its weighted dual and gradient with its neighbours for r
synchronous rounds per epoch, carrying the scalar weight n * b_i alongside
so that every node can normalize without knowing b(t) (ratio consensus).

Consensus phases overlap with computation. When the communication time
exceeds T_p, a node's newest dual is not ready when the phase for epoch k
starts, so the phase mixes the newest available dual z_i(s) and the node
adds back its own consensus estimates of the gradients of epochs s..k-1.
With T_c <= T_p this is exactly the plain z_i(k) + g_i(k) message.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import linreg
from .config import ExperimentConfig
from .errors import ConfigError, NumericalError
from .hub import epoch_batch_size, ground_truth
from .optim import DualAvgState, primal_update, step_size
from .streams import Streams
from .trace import BatchRef, Record, Trace


@dataclass(frozen=True)
class WorkerGraph:
    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("graph needs at least one node")
        norm = set()
        for i, j in self.edges:
            if i == j:
                raise ConfigError(f"self loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ConfigError(f"edge ({i}, {j}) out of range for n={self.n}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        rows = [i for i, j in self.edges] + [j for i, j in self.edges]
        cols = [j for i, j in self.edges] + [i for i, j in self.edges]
        adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.n))
        ncomp, _ = connected_components(adj, directed=False)
        return ncomp == 1

    @classmethod
    def ring(cls, n: int) -> "WorkerGraph":
        if n <= 2:
            return cls.path(n)
        return cls(n, frozenset((i, (i + 1) % n) for i in range(n)))

    @classmethod
    def path(cls, n: int) -> "WorkerGraph":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def complete(cls, n: int) -> "WorkerGraph":
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def parse_graph(text: str, source: str = "<string>") -> WorkerGraph:
    """Edge list: first line the node count, then one 0-based "i j" pair per line."""
    lines = [(k, ln.split("#", 1)[0].strip()) for k, ln in enumerate(text.splitlines(), 1)]
    lines = [(k, ln) for k, ln in lines if ln]
    if not lines:
        raise ConfigError(f"{source}: empty graph file")
    try:
        n = int(lines[0][1])
    except ValueError:
        raise ConfigError(f"{source}:{lines[0][0]}: expected node count") from None
    edges = set()
    for k, ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ConfigError(f"{source}:{k}: expected 'i j'")
        try:
            edges.add((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ConfigError(f"{source}:{k}: node ids must be integers") from None
    try:
        return WorkerGraph(n, frozenset(edges))
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_graph(path) -> WorkerGraph:
    path = Path(path)
    try:
        return parse_graph(path.read_text(), str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read graph {path}: {exc}") from exc


def format_graph(g: WorkerGraph) -> str:
    return "\n".join([str(g.n)] + [f"{i} {j}" for i, j in sorted(g.edges)]) + "\n"


@dataclass(frozen=True)
class CommMatrix:
    q: np.ndarray
    graph: WorkerGraph | None = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        object.__setattr__(self, "q", q)
        n = q.shape[0]
        if q.shape != (n, n):
            raise ConfigError("communication matrix must be square")
        if np.any(np.abs(q.sum(axis=0) - 1) > 1e-12) or np.any(np.abs(q.sum(axis=1) - 1) > 1e-12):
            raise ConfigError("communication matrix is not doubly stochastic")
        if not np.allclose(q, q.T, atol=1e-15, rtol=0):
            raise ConfigError("communication matrix is not symmetric")
        if np.linalg.eigvalsh(q).min() < -1e-10:
            raise ConfigError("communication matrix is not positive semi-definite")
        if self.graph is not None:
            allowed = np.eye(n, dtype=bool)
            for i, j in self.graph.edges:
                allowed[i, j] = allowed[j, i] = True
            if np.any(q[~allowed] != 0):
                raise ConfigError("communication matrix has weight on a non-edge")

    @property
    def n(self) -> int:
        return self.q.shape[0]


def build_comm_matrix(g: WorkerGraph, lazy: bool = True) -> CommMatrix:
    """Metropolis-Hastings weights, optionally made lazy as (I + Q) / 2.

    The lazy form is positive semi-definite for any graph.
    """
    if not g.is_connected():
        raise ConfigError("graph is not connected")
    deg = g.degrees()
    q = np.zeros((g.n, g.n))
    for i, j in g.edges:
        q[i, j] = q[j, i] = 1.0 / (1 + max(deg[i], deg[j]))
    q[np.diag_indices(g.n)] = 1.0 - q.sum(axis=1)
    if lazy:
        q = (np.eye(g.n) + q) / 2
    return CommMatrix(q, g)


def lambda2(q: CommMatrix, tol: float = 1e-10, max_iter: int = 200_000, seed: int = 0) -> float:
    """Second largest eigenvalue of Q by power iteration on Q - 11^T / n."""
    n = q.n
    if n == 1:
        return 0.0
    A = q.q - np.full((n, n), 1.0 / n)
    v = np.random.default_rng(seed).standard_normal(n)
    v -= v.mean()
    v /= np.linalg.norm(v)
    lam = 0.0
    resid = math.inf
    for _ in range(max_iter):
        Av = A @ v
        lam = float(v @ Av)
        resid = float(np.linalg.norm(Av - lam * v))
        if resid <= tol:
            return lam
        norm = np.linalg.norm(Av)
        if norm == 0.0:
            return 0.0
        v = Av / norm
    raise NumericalError(
        f"power iteration did not converge in {max_iter} steps (estimate {lam}, residual {resid})"
    )


def min_consensus_rounds(n: int, J: float, delta: float, lam2: float) -> int:
    """ceil(log(2 sqrt(n) (1 + 2J/delta)) / (1 - lambda2))."""
    if not lam2 < 1:
        raise ConfigError("lambda2 must be < 1 (connected, aperiodic chain)")
    if not delta > 0:
        raise ConfigError("delta must be positive")
    ratio = 0.0 if math.isinf(delta) else 2 * J / delta
    return max(1, math.ceil(math.log(2 * math.sqrt(n) * (1 + ratio)) / (1 - lam2)))


def consensus_phase(vectors, scalars, q: CommMatrix, r: int):
    """Run r synchronous rounds of m_i <- sum_j Q_ij m_j on both components."""
    vectors = np.asarray(vectors, dtype=np.float64)
    scalars = np.asarray(scalars, dtype=np.float64)
    if vectors.shape[0] != q.n or scalars.shape != (q.n,):
        raise ConfigError("consensus inputs do not match the number of nodes")
    if r < 1:
        raise ConfigError("need at least one consensus round")
    for _ in range(r):
        vectors = q.q @ vectors
        scalars = q.q @ scalars
    return vectors, scalars


def node_dual_update(vector, scalar: float) -> np.ndarray:
    if not scalar > 0:
        raise NumericalError(f"nonpositive consensus weight {scalar}")
    return np.asarray(vector, dtype=np.float64) / scalar


def exact_weighted_mean(vectors, weights) -> np.ndarray:
    """sum_i w_i v_i / sum_i w_i, returning v_0 itself when all rows agree."""
    vectors = np.asarray(vectors)
    if all(np.array_equal(vectors[0], v) for v in vectors[1:]):
        return vectors[0].copy()
    weights = np.asarray(weights, dtype=np.float64)
    return (weights @ vectors) / weights.sum()


# --------------------------------------------------------------------------
# simulation


@dataclass
class DecentralizedTrace:
    nodes: list
    delta_emp: list
    r: int
    tau: int
    lambda2: float
    # per epoch, max over nodes of the local averaged gradient norm
    grad_norm_max: list = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.delta_emp)


def resolve_rounds(cfg: ExperimentConfig, q: CommMatrix) -> tuple[int, float]:
    lam = lambda2(q)
    if cfg.r is not None:
        return cfg.r, lam
    return min_consensus_rounds(q.n, cfg.J, cfg.delta, lam), lam


def _latest_version(k_time, T_p, T_c):
    """Newest version w(t+1) with t*T_p + T_c <= k_time (w(1) always available)."""
    t = math.floor((k_time - T_c) / T_p + 1e-9)
    return max(1, t + 1)


def run_decentralized(
    cfg: ExperimentConfig,
    replication: int = 0,
    graph: WorkerGraph | None = None,
    keep_params: bool = False,
) -> DecentralizedTrace:
    cfg.validate()
    if graph is None:
        if cfg.graph is None:
            raise ConfigError("decentralized run needs a graph")
        graph = load_graph(cfg.graph)
    if graph.n != cfg.n:
        raise ConfigError(f"graph has {graph.n} nodes but n={cfg.n}")
    q = build_comm_matrix(graph)
    r, lam = resolve_rounds(cfg, q)
    cfg = cfg.with_(scheme="decentralized", r=r)
    T_p, T_c, n, d = cfg.T_p, cfg.comm_time, cfg.n, cfg.d
    tau = cfg.tau
    streams = Streams(cfg.root_seed, replication)
    gt = ground_truth(cfg, streams)
    template = DualAvgState.initial(d, tau=cfg.step_staleness(), lipschitz_L=cfg.L, b_bar=cfg.step_b_bar())
    exact = cfg.consensus == "exact" or n == 1

    traces = [
        Trace("decentralized", cfg=cfg, streams=streams, gt=gt, params=[] if keep_params else None)
        for _ in range(n)
    ]
    z_hist = {1: np.zeros((n, d))}  # version -> per-node duals
    w_hist = {1: np.zeros((n, d))}
    g_mix = {}  # epoch -> per-node consensus estimate of g(epoch)
    g_exact = {}  # epoch -> exact g(epoch), for instrumentation only
    delta_emp = []
    grad_norms = []
    samples = 0

    k = 0
    while True:
        k += 1
        done_at = k * T_p + T_c
        if cfg.horizon_updates is not None and k > cfg.horizon_updates:
            break
        if cfg.horizon_seconds is not None and done_at > cfg.horizon_seconds + 1e-9:
            break
        v = _latest_version((k - 1) * T_p, T_p, T_c)
        s = min(_latest_version(k * T_p, T_p, T_c), k)
        W = w_hist[v]
        counts = np.array([epoch_batch_size(cfg, streams, i, k) for i in range(n)])
        g_sums = np.zeros((n, d))
        for i in range(n):
            Z, y = linreg.sample_batch(gt, streams.data(i, k), int(counts[i]))
            g_sums[i] = linreg.batch_grad_sum(W[i], Z, y)
        b_total = int(counts.sum())
        grad_norms.append(
            max(float(np.linalg.norm(g_sums[i])) / counts[i] for i in range(n) if counts[i]) if b_total else 0.0
        )
        g_tot = np.zeros(d)
        for i in range(n):
            g_tot += g_sums[i]
        g_exact[k] = g_tot / b_total if b_total > 0 else g_tot
        Zs = z_hist[s]

        if exact or b_total == 0:
            z_mix = np.broadcast_to(exact_weighted_mean(Zs, counts if b_total else np.ones(n)), (n, d))
            gk = np.broadcast_to(g_exact[k], (n, d))
        else:
            weights = n * counts.astype(np.float64)
            msgs = np.hstack([weights[:, None] * Zs, n * g_sums])
            mixed, scal = consensus_phase(msgs, weights, q, r)
            z_mix = np.empty((n, d))
            gk = np.empty((n, d))
            for i in range(n):
                z_mix[i] = node_dual_update(mixed[i, :d], scal[i])
                gk[i] = node_dual_update(mixed[i, d:], scal[i])
        g_mix[k] = gk

        z_new = np.array(z_mix, copy=True)
        for j in range(s, k + 1):
            z_new += g_mix[j]
        target = exact_weighted_mean(Zs, counts if b_total else np.ones(n))
        for j in range(s, k + 1):
            target = target + g_exact[j]
        delta_emp.append(float(np.max(np.linalg.norm(z_new - target, axis=1))))

        alpha = step_size(template, k + 1)
        w_new = primal_update(z_new, alpha)
        z_hist[k + 1] = z_new
        w_hist[k + 1] = w_new
        samples += b_total
        for i in range(n):
            rec = Record(
                wall_clock=done_at,
                update_index=k,
                epoch=k,
                staleness=k - v,
                batch_total=b_total,
                error_rate=linreg.error_rate(w_new[i], gt),
                w_norm=float(np.linalg.norm(w_new[i])),
                cumulative_samples=samples,
            )
            refs = [BatchRef(j, k, int(counts[j]), v) for j in range(n)]
            traces[i].append(rec, w_new[i], refs, [k - v] * n)

        # versions older than anything still needed can go
        keep_from = min(_latest_version(k * T_p, T_p, T_c), s)
        for hist in (z_hist, w_hist, g_mix, g_exact):
            for key in [key for key in hist if key < keep_from]:
                del hist[key]
    return DecentralizedTrace(traces, delta_emp, r, tau, lam, grad_norms)


def random_dual_instance(n: int, d: int, J: float, delta: float, rng: np.random.Generator):
    """Per-node duals within delta of a common centre and gradients of norm <= J."""
    centre = rng.standard_normal(d) * 10
    u = rng.standard_normal((n, d))
    u *= (delta * rng.uniform(0, 1, n) / np.linalg.norm(u, axis=1))[:, None]
    g = rng.standard_normal((n, d))
    g *= (J * rng.uniform(0, 1, n) / np.linalg.norm(g, axis=1))[:, None]
    return centre + u, g

