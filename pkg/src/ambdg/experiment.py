"""Replicated runs, averaged traces and the files they produce."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .config import ExperimentConfig
from .decentralized import load_graph, run_decentralized
from .errors import ConfigError
from .hub import epoch_batch_size, run_scheme
from .optim import AssumptionConstants
from .streams import Streams
from .trace import Record, average_records, write_csv


@dataclass
class ExperimentResult:
    cfg: ExperimentConfig
    records: list  # averaged over replications
    traces: list  # one per replication (hub) or one list of node traces (decentralized)
    node_errors: np.ndarray | None = None  # updates x nodes, decentralized only
    delta_emp: list = field(default_factory=list)

    def summary(self) -> dict:
        b_hat, b_bar, ratio = metrics.batch_stats(self.records)
        if self.cfg.scheme == "decentralized":
            hist = metrics.staleness_histogram([reps[0] for reps in self.traces])
        else:
            hist = metrics.staleness_histogram(self.traces)
        out = {
            "scheme": self.cfg.scheme,
            "b_hat": b_hat,
            "b_bar": b_bar,
            "ratio": ratio,
            "time_to_error": {
                _key(t): v for t, v in metrics.time_to_error(self.records, self.cfg.targets).items()
            },
            "staleness_histogram": {str(k): v for k, v in hist.items()},
            "seed": self.cfg.root_seed,
            "replications": self.cfg.replications,
        }
        if self.delta_emp:
            out["delta_emp_max"] = max(self.delta_emp)
        return out


def _key(x: float) -> str:
    return repr(float(x))


def _graph_path(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.graph)
    if not path.is_absolute() and cfg.source and not path.exists():
        candidate = Path(cfg.source).parent / path
        if candidate.exists():
            return candidate
    return path


def _node_mean(node_traces) -> list:
    out = []
    for rows in zip(*(tr.records for tr in node_traces)):
        first = rows[0]
        out.append(
            Record(
                wall_clock=first.wall_clock,
                update_index=first.update_index,
                epoch=first.epoch,
                staleness=first.staleness,
                batch_total=first.batch_total,
                error_rate=sum(r.error_rate for r in rows) / len(rows),
                w_norm=sum(r.w_norm for r in rows) / len(rows),
                cumulative_samples=first.cumulative_samples,
            )
        )
    return out


def run_experiment(cfg: ExperimentConfig, keep_params: bool = False) -> ExperimentResult:
    cfg.validate()
    if cfg.scheme == "decentralized":
        graph = load_graph(_graph_path(cfg))
        runs, per_node, delta = [], [], []
        for rep in range(cfg.replications):
            dt = run_decentralized(cfg, rep, graph=graph, keep_params=keep_params)
            runs.append(dt.nodes)
            per_node.append(np.array([[r.error_rate for r in tr.records] for tr in dt.nodes]))
            delta.extend(dt.delta_emp)
        k = min(x.shape[1] for x in per_node)
        node_errors = np.mean([x[:, :k] for x in per_node], axis=0).T
        records = average_records([_node_mean(nodes) for nodes in runs])
        return ExperimentResult(cfg, records, runs, node_errors, delta)
    traces = [run_scheme(cfg, rep, keep_params) for rep in range(cfg.replications)]
    return ExperimentResult(cfg, average_records([t.records for t in traces]), traces)


def write_outputs(result: ExperimentResult, out_dir) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(result.records, out_dir / "trace.csv")
    summary = result.summary()
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if result.node_errors is not None:
        n = result.node_errors.shape[1]
        lines = ["update_index," + ",".join(f"node_{i}" for i in range(n))]
        for k, row in enumerate(result.node_errors, start=1):
            lines.append(f"{k}," + ",".join(repr(float(x)) for x in row))
        (out_dir / "node_errors.csv").write_text("\n".join(lines) + "\n")
    return summary


def compare_records(named: dict, targets) -> dict:
    """Time to each target per trace, and speedup of every trace over every other."""
    times = {name: metrics.time_to_error(recs, targets) for name, recs in named.items()}
    speedups = {}
    for a in named:
        for b in named:
            if a == b:
                continue
            speedups[f"{a}/{b}"] = {
                _key(t): metrics.speedup(times[a][t], times[b][t]) for t in targets
            }
    return {
        "time_to_error": {name: {_key(t): v for t, v in tt.items()} for name, tt in times.items()},
        "speedup": speedups,
    }


def epoch_batch_totals(cfg: ExperimentConfig, epochs: int, replication: int = 0) -> np.ndarray:
    """b(t) for the first epochs of a replication, from the timing streams alone."""
    streams = Streams(cfg.root_seed, replication)
    return np.array(
        [sum(epoch_batch_size(cfg, streams, i, k) for i in range(cfg.n)) for k in range(1, epochs + 1)],
        dtype=np.float64,
    )


def bound_params(cfg: ExperimentConfig) -> metrics.BoundParams:
    T = cfg.bound_T or cfg.horizon_updates
    if T is None:
        raise ConfigError("bounds need T (bounds.T or experiment.horizon_updates)")
    b_bar = cfg.step_b_bar()
    b_hat = cfg.b_hat
    if b_hat is None:
        if cfg.scheme == "kbatch_async":
            b_hat = b_bar
        else:
            b_hat = min(float(epoch_batch_totals(cfg, T).min()), b_bar)
    consts = AssumptionConstants(J=cfg.J, L=cfg.L, sigma2=cfg.sigma2, C2=cfg.C**2)
    return metrics.BoundParams(consts, cfg.step_staleness(), b_bar, b_hat, T)


def evaluate_bounds(cfg: ExperimentConfig) -> dict:
    p = bound_params(cfg)
    return {
        "T": p.T,
        "m": p.m,
        "tau": p.tau,
        "b_bar": p.b_bar,
        "b_hat": p.b_hat,
        "regret_bound": metrics.bound_regret_ambdg(p),
        "gap_bound": metrics.bound_gap_ambdg(p),
        "decentralized_regret_bound": metrics.bound_regret_decentralized(p, cfg.delta),
        "delta": cfg.delta,
    }
