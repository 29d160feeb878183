"""Update-by-update simulation traces and their CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvariantError

CSV_COLUMNS = (
    "update_index",
    "wall_clock_s",
    "epoch",
    "staleness",
    "batch_total",
    "error_rate",
    "cumulative_samples",
)


@dataclass
class Record:
    wall_clock: float
    update_index: int
    epoch: int
    staleness: float  # max over the consumed messages
    batch_total: float
    error_rate: float
    w_norm: float
    cumulative_samples: float


@dataclass(frozen=True)
class BatchRef:
    """Where a message's samples came from: data stream (worker, index)."""

    worker: int
    index: int
    count: int
    param_version: int


@dataclass
class Trace:
    scheme: str
    records: list = field(default_factory=list)
    # staleness of every consumed message, in consumption order
    message_staleness: list = field(default_factory=list)
    # per update, the batches it consumed
    batches: list = field(default_factory=list)
    w_sum: np.ndarray | None = None  # running sum of w(t+1), for the averaged iterate
    params: list | None = None  # w(t+1) snapshots when requested
    cfg: object = None
    streams: object = None
    gt: object = None

    def append(self, rec: Record, w: np.ndarray, batches, stalenesses):
        if self.records:
            last = self.records[-1]
            if not rec.wall_clock > last.wall_clock:
                raise InvariantError("trace wall clock must be strictly increasing")
            if rec.cumulative_samples < last.cumulative_samples:
                raise InvariantError("cumulative samples must be nondecreasing")
        self.records.append(rec)
        self.batches.append(tuple(batches))
        self.message_staleness.extend(stalenesses)
        self.w_sum = w.copy() if self.w_sum is None else self.w_sum + w
        if self.params is not None:
            self.params.append(w.copy())

    def __len__(self):
        return len(self.records)

    @property
    def T(self) -> int:
        return len(self.records)

    @property
    def w_hat(self) -> np.ndarray:
        """Time-averaged iterate (1/T) sum_t w(t+1)."""
        if not self.records:
            raise ConfigError("empty trace has no averaged iterate")
        return self.w_sum / len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    @property
    def summary(self) -> dict:
        b = self.column("batch_total")
        return {"b_hat": float(b.min()), "b_bar_emp": float(b.mean()), "T": self.T}


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(
            [
                _fmt(r.update_index),
                _fmt(r.wall_clock),
                _fmt(r.epoch),
                _fmt(r.staleness),
                _fmt(r.batch_total),
                _fmt(r.error_rate),
                _fmt(r.cumulative_samples),
            ]
        )
    return buf.getvalue()


def write_csv(records, path) -> None:
    Path(path).write_text(records_to_csv(records))


def read_csv(path) -> list[Record]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected CSV header {reader.fieldnames}")
        out = []
        for row in reader:
            out.append(
                Record(
                    wall_clock=float(row["wall_clock_s"]),
                    update_index=int(float(row["update_index"])),
                    epoch=int(float(row["epoch"])),
                    staleness=float(row["staleness"]),
                    batch_total=float(row["batch_total"]),
                    error_rate=float(row["error_rate"]),
                    w_norm=float("nan"),
                    cumulative_samples=float(row["cumulative_samples"]),
                )
            )
    return out


def average_records(runs: list[list[Record]]) -> list[Record]:
    """Index-aligned mean over replications, truncated to the shortest run."""
    if not runs:
        raise ConfigError("nothing to average")
    k = min(len(r) for r in runs)
    out = []
    for i in range(k):
        rows = [r[i] for r in runs]
        m = len(rows)
        out.append(
            Record(
                wall_clock=sum(x.wall_clock for x in rows) / m,
                update_index=rows[0].update_index,
                epoch=rows[0].epoch,
                staleness=sum(x.staleness for x in rows) / m,
                batch_total=sum(x.batch_total for x in rows) / m,
                error_rate=sum(x.error_rate for x in rows) / m,
                w_norm=sum(x.w_norm for x in rows) / m,
                cumulative_samples=sum(x.cumulative_samples for x in rows) / m,
            )
        )
    return out
