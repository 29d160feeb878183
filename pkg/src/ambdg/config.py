"""Experiment configuration.

Config files are flat ``key = value`` text grouped under ``[section]``
headers. Keys are unique across the whole file; sections only group them.
``#`` starts a comment. Numbers may be written as fractions (``2/3``).

Example::

    [experiment]
    scheme = ambdg
    root_seed = 7
    horizon_updates = 200

    [cluster]
    n = 10
    T_p = 2.5
    T_c = 10
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .timing import ShiftedExp, expected_epoch_batch

SCHEMES = ("ambdg", "amb", "kbatch_async", "decentralized")

# section -> {file key: (attribute, parser)}
_INT, _FLOAT, _STR = "int", "float", "str"
SECTIONS = {
    "experiment": {
        "scheme": ("scheme", _STR),
        "root_seed": ("root_seed", _INT),
        "replications": ("replications", _INT),
        "horizon_updates": ("horizon_updates", _INT),
        "horizon_seconds": ("horizon_seconds", _FLOAT),
        "targets": ("targets", "floats"),
    },
    "cluster": {
        "n": ("n", _INT),
        "T_p": ("T_p", _FLOAT),
        "T_c": ("T_c", _FLOAT),
    },
    "workload": {
        "d": ("d", _INT),
        "noise_var": ("noise_var", _FLOAT),
    },
    "timing": {
        "b": ("b", _INT),
        "lambda": ("lam", _FLOAT),
        "xi": ("xi", _FLOAT),
    },
    "step": {
        "L": ("L", _FLOAT),
        "b_bar": ("b_bar", "auto_float"),
        "tau": ("step_tau", "auto_int"),
    },
    "kbatch_async": {
        "K": ("K", _INT),
        "b_tilde": ("b_tilde", _INT),
    },
    "decentralized": {
        "graph": ("graph", _STR),
        "r": ("r", "auto_int"),
        "t_round": ("t_round", _FLOAT),
        "consensus": ("consensus", _STR),
    },
    "bounds": {
        "J": ("J", _FLOAT),
        "C": ("C", _FLOAT),
        "sigma2": ("sigma2", _FLOAT),
        "b_hat": ("b_hat", _FLOAT),
        "T": ("bound_T", _INT),
        "delta": ("delta", _FLOAT),
    },
}
REQUIRED = ("scheme", "root_seed", "n", "d", "T_p", "T_c", "b", "lam", "xi")


@dataclass
class ExperimentConfig:
    scheme: str
    n: int
    d: int
    T_p: float
    T_c: float
    b: int
    lam: float
    xi: float
    root_seed: int
    noise_var: float = 1e-3
    L: float = 0.0
    b_bar: float | None = None  # None: use the timing model's expectation
    step_tau: int | None = None  # None: derived from the scheme
    horizon_updates: int | None = None
    horizon_seconds: float | None = None
    replications: int = 1
    targets: tuple = (0.5, 0.35, 0.2)
    K: int | None = None
    b_tilde: int | None = None
    graph: str | None = None
    r: int | None = None  # None: min_consensus_rounds(n, J, delta, lambda2)
    t_round: float | None = None
    consensus: str = "gossip"
    J: float = 1.0
    C: float = 1.0
    sigma2: float = 1.0
    b_hat: float | None = None
    bound_T: int | None = None
    delta: float = 0.1
    source: str | None = field(default=None, compare=False)

    @property
    def timing(self) -> ShiftedExp:
        return ShiftedExp(self.lam, self.xi)

    @property
    def tau(self) -> int:
        """Staleness of the epoch-synchronous schemes, ceil(T_c / T_p)."""
        if self.scheme == "amb":
            return 0
        ratio = self.comm_time / self.T_p
        return int(math.ceil(ratio - 1e-9))

    @property
    def comm_time(self) -> float:
        if self.scheme == "decentralized" and self.r is not None and self.t_round is not None:
            return self.r * self.t_round
        return self.T_c

    def step_b_bar(self) -> float:
        if self.b_bar is not None:
            return self.b_bar
        if self.scheme == "kbatch_async":
            return float(self.b_tilde)
        return expected_epoch_batch(self.timing, self.n, self.b, self.T_p)

    def step_staleness(self) -> int:
        if self.step_tau is not None:
            return self.step_tau
        if self.scheme == "kbatch_async":
            # expected number of updates during one round trip
            batch_time = (self.b_tilde / self.K) * self.timing.mean / self.b
            return int(math.ceil(self.T_c * self.n / (self.K * batch_time) - 1e-9))
        return self.tau

    def with_(self, **changes) -> "ExperimentConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def problems(self) -> list[tuple[str, str]]:
        """All invariant violations as (field, message) pairs."""
        out = []
        if self.scheme not in SCHEMES:
            out.append(("scheme", f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}"))
        for name in ("n", "d", "b", "replications"):
            if getattr(self, name) < 1:
                out.append((name, "must be >= 1"))
        for name in ("T_p", "lam"):
            if not getattr(self, name) > 0:
                out.append((name, "must be positive"))
        for name in ("T_c", "xi", "noise_var", "L", "J", "C", "sigma2"):
            if getattr(self, name) < 0:
                out.append((name, "must be nonnegative"))
        if self.b_bar is not None and not self.b_bar > 0:
            out.append(("b_bar", "must be positive"))
        if self.horizon_updates is None and self.horizon_seconds is None:
            out.append(("horizon_updates", "one of horizon_updates / horizon_seconds is required"))
        if self.horizon_updates is not None and self.horizon_updates < 1:
            out.append(("horizon_updates", "must be >= 1"))
        if self.horizon_seconds is not None and not self.horizon_seconds > 0:
            out.append(("horizon_seconds", "must be positive"))
        if not 0 <= self.root_seed < 2**64:
            out.append(("root_seed", "must be an unsigned 64-bit integer"))
        if self.scheme in ("ambdg", "amb") and self.T_p > 0:
            ratio = self.T_c / self.T_p
            if abs(ratio - round(ratio)) > 1e-9:
                out.append(("T_c", f"T_c={self.T_c} is not an integer multiple of T_p={self.T_p}"))
        if self.scheme == "kbatch_async":
            if self.K is None or self.K < 1:
                out.append(("K", "kbatch_async needs K >= 1"))
            if self.b_tilde is None or self.b_tilde < 1:
                out.append(("b_tilde", "kbatch_async needs b_tilde >= 1"))
            elif self.K and self.b_tilde % self.K:
                out.append(("K", f"K={self.K} does not divide b_tilde={self.b_tilde}"))
        if self.scheme == "decentralized":
            if self.graph is None:
                out.append(("graph", "decentralized needs a graph file"))
            if self.t_round is None or not self.t_round > 0:
                out.append(("t_round", "decentralized needs t_round > 0"))
            if self.r is not None and self.r < 1:
                out.append(("r", "must be >= 1"))
            if self.consensus not in ("gossip", "exact"):
                out.append(("consensus", "must be 'gossip' or 'exact'"))
            if not self.delta > 0:
                out.append(("delta", "must be positive"))
        return out

    def validate(self) -> "ExperimentConfig":
        probs = self.problems()
        if probs:
            raise ConfigError("; ".join(f"{k}: {m}" for k, m in probs))
        return self


def _parse_number(text: str):
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def _convert(raw: str, kind: str):
    if kind == _STR:
        return raw
    if kind.startswith("auto_"):
        if raw.lower() == "auto":
            return None
        kind = kind[5:]
    if kind == _INT:
        value = _parse_number(raw)
        if value != int(value):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(raw) if raw.strip().lstrip("-").isdigit() else int(value)
    if kind == _FLOAT:
        return _parse_number(raw)
    if kind == "floats":
        return tuple(_parse_number(x) for x in raw.split(",") if x.strip())
    raise AssertionError(kind)


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    values, lines = {}, {}
    errors, bad = [], set()
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                errors.append(f"{source}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            errors.append(f"{source}:{lineno}: expected 'key = value'")
            continue
        key, raw = (s.strip() for s in line.split("=", 1))
        if section is None:
            errors.append(f"{source}:{lineno}: key {key!r} outside any section")
            continue
        spec = SECTIONS.get(section, {}).get(key)
        if spec is None:
            errors.append(f"{source}:{lineno}: unknown key {key!r} in [{section}]")
            continue
        attr, kind = spec
        if attr in values:
            errors.append(f"{source}:{lineno}: duplicate key {key!r} (first on line {lines[attr]})")
            continue
        try:
            values[attr] = _convert(raw, kind)
        except (ValueError, ZeroDivisionError) as exc:
            errors.append(f"{source}:{lineno}: {key}: {exc}")
            bad.add(attr)
            continue
        lines[attr] = lineno
    for attr in REQUIRED:
        if attr not in values and attr not in bad:
            errors.append(f"{source}: missing required field {attr!r}")
    if errors:
        raise ConfigError("\n".join(errors))
    cfg = ExperimentConfig(**values, source=source)
    probs = cfg.problems()
    if probs:
        msgs = []
        for attr, msg in probs:
            where = f"{source}:{lines[attr]}" if attr in lines else source
            msgs.append(f"{where}: {attr}: {msg}")
        raise ConfigError("\n".join(msgs))
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))
