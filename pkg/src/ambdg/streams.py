"""Splittable random streams.

Every draw in a replication comes from a generator keyed by
(replication, kind, worker, index) under one root seed, using numpy's
SeedSequence spawn keys. Data and timing realizations are therefore
independent of each other and of the order in which events are processed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GROUND_TRUTH = 0
TIMING = 1
DATA = 2
SCRATCH = 3


@dataclass(frozen=True)
class Streams:
    root_seed: int
    replication: int = 0

    def rng(self, kind: int, worker: int = 0, index: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.root_seed, spawn_key=(self.replication, kind, worker, index)
        )
        return np.random.Generator(np.random.PCG64(ss))

    def timing(self, worker: int, index: int) -> np.random.Generator:
        return self.rng(TIMING, worker, index)

    def data(self, worker: int, index: int) -> np.random.Generator:
        return self.rng(DATA, worker, index)

    def ground_truth(self) -> np.random.Generator:
        # shared by all replications of one experiment
        ss = np.random.SeedSequence(entropy=self.root_seed, spawn_key=(GROUND_TRUTH,))
        return np.random.Generator(np.random.PCG64(ss))

    def for_replication(self, replication: int) -> "Streams":
        return Streams(self.root_seed, replication)
