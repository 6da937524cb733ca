"""Fresh-seed Monte Carlo over samplers.

A trial is one sampler built with its own master seed. Rather than build each
trial's sampler with all of its repetitions, lanes ``(trial seed, rep)`` are
evaluated block by block for the trials still unresolved, and a trial's
answer is its lowest-indexed passing repetition. That is exactly what a
standalone sampler with that seed returns, at a fraction of the work.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .rng_hash import Tag, derive_seed
from .sampler import RepetitionBank

BankBuilder = Callable[[np.ndarray, np.ndarray], RepetitionBank]


def trial_seeds(base_seed: int, trials: int) -> np.ndarray:
    """Master seed of every trial, derived from one base seed."""
    return derive_seed(np.uint64(base_seed), Tag.TRIAL, np.arange(trials, dtype=np.uint64))


@dataclass
class TrialResults:
    """Per-trial outcome; ``index`` is 0 where every repetition failed."""

    index: np.ndarray
    estimate: np.ndarray
    lanes_used: int

    @property
    def accepted(self) -> np.ndarray:
        return self.index > 0

    def counts(self, domain: int) -> np.ndarray:
        """Histogram of accepted indices; entry ``c`` counts index ``c + 1``."""
        return np.bincount(self.index[self.accepted] - 1, minlength=domain)[:domain]


def first_successes(
    build: BankBuilder,
    seeds: np.ndarray,
    repetitions: int,
    *,
    block: int = 16,
    max_lanes: int = 2048,
) -> TrialResults:
    """Run every trial seed to its first passing repetition (or ``repetitions``).

    ``build(seeds, reps)`` must return a bank holding the sketch state of the
    lanes ``(seeds[l], reps[l])``.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    trials = seeds.shape[0]
    index = np.zeros(trials, dtype=np.int64)
    estimate = np.zeros(trials)
    done = np.zeros(trials, dtype=bool)
    start, used = 0, 0
    while start < repetitions and not done.all():
        k = min(block, repetitions - start, max_lanes)
        todo = np.flatnonzero(~done)
        per = max(1, max_lanes // k)
        for c in range(0, todo.size, per):
            who = todo[c : c + per]
            lane_seeds = np.repeat(seeds[who], k)
            lane_reps = np.tile(np.arange(start, start + k, dtype=np.uint64), who.size)
            out = build(lane_seeds, lane_reps).outcomes()
            used += lane_seeds.size
            passed = out.passed.reshape(who.size, k)
            hit = passed.any(axis=1)
            first = np.argmax(passed, axis=1)
            pos = np.arange(who.size) * k + first
            win = who[hit]
            index[win] = out.index[pos[hit]]
            estimate[win] = out.estimate[pos[hit]]
            done[win] = True
        start += k
        block *= 2
    return TrialResults(index, estimate, used)
