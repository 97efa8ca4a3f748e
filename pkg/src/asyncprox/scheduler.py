"""Update-set and read-index sequences driving the asynchronous iteration.

A schedule decides, for every iteration index p, which blocks update
(the update set J(p)) and which past iterate each block argument is read
from (the read indices s_i(p), with delay p - s_i(p)).  Two hypotheses
make such a schedule valid for convergence:

* h0 -- full synchronous steps (all blocks updated from fresh reads)
  recur without bound; realized here by a forced sync every
  ``sync_period`` iterations of the random kind.
* h1 -- every delay is bounded: p - s_bound <= s_i(p) <= p.

Three kinds are provided.  ``jacobi`` updates every block from fresh
reads each step; ``gauss_seidel`` updates the single block p mod
n_blocks from fresh reads (as in the classical sweep, it never emits a
full-sync step for more than one block, so it fails the strict h0 check
by construction -- validate() flags this rather than altering the
schedule); ``random`` draws nonempty update subsets and bounded delays
from a counter-based generator, so steps are a pure function of
(config, p) and can be queried concurrently or replayed exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

__all__ = ["Schedule", "ScheduleStep", "ValidationReport",
           "jacobi", "gauss_seidel", "random_bounded_delay", "KINDS"]

KINDS = ("jacobi", "gauss_seidel", "random")


@dataclass(frozen=True)
class ScheduleStep:
    """One iteration's update set and per-block read indices."""

    p: int
    update_set: tuple[int, ...]
    reads: tuple[int, ...]
    is_sync: bool = field(init=False)

    def __post_init__(self):
        if len(self.update_set) == 0:
            raise ParameterError("update set must be nonempty")
        n_blocks = len(self.reads)
        sync = len(self.update_set) == n_blocks and all(s == self.p for s in self.reads)
        object.__setattr__(self, "is_sync", sync)

    def delays(self) -> tuple[int, ...]:
        return tuple(self.p - s for s in self.reads)


@dataclass(frozen=True)
class Schedule:
    """Deterministic generator of schedule steps.

    ``step(p)`` is a pure function of the configuration and p; equal
    configurations produce identical step streams.
    """

    kind: str
    n_blocks: int
    s_bound: int = 0
    sync_period: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown schedule kind {self.kind!r}; expected one of {KINDS}")
        if self.n_blocks < 1:
            raise ParameterError("n_blocks must be at least 1")
        if self.s_bound < 0:
            raise ParameterError("s_bound must be nonnegative")
        if self.sync_period < 1:
            raise ParameterError("sync_period must be positive")
        if self.kind in ("jacobi", "gauss_seidel") and self.s_bound != 0:
            raise ParameterError(f"{self.kind} schedules have no delays; s_bound must be 0")

    def step(self, p: int) -> ScheduleStep:
        if p < 0:
            raise ParameterError("iteration index must be nonnegative")
        if self.kind == "jacobi":
            return ScheduleStep(p, tuple(range(self.n_blocks)), (p,) * self.n_blocks)
        if self.kind == "gauss_seidel":
            return ScheduleStep(p, (p % self.n_blocks,), (p,) * self.n_blocks)
        # random kind: forced full sync at multiples of sync_period
        if p % self.sync_period == 0:
            return ScheduleStep(p, tuple(range(self.n_blocks)), (p,) * self.n_blocks)
        rng = np.random.default_rng((self.seed, p))
        while True:
            mask = rng.random(self.n_blocks) < 0.5
            if mask.any():
                break
        delays = rng.integers(0, min(self.s_bound, p) + 1, size=self.n_blocks)
        reads = tuple(int(p - d) for d in delays)
        return ScheduleStep(p, tuple(int(i) for i in np.flatnonzero(mask)), reads)

    def validate(self, horizon: int) -> "ValidationReport":
        """Enumerate steps over [0, horizon) and check h0/h1 empirically."""
        if horizon < 1:
            raise ParameterError("horizon must be at least 1")
        max_delay = 0
        sync_positions = []
        for p in range(horizon):
            s = self.step(p)
            max_delay = max(max_delay, max(s.delays()))
            if s.is_sync:
                sync_positions.append(p)
        if self.kind == "jacobi":
            h0 = len(sync_positions) == horizon
        elif self.kind == "gauss_seidel":
            h0 = self.n_blocks == 1
        else:
            h0 = len(sync_positions) >= horizon // self.sync_period
        return ValidationReport(
            kind=self.kind,
            horizon=horizon,
            s_bound=self.s_bound,
            max_delay=max_delay,
            sync_count=len(sync_positions),
            sync_positions=tuple(sync_positions),
            h0_pass=h0,
            h1_pass=max_delay <= self.s_bound,
        )


@dataclass(frozen=True)
class ValidationReport:
    """Observed delay and synchronization statistics over a finite horizon."""

    kind: str
    horizon: int
    s_bound: int
    max_delay: int
    sync_count: int
    sync_positions: tuple[int, ...]
    h0_pass: bool
    h1_pass: bool

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "horizon": self.horizon,
            "s_bound": self.s_bound,
            "max_delay": self.max_delay,
            "sync_count": self.sync_count,
            "sync_positions": list(self.sync_positions),
            "h0_pass": self.h0_pass,
            "h1_pass": self.h1_pass,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def jacobi(n_blocks: int) -> Schedule:
    """All blocks update from fresh reads every step."""
    return Schedule(kind="jacobi", n_blocks=n_blocks)


def gauss_seidel(n_blocks: int) -> Schedule:
    """Cyclic single-block updates from fresh reads."""
    return Schedule(kind="gauss_seidel", n_blocks=n_blocks)


def random_bounded_delay(n_blocks: int, s_bound: int, sync_period: int,
                         seed: int = 0) -> Schedule:
    """Random nonempty update sets with delays bounded by s_bound."""
    return Schedule(kind="random", n_blocks=n_blocks, s_bound=s_bound,
                    sync_period=sync_period, seed=seed)
