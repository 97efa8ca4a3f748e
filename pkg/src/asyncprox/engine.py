"""Execution engines for the asynchronous block fixed-point iteration.

Two engines share the same contracts:

* ``run_simulated`` -- a single-threaded simulator that replays any
  schedule exactly, keeping the trailing window of s_bound+1 iterates.
  Same inputs produce a bitwise-identical trace.
* ``run_parallel`` -- a shared-memory executor with one worker thread
  per block.  Workers read snapshots of the committed blocks, update
  their own block, and meet at a barrier every ``epoch_len`` local
  updates for a joint fully-fresh update of all blocks (realizing the
  recurring-synchronization hypothesis) and a stopping check.  Results
  are not bitwise reproducible across runs, but the convergence and
  staleness-audit contracts hold.

Both stop on the synchronous residual ||x - F(x)|| in the uniform norm,
which ties stopping to fixed points of the full map rather than to
stale per-block stationarity.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass

import numpy as np

from .block_space import BlockStructure, BlockVector
from .errors import DimensionMismatchError, ParameterError, StalenessError
from .operators import Resolvent
from .scheduler import Schedule, ScheduleStep
from .trace import Trace, TraceRecord

__all__ = [
    "IterationState",
    "RunConfig",
    "ParallelConfig",
    "RunResult",
    "run_simulated",
    "run_parallel",
    "assemble_read",
]

THREADS_ENV_VAR = "ASYNCPROX_THREADS"


@dataclass
class RunConfig:
    """Stopping rule and trace sampling for a run."""

    tol: float = 1e-8
    max_iter: int = 50_000
    record_every: int = 1
    reference: BlockVector | None = None

    def __post_init__(self):
        if self.tol < 0.0:
            raise ParameterError(f"tol must be nonnegative, got {self.tol}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.record_every < 1:
            raise ParameterError(f"record_every must be at least 1, got {self.record_every}")


@dataclass
class ParallelConfig:
    """Worker layout for the shared-memory engine.

    ``workers`` must equal the number of blocks (one worker owns each
    block); it defaults to that.  ``staleness_cap`` is the audited upper
    bound on how many commits a read may lag behind, enforced by the
    barrier cadence.
    """

    workers: int | None = None
    epoch_len: int = 16
    staleness_cap: int = 64

    def __post_init__(self):
        if self.epoch_len < 1:
            raise ParameterError(f"epoch_len must be at least 1, got {self.epoch_len}")
        if self.staleness_cap < 1:
            raise ParameterError(f"staleness_cap must be at least 1, got {self.staleness_cap}")


@dataclass
class RunResult:
    x_final: BlockVector
    iterations: int
    converged: bool
    final_residual: float
    trace: Trace
    max_staleness: int | None = None


class IterationState:
    """Ring buffer of the trailing s_bound+1 iterates of a simulated run."""

    def __init__(self, structure: BlockStructure, s_bound: int, x0):
        if s_bound < 0:
            raise ParameterError("s_bound must be nonnegative")
        self.structure = structure
        self.s_bound = s_bound
        self._buf = [None] * (s_bound + 1)
        self._p = 0
        self._buf[0] = np.asarray(x0, dtype=np.float64).copy()

    @property
    def p(self) -> int:
        """Index of the newest stored iterate."""
        return self._p

    @property
    def window(self) -> tuple[int, int]:
        """Inclusive range [oldest, newest] of retrievable iterate indices."""
        return max(0, self._p - self.s_bound), self._p

    def iterate_array(self, q: int) -> np.ndarray:
        lo, hi = self.window
        if not lo <= q <= hi:
            raise StalenessError(
                f"iterate {q} outside history window [{lo}, {hi}] (delay bound violated)"
            )
        return self._buf[q % (self.s_bound + 1)]

    def iterate(self, q: int) -> BlockVector:
        return BlockVector(self.structure, self.iterate_array(q))

    def push(self, x):
        self._p += 1
        self._buf[self._p % (self.s_bound + 1)] = np.asarray(x, dtype=np.float64).copy()


def assemble_read(state: IterationState, step: ScheduleStep) -> BlockVector:
    """Build the delayed argument vector (x_1^{s_1(p)}, ..., x_k^{s_k(p)})."""
    structure = state.structure
    if len(step.reads) != structure.n_blocks:
        raise DimensionMismatchError(
            f"step carries {len(step.reads)} read indices for {structure.n_blocks} blocks"
        )
    out = np.empty(structure.dim)
    for i, src in enumerate(step.reads):
        sl = structure.block_slice(i)
        out[sl] = state.iterate_array(src)[sl]
    return BlockVector(structure, out)


def _block_slices(structure: BlockStructure) -> list[slice]:
    return [structure.block_slice(i) for i in range(structure.n_blocks)]


def _uniform_norm_arr(arr: np.ndarray, slices: list[slice]) -> float:
    return max(float(np.linalg.norm(arr[sl])) for sl in slices)


def _z_value(state: IterationState, u: np.ndarray, slices: list[slice]) -> float:
    lo, hi = state.window
    return max(
        _uniform_norm_arr(state.iterate_array(q) - u, slices) for q in range(lo, hi + 1)
    )


def run_simulated(resolvent: Resolvent, x0: BlockVector, schedule: Schedule,
                  cfg: RunConfig, observer=None) -> RunResult:
    """Replay the delayed block iteration exactly, single-threaded.

    At step p the read vector is assembled from the history according to
    the schedule, the fixed-point map is evaluated there, and the blocks
    in the update set are replaced (others are copied forward).  The
    stopping residual is evaluated at sync steps and every
    ``record_every`` steps.  ``observer(p, x_p)``, when given, is called
    once per visited iteration index.
    """
    structure = resolvent.problem.structure
    if x0.structure != structure:
        raise DimensionMismatchError("x0 structure does not match the problem structure")
    if schedule.n_blocks != structure.n_blocks:
        raise DimensionMismatchError(
            f"schedule has {schedule.n_blocks} blocks, problem has {structure.n_blocks}"
        )
    slices = _block_slices(structure)
    u = cfg.reference.to_array() if cfg.reference is not None else None
    if u is not None and cfg.reference.structure != structure:
        raise DimensionMismatchError("reference structure does not match the problem")

    state = IterationState(structure, schedule.s_bound, x0.data)
    trace = Trace()
    t0 = time.perf_counter_ns()
    x = x0.to_array()
    p = 0
    converged = False
    final_residual = np.inf

    while True:
        step = schedule.step(p) if p < cfg.max_iter else None
        if observer is not None:
            observer(p, BlockVector(structure, x))
        if step is None or step.is_sync or p % cfg.record_every == 0:
            fx = resolvent.evaluate(x).data
            final_residual = _uniform_norm_arr(x - fx, slices)
            z = _z_value(state, u, slices) if u is not None else None
            err = _uniform_norm_arr(x - u, slices) if u is not None else None
            trace.append(TraceRecord(
                p=p,
                residual_inf=final_residual,
                z_p=z,
                err_inf=err,
                wall_ns=time.perf_counter_ns() - t0,
            ))
            if final_residual <= cfg.tol:
                converged = True
                break
        if step is None:
            break
        try:
            read = assemble_read(state, step)
            y = resolvent.evaluate(read).data
        except Exception as exc:
            exc.args = (f"at iteration {p}: {exc}",) + exc.args[1:]
            raise
        x_next = x.copy()
        for i in step.update_set:
            x_next[slices[i]] = y[slices[i]]
        state.push(x_next)
        x = x_next
        p += 1

    return RunResult(
        x_final=BlockVector(structure, x),
        iterations=p,
        converged=converged,
        final_residual=final_residual,
        trace=trace,
    )


class _SharedBlocks:
    """Committed block values with per-block commit counters."""

    def __init__(self, structure: BlockStructure, x0: np.ndarray, max_iter: int):
        self.lock = threading.Lock()
        self.slices = _block_slices(structure)
        self.blocks = [x0[sl].copy() for sl in self.slices]
        self.seqs = [0] * structure.n_blocks
        self.tickets = 0
        self.max_iter = max_iter
        self.max_lag = 0

    def take_ticket(self) -> bool:
        with self.lock:
            if self.tickets >= self.max_iter:
                return False
            self.tickets += 1
            return True

    def snapshot(self) -> tuple[np.ndarray, list[int]]:
        with self.lock:
            return np.concatenate(self.blocks), list(self.seqs)

    def commit_block(self, i: int, value: np.ndarray, snap_seqs: list[int],
                     staleness_cap: int):
        with self.lock:
            lag = max(s - s0 for s, s0 in zip(self.seqs, snap_seqs))
            if lag > staleness_cap:
                raise StalenessError(
                    f"read lag {lag} exceeds staleness cap {staleness_cap}"
                )
            self.max_lag = max(self.max_lag, lag)
            self.blocks[i] = value.copy()
            self.seqs[i] += 1

    def commit_all(self, value: np.ndarray):
        with self.lock:
            for i, sl in enumerate(self.slices):
                self.blocks[i] = value[sl].copy()
                self.seqs[i] += 1


def run_parallel(resolvent: Resolvent, x0: BlockVector, cfg: RunConfig,
                 par: ParallelConfig | None = None) -> RunResult:
    """Run with one worker thread per block and bounded audited staleness.

    Respects the ``ASYNCPROX_THREADS`` environment variable: if it is
    set below the block count the run is refused, since the executor
    needs exactly one worker per block.
    """
    par = par or ParallelConfig()
    structure = resolvent.problem.structure
    if x0.structure != structure:
        raise DimensionMismatchError("x0 structure does not match the problem structure")
    n_blocks = structure.n_blocks
    if par.workers is not None and par.workers != n_blocks:
        raise ParameterError(
            f"parallel engine needs one worker per block: workers={par.workers}, "
            f"blocks={n_blocks}"
        )
    env_cap = os.environ.get(THREADS_ENV_VAR)
    if env_cap is not None and int(env_cap) < n_blocks:
        raise ParameterError(
            f"{THREADS_ENV_VAR}={env_cap} caps workers below the {n_blocks} blocks needed"
        )
    slices = _block_slices(structure)
    u = cfg.reference.to_array() if cfg.reference is not None else None

    shared = _SharedBlocks(structure, x0.to_array(), cfg.max_iter)
    trace = Trace()
    t0 = time.perf_counter_ns()
    stop = threading.Event()
    outcome: dict = {"x": None, "converged": False, "residual": np.inf, "errors": []}

    def record(x: np.ndarray, residual: float):
        err = _uniform_norm_arr(x - u, slices) if u is not None else None
        trace.append(TraceRecord(
            p=shared.tickets,
            residual_inf=residual,
            z_p=None,
            err_inf=err,
            wall_ns=time.perf_counter_ns() - t0,
        ))

    # initial check: a fixed-point start needs no work at all
    x_init = x0.to_array()
    res0 = _uniform_norm_arr(x_init - resolvent.evaluate(x_init).data, slices)
    record(x_init, res0)
    if res0 <= cfg.tol:
        return RunResult(x0, 0, True, res0, trace, max_staleness=0)

    def sync_action():
        try:
            x, _ = shared.snapshot()
            fx = resolvent.evaluate(x).data
            residual = _uniform_norm_arr(x - fx, slices)
            record(x, residual)
            if residual <= cfg.tol:
                outcome.update(x=x, converged=True, residual=residual)
                stop.set()
            elif not shared.take_ticket():
                outcome.update(x=x, converged=False, residual=residual)
                stop.set()
            else:
                shared.commit_all(fx)
        except BaseException as exc:  # break the barrier so workers exit
            outcome["errors"].append(exc)
            stop.set()
            raise

    barrier = threading.Barrier(n_blocks, action=sync_action)

    def worker(i: int):
        try:
            while True:
                for _ in range(par.epoch_len):
                    if stop.is_set() or not shared.take_ticket():
                        break
                    snap, snap_seqs = shared.snapshot()
                    y = resolvent.evaluate(snap).data
                    shared.commit_block(i, y[slices[i]], snap_seqs, par.staleness_cap)
                barrier.wait()
                if stop.is_set():
                    return
        except threading.BrokenBarrierError:
            return
        except BaseException as exc:
            outcome["errors"].append(exc)
            stop.set()
            barrier.abort()

    threads = [threading.Thread(target=worker, args=(i,), name=f"asyncprox-block-{i}")
               for i in range(n_blocks)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    if outcome["errors"]:
        raise outcome["errors"][0]
    x_final = outcome["x"]
    if x_final is None:  # all paths set outcome before stopping; guard anyway
        x_final, _ = shared.snapshot()
    return RunResult(
        x_final=BlockVector(structure, x_final),
        iterations=shared.tickets,
        converged=outcome["converged"],
        final_residual=float(outcome["residual"]),
        trace=trace,
        max_staleness=shared.max_lag,
    )
