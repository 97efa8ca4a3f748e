"""Sampling-based verification of the convergence hypotheses.

The convergence theory for the delayed block iteration rests on two
properties of the fixed-point map F, checked here by randomized
falsification (these are tests, not proofs):

* h3 -- nonexpansiveness in the uniform norm:
  ||F(x) - F(x')||_inf <= ||x - x'||_inf;
* h4 -- firm nonexpansiveness in the Euclidean norm:
  ||F(x) - F(x')||^2 <= <F(x) - F(x'), x - x'>.

Resolvents of maximal monotone operators satisfy h4 for every c > 0,
and satisfy h3 once c >= min_c; metric projections satisfy h4; a linear
map satisfies h4 whenever it is symmetric, positive and nonexpansive,
which ``check_linear_h4`` verifies stage by stage.

All checkers are deterministic given their seed, and checkers invoked
with the same (samples, radius, seed, center) draw identical sample
sets, so their witnesses are directly comparable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .block_space import BlockStructure, BlockVector, uniform_norm
from .errors import ParameterError
from .operators import Problem, Resolvent, apply_operator
from .trace import Trace

__all__ = [
    "HypothesisReport",
    "TraceStats",
    "check_h3",
    "check_h4",
    "check_linear_h4",
    "estimate_modulus",
    "estimate_modulus_report",
    "analyze_trace",
]

# base absolute slack; inequality checks scale it by (1 + |lhs| + |rhs|)
SLACK = 1e-10

MODULUS_SLACK = 1e-8


@dataclass
class HypothesisReport:
    """Worst observed violation of a hypothesis over a sample set.

    ``worst_violation`` is the raw left-minus-right of the defining
    inequality maximized over samples (<= 0 means the inequality held on
    every sample); ``passed`` additionally allows the documented
    roundoff slack.  ``witness`` is the sample achieving the worst
    violation.
    """

    hypothesis: str
    samples: int
    worst_violation: float
    witness: tuple[np.ndarray, ...] | None
    passed: bool
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis,
            "samples": self.samples,
            "worst_violation": self.worst_violation,
            "witness": None if self.witness is None else [w.tolist() for w in self.witness],
            "passed": self.passed,
            "details": dict(self.details),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def _resolve_mapping(mapping, structure):
    if isinstance(mapping, Resolvent):
        if structure is None:
            structure = mapping.problem.structure
        return (lambda arr: mapping.evaluate(arr).data), structure
    if structure is None:
        raise ParameterError("a block structure is required for a plain callable mapping")
    return (lambda arr: np.asarray(mapping(arr), dtype=np.float64).ravel()), structure


def _ball_samples(rng, n: int, radius: float, center: np.ndarray, count: int):
    """Uniform draws from the Euclidean ball of the given radius."""
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / n)
    return center + g * r[:, None]


def _pair_check(mapping, structure, samples, radius, seed, center, violation_fn, name):
    if samples < 1:
        raise ParameterError("samples must be at least 1")
    f, structure = _resolve_mapping(mapping, structure)
    n = structure.dim
    c = np.zeros(n) if center is None else np.asarray(center, dtype=np.float64).ravel()
    rng = np.random.default_rng(seed)
    pts = _ball_samples(rng, n, radius, c, 2 * samples)
    worst = -math.inf
    worst_pair = None
    passed = True
    for k in range(samples):
        x, xp = pts[2 * k], pts[2 * k + 1]
        violation, lhs, rhs = violation_fn(f, structure, x, xp)
        if violation > SLACK * (1.0 + abs(lhs) + abs(rhs)):
            passed = False
        if violation > worst:
            worst = violation
            worst_pair = (x.copy(), xp.copy())
    return HypothesisReport(
        hypothesis=name,
        samples=samples,
        worst_violation=worst,
        witness=worst_pair,
        passed=passed,
    )


def _h3_violation(f, structure, x, xp):
    d_in = uniform_norm(BlockVector(structure, x - xp))
    d_out = uniform_norm(BlockVector(structure, f(x) - f(xp)))
    return d_out - d_in, d_out, d_in


def _h4_violation(f, structure, x, xp):
    df = f(x) - f(xp)
    lhs = float(df @ df)
    rhs = float(df @ (x - xp))
    return lhs - rhs, lhs, rhs


def check_h3(mapping, samples: int = 200, radius: float = 10.0, seed: int = 0,
             structure: BlockStructure | None = None, center=None) -> HypothesisReport:
    """Max-norm nonexpansiveness check on sampled pairs in a ball.

    ``mapping`` is a Resolvent or any callable on flat arrays.  Sampling
    is centered at ``center`` (pass the known solution when available)
    or at the origin.
    """
    return _pair_check(mapping, structure, samples, radius, seed, center,
                       _h3_violation, "h3")


def check_h4(mapping, samples: int = 200, radius: float = 10.0, seed: int = 0,
             structure: BlockStructure | None = None, center=None) -> HypothesisReport:
    """Firm nonexpansiveness check on sampled pairs in a ball.

    Uses the same sample set as ``check_h3`` for equal arguments.
    """
    return _pair_check(mapping, structure, samples, radius, seed, center,
                       _h4_violation, "h4")


def check_linear_h4(A, samples: int = 200, seed: int = 0,
                    radius: float = 10.0) -> HypothesisReport:
    """Stage-wise check that a linear map is symmetric, positive,
    nonexpansive, and firmly nonexpansive.

    The per-stage violations are reported in ``details`` (symmetry and
    nonexpansiveness are matrix-level; positivity and the firm
    nonexpansiveness inequality <Ax,x> >= ||Ax||^2 are sampled).
    """
    if samples < 1:
        raise ParameterError("samples must be at least 1")
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    sym_violation = float(np.abs(A - A.T).max())
    nonexp_violation = float(np.linalg.norm(A, 2) - 1.0)
    rng = np.random.default_rng(seed)
    pts = _ball_samples(rng, n, radius, np.zeros(n), samples)
    pos_worst = -math.inf
    h4_worst = -math.inf
    witness = None
    for x in pts:
        ax = A @ x
        quad = float(ax @ x)
        pos_worst = max(pos_worst, -quad)
        h4_violation = float(ax @ ax) - quad
        if h4_violation > h4_worst:
            h4_worst = h4_violation
            witness = (x.copy(),)
    details = {
        "symmetry": sym_violation,
        "positivity": pos_worst,
        "nonexpansive": nonexp_violation,
        "h4": h4_worst,
    }
    worst = max(details.values())
    return HypothesisReport(
        hypothesis="linear_h4",
        samples=samples,
        worst_violation=worst,
        witness=witness,
        passed=all(v <= SLACK for v in details.values()),
        details=details,
    )


def _modulus_samples(problem: Problem, rng, count: int, radius: float):
    n = problem.dim
    if problem.box is not None:
        lo, hi = problem.box
        margin = 1e-6 * (hi - lo)
        return rng.uniform(lo + margin, hi - margin, size=(count, n))
    return _ball_samples(rng, n, radius, np.zeros(n), count)


def estimate_modulus(problem: Problem, samples: int = 200, seed: int = 0,
                     radius: float = 10.0) -> float:
    """Sampled lower bound on the strong monotonicity modulus.

    Minimum over sampled pairs of <T(u) - T(v), u - v> / ||u - v||^2,
    drawn from the box interior for constrained variants (where the
    normal cone does not contribute) and from a ball otherwise.  The
    result cannot fall below the eigenvalue-derived modulus by more than
    roundoff, which makes it an independent check on the stored value.
    """
    if samples < 2:
        raise ParameterError("samples must be at least 2")
    return estimate_modulus_report(problem, samples, seed, radius).details["estimate"]


def estimate_modulus_report(problem: Problem, samples: int = 200, seed: int = 0,
                            radius: float = 10.0) -> HypothesisReport:
    """As ``estimate_modulus``, but returning the full report."""
    rng = np.random.default_rng(seed)
    pts = _modulus_samples(problem, rng, 2 * samples, radius)
    best = math.inf
    witness = None
    for k in range(samples):
        u, v = pts[2 * k], pts[2 * k + 1]
        d = u - v
        nd2 = float(d @ d)
        if nd2 < 1e-24:
            continue
        tu = apply_operator(problem, u).value.data
        tv = apply_operator(problem, v).value.data
        ratio = float((tu - tv) @ d) / nd2
        if ratio < best:
            best = ratio
            witness = (u.copy(), v.copy())
    violation = (problem.modulus - MODULUS_SLACK) - best
    return HypothesisReport(
        hypothesis="strong_monotonicity",
        samples=samples,
        worst_violation=violation,
        witness=witness,
        passed=violation <= 0.0,
        details={"estimate": best, "stored_modulus": problem.modulus},
    )


@dataclass
class TraceStats:
    """Summary analytics of a run trace."""

    n_records: int
    z_monotone: bool | None
    z_max_increase: float | None
    rate: float | None
    note: str
    decade_iterations: dict[int, int]

    def to_json_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "z_monotone": self.z_monotone,
            "z_max_increase": self.z_max_increase,
            "rate": self.rate,
            "note": self.note,
            "decade_iterations": {str(k): v for k, v in self.decade_iterations.items()},
        }


def analyze_trace(trace: Trace, z_slack_scale: float = 1e-12) -> TraceStats:
    """Monotonicity verdict for z_p, a linear rate fit, and decade times.

    The z_p column, when present, is checked to be nonincreasing up to
    ``z_slack_scale * (1 + z_0)`` per step.  The rate is the
    least-squares slope of log residuals against the iteration index
    (about log of the per-step contraction factor for a synchronous
    run); it is undefined for traces that start at a fixed point or
    carry fewer than two positive residuals.
    """
    if len(trace) == 0:
        raise ParameterError("trace is empty")
    z = trace.z_values()
    z_monotone = None
    z_max_increase = None
    if z is not None:
        increments = np.diff(z)
        z_max_increase = float(increments.max()) if increments.size else 0.0
        z_monotone = bool(z_max_increase <= z_slack_scale * (1.0 + z[0]))

    ps = trace.iterations().astype(np.float64)
    res = trace.residuals()
    positive = res > 0.0
    rate = None
    note = ""
    if positive.sum() < 2:
        note = "rate undefined: fewer than two positive residuals"
    elif np.ptp(res[positive]) == 0.0:
        note = "rate undefined: residual constant over the trace"
    else:
        slope = np.polyfit(ps[positive], np.log(res[positive]), 1)[0]
        rate = float(slope)

    decades: dict[int, int] = {}
    r0 = res[0]
    if r0 > 0.0:
        for k in range(1, 13):
            hit = np.flatnonzero(res <= r0 * 10.0 ** (-k))
            if hit.size:
                decades[k] = int(ps[hit[0]])
    return TraceStats(
        n_records=len(trace),
        z_monotone=z_monotone,
        z_max_increase=z_max_increase,
        rate=rate,
        note=note,
        decade_iterations=decades,
    )
