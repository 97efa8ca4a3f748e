"""Independent reference solvers and solution certificates for tests.

Everything here is deliberately separate from the solver's own code
paths: direct dense solves where a closed form exists, and for the
box-constrained variants a self-contained proximal-point loop (with its
own conservative parameter c = 10/a and its own projected inner
iteration) followed by an active-set refinement of the stationarity
system.  Cross-checking engine output against these routines is the
main acceptance mechanism.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .block_space import BlockVector
from .errors import ConvergenceError, DomainError, ParameterError
from .operators import (
    AffineMonotone,
    BoxVI,
    Problem,
    QuadraticMin,
    SaddleQuadratic,
)

__all__ = ["solve_direct", "saddle_check", "vi_check", "CheckVerdict"]

VERTEX_ENUM_MAX_DIM = 12


@dataclass(frozen=True)
class CheckVerdict:
    """Outcome of a sampled solution certificate."""

    passed: bool
    worst_violation: float
    vacuous: bool = False
    method: str = ""


def solve_direct(problem: Problem) -> BlockVector:
    """Reference solution of 0 in T(x), computed without the solver stack."""
    if problem.dim > 500:
        raise ParameterError("direct oracle is limited to dimension 500")
    if isinstance(problem, AffineMonotone):
        x = np.linalg.solve(problem.A, problem.b)
    elif isinstance(problem, QuadraticMin) and problem.box is None:
        x = np.linalg.solve(problem.Q, problem.q)
    elif isinstance(problem, QuadraticMin):
        x = _box_stationary_point(problem.Q, problem.q, problem.lower, problem.upper)
    elif isinstance(problem, BoxVI):
        x = _box_stationary_point(problem.A, problem.b, problem.lower, problem.upper)
    elif isinstance(problem, SaddleQuadratic):
        kkt = np.block([[problem.P, problem.K.T], [-problem.K, problem.R]])
        x = np.linalg.solve(kkt, np.concatenate([-problem.p, -problem.q]))
    else:
        raise TypeError(f"unknown problem variant {type(problem).__name__}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("direct solve produced non-finite values")
    return BlockVector(problem.structure, x)


def _natural_residual(G, h, lower, upper, y) -> float:
    return float(np.abs(y - np.clip(y - (G @ y - h), lower, upper)).max())


def _box_stationary_point(G, h, lower, upper, tol: float = 1e-13) -> np.ndarray:
    """Solve 0 in G y - h + N_box(y) by a proximal-point loop of its own.

    Outer loop: x_{k+1} solves x_k + c h in (I + cG) x + N_box(x) with
    the conservative c = 10/a, so the outer error contracts by
    1/(1 + c a) = 1/11 per step.  Each inclusion is solved by a damped
    projected iteration with the provably safe step mu/|M|^2.  A final
    active-set solve of the stationarity system sharpens the result to
    machine precision when its sign conditions verify.
    """
    n = h.size
    a = float(np.linalg.eigvalsh(0.5 * (G + G.T))[0])
    if a <= 0.0:
        raise ParameterError("oracle requires a positive strong monotonicity modulus")
    c = 10.0 / a
    M = np.eye(n) + c * G
    mu = 1.0 + c * a
    rho = float(np.linalg.norm(M, 2))
    step = mu / (rho * rho)

    y = np.clip(np.zeros(n), lower, upper)
    for _ in range(400):
        rhs = y + c * h
        z = y.copy()
        for _ in range(100_000):
            z_next = np.clip(z - step * (M @ z - rhs), lower, upper)
            if np.abs(z_next - z).max() <= 1e-16 * (1.0 + np.abs(z).max()):
                z = z_next
                break
            z = z_next
        y = z
        if _natural_residual(G, h, lower, upper, y) <= tol:
            break
    else:
        raise ConvergenceError(
            "oracle proximal-point loop stalled",
            residual=_natural_residual(G, h, lower, upper, y),
        )

    refined = _refine_active_set(G, h, lower, upper, y)
    if refined is not None and (
        _natural_residual(G, h, lower, upper, refined)
        <= _natural_residual(G, h, lower, upper, y)
    ):
        return refined
    return y


def _refine_active_set(G, h, lower, upper, y):
    """Exact stationarity solve on the active set identified by y."""
    act_tol = 1e-7 * (1.0 + np.maximum(np.abs(lower), np.abs(upper)))
    at_lo = y <= lower + act_tol
    at_hi = y >= upper - act_tol
    clamped = at_lo | at_hi
    free = ~clamped
    x = np.where(at_hi, upper, np.where(at_lo, lower, 0.0))
    if free.any():
        try:
            xf = np.linalg.solve(
                G[np.ix_(free, free)],
                h[free] - (G[np.ix_(free, clamped)] @ x[clamped] if clamped.any() else 0.0),
            )
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(xf)):
            return None
        slack = 1e-9 * (1.0 + np.abs(xf))
        if np.any(xf < lower[free] - slack) or np.any(xf > upper[free] + slack):
            return None
        x[free] = xf
    # multiplier signs: G x - h must point out of the box on clamped faces
    s = G @ x - h
    sign_tol = 1e-9 * (1.0 + np.abs(s))
    if np.any(s[at_hi] > sign_tol[at_hi]) or np.any(s[at_lo] < -sign_tol[at_lo]):
        return None
    return x


def saddle_check(problem: SaddleQuadratic, x, y, probes: int = 100, seed: int = 0,
                 radius: float = 1.0, slack: float = 1e-9) -> CheckVerdict:
    """Probe the saddle inequalities L(x, y+d) <= L(x, y) <= L(x+d, y).

    Probes are random directions of magnitude up to ``radius``.  Zero
    probes yield a vacuous pass, flagged as such.
    """
    if probes == 0:
        return CheckVerdict(passed=True, worst_violation=-math.inf, vacuous=True,
                            method="no probes")
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    base = problem.lagrangian(x, y)
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(probes):
        dx = rng.standard_normal(problem.n_primal)
        dx *= radius * rng.random() / np.linalg.norm(dx)
        dy = rng.standard_normal(problem.m_dual)
        dy *= radius * rng.random() / np.linalg.norm(dy)
        # x side must not go below base, y side must not go above
        worst = max(worst, base - problem.lagrangian(x + dx, y))
        worst = max(worst, problem.lagrangian(x, y + dy) - base)
    return CheckVerdict(passed=worst <= slack, worst_violation=worst,
                        method=f"{probes} random probes")


def vi_check(A, b, lower, upper, x, samples: int = 1000, seed: int = 0,
             slack: float = 1e-9) -> CheckVerdict:
    """Check <Ax - b, v - x> >= 0 over the box.

    The test point must lie in the box.  For dimension <= 12 the check
    enumerates all box vertices, which is exact because the product is
    linear in v; otherwise it samples points of the box.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).ravel()
    lower = np.asarray(lower, dtype=np.float64).ravel()
    upper = np.asarray(upper, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.size
    tol = 1e-12 * (1.0 + np.maximum(np.abs(lower), np.abs(upper)))
    if np.any(x < lower - tol) or np.any(x > upper + tol):
        raise DomainError("test point lies outside the box")
    g = A @ x - b
    worst = -math.inf
    if n <= VERTEX_ENUM_MAX_DIM:
        for corner in itertools.product(*zip(lower, upper)):
            worst = max(worst, -float(g @ (np.asarray(corner) - x)))
        method = f"all {2 ** n} vertices"
    else:
        rng = np.random.default_rng(seed)
        pts = rng.uniform(lower, upper, size=(samples, n))
        worst = float((-(pts - x) @ g).max())
        method = f"{samples} sampled points"
    return CheckVerdict(passed=worst <= slack, worst_violation=worst, method=method)
