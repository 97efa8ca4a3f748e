"""Strongly monotone problem catalog and the resolvent fixed-point map.

Each problem names a maximal strongly monotone operator T with modulus
``a > 0``; the solver iterates the resolvent ``F = (I + cT)^{-1}``,
whose fixed points are exactly the solutions of ``0 in T(x)``.  The
resolvent of an a-strongly monotone operator contracts with factor
``1/(1 + a*c)`` in the Euclidean norm, and is nonexpansive in the
uniform (max-over-blocks) norm once ``c >= (sqrt(n_blocks) - 1)/a``,
which is the parameter rule ``min_c`` implements.

Supported operators:

* ``AffineMonotone``   -- T(x) = A x - b with positive-definite symmetric part
* ``QuadraticMin``     -- T = subgradient of 0.5 x'Qx - q'x, optionally box-constrained
* ``SaddleQuadratic``  -- T = (grad_x L, -grad_y L) of a quadratic convex-concave L
* ``BoxVI``            -- T = A(.) - b + normal cone of a box
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .block_space import BlockStructure, BlockVector
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    DomainError,
    NumericError,
    ParameterError,
)

__all__ = [
    "Problem",
    "AffineMonotone",
    "QuadraticMin",
    "SaddleQuadratic",
    "BoxVI",
    "Resolvent",
    "OperatorValue",
    "FaceActivity",
    "min_c",
    "auto_c",
    "C_FLOOR",
    "apply_operator",
    "solution_residual",
    "proj_box",
    "proj_ball",
]

SYMMETRY_TOL = 1e-10

# Floor for the automatic c rule: with a single block min_c is 0, which
# would make the resolvent the identity and stall the iteration.
C_FLOOR = 1e-3


# ---------------------------------------------------------------------------
# small linear-algebra helpers

def _as_matrix(M, name: str) -> np.ndarray:
    A = np.array(M, dtype=np.float64, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError(f"{name} must be a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ParameterError(f"{name} contains non-finite entries")
    return A

def _as_vector(v, n: int, name: str) -> np.ndarray:
    a = np.array(v, dtype=np.float64, copy=True).ravel()
    if a.size != n:
        raise DimensionMismatchError(f"{name} must have length {n}, got {a.size}")
    if not np.all(np.isfinite(a)):
        raise ParameterError(f"{name} contains non-finite entries")
    return a

def _check_symmetric(M: np.ndarray, name: str) -> np.ndarray:
    skew = np.abs(M - M.T).max() if M.size else 0.0
    if skew > SYMMETRY_TOL:
        raise ParameterError(f"{name} is not symmetric (max |M - M^T| = {skew:.3e})")
    return 0.5 * (M + M.T)

def _min_eig_sym(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(M)[0])

def _spd_min_eig(M: np.ndarray, name: str) -> float:
    lam = _min_eig_sym(M)
    if lam <= 0.0:
        raise ParameterError(f"{name} must be positive definite (min eigenvalue {lam:.3e})")
    return lam

def _check_box(lower, upper, n: int):
    lo = _as_vector(lower, n, "lower")
    hi = _as_vector(upper, n, "upper")
    if np.any(lo > hi):
        j = int(np.argmax(lo > hi))
        raise ParameterError(f"box has lower[{j}] = {lo[j]} > upper[{j}] = {hi[j]}")
    return lo, hi

def _spectral_norm_estimate(M: np.ndarray, iters: int = 50) -> float:
    """Largest singular value of M by alternating power iteration."""
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        sigma = max(sigma, nw)
        v = M.T @ w
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return sigma
        v /= nv
    return sigma


def proj_box(x, lower, upper) -> np.ndarray:
    """Metric projection onto the box [lower, upper] (componentwise clamp)."""
    return np.clip(np.asarray(x, dtype=np.float64), lower, upper)


def proj_ball(x, radius: float, center=None) -> np.ndarray:
    """Metric projection onto the Euclidean ball of the given radius."""
    x = np.asarray(x, dtype=np.float64)
    if radius < 0:
        raise ParameterError(f"ball radius must be nonnegative, got {radius}")
    c = np.zeros_like(x) if center is None else np.asarray(center, dtype=np.float64)
    d = x - c
    nd = np.linalg.norm(d)
    if nd <= radius:
        return x.copy()
    return c + d * (radius / nd)


# ---------------------------------------------------------------------------
# parameter rule

def min_c(a: float, n_blocks: int) -> float:
    """Smallest c making the resolvent max-norm nonexpansive: (sqrt(n_blocks)-1)/a."""
    if a <= 0.0:
        raise ParameterError(f"strong monotonicity modulus must be positive, got {a}")
    if n_blocks < 1:
        raise ParameterError(f"n_blocks must be at least 1, got {n_blocks}")
    return (math.sqrt(n_blocks) - 1.0) / a


def auto_c(a: float, n_blocks: int) -> float:
    """Default c: the min_c threshold floored at C_FLOOR so it is never zero."""
    return max(min_c(a, n_blocks), C_FLOOR)


# ---------------------------------------------------------------------------
# problem catalog

class Problem:
    """Base class: a maximal strongly monotone operator with known modulus.

    Subclasses compute ``modulus`` (the strong monotonicity constant a)
    from their matrices at construction; an explicit positive override
    is accepted for externally supplied problems.  Instances are
    immutable after construction and safe to share across threads.
    """

    variant: str = "abstract"

    def __init__(self, structure: BlockStructure, computed_modulus: float,
                 modulus_override: float | None = None):
        modulus = computed_modulus if modulus_override is None else float(modulus_override)
        if modulus <= 0.0:
            raise ParameterError(f"modulus must be positive, got {modulus}")
        self.structure = structure
        self.modulus = float(modulus)
        self.modulus_override = modulus_override

    @property
    def dim(self) -> int:
        return self.structure.dim

    def system_matrix(self) -> np.ndarray:
        """The dense matrix defining the linear part of the operator."""
        raise NotImplementedError

    def _resolve_structure(self, structure, dim: int) -> BlockStructure:
        if structure is None:
            return BlockStructure((dim,))
        if structure.dim != dim:
            raise DimensionMismatchError(
                f"block structure covers {structure.dim} coordinates, problem has {dim}"
            )
        return structure

    @property
    def box(self):
        """(lower, upper) arrays for box-constrained variants, else None."""
        return None


class AffineMonotone(Problem):
    """T(x) = A x - b with A + A^T positive definite."""

    variant = "affine"

    def __init__(self, A, b, structure: BlockStructure | None = None,
                 modulus_override: float | None = None):
        A = _as_matrix(A, "A")
        n = A.shape[0]
        b = _as_vector(b, n, "b")
        a = _spd_min_eig(0.5 * (A + A.T), "symmetric part of A")
        super().__init__(self._resolve_structure(structure, n), a, modulus_override)
        self.A = A
        self.b = b

    def system_matrix(self) -> np.ndarray:
        return self.A.copy()


class QuadraticMin(Problem):
    """Minimization of 0.5 x'Qx - q'x, optionally over a box.

    Q must be symmetric positive definite; the operator is the
    (sub)gradient Q x - q plus, when a box is given, the normal cone of
    the box.
    """

    variant = "quadratic"

    def __init__(self, Q, q, lower=None, upper=None,
                 structure: BlockStructure | None = None,
                 modulus_override: float | None = None):
        Q = _check_symmetric(_as_matrix(Q, "Q"), "Q")
        n = Q.shape[0]
        q = _as_vector(q, n, "q")
        a = _spd_min_eig(Q, "Q")
        super().__init__(self._resolve_structure(structure, n), a, modulus_override)
        self.Q = Q
        self.q = q
        if (lower is None) != (upper is None):
            raise ParameterError("box needs both lower and upper bounds")
        if lower is not None:
            self.lower, self.upper = _check_box(lower, upper, n)
        else:
            self.lower = self.upper = None

    @property
    def box(self):
        if self.lower is None:
            return None
        return self.lower, self.upper

    def system_matrix(self) -> np.ndarray:
        return self.Q.copy()


class SaddleQuadratic(Problem):
    """Quadratic convex-concave saddle problem.

    L(x, y) = 0.5 x'Px + y'Kx - 0.5 y'Ry + p'x - q'y with P, R symmetric
    positive definite.  The operator pairs the x-gradient with the
    negated y-gradient:

        T(x, y) = (P x + K' y + p,  R y - K x + q)

    so its zeros are the saddle points of L.  The iteration state is the
    concatenated vector (x, y) of length n + m.
    """

    variant = "saddle"

    def __init__(self, P, R, K, p, q, structure: BlockStructure | None = None,
                 modulus_override: float | None = None):
        P = _check_symmetric(_as_matrix(P, "P"), "P")
        R = _check_symmetric(_as_matrix(R, "R"), "R")
        n = P.shape[0]
        m = R.shape[0]
        K = np.array(K, dtype=np.float64, copy=True)
        if K.shape != (m, n):
            raise DimensionMismatchError(f"K must have shape ({m}, {n}), got {K.shape}")
        p = _as_vector(p, n, "p")
        q = _as_vector(q, m, "q")
        a = min(_spd_min_eig(P, "P"), _spd_min_eig(R, "R"))
        super().__init__(self._resolve_structure(structure, n + m), a, modulus_override)
        self.P = P
        self.R = R
        self.K = K
        self.p = p
        self.q = q
        self.n_primal = n
        self.m_dual = m

    def split(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Split a concatenated point into its (x, y) parts."""
        z = np.asarray(z, dtype=np.float64)
        return z[: self.n_primal], z[self.n_primal:]

    def lagrangian(self, x, y) -> float:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return float(
            0.5 * x @ (self.P @ x) + y @ (self.K @ x) - 0.5 * y @ (self.R @ y)
            + self.p @ x - self.q @ y
        )

    def system_matrix(self) -> np.ndarray:
        return np.block([[self.P, self.K.T], [-self.K, self.R]])


class BoxVI(Problem):
    """Variational inequality over a box: T = A(.) - b + normal cone.

    A + A^T must be positive definite and the box bounds finite.  The
    operator is only defined on the box; ``apply_operator`` raises
    ``DomainError`` outside it.
    """

    variant = "box_vi"

    def __init__(self, A, b, lower, upper, structure: BlockStructure | None = None,
                 modulus_override: float | None = None):
        A = _as_matrix(A, "A")
        n = A.shape[0]
        b = _as_vector(b, n, "b")
        lo, hi = _check_box(lower, upper, n)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ParameterError("box bounds must be finite")
        a = _spd_min_eig(0.5 * (A + A.T), "symmetric part of A")
        super().__init__(self._resolve_structure(structure, n), a, modulus_override)
        self.A = A
        self.b = b
        self.lower = lo
        self.upper = hi

    @property
    def box(self):
        return self.lower, self.upper

    def system_matrix(self) -> np.ndarray:
        return self.A.copy()


# ---------------------------------------------------------------------------
# operator evaluation and residuals

@dataclass(frozen=True)
class FaceActivity:
    """Which coordinates of a point sit on the box faces."""

    at_lower: np.ndarray
    at_upper: np.ndarray

    @property
    def free(self) -> np.ndarray:
        return ~(self.at_lower | self.at_upper)


@dataclass(frozen=True)
class OperatorValue:
    """Single-valued part of T(x), with face activity for box variants.

    For box-constrained problems the multivalued normal-cone part is
    summarized by the activity pattern, which together with the value is
    enough to verify 0 in T(x) a posteriori.
    """

    value: BlockVector
    activity: FaceActivity | None = None


def _face_activity(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> FaceActivity:
    tol = 1e-10 * (1.0 + np.maximum(np.abs(lower), np.abs(upper)))
    return FaceActivity(at_lower=x <= lower + tol, at_upper=x >= upper - tol)


def _coerce_point(problem: Problem, x) -> np.ndarray:
    if isinstance(x, BlockVector):
        if x.structure != problem.structure:
            raise DimensionMismatchError(
                f"point structure {x.structure} does not match problem structure "
                f"{problem.structure}"
            )
        return x.to_array()
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size != problem.dim:
        raise DimensionMismatchError(
            f"point has length {arr.size}, problem dimension is {problem.dim}"
        )
    return arr.copy()


def _smooth_part(problem: Problem, x: np.ndarray) -> np.ndarray:
    if isinstance(problem, AffineMonotone):
        return problem.A @ x - problem.b
    if isinstance(problem, QuadraticMin):
        return problem.Q @ x - problem.q
    if isinstance(problem, SaddleQuadratic):
        u, v = problem.split(x)
        gx = problem.P @ u + problem.K.T @ v + problem.p
        gy = problem.R @ v - problem.K @ u + problem.q
        return np.concatenate([gx, gy])
    if isinstance(problem, BoxVI):
        return problem.A @ x - problem.b
    raise TypeError(f"unknown problem variant {type(problem).__name__}")


def apply_operator(problem: Problem, x) -> OperatorValue:
    """Evaluate the single-valued part of T at x.

    For ``BoxVI`` the point must lie in the box (the operator is empty
    outside its domain); the returned activity pattern identifies the
    faces where the normal cone may contribute.
    """
    arr = _coerce_point(problem, x)
    if isinstance(problem, BoxVI):
        tol = 1e-10 * (1.0 + np.maximum(np.abs(problem.lower), np.abs(problem.upper)))
        if np.any(arr < problem.lower - tol) or np.any(arr > problem.upper + tol):
            raise DomainError("point lies outside the box; T(x) is empty there")
    value = BlockVector(problem.structure, _smooth_part(problem, arr))
    activity = None
    if problem.box is not None:
        lo, hi = problem.box
        activity = _face_activity(arr, lo, hi)
    return OperatorValue(value=value, activity=activity)


def solution_residual(problem: Problem, x) -> float:
    """Computable certificate of 0 in T(x); zero exactly at solutions.

    Unconstrained variants report ||T(x)||; box-constrained variants the
    natural-map residual ||x - proj_box(x - (smooth part))||.
    """
    arr = _coerce_point(problem, x)
    g = _smooth_part(problem, arr)
    if problem.box is None:
        return float(np.linalg.norm(g))
    lo, hi = problem.box
    return float(np.linalg.norm(arr - np.clip(arr - g, lo, hi)))


# ---------------------------------------------------------------------------
# resolvent

def _projected_affine_solve(M, rhs, lower, upper, start, step, tol, max_iter):
    """Solve rhs in M y + N_box(y) by projected iteration with active-set polish.

    The base iteration y <- proj(y - step*(M y - rhs)) converges for any
    step below the contraction threshold of the strongly monotone affine
    map.  Whenever the active face pattern repeats, the reduced linear
    system on the free coordinates is solved exactly and accepted if it
    satisfies the sign conditions, which makes the result exact to
    machine precision away from degenerate faces.

    Returns (y, natural_map_residual).
    """
    y = np.clip(start, lower, upper)
    n = y.size
    act_tol = 1e-9 * (1.0 + np.maximum(np.abs(lower), np.abs(upper)))
    prev_pattern = None
    failed_patterns: set[bytes] = set()
    residual = math.inf

    for k in range(max_iter):
        g = M @ y - rhs
        residual = float(np.abs(y - np.clip(y - g, lower, upper)).max())
        if residual <= tol:
            return y, residual

        at_lo = y <= lower + act_tol
        at_hi = y >= upper - act_tol
        pattern = np.concatenate([at_lo, at_hi]).tobytes()
        if pattern == prev_pattern and pattern not in failed_patterns:
            polished = _polish_active_set(M, rhs, lower, upper, at_lo, at_hi)
            if polished is not None:
                r = float(np.abs(polished - np.clip(polished - (M @ polished - rhs),
                                                    lower, upper)).max())
                if r <= tol:
                    return polished, r
            failed_patterns.add(pattern)
        prev_pattern = pattern

        y = np.clip(y - step * g, lower, upper)

    raise ConvergenceError(
        f"projected inner solver did not reach tol={tol:g} in {max_iter} iterations "
        f"(last residual {residual:g})",
        residual=residual,
        iteration=max_iter,
    )


def _polish_active_set(M, rhs, lower, upper, at_lo, at_hi):
    """Exact solve on a candidate active set; None if the pattern is invalid."""
    clamped = at_lo | at_hi
    free = ~clamped
    y = np.where(at_hi, upper, np.where(at_lo, lower, 0.0))
    if free.any():
        Mff = M[np.ix_(free, free)]
        r = rhs[free] - M[np.ix_(free, clamped)] @ y[clamped] if clamped.any() else rhs[free]
        try:
            yf = np.linalg.solve(Mff, r)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(yf)):
            return None
        slack = 1e-12 * (1.0 + np.abs(yf))
        if np.any(yf < lower[free] - slack) or np.any(yf > upper[free] + slack):
            return None
        y[free] = yf
    # sign conditions: rhs - M y must point into the normal cone on clamped faces
    s = rhs - M @ y
    sign_tol = 1e-10 * (1.0 + np.abs(s))
    if np.any(s[at_hi] < -sign_tol[at_hi]) or np.any(s[at_lo] > sign_tol[at_lo]):
        return None
    return y


class Resolvent:
    """The single-valued map F = (I + cT)^{-1} for a catalog problem.

    Pure function of its inputs once constructed (factorizations are
    precomputed), so it is safe to evaluate concurrently from many
    threads.  Instances are callable: ``y = F(x)``.
    """

    def __init__(self, problem: Problem, c: float,
                 inner_tol: float = 1e-12, inner_max_iter: int | None = None):
        if c <= 0.0:
            raise ParameterError(f"c must be positive, got {c}")
        if inner_tol <= 0.0:
            raise ParameterError(f"inner_tol must be positive, got {inner_tol}")
        self.problem = problem
        self.c = float(c)
        self.inner_tol = float(inner_tol)
        self.inner_max_iter = (
            int(inner_max_iter) if inner_max_iter is not None else 100 * problem.dim
        )
        if self.inner_max_iter < 1:
            raise ParameterError("inner_max_iter must be at least 1")
        self._prepare()

    @classmethod
    def with_auto_c(cls, problem: Problem, **kwargs) -> "Resolvent":
        """Resolvent with c = max(min_c(a, n_blocks), C_FLOOR)."""
        return cls(problem, auto_c(problem.modulus, problem.structure.n_blocks), **kwargs)

    @property
    def contraction_factor(self) -> float:
        """Euclidean-norm Lipschitz constant 1/(1 + a*c), in (0, 1)."""
        return 1.0 / (1.0 + self.problem.modulus * self.c)

    def _prepare(self):
        p, c = self.problem, self.c
        self._kind = None
        if isinstance(p, AffineMonotone):
            self._kind = "linear"
            self._lu = scipy.linalg.lu_factor(np.eye(p.dim) + c * p.A)
            self._shift = c * p.b
        elif isinstance(p, QuadraticMin) and p.box is None:
            self._kind = "linear"
            self._lu = scipy.linalg.lu_factor(np.eye(p.dim) + c * p.Q)
            self._shift = c * p.q
        elif isinstance(p, SaddleQuadratic):
            self._kind = "linear"
            n, m = p.n_primal, p.m_dual
            M = np.block([
                [np.eye(n) + c * p.P, c * p.K.T],
                [-c * p.K, np.eye(m) + c * p.R],
            ])
            self._lu = scipy.linalg.lu_factor(M)
            self._shift = np.concatenate([-c * p.p, -c * p.q])
        elif isinstance(p, QuadraticMin):
            M = np.eye(p.dim) + c * p.Q
            if np.count_nonzero(p.Q - np.diag(np.diag(p.Q))) == 0:
                self._kind = "box_diag"
                self._diag = np.diag(M)
                self._shift = c * p.q
            else:
                self._kind = "box_general"
                self._M = M
                self._shift = c * p.q
                # gradient of the inner objective is M-Lipschitz; classic safe step
                lam_max = _spectral_norm_estimate(p.Q)
                self._step = 1.0 / (1.0 + c * lam_max)
        elif isinstance(p, BoxVI):
            M = np.eye(p.dim) + c * p.A
            if np.count_nonzero(p.A - np.diag(np.diag(p.A))) == 0:
                self._kind = "box_diag"
                self._diag = np.diag(M)
                self._shift = c * p.b
            else:
                self._kind = "box_general"
                self._M = M
                self._shift = c * p.b
                # strongly monotone affine map: step mu/|M|^2 guarantees the
                # projected iteration contracts even for skew-dominated A
                mu = 1.0 + c * p.modulus
                rho = 1.02 * _spectral_norm_estimate(M)
                self._step = mu / (rho * rho)
        else:
            raise TypeError(f"unknown problem variant {type(p).__name__}")

    def evaluate(self, x) -> BlockVector:
        """The unique y with x in y + c T(y)."""
        p = self.problem
        arr = _coerce_point(p, x)
        rhs = arr + self._shift
        if self._kind == "linear":
            y = scipy.linalg.lu_solve(self._lu, rhs)
            if not np.all(np.isfinite(y)):
                raise NumericError("resolvent linear solve produced non-finite values")
        elif self._kind == "box_diag":
            lo, hi = p.box
            y = np.clip(rhs / self._diag, lo, hi)
        else:
            lo, hi = p.box
            y, _ = _projected_affine_solve(
                self._M, rhs, lo, hi,
                start=np.clip(arr, lo, hi),
                step=self._step,
                tol=self.inner_tol,
                max_iter=self.inner_max_iter,
            )
        return BlockVector(p.structure, y)

    __call__ = evaluate
