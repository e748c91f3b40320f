"""Matrix-ratio fractional programming: matrix QT, nonhomogeneous QT, extrapolated QT and the matrix LDT."""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from fractrans.core.errors import (
    DomainError,
    InnerSolverFailure,
    InvalidProblem,
    ShapeMismatch,
    SingularDenominator,
    UnsupportedSet,
)
from fractrans.modules.inner import project
from fractrans.modules.problem import (
    ConstraintSet,
    SetKind,
    Solution,
    SolverConfig,
    SolverTrace,
    TraceStatus,
)

logger = logging.getLogger(__name__)

# Hermitian denominators with a smaller eigenvalue are rejected.
PD_THRESHOLD = 1e-10


class MatrixVariant(StrEnum):
    """Iteration schemes of the matrix-ratio driver."""

    BASIC = "basic"
    NONHOMOGENEOUS = "nonhomogeneous"
    EXTRAPOLATED = "extrapolated"


def check_positive_definite(B: np.ndarray, index: int = 0) -> None:
    """Raise SingularDenominator unless the Hermitian matrix B is positive definite."""
    smallest = float(np.min(np.linalg.eigvalsh(B)))
    if not smallest > PD_THRESHOLD:
        raise SingularDenominator(f"denominator {index} has smallest eigenvalue {smallest:.3e}")


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    """Hermitian square root of a PSD matrix, small negative eigenvalues are clamped to zero."""
    vals, vecs = np.linalg.eigh(A)
    if np.any(vals < -1e-10):
        raise DomainError(f"matrix is not positive semidefinite, smallest eigenvalue {float(np.min(vals)):.3e}")
    return (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.conj().T


class MatrixRatioProblem(ABC):
    """Weighted sum of matrix ratios Tr(sqrtA_i^H B_i^-1 sqrtA_i)."""

    weights: np.ndarray

    @abstractmethod
    def sqrt_a(self, x: Any) -> List[np.ndarray]:
        """Numerator factors, one matrix per term."""

    @abstractmethod
    def denominators(self, x: Any) -> List[np.ndarray]:
        """Hermitian positive definite denominators, one per term."""

    def ratio_matrices(self, x: Any) -> List[np.ndarray]:
        """sqrtA_i^H B_i^-1 sqrtA_i for every term."""
        out = []
        for i, (sa, b) in enumerate(zip(self.sqrt_a(x), self.denominators(x))):
            check_positive_definite(b, i)
            out.append(sa.conj().T @ np.linalg.solve(b, sa))
        return out

    def objective(self, x: Any) -> float:
        """Exact weighted sum of the traces."""
        return float(sum(w * np.real(np.trace(m)) for w, m in zip(self.weights, self.ratio_matrices(x))))


@dataclass(eq=False)
class CallableMatrixRatio(MatrixRatioProblem):
    """Matrix ratios given by callables; either the numerator factor or the numerator itself is supplied."""

    b: Any
    """x -> list of denominators"""
    sqrt_a_fn: Any = None
    """x -> list of numerator factors"""
    a_fn: Any = None
    """x -> list of PSD numerators, factored with `psd_sqrt`"""
    weights: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self) -> None:
        """Require exactly one numerator description."""
        if (self.sqrt_a_fn is None) == (self.a_fn is None):
            raise InvalidProblem("give either sqrt_a_fn or a_fn")
        self.weights = np.asarray(self.weights, dtype=float)

    def sqrt_a(self, x: Any) -> List[np.ndarray]:
        """Numerator factors."""
        if self.sqrt_a_fn is not None:
            return [np.atleast_2d(m) for m in self.sqrt_a_fn(x)]
        return [psd_sqrt(np.atleast_2d(m)) for m in self.a_fn(x)]

    def denominators(self, x: Any) -> List[np.ndarray]:
        """Denominators."""
        return [np.atleast_2d(m) for m in self.b(x)]


class StructuredMatrixRatio(MatrixRatioProblem):
    """Ratios (A_i x_i)^H (N_i + sum_j B_ij x_j x_j^H B_ij^H)^-1 (A_i x_i) over vector blocks x_i.

    The variable is a complex array of shape (n, m) whose row i is block x_i.
    """

    def __init__(
        self,
        A: np.ndarray,
        B: np.ndarray,
        noise: Optional[np.ndarray] = None,
        weights: Optional[Sequence[float]] = None,
        constraints: ConstraintSet | Sequence[ConstraintSet] | None = None,
    ) -> None:
        """Build from A of shape (n, l, m), B of shape (n, n, l, m) and optional noise of shape (n, l, l)."""
        self.A = np.asarray(A, dtype=complex)
        self.B = np.asarray(B, dtype=complex)
        if self.A.ndim != 3:
            raise ShapeMismatch(f"A must have shape (n, l, m), got {self.A.shape}")
        n, ell, m = self.A.shape
        if self.B.shape != (n, n, ell, m):
            raise ShapeMismatch(f"B must have shape {(n, n, ell, m)}, got {self.B.shape}")
        self.noise = np.zeros((n, ell, ell), dtype=complex) if noise is None else np.asarray(noise, dtype=complex)
        if self.noise.shape != (n, ell, ell):
            raise ShapeMismatch(f"noise must have shape {(n, ell, ell)}, got {self.noise.shape}")
        self.weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        if self.weights.shape != (n,) or np.any(self.weights <= 0):
            raise InvalidProblem("one positive weight per block is required")
        if constraints is None:
            constraints = ConstraintSet.unconstrained()
        if isinstance(constraints, ConstraintSet):
            constraints = [constraints] * n
        if len(constraints) != n:
            raise InvalidProblem(f"{len(constraints)} constraint sets for {n} blocks")
        self.constraints: Tuple[ConstraintSet, ...] = tuple(constraints)

    @property
    def shape(self) -> Tuple[int, int]:
        """(blocks, block length)."""
        return self.A.shape[0], self.A.shape[2]

    def _check_x(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape != self.shape:
            raise ShapeMismatch(f"x must have shape {self.shape}, got {x.shape}")
        return x

    def sqrt_a(self, x: np.ndarray) -> List[np.ndarray]:
        """Columns A_i x_i."""
        x = self._check_x(x)
        return [(self.A[i] @ x[i])[:, None] for i in range(x.shape[0])]

    def denominators(self, x: np.ndarray) -> List[np.ndarray]:
        """N_i + sum_j (B_ij x_j)(B_ij x_j)^H."""
        x = self._check_x(x)
        out = []
        for i in range(x.shape[0]):
            v = np.einsum("jlm,jm->jl", self.B[i], x)
            out.append(self.noise[i] + v.T @ v.conj())
        return out

    def project(self, x: np.ndarray) -> np.ndarray:
        """Blockwise projection onto the constraint sets."""
        return np.stack([project(c, xi) for c, xi in zip(self.constraints, np.asarray(x, dtype=complex))])

    def aux(self, x: np.ndarray) -> List[np.ndarray]:
        """Optimal y_i = F_i^-1 A_i x_i as vectors."""
        return [y[:, 0] for y in matrix_qt_aux_update(self, x)]

    def d_matrices(self, Y: Sequence[np.ndarray]) -> List[np.ndarray]:
        """D_i = sum_j w_j B_ji^H y_j y_j^H B_ji."""
        n = self.shape[0]
        out = []
        for i in range(n):
            u = np.stack([self.B[j, i].conj().T @ Y[j] for j in range(n)])
            out.append((u.T * self.weights) @ u.conj())
        return out

    def gradient(self, x: np.ndarray, Y: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
        """Conjugate gradient w_i A_i^H y_i - D_i x_i of the objective, with y at x unless given."""
        x = self._check_x(x)
        Y = self.aux(x) if Y is None else Y
        D = self.d_matrices(Y)
        return np.stack(
            [self.weights[i] * self.A[i].conj().T @ Y[i] - D[i] @ x[i] for i in range(x.shape[0])]
        )


def matrix_qt_aux_update(problem: MatrixRatioProblem, x: Any) -> List[np.ndarray]:
    """Optimal auxiliaries Y_i = B_i^-1 sqrtA_i."""
    out = []
    for i, (sa, b) in enumerate(zip(problem.sqrt_a(x), problem.denominators(x))):
        check_positive_definite(b, i)
        out.append(np.linalg.solve(b, sa))
    return out


def matrix_qt_surrogate(problem: MatrixRatioProblem, x: Any, Y: Sequence[np.ndarray]) -> float:
    """Sum of w_i Re Tr(sqrtA^H Y + Y^H sqrtA - Y^H B Y)."""
    factors = problem.sqrt_a(x)
    dens = problem.denominators(x)
    if len(Y) != len(factors):
        raise ShapeMismatch(f"{len(Y)} auxiliaries for {len(factors)} terms")
    total = 0.0
    for w, sa, b, y in zip(problem.weights, factors, dens, Y):
        y = np.asarray(y)
        if y.ndim == 1:
            y = y[:, None]
        if y.shape != sa.shape:
            raise ShapeMismatch(f"auxiliary of shape {y.shape} for a factor of shape {sa.shape}")
        total += w * float(np.real(np.trace(2.0 * sa.conj().T @ y - y.conj().T @ b @ y)))
    return total


def lambda_bound(D: np.ndarray) -> float:
    """Frobenius norm, an upper bound on the largest eigenvalue of a Hermitian PSD matrix."""
    return float(np.linalg.norm(D, "fro"))


def nonhomogeneous_x_update(
    problem: StructuredMatrixRatio, Y: Sequence[np.ndarray], z: np.ndarray, lam: Sequence[float]
) -> np.ndarray:
    """Blockwise x_i = P(z_i + (w_i A_i^H y_i - D_i z_i) / lambda_i)."""
    z = np.asarray(z, dtype=complex)
    D = problem.d_matrices(Y)
    out = []
    for i in range(z.shape[0]):
        step = problem.weights[i] * problem.A[i].conj().T @ Y[i] - D[i] @ z[i]
        out.append(project(problem.constraints[i], z[i] + step / lam[i]))
    return np.stack(out)


def nonhomogeneous_surrogate(
    problem: StructuredMatrixRatio, x: np.ndarray, Y: Sequence[np.ndarray], z: np.ndarray, lam: Sequence[float]
) -> float:
    """Lower bound f_t(x, Y, z) of the matrix QT surrogate, tight at z = x."""
    x = np.asarray(x, dtype=complex)
    z = np.asarray(z, dtype=complex)
    D = problem.d_matrices(Y)
    total = 0.0
    for i in range(x.shape[0]):
        w, y = problem.weights[i], Y[i]
        linear = 2.0 * w * float(np.real(np.vdot(problem.A[i] @ x[i], y)))
        noise = w * float(np.real(np.vdot(y, problem.noise[i] @ y)))
        gap = x[i] - z[i]
        quad = float(np.real(np.vdot(x[i], D[i] @ x[i])))
        slack = lam[i] * float(np.real(np.vdot(gap, gap))) - float(np.real(np.vdot(gap, D[i] @ gap)))
        total += linear - noise - quad - slack
    return total


def ball_quadratic_max(D: np.ndarray, b: np.ndarray, cset: ConstraintSet) -> np.ndarray:
    """Maximize 2 Re(x^H b) - x^H D x over a ball or the whole space."""
    if cset.kind not in (SetKind.BALL, SetKind.UNCONSTRAINED) or cset.free_tail:
        raise UnsupportedSet(f"basic matrix QT x-update does not support {cset.kind}")
    if cset.center is not None and np.any(cset.center != 0):
        raise UnsupportedSet("basic matrix QT x-update needs a ball centered at the origin")
    d, U = np.linalg.eigh(D)
    d = np.maximum(d, 0.0)
    c = U.conj().T @ b
    scale = max(float(d.max(initial=0.0)), 1.0)
    null = d <= 1e-12 * scale
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b)
    bounded = not np.any(np.abs(c[null]) > 1e-12 * b_norm)
    if bounded:
        x = U @ np.where(null, 0.0, c / np.where(null, 1.0, d))
        if cset.kind == SetKind.UNCONSTRAINED or np.linalg.norm(x) <= cset.radius:  # type: ignore[operator]
            return x
    if cset.kind == SetKind.UNCONSTRAINED:
        raise InnerSolverFailure("basic matrix QT x-update is unbounded without a constraint")
    r = float(cset.radius)  # type: ignore[arg-type]
    mag = np.abs(c) ** 2

    def excess(eta: float) -> float:
        return math.sqrt(float(np.sum(mag / (d + eta) ** 2))) - r

    lo = 1e-15 * scale
    hi = b_norm / r + lo
    eta = lo if excess(lo) <= 0.0 else brentq(excess, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    return project(cset, U @ (c / (d + eta)))


def basic_x_update(problem: StructuredMatrixRatio, Y: Sequence[np.ndarray]) -> np.ndarray:
    """Blockwise exact maximizer of the matrix QT surrogate for frozen Y."""
    D = problem.d_matrices(Y)
    out = []
    for i in range(problem.shape[0]):
        b = problem.weights[i] * problem.A[i].conj().T @ Y[i]
        out.append(ball_quadratic_max(D[i], b, problem.constraints[i]))
    return np.stack(out)


def extrapolation_weight(j: int) -> float:
    """Momentum weight max((j - 2) / (j + 1), 0)."""
    return max((j - 2) / (j + 1), 0.0)


def extrapolation_step(k: int, x_prev: np.ndarray, x_prev2: np.ndarray) -> np.ndarray:
    """Extrapolated point x_prev + eta_(k-1) (x_prev - x_prev2)."""
    if k < 1:
        raise InvalidProblem(f"extrapolation index must be at least 1, got {k}")
    return x_prev + extrapolation_weight(k - 1) * (x_prev - x_prev2)


def _aux_norm(Y: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(np.abs(y) ** 2)) for y in Y))


def solve_matrix_fp(
    problem: StructuredMatrixRatio,
    variant: MatrixVariant | str = MatrixVariant.BASIC,
    config: Optional[SolverConfig] = None,
    x0: Optional[np.ndarray] = None,
) -> Solution:
    """Maximize a weighted sum of structured matrix ratios.

    Every iteration refreshes Y at the current point and then updates x by
    the exact QT maximizer (basic), one gradient projection with step
    1/lambda_i (nonhomogeneous), or a gradient projection from the
    extrapolated point (extrapolated). The extrapolated variant always accepts
    its step and is not monotone.
    """
    if not isinstance(problem, StructuredMatrixRatio):
        raise InvalidProblem("solve_matrix_fp needs a structured matrix-ratio problem")
    variant = MatrixVariant(variant)
    config = config or SolverConfig()
    n, m = problem.shape
    x = problem.project(np.ones((n, m), dtype=complex) if x0 is None else np.asarray(x0, dtype=complex))
    value = problem.objective(x)
    trace = SolverTrace(maximize=True, monotone_required=variant != MatrixVariant.EXTRAPOLATED)
    trace.record(value, value, 0.0)
    x_prev2 = x.copy()

    for k in range(1, config.max_iters + 1):
        try:
            match variant:
                case MatrixVariant.BASIC:
                    Y = problem.aux(x)
                    x_new = basic_x_update(problem, Y)
                    surrogate = matrix_qt_surrogate(problem, x_new, Y)
                case MatrixVariant.NONHOMOGENEOUS:
                    Y = problem.aux(x)
                    lam = [lambda_bound(D) for D in problem.d_matrices(Y)]
                    x_new = nonhomogeneous_x_update(problem, Y, x, lam)
                    surrogate = nonhomogeneous_surrogate(problem, x_new, Y, x, lam)
                case MatrixVariant.EXTRAPOLATED:
                    nu = extrapolation_step(k, x, x_prev2)
                    Y = problem.aux(nu)
                    lam = [lambda_bound(D) for D in problem.d_matrices(Y)]
                    x_new = nonhomogeneous_x_update(problem, Y, nu, lam)
                    surrogate = nonhomogeneous_surrogate(problem, x_new, Y, nu, lam)
            value_new = problem.objective(x_new)
        except SingularDenominator as e:
            logger.warning("Matrix %s iteration stopped: %s", variant, e)
            trace.status = TraceStatus.DEGENERATE
            break
        x_prev2, x_prev, x = x, x, x_new
        trace.record(value_new, surrogate, _aux_norm(Y))
        trace.aux = Y
        done = config.converged(value, value_new, x_prev, x)
        value = value_new
        if done:
            trace.status = TraceStatus.CONVERGED
            break

    logger.debug("Matrix %s: %s after %d iterations, value %.10g", variant, trace.status, trace.iterations, value)
    return Solution(x, value, trace)


def matrix_ldt_gamma_update(problem: MatrixRatioProblem, x: Any) -> List[np.ndarray]:
    """Optimal Gamma_i = sqrtA^H B^-1 sqrtA."""
    return problem.ratio_matrices(x)


def matrix_ldt_objective(problem: MatrixRatioProblem, x: Any, Gamma: Sequence[np.ndarray]) -> float:
    """Sum of w [ln det(I + Gamma) - Tr Gamma + Tr((I + Gamma) sqrtA^H (sqrtA sqrtA^H + B)^-1 sqrtA)]."""
    total = 0.0
    for i, (w, sa, b, g) in enumerate(zip(problem.weights, problem.sqrt_a(x), problem.denominators(x), Gamma)):
        g = np.atleast_2d(g)
        eye = np.eye(g.shape[0])
        full = sa @ sa.conj().T + b
        check_positive_definite(full, i)
        sign, logdet = np.linalg.slogdet(eye + g)
        if np.real(sign) <= 0:
            raise DomainError(f"I + Gamma_{i} is not positive definite")
        inner = sa.conj().T @ np.linalg.solve(full, sa)
        total += w * (logdet - float(np.real(np.trace(g))) + float(np.real(np.trace((eye + g) @ inner))))
    return total


def logdet_objective(problem: MatrixRatioProblem, x: Any) -> float:
    """Sum of w ln det(I + sqrtA^H B^-1 sqrtA)."""
    total = 0.0
    for w, g in zip(problem.weights, problem.ratio_matrices(x)):
        _, logdet = np.linalg.slogdet(np.eye(g.shape[0]) + g)
        total += w * float(logdet)
    return total


def convergence_slope(values: Sequence[float], f_star: float, k_lo: int, k_hi: int, floor: float = 0.0) -> float:
    """Least-squares slope of log(f* - f_k) against log k over k in [k_lo, k_hi].

    Iterations whose error is at or below `floor` are left out of the fit.
    """
    values = np.asarray(values, dtype=float)
    k = np.arange(values.size)
    keep = (k >= k_lo) & (k <= k_hi) & (f_star - values > floor)
    if np.count_nonzero(keep) < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(k[keep]), np.log(f_star - values[keep]), 1)
    return float(slope)
