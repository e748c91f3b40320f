"""Scalar-ratio transforms: Dinkelbach, generalized Dinkelbach, QT, inverse QT, AM-GM and the unified QT."""

import logging
import math
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from fractrans.core.errors import DegenerateDenominator, DomainError, InnerSolverFailure, InvalidProblem
from fractrans.modules.inner import epigraph_maxmin_step, project, projected_gradient_max
from fractrans.modules.problem import (
    DEGENERACY_THRESHOLD,
    ConstraintSet,
    Curvature,
    FPProblem,
    Monotonicity,
    OuterFunction,
    ProblemKind,
    RatioSpec,
    Solution,
    SolverConfig,
    SolverTrace,
    TraceStatus,
    default_start,
    evaluate_objective,
    evaluate_ratios,
)

logger = logging.getLogger(__name__)

ScalarFn = Callable[[np.ndarray], float]
GradFn = Callable[[np.ndarray], np.ndarray]
InnerStep = Callable[[ScalarFn, GradFn, ConstraintSet, np.ndarray, SolverConfig], np.ndarray]
MaxMinStep = Callable[[Sequence[Tuple[ScalarFn, GradFn]], ConstraintSet, np.ndarray, SolverConfig], np.ndarray]


class TransformKind(StrEnum):
    """Scalar transforms of a ratio."""

    QT = "qt"
    INVERSE_QT = "inverse-qt"
    AM_GM = "am-gm"


@dataclass
class AuxiliaryState:
    """Auxiliary variables of the active transform."""

    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y_tilde: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dinkelbach_y: Optional[float] = None

    def norm(self) -> float:
        """Euclidean norm over every auxiliary variable."""
        total = float(np.sum(self.y**2) + np.sum(self.y_tilde**2) + np.sum(self.gamma**2))
        if self.dinkelbach_y is not None:
            total += self.dinkelbach_y**2
        return math.sqrt(total)


def pgd_step(f: ScalarFn, grad: GradFn, cset: ConstraintSet, x0: np.ndarray, config: SolverConfig) -> np.ndarray:
    """Default inner step: projected gradient ascent on the concave subproblem."""
    return projected_gradient_max(f, grad, cset, x0, config.inner_tol, config.inner_max_iters).x


def epigraph_step(
    terms: Sequence[Tuple[ScalarFn, GradFn]], cset: ConstraintSet, x0: np.ndarray, config: SolverConfig
) -> np.ndarray:
    """Default inner step of the generalized Dinkelbach method."""
    return epigraph_maxmin_step(terms, cset, x0, config.inner_tol, config.inner_max_iters)[0]


def update_auxiliaries(kind: TransformKind, A: Sequence[float], B: Sequence[float]) -> AuxiliaryState:
    """Closed-form optimal auxiliaries for frozen numerators and denominators.

    Args:
    ----
        kind: transform the auxiliaries belong to
        A: numerator values
        B: denominator values

    Returns
    -------
        AuxiliaryState with `y` (QT, AM-GM) or `y_tilde` (inverse QT) filled in

    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    match kind:
        case TransformKind.QT:
            if np.any(B < DEGENERACY_THRESHOLD) or np.any(A < -DEGENERACY_THRESHOLD):
                raise DegenerateDenominator(f"QT needs A >= 0 and B > 0, got A={A.tolist()} B={B.tolist()}")
            return AuxiliaryState(y=np.sqrt(np.maximum(A, 0.0)) / B)
        case TransformKind.INVERSE_QT:
            if np.any(A < DEGENERACY_THRESHOLD) or np.any(B < DEGENERACY_THRESHOLD):
                raise DegenerateDenominator(f"inverse QT needs A > 0 and B > 0, got A={A.tolist()} B={B.tolist()}")
            return AuxiliaryState(y_tilde=np.sqrt(B) / A)
        case TransformKind.AM_GM:
            if np.any(A < DEGENERACY_THRESHOLD) or np.any(B < DEGENERACY_THRESHOLD):
                raise DegenerateDenominator(f"AM-GM needs A > 0 and B > 0, got A={A.tolist()} B={B.tolist()}")
            return AuxiliaryState(y=1.0 / (2.0 * A * B))
    raise InvalidProblem(f"unknown transform {kind}")


def surrogate_value(
    kind: TransformKind, A: Sequence[float], B: Sequence[float], aux: AuxiliaryState, weights: Sequence[float]
) -> float:
    """Surrogate objective of a sum of ratios, in maximization form.

    QT bounds a sum-max objective from below. Inverse QT and AM-GM bound a
    sum-min objective from above and are returned negated. An inverse-QT
    bracket below the degeneracy threshold gives -inf.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    w = np.asarray(weights, dtype=float)
    match kind:
        case TransformKind.QT:
            y = aux.y
            return float(np.sum(w * (2.0 * y * np.sqrt(np.maximum(A, 0.0)) - y**2 * B)))
        case TransformKind.INVERSE_QT:
            yt = aux.y_tilde
            bracket = 2.0 * yt * np.sqrt(np.maximum(B, 0.0)) - yt**2 * A
            if np.any(bracket < DEGENERACY_THRESHOLD):
                return -math.inf
            return float(-np.sum(w / bracket))
        case TransformKind.AM_GM:
            y = aux.y
            return float(-np.sum(w * (y * A**2 + 1.0 / (4.0 * y * B**2))))
    raise InvalidProblem(f"unknown transform {kind}")


def _values(problem: FPProblem, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pairs = [r.values(x) for r in problem.ratios]
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def _warn_curvature(problem: FPProblem, expected: Curvature | Sequence[Curvature]) -> None:
    wanted = [expected] * len(problem.ratios) if isinstance(expected, Curvature) else list(expected)
    for i, (ratio, want) in enumerate(zip(problem.ratios, wanted)):
        if ratio.curvature != want:
            logger.warning("Ratio %d is tagged %s, %s is needed for a convergence guarantee", i, ratio.curvature, want)


def _start(problem: FPProblem, x0: Optional[np.ndarray]) -> np.ndarray:
    x = default_start(problem) if x0 is None else np.asarray(x0, dtype=float)
    return project(problem.constraint, x)


def dinkelbach_solve(
    problem: FPProblem,
    config: Optional[SolverConfig] = None,
    x0: Optional[np.ndarray] = None,
    inner: Optional[InnerStep] = None,
) -> Solution:
    """Maximize a single ratio by Dinkelbach's parametric iteration.

    Alternates x = argmax A(x) - y B(x) and y = A(x)/B(x). The trace records
    the y sequence, which is nondecreasing.
    """
    if problem.kind != ProblemKind.SINGLE:
        raise InvalidProblem(f"Dinkelbach's method needs a single ratio, got {problem.kind}")
    config = config or SolverConfig()
    inner = inner or pgd_step
    _warn_curvature(problem, Curvature.CONCAVE_CONVEX)
    ratio = problem.ratios[0]
    cset = problem.constraint

    x = _start(problem, x0)
    A, B = evaluate_ratios(problem, x)
    y = float(A[0] / B[0])
    trace = SolverTrace(maximize=True, aux=AuxiliaryState(dinkelbach_y=y))
    trace.record(y, 0.0, abs(y))

    for _ in range(config.max_iters):
        y_frozen = y

        def parametric(z: np.ndarray, y_frozen: float = y_frozen) -> float:
            a, b = ratio.values(z)
            return a - y_frozen * b

        def parametric_grad(z: np.ndarray, y_frozen: float = y_frozen) -> np.ndarray:
            ga, gb = ratio.gradients(z)
            return ga - y_frozen * gb

        x_new = inner(parametric, parametric_grad, cset, x, config)
        try:
            A, B = evaluate_ratios(problem, x_new)
        except DegenerateDenominator as e:
            logger.warning("Dinkelbach stopped: %s", e)
            trace.status = TraceStatus.DEGENERATE
            break
        y_new = float(A[0] / B[0])
        if y_new < y:
            # inexact inner step, keep the better point
            trace.status = TraceStatus.CONVERGED
            break
        surrogate = parametric(x_new)
        x_prev, x = x, x_new
        trace.record(y_new, surrogate, abs(y_new))
        trace.aux = AuxiliaryState(dinkelbach_y=y_new)
        done = config.converged(y, y_new, x_prev, x)
        y = y_new
        if done:
            trace.status = TraceStatus.CONVERGED
            break

    logger.debug("Dinkelbach: %s after %d iterations, value %.10g", trace.status, trace.iterations, y)
    return Solution(x, y, trace)


def maxmin_dinkelbach_solve(
    problem: FPProblem,
    config: Optional[SolverConfig] = None,
    x0: Optional[np.ndarray] = None,
    inner: Optional[MaxMinStep] = None,
) -> Solution:
    """Maximize the smallest ratio by the generalized Dinkelbach iteration.

    Each step solves max_x min_i A_i(x) - y B_i(x) through its epigraph form.
    """
    if problem.kind != ProblemKind.MAX_MIN:
        raise InvalidProblem(f"generalized Dinkelbach needs a max-min problem, got {problem.kind}")
    config = config or SolverConfig()
    inner = inner or epigraph_step
    _warn_curvature(problem, Curvature.CONCAVE_CONVEX)
    cset = problem.constraint

    x = _start(problem, x0)
    y = evaluate_objective(problem, x)
    trace = SolverTrace(maximize=True, aux=AuxiliaryState(dinkelbach_y=y))
    trace.record(y, 0.0, abs(y))

    def gap(z: np.ndarray, y_frozen: float) -> float:
        A, B = _values(problem, z)
        return float(np.min(A - y_frozen * B))

    for _ in range(config.max_iters):
        terms = []
        for ratio in problem.ratios:

            def f(z: np.ndarray, ratio: RatioSpec = ratio, y_frozen: float = y) -> float:
                a, b = ratio.values(z)
                return a - y_frozen * b

            def g(z: np.ndarray, ratio: RatioSpec = ratio, y_frozen: float = y) -> np.ndarray:
                ga, gb = ratio.gradients(z)
                return ga - y_frozen * gb

            terms.append((f, g))

        x_new = inner(terms, cset, x, config)
        if gap(x_new, y) <= gap(x, y):
            trace.status = TraceStatus.CONVERGED
            break
        try:
            y_new = evaluate_objective(problem, x_new)
        except DegenerateDenominator as e:
            logger.warning("Generalized Dinkelbach stopped: %s", e)
            trace.status = TraceStatus.DEGENERATE
            break
        if y_new < y:
            trace.status = TraceStatus.CONVERGED
            break
        x_prev, x = x, x_new
        trace.record(y_new, gap(x, y), abs(y_new))
        trace.aux = AuxiliaryState(dinkelbach_y=y_new)
        done = config.converged(y, y_new, x_prev, x)
        y = y_new
        if done:
            trace.status = TraceStatus.CONVERGED
            break

    logger.debug("Generalized Dinkelbach: %s after %d iterations, value %.10g", trace.status, trace.iterations, y)
    return Solution(x, y, trace)


def _transform_surrogate(
    problem: FPProblem, kind: TransformKind, aux: AuxiliaryState
) -> Tuple[ScalarFn, GradFn]:
    w = problem.w

    def value(x: np.ndarray) -> float:
        A, B = _values(problem, x)
        if np.any(B < DEGENERACY_THRESHOLD):
            return -math.inf
        if kind != TransformKind.QT and np.any(A < DEGENERACY_THRESHOLD):
            return -math.inf
        return surrogate_value(kind, A, B, aux, w)

    def grad(x: np.ndarray) -> np.ndarray:
        total = np.zeros_like(x, dtype=float)
        for i, ratio in enumerate(problem.ratios):
            a, b = ratio.values(x)
            ga, gb = ratio.gradients(x)
            match kind:
                case TransformKind.QT:
                    y = aux.y[i]
                    total += w[i] * (y * ga / max(math.sqrt(max(a, 0.0)), DEGENERACY_THRESHOLD) - y**2 * gb)
                case TransformKind.INVERSE_QT:
                    yt = aux.y_tilde[i]
                    root_b = max(math.sqrt(max(b, 0.0)), DEGENERACY_THRESHOLD)
                    bracket = max(2.0 * yt * root_b - yt**2 * a, DEGENERACY_THRESHOLD)
                    total += w[i] * (yt * gb / root_b - yt**2 * ga) / bracket**2
                case TransformKind.AM_GM:
                    y = aux.y[i]
                    total -= w[i] * (2.0 * y * a * ga - gb / (2.0 * y * b**3))
        return total

    return value, grad


def sum_of_ratios_solve(
    problem: FPProblem,
    transform: TransformKind = TransformKind.QT,
    config: Optional[SolverConfig] = None,
    x0: Optional[np.ndarray] = None,
    inner: Optional[InnerStep] = None,
) -> Solution:
    """Minorize-maximize a sum of ratios through one of the scalar transforms.

    QT handles sum-max problems. Inverse QT and AM-GM handle sum-min problems.
    """
    if transform == TransformKind.QT and problem.kind not in (ProblemKind.SUM_MAX, ProblemKind.SINGLE):
        raise InvalidProblem(f"QT solves sum-max problems, got {problem.kind}")
    if transform != TransformKind.QT and problem.kind != ProblemKind.SUM_MIN:
        raise InvalidProblem(f"{transform} solves sum-min problems, got {problem.kind}")
    config = config or SolverConfig()
    inner = inner or pgd_step
    expected = Curvature.CONCAVE_CONVEX if transform == TransformKind.QT else Curvature.CONVEX_CONCAVE
    _warn_curvature(problem, expected)
    sign = 1.0 if problem.maximize else -1.0

    x = _start(problem, x0)
    value = evaluate_objective(problem, x)
    trace = SolverTrace(maximize=problem.maximize)
    trace.record(value, value, 0.0)

    for _ in range(config.max_iters):
        try:
            A, B = evaluate_ratios(problem, x)
            aux = update_auxiliaries(transform, A, B)
            surrogate, grad = _transform_surrogate(problem, transform, aux)
            x_new = inner(surrogate, grad, problem.constraint, x, config)
            value_new = evaluate_objective(problem, x_new)
        except (DegenerateDenominator, InnerSolverFailure) as e:
            logger.warning("%s iteration stopped: %s", transform, e)
            trace.status = TraceStatus.DEGENERATE
            break
        x_prev, x = x, x_new
        trace.record(value_new, sign * surrogate(x), aux.norm())
        trace.aux = aux
        done = config.converged(value, value_new, x_prev, x)
        value = value_new
        if done:
            trace.status = TraceStatus.CONVERGED
            break

    logger.debug("%s: %s after %d iterations, value %.10g", transform, trace.status, trace.iterations, value)
    return Solution(x, value, trace)


def outer_functions(problem: FPProblem) -> Tuple[OuterFunction, ...]:
    """Outer functions the unified transform applies, derived from the problem kind."""
    match problem.kind:
        case ProblemKind.SUM_OF_FUNCTIONS:
            return problem.outer  # type: ignore[return-value]
        case ProblemKind.SUM_MAX | ProblemKind.SINGLE:
            return tuple(OuterFunction.identity() for _ in problem.ratios)
        case ProblemKind.SUM_MIN:
            return tuple(OuterFunction.negated_identity() for _ in problem.ratios)
        case ProblemKind.LOG_RATIO:
            return tuple(OuterFunction.log1p() for _ in problem.ratios)
    raise InvalidProblem(f"unified QT does not handle {problem.kind}")


def unified_aux_update(outer: Sequence[OuterFunction], A: Sequence[float], B: Sequence[float]) -> AuxiliaryState:
    """Joint update: y for nondecreasing outer functions, y_tilde for nonincreasing ones."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    y = np.zeros(A.shape)
    y_tilde = np.zeros(A.shape)
    for i, f in enumerate(outer):
        if f.monotonicity == Monotonicity.NONDECREASING:
            y[i] = update_auxiliaries(TransformKind.QT, A[i : i + 1], B[i : i + 1]).y[0]
        else:
            y_tilde[i] = update_auxiliaries(TransformKind.INVERSE_QT, A[i : i + 1], B[i : i + 1]).y_tilde[0]
    return AuxiliaryState(y=y, y_tilde=y_tilde)


def unified_surrogate_value(
    outer: Sequence[OuterFunction],
    A: Sequence[float],
    B: Sequence[float],
    aux: AuxiliaryState,
    weights: Sequence[float],
) -> float:
    """Sum of w f+(2y sqrt(A) - y^2 B) plus w f-(1 / [2y~ sqrt(B) - y~^2 A]_+), -inf outside any domain."""
    total = 0.0
    for i, f in enumerate(outer):
        a, b = float(A[i]), float(B[i])
        if f.monotonicity == Monotonicity.NONDECREASING:
            y = aux.y[i]
            v = f.value_or_sentinel(2.0 * y * math.sqrt(max(a, 0.0)) - y**2 * b)
        else:
            yt = aux.y_tilde[i]
            bracket = 2.0 * yt * math.sqrt(max(b, 0.0)) - yt**2 * a
            if bracket < DEGENERACY_THRESHOLD:
                return -math.inf
            v = f.value_or_sentinel(1.0 / bracket)
        if v == -math.inf:
            return -math.inf
        total += float(weights[i]) * v
    return total


def _unified_surrogate(
    problem: FPProblem, outer: Sequence[OuterFunction], aux: AuxiliaryState
) -> Tuple[ScalarFn, GradFn]:
    w = problem.w

    def value(x: np.ndarray) -> float:
        A, B = _values(problem, x)
        if np.any(B < DEGENERACY_THRESHOLD):
            return -math.inf
        return unified_surrogate_value(outer, A, B, aux, w)

    def grad(x: np.ndarray) -> np.ndarray:
        total = np.zeros_like(x, dtype=float)
        for i, (ratio, f) in enumerate(zip(problem.ratios, outer)):
            a, b = ratio.values(x)
            ga, gb = ratio.gradients(x)
            if f.monotonicity == Monotonicity.NONDECREASING:
                y = aux.y[i]
                root_a = max(math.sqrt(max(a, 0.0)), DEGENERACY_THRESHOLD)
                q = 2.0 * y * root_a - y**2 * b
                total += w[i] * f.grad(q) * (y * ga / root_a - y**2 * gb)
            else:
                yt = aux.y_tilde[i]
                root_b = max(math.sqrt(max(b, 0.0)), DEGENERACY_THRESHOLD)
                bracket = max(2.0 * yt * root_b - yt**2 * a, DEGENERACY_THRESHOLD)
                d_bracket = yt * gb / root_b - yt**2 * ga
                total += w[i] * f.grad(1.0 / bracket) * (-d_bracket / bracket**2)
        return total

    return value, grad


def unified_qt_solve(
    problem: FPProblem,
    config: Optional[SolverConfig] = None,
    x0: Optional[np.ndarray] = None,
    inner: Optional[InnerStep] = None,
) -> Solution:
    """Maximize a sum of monotone functions of ratios with the unified quadratic transform.

    All auxiliaries are refreshed jointly from the current x, then the concave
    x-subproblem is solved once. Sum-max and sum-min problems run through the
    identity and negated identity outer functions; the value is reported in the
    original sense of the problem.
    """
    config = config or SolverConfig()
    inner = inner or pgd_step
    outer = outer_functions(problem)
    _warn_curvature(
        problem,
        [
            Curvature.CONCAVE_CONVEX if f.monotonicity == Monotonicity.NONDECREASING else Curvature.CONVEX_CONCAVE
            for f in outer
        ],
    )
    sign = 1.0 if problem.maximize else -1.0

    def objective(z: np.ndarray) -> float:
        A, B = evaluate_ratios(problem, z)
        return sum(float(w) * f(a / b) for w, f, a, b in zip(problem.w, outer, A, B))

    x = _start(problem, x0)
    internal = objective(x)
    trace = SolverTrace(maximize=problem.maximize)
    trace.record(sign * internal, sign * internal, 0.0)

    for _ in range(config.max_iters):
        try:
            A, B = evaluate_ratios(problem, x)
            aux = unified_aux_update(outer, A, B)
            surrogate, grad = _unified_surrogate(problem, outer, aux)
            x_new = inner(surrogate, grad, problem.constraint, x, config)
            internal_new = objective(x_new)
        except (DegenerateDenominator, DomainError, InnerSolverFailure) as e:
            logger.warning("Unified QT stopped: %s", e)
            trace.status = TraceStatus.DEGENERATE
            break
        x_prev, x = x, x_new
        trace.record(sign * internal_new, sign * surrogate(x), aux.norm())
        trace.aux = aux
        done = config.converged(internal, internal_new, x_prev, x)
        internal = internal_new
        if done:
            trace.status = TraceStatus.CONVERGED
            break

    logger.debug("Unified QT: %s after %d iterations, value %.10g", trace.status, trace.iterations, sign * internal)
    return Solution(x, sign * internal, trace)


def surrogate_gap_samples(
    problem: FPProblem, transform: TransformKind, points: np.ndarray, anchors: np.ndarray
) -> List[Tuple[float, float]]:
    """Pairs (surrogate at x with aux frozen at x_hat, objective at x) in maximization form."""
    sign = 1.0 if problem.maximize else -1.0
    pairs = []
    for x, x_hat in zip(points, anchors):
        A_hat, B_hat = evaluate_ratios(problem, x_hat)
        aux = update_auxiliaries(transform, A_hat, B_hat)
        A, B = evaluate_ratios(problem, x)
        pairs.append((surrogate_value(transform, A, B, aux, problem.w), sign * evaluate_objective(problem, x)))
    return pairs
