"""Lagrangian dual transform for sums of logarithmic ratios, combined with the quadratic transform."""

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from fractrans.core.errors import DegenerateDenominator, InnerSolverFailure, InvalidProblem
from fractrans.modules.inner import project
from fractrans.modules.problem import (
    DEGENERACY_THRESHOLD,
    Curvature,
    FPProblem,
    ProblemKind,
    Solution,
    SolverConfig,
    SolverTrace,
    TraceStatus,
    default_start,
    evaluate_objective,
    evaluate_ratios,
)
from fractrans.modules.scalar import AuxiliaryState, GradFn, InnerStep, ScalarFn, pgd_step

logger = logging.getLogger(__name__)


def ldt_gamma_update(A: Sequence[float], B: Sequence[float]) -> np.ndarray:
    """Optimal gamma_i = A_i / B_i for frozen x."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if np.any(B < DEGENERACY_THRESHOLD):
        raise DegenerateDenominator(f"LDT needs B > 0, got B={B.tolist()}")
    return A / B


def ldt_objective(A: Sequence[float], B: Sequence[float], gamma: Sequence[float], weights: Sequence[float]) -> float:
    """Sum of w [ln(1 + gamma) - gamma + (1 + gamma) A / (A + B)]."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    w = np.asarray(weights, dtype=float)
    total = A + B
    if np.any(total < DEGENERACY_THRESHOLD):
        raise DegenerateDenominator(f"LDT needs A + B > 0, got {total.tolist()}")
    return float(np.sum(w * (np.log1p(gamma) - gamma + (1.0 + gamma) * A / total)))


def ldt_qt_aux_update(
    A: Sequence[float], B: Sequence[float], gamma: Sequence[float], weights: Sequence[float]
) -> np.ndarray:
    """QT auxiliaries of the ratios w (1 + gamma) A / (A + B)."""
    A = np.asarray(A, dtype=float)
    total = A + np.asarray(B, dtype=float)
    if np.any(total < DEGENERACY_THRESHOLD):
        raise DegenerateDenominator(f"LDT needs A + B > 0, got {total.tolist()}")
    scale = np.asarray(weights, dtype=float) * (1.0 + np.asarray(gamma, dtype=float))
    return np.sqrt(scale * np.maximum(A, 0.0)) / total


def _qt_surrogate(problem: FPProblem, gamma: np.ndarray, y: np.ndarray) -> Tuple[ScalarFn, GradFn]:
    scale = problem.w * (1.0 + gamma)

    def value(x: np.ndarray) -> float:
        total = 0.0
        for i, ratio in enumerate(problem.ratios):
            a, b = ratio.values(x)
            if a + b < DEGENERACY_THRESHOLD or a < 0:
                return -math.inf
            total += 2.0 * y[i] * math.sqrt(scale[i] * a) - y[i] ** 2 * (a + b)
        return total

    def grad(x: np.ndarray) -> np.ndarray:
        g = np.zeros_like(x, dtype=float)
        for i, ratio in enumerate(problem.ratios):
            a, _ = ratio.values(x)
            ga, gb = ratio.gradients(x)
            root_a = max(math.sqrt(max(a, 0.0)), DEGENERACY_THRESHOLD)
            g += y[i] * math.sqrt(scale[i]) * ga / root_a - y[i] ** 2 * (ga + gb)
        return g

    return value, grad


def logratio_solve(
    problem: FPProblem,
    config: Optional[SolverConfig] = None,
    x0: Optional[np.ndarray] = None,
    inner: Optional[InnerStep] = None,
) -> Solution:
    """Maximize sum w ln(1 + A/B) by alternating LDT and QT updates.

    One outer iteration refreshes gamma, then runs `inner_sweeps` rounds of
    the QT auxiliary update followed by the concave x-step. The gamma used last
    is kept in the trace auxiliaries.
    """
    if problem.kind != ProblemKind.LOG_RATIO:
        raise InvalidProblem(f"LDT solves log-ratio problems, got {problem.kind}")
    config = config or SolverConfig()
    inner = inner or pgd_step
    for i, ratio in enumerate(problem.ratios):
        if ratio.curvature != Curvature.CONCAVE_CONVEX:
            logger.warning("Ratio %d is tagged %s, the x-step may not be concave", i, ratio.curvature)

    x = project(problem.constraint, default_start(problem) if x0 is None else np.asarray(x0, dtype=float))
    value = evaluate_objective(problem, x)
    trace = SolverTrace(maximize=True)
    trace.record(value, value, 0.0)

    for _ in range(config.max_iters):
        try:
            A, B = evaluate_ratios(problem, x)
            gamma = ldt_gamma_update(A, B)
            x_new = x
            for _sweep in range(config.inner_sweeps):
                A_s, B_s = evaluate_ratios(problem, x_new)
                y = ldt_qt_aux_update(A_s, B_s, gamma, problem.w)
                surrogate, grad = _qt_surrogate(problem, gamma, y)
                x_new = inner(surrogate, grad, problem.constraint, x_new, config)
            A_new, B_new = evaluate_ratios(problem, x_new)
            value_new = evaluate_objective(problem, x_new)
        except (DegenerateDenominator, InnerSolverFailure) as e:
            logger.warning("LDT iteration stopped: %s", e)
            trace.status = TraceStatus.DEGENERATE
            break
        x_prev, x = x, x_new
        aux = AuxiliaryState(y=y, gamma=gamma)
        trace.record(value_new, ldt_objective(A_new, B_new, gamma, problem.w), aux.norm())
        trace.aux = aux
        done = config.converged(value, value_new, x_prev, x)
        value = value_new
        if done:
            trace.status = TraceStatus.CONVERGED
            break

    logger.debug("LDT: %s after %d iterations, value %.10g", trace.status, trace.iterations, value)
    return Solution(x, value, trace)
