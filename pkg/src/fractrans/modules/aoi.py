"""Arrival-rate control minimizing the sum of average ages of information in a priority M/M/1 queue."""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from fractrans.core.errors import InvalidProblem
from fractrans.modules.inner import golden_section_max
from fractrans.modules.problem import (
    ConstraintSet,
    Curvature,
    FPProblem,
    ProblemKind,
    RatioSpec,
    Solution,
    SolverConfig,
    evaluate_objective,
)
from fractrans.modules.scalar import TransformKind, sum_of_ratios_solve

logger = logging.getLogger(__name__)

# Rates are kept in [RATE_FLOOR * mu, mu].
RATE_FLOOR = 1e-6


def _ratios(k: int, sources: int, mu: float) -> Tuple[RatioSpec, RatioSpec]:
    """The two ratio terms of source k (0-based)."""
    ahead = np.zeros(sources)
    ahead[:k] = 1.0
    own = np.zeros(sources)
    own[k] = 1.0

    def rho_hat(lam: np.ndarray) -> np.ndarray:
        return np.sum(lam[:k], axis=0) / mu

    waiting = RatioSpec(
        numerator=lambda lam: rho_hat(lam) ** 2 + 3.0 * rho_hat(lam) + 1.0,
        denominator=lambda lam: mu * (1.0 + rho_hat(lam)),
        grad_numerator=lambda lam: (2.0 * rho_hat(lam) + 3.0) * ahead / mu,
        grad_denominator=lambda lam: ahead,
        curvature=Curvature.CONVEX_CONCAVE,
        vectorized=True,
    )
    renewal = RatioSpec(
        numerator=lambda lam: (rho_hat(lam) + 1.0) ** 2,
        denominator=lambda lam: lam[k],
        grad_numerator=lambda lam: 2.0 * (rho_hat(lam) + 1.0) * ahead / mu,
        grad_denominator=lambda lam: own,
        curvature=Curvature.CONVEX_CONCAVE,
        vectorized=True,
    )
    return waiting, renewal


def aoi_problem(sources: int, mu: float) -> FPProblem:
    """Sum over sources of (rho^2 + 3 rho + 1) / (mu (1 + rho)) + (rho + 1)^2 / (mu rho_k), rho = rho_hat_k.

    The upper limit lambda_k = mu is allowed even though the queue is not
    stable there; the average-age formula is used as it stands.
    """
    if sources < 1:
        raise InvalidProblem(f"need at least one source, got {sources}")
    if not mu > 0:
        raise InvalidProblem(f"service rate must be positive, got {mu}")
    ratios: List[RatioSpec] = []
    for k in range(sources):
        ratios.extend(_ratios(k, sources, mu))
    return FPProblem(
        kind=ProblemKind.SUM_MIN,
        ratios=tuple(ratios),
        constraint=ConstraintSet.box(np.full(sources, RATE_FLOOR * mu), np.full(sources, mu)),
        dimension=sources,
    )


def sum_aoi(sources: int, mu: float, lam: np.ndarray) -> float:
    """Sum of average ages at the given arrival rates."""
    return evaluate_objective(aoi_problem(sources, mu), np.asarray(lam, dtype=float))


def max_rate_baseline(sources: int, mu: float) -> Tuple[np.ndarray, float]:
    """Every source sends at the service rate."""
    lam = np.full(sources, mu)
    return lam, sum_aoi(sources, mu, lam)


def equal_rate_baseline(sources: int, mu: float, samples: int = 2001) -> Tuple[np.ndarray, float]:
    """Best common rate, by a grid scan refined with golden-section search."""
    problem = aoi_problem(sources, mu)
    lo, hi = RATE_FLOOR * mu, mu
    grid = np.linspace(lo, hi, samples)
    values = np.array([evaluate_objective(problem, np.full(sources, r)) for r in grid])
    k = int(np.argmin(values))
    step = grid[1] - grid[0]
    r, neg = golden_section_max(
        lambda t: -evaluate_objective(problem, np.full(sources, t)), max(lo, grid[k] - step), min(hi, grid[k] + step)
    )
    best_r, best = (r, -neg) if -neg <= values[k] else (grid[k], values[k])
    return np.full(sources, best_r), float(best)


def solve_aoi(
    sources: int,
    mu: float,
    config: Optional[SolverConfig] = None,
    transform: TransformKind | str = TransformKind.INVERSE_QT,
    lam0: Optional[np.ndarray] = None,
) -> Solution:
    """Minimize the sum of ages over the arrival rates with inverse QT or AM-GM.

    Starts from the equal-rate baseline unless `lam0` is given, so the result
    never loses against it.
    """
    transform = TransformKind(transform)
    if transform == TransformKind.QT:
        raise InvalidProblem("age minimization needs inverse-qt or am-gm")
    problem = aoi_problem(sources, mu)
    if lam0 is None:
        lam0, _ = equal_rate_baseline(sources, mu)
    solution = sum_of_ratios_solve(problem, transform, config, lam0)
    logger.debug("AoI with %d sources: %.10g via %s", sources, solution.value, transform)
    return solution


def closed_form_single(mu: float) -> Tuple[float, float]:
    """One source: lambda = mu and age 2 / mu."""
    return mu, 2.0 / mu


def ordering_gaps(sources: int, mu: float, config: Optional[SolverConfig] = None) -> Tuple[float, float]:
    """(equal-rate minus FP, max-rate minus equal-rate), both nonnegative when the ordering holds."""
    fp = solve_aoi(sources, mu, config).value
    _, equal = equal_rate_baseline(sources, mu)
    _, full = max_rate_baseline(sources, mu)
    if not math.isfinite(fp):
        raise InvalidProblem(f"AoI solve with {sources} sources did not produce a finite value")
    return equal - fp, full - equal
