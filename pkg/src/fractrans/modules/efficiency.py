"""Energy efficiency of a single wireless link, achievable rate per unit of consumed power."""

import logging
import math
from typing import Optional, Tuple

import numpy as np

from fractrans.core.errors import InvalidProblem
from fractrans.modules.inner import golden_section_max
from fractrans.modules.lift import charnes_cooper_lift, lifted_grid_oracle
from fractrans.modules.problem import (
    ConstraintSet,
    Curvature,
    FPProblem,
    ProblemKind,
    RatioSpec,
    Solution,
    SolverConfig,
)
from fractrans.modules.scalar import GradFn, ScalarFn, TransformKind, dinkelbach_solve, sum_of_ratios_solve

logger = logging.getLogger(__name__)


def ee_problem(gain: float, noise: float, circuit: float, max_power: float) -> FPProblem:
    """ln(1 + |h|^2 p / sigma^2) / (p + delta) over 0 <= p <= P."""
    if not (gain > 0 and noise > 0 and circuit > 0 and max_power > 0):
        raise InvalidProblem("channel gain, noise, circuit power and power cap must all be positive")
    snr = gain / noise
    ratio = RatioSpec(
        numerator=lambda p: np.log1p(snr * p[0]),
        denominator=lambda p: p[0] + circuit,
        grad_numerator=lambda p: np.array([snr / (1.0 + snr * p[0])]),
        grad_denominator=lambda p: np.ones(1),
        curvature=Curvature.CONCAVE_CONVEX,
        vectorized=True,
    )
    return FPProblem(
        kind=ProblemKind.SINGLE,
        ratios=(ratio,),
        constraint=ConstraintSet.box(np.zeros(1), np.full(1, max_power)),
        dimension=1,
    )


def _interval_step(f: ScalarFn, grad: GradFn, cset: ConstraintSet, x0: np.ndarray, config: SolverConfig) -> np.ndarray:
    """Exact maximizer of a concave function of one variable over a box."""
    lo, hi = float(cset.lower[0]), float(cset.upper[0])  # type: ignore[index]
    p, _ = golden_section_max(lambda s: f(np.array([s])), lo, hi, tol=config.inner_tol)
    return np.array([p])


def solve_energy_efficiency(
    gain: float, noise: float, circuit: float, max_power: float, config: Optional[SolverConfig] = None
) -> Solution:
    """Maximize the energy efficiency with Dinkelbach's method; x is the 1-vector [p]."""
    problem = ee_problem(gain, noise, circuit, max_power)
    solution = dinkelbach_solve(problem, config, np.array([max_power]), inner=_interval_step)
    logger.debug("Energy efficiency %.10g at p=%.10g", solution.value, float(solution.x[0]))
    return solution


def golden_section_efficiency(gain: float, noise: float, circuit: float, max_power: float) -> Tuple[float, float]:
    """Direct search over the power, EE being unimodal in p."""
    snr = gain / noise
    return golden_section_max(lambda p: math.log1p(snr * p) / (p + circuit), 0.0, max_power)


def lifted_efficiency(
    gain: float, noise: float, circuit: float, max_power: float, resolution: float = 1e-3
) -> Tuple[float, float]:
    """Grid search in the Charnes-Cooper variables, mapped back to (p, EE)."""
    problem = ee_problem(gain, noise, circuit, max_power)
    x, result = lifted_grid_oracle(charnes_cooper_lift(problem), resolution, zoom=100 * resolution)
    return float(x[0]), result.best_value


def solve_energy_efficiency_qt(
    gain: float, noise: float, circuit: float, max_power: float, config: Optional[SolverConfig] = None
) -> Solution:
    """Same problem through the quadratic transform, for iteration-count comparisons."""
    problem = ee_problem(gain, noise, circuit, max_power)
    return sum_of_ratios_solve(problem, TransformKind.QT, config, np.array([max_power]))
