"""Sum secrecy rate maximization over interfering links with eavesdroppers."""

import logging
from typing import Any, Callable, List, Optional

import numpy as np

from fractrans.core.errors import InvalidProblem
from fractrans.modules.inner import OracleResult, grid_oracle
from fractrans.modules.network import NetworkInstance
from fractrans.modules.problem import (
    ConstraintSet,
    Curvature,
    FPProblem,
    Monotonicity,
    OuterFunction,
    ProblemKind,
    RatioSpec,
    Solution,
    SolverConfig,
)
from fractrans.modules.scalar import unified_qt_solve

logger = logging.getLogger(__name__)

# Powers are kept above POWER_FLOOR * P so that the inverse-QT auxiliaries stay finite.
POWER_FLOOR = 1e-9

# Coarse grid intervals per power axis of the warm start, by link count; the fine pass is ten times finer.
WARM_START_INTERVALS = {1: 200, 2: 200, 3: 20}


def _check(net: NetworkInstance) -> None:
    if net.gains is None or net.eaves_gains is None or net.eaves_noise is None:
        raise InvalidProblem("secrecy needs legitimate and eavesdropper gains")


def _sinr_ratio(gains: np.ndarray, noise: float, i: int, include_self: bool) -> RatioSpec:
    """g_ii p_i over the interference plus noise, optionally counting the own signal too."""
    row = gains[i].copy()
    if not include_self:
        row[i] = 0.0
    direct = np.zeros_like(row)
    direct[i] = gains[i, i]
    curvature = Curvature.CONVEX_CONCAVE if include_self else Curvature.CONCAVE_CONVEX
    return RatioSpec(
        numerator=lambda p: gains[i, i] * p[i],
        denominator=lambda p: row @ p + noise,
        grad_numerator=lambda p: direct,
        grad_denominator=lambda p: row,
        curvature=curvature,
        vectorized=True,
    )


def power_box(net: NetworkInstance) -> ConstraintSet:
    """Powers in [POWER_FLOOR * P, P]."""
    return ConstraintSet.box(np.full(net.links, POWER_FLOOR * net.max_power), np.full(net.links, net.max_power))


def secrecy_problem(net: NetworkInstance) -> FPProblem:
    """Sum of ln(1 + SINR_i) + ln(1 - r_i) with r_i the eavesdropper SINR over (1 + SINR).

    The eavesdropper ratio r_i = e_ii p_i / (sum_j e_ij p_j + noise) makes the
    second outer function nonincreasing and concave.
    """
    _check(net)
    n = net.links
    legit = [_sinr_ratio(net.gains, net.noise, i, include_self=False) for i in range(n)]  # type: ignore[arg-type]
    eaves = [
        _sinr_ratio(net.eaves_gains, net.eaves_noise, i, include_self=True) for i in range(n)  # type: ignore[arg-type]
    ]
    return FPProblem(
        kind=ProblemKind.SUM_OF_FUNCTIONS,
        ratios=tuple(legit + eaves),
        constraint=power_box(net),
        dimension=n,
        weights=np.concatenate([net.weights, net.weights]),
        outer=tuple([OuterFunction.log1p()] * n + [OuterFunction.log_one_minus()] * n),
    )


def naive_secrecy_problem(net: NetworkInstance) -> FPProblem:
    """Formulation with -ln(1 + eavesdropper SINR) as the outer function.

    The outer function is convex, so the unified transform loses its
    guarantee; `validate_problem` reports it.
    """
    _check(net)
    n = net.links
    legit = [_sinr_ratio(net.gains, net.noise, i, include_self=False) for i in range(n)]  # type: ignore[arg-type]
    eaves = [
        _sinr_ratio(net.eaves_gains, net.eaves_noise, i, include_self=False) for i in range(n)  # type: ignore[arg-type]
    ]
    negated_log = OuterFunction.custom(
        lambda r: -np.log1p(r), lambda r: -1.0 / (1.0 + r), Monotonicity.NONINCREASING, lower=-1.0
    )
    return FPProblem(
        kind=ProblemKind.SUM_OF_FUNCTIONS,
        ratios=tuple(legit + eaves),
        constraint=power_box(net),
        dimension=n,
        weights=np.concatenate([net.weights, net.weights]),
        outer=tuple([OuterFunction.log1p()] * n + [negated_log] * n),
    )


def secrecy_rates(net: NetworkInstance, p: Any) -> np.ndarray:
    """Raw per-link secrecy rates ln(1 + SINR) - ln(1 + eavesdropper SINR), possibly negative."""
    _check(net)
    p = np.asarray(p, dtype=float)
    rates = []
    for G, noise in ((net.gains, net.noise), (net.eaves_gains, net.eaves_noise)):
        signal = np.diag(G) * p  # type: ignore[arg-type]
        rates.append(np.log1p(signal / (G @ p - signal + noise)))  # type: ignore[operator]
    return rates[0] - rates[1]


def displayed_rates(net: NetworkInstance, p: Any) -> np.ndarray:
    """Secrecy rates clamped at zero, for reporting only."""
    return np.maximum(secrecy_rates(net, p), 0.0)


def secrecy_objective(net: NetworkInstance) -> Callable[[np.ndarray], np.ndarray]:
    """Weighted sum secrecy rate of every row of an (n, L) power array."""
    _check(net)
    G, E = net.gains, net.eaves_gains
    w = net.weights

    def batch(P: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(P)
        total = np.zeros(P.shape[0])
        for M, noise, sign in ((G, net.noise, 1.0), (E, net.eaves_noise, -1.0)):
            signal = P * np.diag(M)  # type: ignore[arg-type]
            rest = P @ M.T - signal + noise  # type: ignore[union-attr,operator]
            total += sign * np.log1p(signal / rest) @ w
        return total

    return batch


def start_points(net: NetworkInstance) -> List[np.ndarray]:
    """Full power followed by every link transmitting alone."""
    floor = POWER_FLOOR * net.max_power
    starts = [np.full(net.links, net.max_power)]
    for i in range(net.links):
        p = np.full(net.links, floor)
        p[i] = net.max_power
        starts.append(p)
    return starts


def warm_start(net: NetworkInstance) -> Optional[np.ndarray]:
    """Best point of a coarse-to-fine power grid, None above three links."""
    intervals = WARM_START_INTERVALS.get(net.links)
    if intervals is None:
        return None
    coarse = (1.0 - POWER_FLOOR) * net.max_power / intervals
    return secrecy_oracle(net, coarse / 10.0, zoom=coarse).best_x


def solve_secrecy(net: NetworkInstance, config: Optional[SolverConfig] = None) -> Solution:
    """Maximize the unclamped sum secrecy rate with the unified quadratic transform.

    Runs from the grid warm start, then from every point of `start_points`, and
    keeps the first run that no later run beats by more than `obj_tol`; each run
    is monotone on its own.
    """
    config = config or SolverConfig()
    problem = secrecy_problem(net)
    starts = start_points(net)
    grid = warm_start(net)
    if grid is not None:
        starts.insert(0, grid)
    best: Optional[Solution] = None
    for k, p0 in enumerate(starts):
        solution = unified_qt_solve(problem, config, p0)
        logger.debug("Secrecy start %d: %.10g after %d iterations", k, solution.value, solution.trace.iterations)
        if best is None or solution.value > best.value + config.obj_tol:
            best = solution
    assert best is not None
    best.trace.info["starts"] = len(starts)
    logger.info("Sum secrecy rate %.10g at p=%s", best.value, np.asarray(best.x).tolist())
    return best


def secrecy_oracle(net: NetworkInstance, resolution: float = 1e-3, zoom: Optional[float] = None) -> OracleResult:
    """Exhaustive power grid, coarse-to-fine when `zoom` is set."""
    floor = POWER_FLOOR * net.max_power
    bounds = [(floor, net.max_power)] * net.links
    return grid_oracle(secrecy_objective(net), resolution, bounds, maximize=True, vectorized=True, zoom=zoom)
