"""Weighted sum-rate power control for interfering links with closed-form FP updates."""

import logging
from typing import Any, Optional, Tuple

import numpy as np

from fractrans.core.errors import InvalidProblem
from fractrans.modules.lagrangian import ldt_gamma_update, ldt_objective, ldt_qt_aux_update
from fractrans.modules.network import NetworkInstance
from fractrans.modules.problem import Solution, SolverConfig, SolverTrace, TraceStatus, make_rng
from fractrans.modules.scalar import AuxiliaryState

logger = logging.getLogger(__name__)

# Links with power in (INTERIOR_MARGIN * P, (1 - 1e-9) * P) count as interior.
INTERIOR_MARGIN = 1e-3


def _check(net: NetworkInstance) -> np.ndarray:
    if net.gains is None:
        raise InvalidProblem("power control needs a link gain matrix")
    return net.gains


def _start(net: NetworkInstance, p0: Optional[Any]) -> np.ndarray:
    if p0 is None:
        return full_power(net)
    return np.clip(np.asarray(p0, dtype=float), 0.0, net.max_power)


def signal_interference(net: NetworkInstance, p: Any) -> Tuple[np.ndarray, np.ndarray]:
    """Desired power g_ii p_i and interference-plus-noise of every link."""
    g = _check(net)
    p = np.asarray(p, dtype=float)
    signal = np.diag(g) * p
    return signal, g @ p - signal + net.noise


def sinr(net: NetworkInstance, p: Any) -> np.ndarray:
    """SINR of every link."""
    signal, rest = signal_interference(net, p)
    return signal / rest


def sum_rate(net: NetworkInstance, p: Any) -> float:
    """Weighted sum of ln(1 + SINR)."""
    return float(np.sum(net.weights * np.log1p(sinr(net, p))))


def power_update(net: NetworkInstance, p: np.ndarray) -> Tuple[np.ndarray, AuxiliaryState]:
    """One LDT + QT cycle in closed form.

    Returns
    -------
        p_i = min(P, y_i^2 w_i (1 + gamma_i) g_ii / (sum_j y_j^2 g_ji)^2) and the auxiliaries used

    """
    g = _check(net)
    signal, rest = signal_interference(net, p)
    gamma = ldt_gamma_update(signal, rest)
    y = ldt_qt_aux_update(signal, rest, gamma, net.weights)
    load = g.T @ y**2
    numerator = y**2 * net.weights * (1.0 + gamma) * np.diag(g)
    p_new = np.minimum(net.max_power, numerator / np.maximum(load, np.finfo(float).tiny) ** 2)
    return p_new, AuxiliaryState(y=y, gamma=gamma)


def solve_power_control(
    net: NetworkInstance,
    config: Optional[SolverConfig] = None,
    p0: Optional[Any] = None,
) -> Solution:
    """Maximize the weighted sum rate under 0 <= p_i <= P.

    Starts from full power unless `p0` is given.
    """
    config = config or SolverConfig()
    p = _start(net, p0)
    value = sum_rate(net, p)
    trace = SolverTrace(maximize=True)
    trace.record(value, value, 0.0)
    logger.debug("Power control on %d links, start value %.10g", p.size, value)

    for _ in range(config.max_iters):
        p_new, aux = power_update(net, p)
        value_new = sum_rate(net, p_new)
        signal, rest = signal_interference(net, p_new)
        trace.record(value_new, ldt_objective(signal, rest, aux.gamma, net.weights), aux.norm())
        trace.aux = aux
        p_prev, p = p, p_new
        done = config.converged(value, value_new, p_prev, p)
        value = value_new
        if done:
            trace.status = TraceStatus.CONVERGED
            break

    logger.debug("Power control: %s after %d iterations, sum rate %.10g", trace.status, trace.iterations, value)
    return Solution(p, value, trace)


def fixed_point_map(net: NetworkInstance, p: Any) -> np.ndarray:
    """Fixed-point form of the first-order condition.

    G_i(p) = (w_i^2 Gamma_i^2 / p_i) (sum_j w_j Gamma_j^2 g_ji / ((1 + Gamma_j) g_jj p_j))^-2
    """
    g = _check(net)
    p = np.asarray(p, dtype=float)
    G = sinr(net, p)
    w = net.weights
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = g.T @ (w * G**2 / ((1.0 + G) * np.diag(g) * p))
        return (w**2 * G**2 / p) / inner**2


def fixed_point_residual(net: NetworkInstance, p: Any) -> float:
    """Largest relative residual |G_i(p) - p_i| / p_i over interior links, 0 without interior links."""
    p = np.asarray(p, dtype=float)
    interior = (p > INTERIOR_MARGIN * net.max_power) & (p < (1.0 - 1e-9) * net.max_power)
    if not np.any(interior):
        return 0.0
    G = fixed_point_map(net, p)
    return float(np.max(np.abs(G[interior] - p[interior]) / p[interior]))


def fixed_point_solve(
    net: NetworkInstance, config: Optional[SolverConfig] = None, p0: Optional[Any] = None
) -> Solution:
    """Classic fixed-point iteration p <- min(P, G(p)), with no monotonicity guarantee."""
    config = config or SolverConfig()
    p = _start(net, p0)
    value = sum_rate(net, p)
    trace = SolverTrace(maximize=True, monotone_required=False)
    trace.record(value, value, 0.0)
    for _ in range(config.max_iters):
        p_new = np.minimum(net.max_power, np.nan_to_num(fixed_point_map(net, p), nan=0.0))
        value_new = sum_rate(net, p_new)
        trace.record(value_new, value_new, 0.0)
        p_prev, p = p, p_new
        done = config.converged(value, value_new, p_prev, p)
        value = value_new
        if done:
            trace.status = TraceStatus.CONVERGED
            break
    return Solution(p, value, trace)


def full_power(net: NetworkInstance) -> np.ndarray:
    """Every link at the power cap."""
    return np.full(_check(net).shape[0], net.max_power)


def random_power(net: NetworkInstance, seed: int) -> np.ndarray:
    """Powers drawn uniformly from [0, P]."""
    return make_rng(seed).uniform(0.0, net.max_power, size=_check(net).shape[0])
