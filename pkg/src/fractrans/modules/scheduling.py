"""Joint uplink user scheduling and power control with the FPLinQ decoupling."""

import itertools
import logging
from typing import Any, NamedTuple, Optional, Tuple

import numpy as np

from fractrans.core.errors import InvalidProblem
from fractrans.modules.lagrangian import ldt_gamma_update, ldt_qt_aux_update
from fractrans.modules.network import NetworkInstance
from fractrans.modules.power import signal_interference, solve_power_control, sum_rate
from fractrans.modules.problem import SolverConfig, SolverTrace, TraceStatus

logger = logging.getLogger(__name__)


class ScheduleResult(NamedTuple):
    """Selected candidate and transmit power of every cell."""

    schedule: np.ndarray
    power: np.ndarray
    value: float
    trace: SolverTrace


def _candidates(net: NetworkInstance) -> Tuple[int, int]:
    if net.beta is None:
        raise InvalidProblem("scheduling needs per-candidate large-scale gains")
    if net.antennas != 1:
        raise InvalidProblem("scheduling supports single-antenna base stations only")
    L, _, C = net.beta.shape
    return L, C


def candidate_weights(net: NetworkInstance) -> np.ndarray:
    """Weights as a (cells, candidates) array."""
    L, C = _candidates(net)
    return net.weights.reshape(L, C)  # type: ignore[union-attr]


def scheduled_instance(net: NetworkInstance, schedule: Any) -> NetworkInstance:
    """Power-control instance of the links picked by `schedule`."""
    L, _ = _candidates(net)
    schedule = np.asarray(schedule, dtype=int)
    return NetworkInstance(
        noise=net.noise,
        max_power=net.max_power,
        gains=net.uplink_gains(schedule),
        weights=candidate_weights(net)[np.arange(L), schedule],
    )


def scheduled_rate(net: NetworkInstance, schedule: Any, p: Any) -> float:
    """Weighted sum rate of the scheduled users."""
    return sum_rate(scheduled_instance(net, schedule), p)


def strongest_candidates(net: NetworkInstance) -> np.ndarray:
    """Per cell, the candidate with the largest weighted direct gain."""
    L, _ = _candidates(net)
    cells = np.arange(L)
    return np.argmax(candidate_weights(net) * net.beta[cells, cells, :], axis=1)  # type: ignore[index]


def candidate_scores(
    net: NetworkInstance, gamma: np.ndarray, y: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Decoupled surrogate value and best power of every candidate, both (cells, candidates).

    With Gamma and y frozen, the surrogate splits over cells into
    w_jk (ln(1 + Gamma_j) - Gamma_j) + 2 y_j sqrt(w_jk (1 + Gamma_j) beta_jjk p) - p sum_i y_i^2 beta_ijk,
    maximized over p in [0, P] in closed form.
    """
    L, _ = _candidates(net)
    beta = net.beta
    w = candidate_weights(net)
    cells = np.arange(L)
    direct = beta[cells, cells, :]  # type: ignore[index]
    load = np.einsum("i,ijk->jk", y**2, beta)
    gain = w * (1.0 + gamma)[:, None] * direct
    p = np.minimum(net.max_power, y[:, None] ** 2 * gain / np.maximum(load, np.finfo(float).tiny) ** 2)
    scores = w * (np.log1p(gamma) - gamma)[:, None] + 2.0 * y[:, None] * np.sqrt(gain * p) - p * load
    return scores, p


def schedule_uplink_fplinq(
    net: NetworkInstance,
    config: Optional[SolverConfig] = None,
    schedule0: Optional[Any] = None,
) -> ScheduleResult:
    """Alternate LDT and QT auxiliaries with a per-cell argmax over candidate scores.

    The weight and (1 + Gamma) sit inside the QT numerator, so the surrogate
    separates over transmitters and every cell picks its best candidate with
    its best power independently. Starts from `strongest_candidates` at full
    power unless `schedule0` is given. Stops once the schedule repeats and
    the sum rate has settled.
    """
    config = config or SolverConfig()
    L, C = _candidates(net)
    schedule = strongest_candidates(net) if schedule0 is None else np.asarray(schedule0, dtype=int)
    p = np.full(L, net.max_power)
    link = scheduled_instance(net, schedule)
    value = sum_rate(link, p)
    trace = SolverTrace(maximize=True)
    trace.record(value, value, 0.0)
    logger.debug("Scheduling %d cells with %d candidates each, start %.10g", L, C, value)

    cells = np.arange(L)
    for _ in range(config.max_iters):
        signal, rest = signal_interference(link, p)
        gamma = ldt_gamma_update(signal, rest)
        y = ldt_qt_aux_update(signal, rest, gamma, link.weights)  # type: ignore[arg-type]
        scores, powers = candidate_scores(net, gamma, y)
        schedule_new = np.argmax(scores, axis=1)
        p_new = powers[cells, schedule_new]
        surrogate = float(np.sum(scores[cells, schedule_new]) - net.noise * np.sum(y**2))
        link = scheduled_instance(net, schedule_new)
        value_new = sum_rate(link, p_new)
        trace.record(value_new, surrogate, float(np.linalg.norm(y)))
        stable = np.array_equal(schedule_new, schedule)
        p_prev, p, schedule = p, p_new, schedule_new
        done = stable and config.converged(value, value_new, p_prev, p)
        value = value_new
        if done:
            trace.status = TraceStatus.CONVERGED
            break

    logger.info("Scheduling: %s after %d iterations, schedule %s", trace.status, trace.iterations, schedule.tolist())
    return ScheduleResult(schedule, p, value, trace)


def best_fixed_schedule(
    net: NetworkInstance, config: Optional[SolverConfig] = None
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Enumerate every schedule and run power control on each; returns the best schedule, powers and value."""
    L, C = _candidates(net)
    best: Optional[Tuple[np.ndarray, np.ndarray, float]] = None
    for choice in itertools.product(range(C), repeat=L):
        schedule = np.array(choice)
        solution = solve_power_control(scheduled_instance(net, schedule), config)
        if best is None or solution.value > best[2]:
            best = (schedule, solution.x, solution.value)
    assert best is not None
    logger.debug("Best fixed schedule %s with %.10g over %d schedules", best[0].tolist(), best[2], C**L)
    return best
