"""Pilot design against pilot contamination through the matrix quadratic transform (FPP)."""

import logging
import math
from typing import Dict, Optional, Tuple

import numpy as np

from fractrans.core.errors import ConfigError, InvalidProblem
from fractrans.modules.matrix import MatrixVariant, StructuredMatrixRatio, convergence_slope, solve_matrix_fp
from fractrans.modules.network import NetworkInstance
from fractrans.modules.problem import ConstraintSet, Solution, SolverConfig, SolverTrace, make_rng

logger = logging.getLogger(__name__)

# Relative error below which rate fits ignore an iteration.
RATE_FLOOR = 1e-12


def _dimensions(net: NetworkInstance) -> Tuple[int, int, int]:
    if net.beta is None or net.pilot_length is None:
        raise InvalidProblem("pilot design needs large-scale gains and a pilot length")
    L, _, K = net.beta.shape
    return L, K, net.pilot_length


def pilot_problem(net: NetworkInstance) -> StructuredMatrixRatio:
    """Matrix-ratio form with one block per user.

    Block (i, k) holds the pilot s_ik, numerator factor beta_iik s_ik and
    denominator D_i = noise I + sum_(j, k') beta_ijk' s_jk' s_jk'^H.
    """
    L, K, tau = _dimensions(net)
    beta = net.beta
    n = L * K
    eye = np.eye(tau)
    cell = np.repeat(np.arange(L), K)
    user = np.tile(np.arange(K), L)
    A = np.stack([beta[cell[u], cell[u], user[u]] * eye for u in range(n)])  # type: ignore[index]
    root = np.sqrt(beta[cell][:, cell, user])  # type: ignore[index]
    B = root[:, :, None, None] * eye
    noise = np.broadcast_to(net.noise * eye, (n, tau, tau))
    return StructuredMatrixRatio(A, B, noise, constraints=ConstraintSet.ball(math.sqrt(net.max_power)))


def orthogonal_pilots(net: NetworkInstance, seed: int) -> np.ndarray:
    """Each cell draws K of the tau orthogonal pilots at full power, shape (L, K, tau)."""
    L, K, tau = _dimensions(net)
    if K > tau:
        raise InvalidProblem(f"{K} users cannot get distinct pilots of length {tau}")
    rng = make_rng(seed)
    S = np.zeros((L, K, tau), dtype=complex)
    for i in range(L):
        S[i, np.arange(K), rng.choice(tau, size=K, replace=False)] = math.sqrt(net.max_power)
    return S


def random_pilots(net: NetworkInstance, seed: int) -> np.ndarray:
    """Gaussian pilots scaled to full power, shape (L, K, tau)."""
    L, K, tau = _dimensions(net)
    rng = make_rng(seed)
    S = rng.standard_normal((L, K, tau)) + 1j * rng.standard_normal((L, K, tau))
    return S * (math.sqrt(net.max_power) / np.linalg.norm(S, axis=-1, keepdims=True))


def pilot_objective(net: NetworkInstance, S: np.ndarray) -> float:
    """Sum over cells of Tr(P_ii S_i^H D_i^-1 S_i P_ii)."""
    L, K, tau = _dimensions(net)
    return pilot_problem(net).objective(np.asarray(S).reshape(L * K, tau))


def estimation_mse(net: NetworkInstance, S: np.ndarray) -> float:
    """Sum of MMSE channel-estimation errors N (sum_ik beta_iik - objective)."""
    L, K, _ = _dimensions(net)
    total_gain = float(sum(net.beta[i, i, k] for i in range(L) for k in range(K)))  # type: ignore[index]
    return net.antennas * (total_gain - pilot_objective(net, S))


def solve_pilot_fpp(
    net: NetworkInstance,
    config: Optional[SolverConfig] = None,
    variant: MatrixVariant | str = MatrixVariant.BASIC,
    S0: Optional[np.ndarray] = None,
) -> Solution:
    """Maximize the pilot objective starting from orthogonal pilots unless `S0` is given.

    Returns the pilots with shape (L, K, tau).
    """
    config = config or SolverConfig()
    L, K, tau = _dimensions(net)
    if S0 is None:
        S0 = orthogonal_pilots(net, config.seed)
    problem = pilot_problem(net)
    x, value, trace = solve_matrix_fp(problem, variant, config, np.asarray(S0).reshape(L * K, tau))
    logger.debug("FPP (%s): objective %.10g after %d iterations", variant, value, trace.iterations)
    return Solution(x.reshape(L, K, tau), value, trace)


def convergence_rates(
    net: NetworkInstance,
    iterations: int = 2000,
    k_lo: int = 10,
    k_hi: int = 200,
    seed: int = 0,
    S0: Optional[np.ndarray] = None,
) -> Dict[str, Tuple[SolverTrace, float]]:
    """Run every matrix variant from the same start and fit the log-log error slope over [k_lo, k_hi].

    Each variant runs for `iterations` steps, or until its objective stops
    changing in floating point. The optimum f* is the best objective any
    variant reached. The start defaults to random pilots; orthogonal pilots
    are a fixed point of the basic update.
    """
    if not 0 < k_lo < k_hi <= iterations:
        raise ConfigError(f"slope window {k_lo}-{k_hi} must lie within 1-{iterations}")
    config = SolverConfig(max_iters=iterations, obj_tol=1e-300, seed=seed)
    if S0 is None:
        S0 = random_pilots(net, seed)
    traces = {v.value: solve_pilot_fpp(net, config, v, S0).trace for v in MatrixVariant}
    f_star = max(float(np.max(t.objectives)) for t in traces.values())
    floor = RATE_FLOOR * max(1.0, abs(f_star))
    rates = {
        name: (t, convergence_slope(t.objectives, f_star, k_lo, k_hi, floor)) for name, t in traces.items()
    }
    for name, (_, slope) in rates.items():
        logger.info("Variant %s: error slope %.3f over iterations %d-%d", name, slope, k_lo, k_hi)
    return rates
