"""Downlink MIMO beamforming by the matrix LDT followed by one of two matrix-QT decouplings.

The weighted sum rate sum_ik w_ik ln det(I + sqrtA_ik^H B_ik^-1 sqrtA_ik), with
sqrtA_ik = H_ik,i V_ik and B_ik the interference-plus-noise covariance, is first
lifted by the matrix Lagrangian dual transform. The remaining ratio
Tr((I + Gamma) sqrtA^H (A + B)^-1 sqrtA) is then decoupled either with the
numerator left as is (WMMSE) or with the weight and (I + Gamma) folded into the
numerator factor (FPLinQ).
"""

import logging
import math
from enum import StrEnum
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from fractrans.core.errors import InvalidProblem, ShapeMismatch, SingularDenominator
from fractrans.modules.inner import project
from fractrans.modules.matrix import (
    MatrixRatioProblem,
    ball_quadratic_max,
    check_positive_definite,
    logdet_objective,
    matrix_ldt_gamma_update,
    matrix_ldt_objective,
    psd_sqrt,
)
from fractrans.modules.network import NetworkInstance
from fractrans.modules.problem import ConstraintSet, Solution, SolverConfig, SolverTrace, TraceStatus, make_rng

logger = logging.getLogger(__name__)


class BeamformingVariant(StrEnum):
    """Matrix-QT decouplings of the LDT-lifted sum rate."""

    WMMSE = "wmmse"
    FPLINQ = "fplinq"


class DownlinkRatio(MatrixRatioProblem):
    """Matrix ratios of a multi-cell downlink; beamformers V have shape (L, K, M, d)."""

    def __init__(self, net: NetworkInstance) -> None:
        """Wrap the channels H[i, k, j] (BS j to user k of cell i) of a MIMO instance."""
        if net.channels is None:
            raise InvalidProblem("beamforming needs a MIMO channel array")
        self.net = net
        self.H = net.channels
        self.cells, self.users, _, self.rx, self.tx = self.H.shape
        self.streams = net.streams
        self.weights = net.weights
        self.ball = ConstraintSet.ball(math.sqrt(net.max_power))

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        """(cells, users per cell, transmit antennas, streams)."""
        return self.cells, self.users, self.tx, self.streams

    def check(self, V: Any) -> np.ndarray:
        """Beamformers as a complex array of the expected shape."""
        V = np.asarray(V, dtype=complex)
        if V.shape != self.shape:
            raise ShapeMismatch(f"beamformers must have shape {self.shape}, got {V.shape}")
        return V

    def received(self, V: np.ndarray) -> np.ndarray:
        """H[i, k, j] V[j, q] for every user pair, shape (L, K, L, K, N, d)."""
        return np.einsum("ikjnm,jqmd->ikjqnd", self.H, self.check(V))

    def covariances(self, V: np.ndarray) -> List[np.ndarray]:
        """Total received covariance A_ik + B_ik of every user."""
        HV = self.received(V)
        total = np.einsum("ikjqnd,ikjqod->ikno", HV, HV.conj()) + self.net.noise * np.eye(self.rx)
        return list(total.reshape(-1, self.rx, self.rx))

    def sqrt_a(self, V: np.ndarray) -> List[np.ndarray]:
        """Desired-signal factors H[i, k, i] V[i, k]."""
        HV = self.received(V)
        return [HV[i, k, i, k] for i in range(self.cells) for k in range(self.users)]

    def denominators(self, V: np.ndarray) -> List[np.ndarray]:
        """Interference-plus-noise covariances B_ik."""
        return [t - sa @ sa.conj().T for t, sa in zip(self.covariances(V), self.sqrt_a(V))]

    def project(self, V: Any) -> np.ndarray:
        """Scale every base station onto its sum-power ball."""
        V = self.check(V)
        out = np.empty_like(V)
        for i in range(self.cells):
            out[i] = project(self.ball, V[i].ravel()).reshape(V[i].shape)
        return out


def initial_beamformers(net: NetworkInstance, seed: int) -> np.ndarray:
    """Gaussian beamformers with every base station at full power."""
    problem = DownlinkRatio(net)
    rng = make_rng(seed)
    shape = problem.shape
    V = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    scale = np.sqrt(net.max_power / np.sum(np.abs(V) ** 2, axis=(1, 2, 3)))
    return V * scale[:, None, None, None]


def weighted_sum_rate(net: NetworkInstance, V: Any) -> float:
    """Sum of w_ik ln det(I + sqrtA^H B^-1 sqrtA)."""
    return logdet_objective(DownlinkRatio(net), V)


def ldt_value(net: NetworkInstance, V: Any, Gamma: Sequence[np.ndarray]) -> float:
    """LDT-lifted objective f_r(V, Gamma)."""
    return matrix_ldt_objective(DownlinkRatio(net), V, Gamma)


def _plus_identity(g: np.ndarray) -> np.ndarray:
    return np.eye(g.shape[0]) + g


def wmmse_aux(problem: DownlinkRatio, V: np.ndarray) -> List[np.ndarray]:
    """Y_ik = (A_ik + B_ik)^-1 sqrtA_ik, the MMSE receivers."""
    out = []
    for i, (t, sa) in enumerate(zip(problem.covariances(V), problem.sqrt_a(V))):
        check_positive_definite(t, i)
        out.append(np.linalg.solve(t, sa))
    return out


def fplinq_aux(problem: DownlinkRatio, V: np.ndarray, Gamma: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Y_ik = sqrt(w_ik) (A_ik + B_ik)^-1 sqrtA_ik (I + Gamma_ik)^1/2."""
    return [
        math.sqrt(w) * y @ psd_sqrt(_plus_identity(g))
        for w, y, g in zip(problem.weights, wmmse_aux(problem, V), Gamma)
    ]


def _lifted_constant(w: float, g: np.ndarray) -> float:
    _, logdet = np.linalg.slogdet(_plus_identity(g))
    return w * (float(logdet) - float(np.real(np.trace(g))))


def wmmse_surrogate(
    problem: DownlinkRatio, V: np.ndarray, Gamma: Sequence[np.ndarray], Y: Sequence[np.ndarray]
) -> float:
    """Sum of w [ln det(I + Gamma) - Tr Gamma + Tr((I + Gamma)(sqrtA^H Y + Y^H sqrtA - Y^H (A + B) Y))]."""
    total = 0.0
    for w, t, sa, g, y in zip(problem.weights, problem.covariances(V), problem.sqrt_a(V), Gamma, Y):
        cross = sa.conj().T @ y
        inner = cross + cross.conj().T - y.conj().T @ t @ y
        total += _lifted_constant(w, g) + w * float(np.real(np.trace(_plus_identity(g) @ inner)))
    return total


def fplinq_surrogate(
    problem: DownlinkRatio, V: np.ndarray, Gamma: Sequence[np.ndarray], Y: Sequence[np.ndarray]
) -> float:
    """Sum of w (ln det(I + Gamma) - Tr Gamma) + 2 Re Tr(sqrtA'^H Y) - Tr(Y^H (A + B) Y).

    sqrtA' = sqrt(w) sqrtA (I + Gamma)^1/2.
    """
    total = 0.0
    for w, t, sa, g, y in zip(problem.weights, problem.covariances(V), problem.sqrt_a(V), Gamma, Y):
        folded = math.sqrt(w) * sa @ psd_sqrt(_plus_identity(g))
        total += _lifted_constant(w, g)
        total += float(np.real(np.trace(2.0 * folded.conj().T @ y - y.conj().T @ t @ y)))
    return total


def _receive_factors(
    problem: DownlinkRatio, variant: BeamformingVariant, V: np.ndarray, Gamma: Sequence[np.ndarray]
) -> Tuple[List[np.ndarray], List[np.ndarray], List[np.ndarray]]:
    """Auxiliaries Y, receive factors U and right factors C of either decoupling.

    The V-subproblem is always max sum 2 Re Tr(V^H H^H U C) - Tr(V^H H^H U U^H H V).
    """
    roots = [psd_sqrt(_plus_identity(g)) for g in Gamma]
    C = [math.sqrt(w) * r for w, r in zip(problem.weights, roots)]
    if variant == BeamformingVariant.WMMSE:
        Y = wmmse_aux(problem, V)
        U = [math.sqrt(w) * y @ r for w, y, r in zip(problem.weights, Y, roots)]
    else:
        Y = fplinq_aux(problem, V, Gamma)
        U = list(Y)
    return Y, U, C


def _quadratic_terms(
    problem: DownlinkRatio, U: Sequence[np.ndarray], C: Sequence[np.ndarray]
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-BS quadratic matrices Q_j (L, M, M) and linear terms b_jq (L, K, M, d)."""
    L, K = problem.cells, problem.users
    U_arr = np.stack(U).reshape(L, K, problem.rx, -1)
    C_arr = np.stack(C).reshape(L, K, problem.streams, problem.streams)
    HU = np.einsum("ikjnm,iknd->ikjmd", problem.H.conj(), U_arr)
    Q = np.einsum("ikjmd,ikjod->jmo", HU, HU.conj())
    own = HU[np.arange(L), :, np.arange(L)]
    b = np.einsum("jqmd,jqde->jqme", own, C_arr)
    return Q, b


def beam_update(problem: DownlinkRatio, U: Sequence[np.ndarray], C: Sequence[np.ndarray]) -> np.ndarray:
    """Exact maximizer of the decoupled surrogate under every per-BS sum-power constraint."""
    Q, b = _quadratic_terms(problem, U, C)
    L, K, M, d = problem.shape
    out = np.empty((L, K, M, d), dtype=complex)
    for j in range(L):
        D = np.kron(np.eye(K * d), Q[j])
        stacked = b[j].transpose(1, 0, 2).reshape(M, K * d).reshape(-1, order="F")
        x = ball_quadratic_max(D, stacked, problem.ball)
        out[j] = x.reshape(M, K * d, order="F").reshape(M, K, d).transpose(1, 0, 2)
    return out


def stationarity_residual(net: NetworkInstance, V: Any) -> float:
    """Norm of V - P(V + grad) over all base stations, zero at a stationary point.

    The conjugate gradient of the weighted sum rate is b_jq - Q_j V_jq taken at
    the optimal auxiliaries of V.
    """
    problem = DownlinkRatio(net)
    V = problem.check(V)
    Gamma = matrix_ldt_gamma_update(problem, V)
    _, U, C = _receive_factors(problem, BeamformingVariant.FPLINQ, V, Gamma)
    Q, b = _quadratic_terms(problem, U, C)
    grad = b - np.einsum("jmo,jqod->jqmd", Q, V)
    return float(np.linalg.norm(V - problem.project(V + grad)))


def solve_beamforming(
    net: NetworkInstance,
    variant: BeamformingVariant | str = BeamformingVariant.WMMSE,
    config: Optional[SolverConfig] = None,
    V0: Optional[Any] = None,
) -> Solution:
    """Maximize the weighted sum rate under per-BS sum power sum_k ||V_ik||_F^2 <= P.

    Each iteration sets Gamma by the matrix LDT, the auxiliaries of the chosen
    decoupling, and V by the exact constrained surrogate maximizer. Starts from
    `initial_beamformers` with `config.seed` unless `V0` is given.
    """
    variant = BeamformingVariant(variant)
    config = config or SolverConfig()
    problem = DownlinkRatio(net)
    V = initial_beamformers(net, config.seed) if V0 is None else problem.project(V0)
    surrogate_fn = wmmse_surrogate if variant == BeamformingVariant.WMMSE else fplinq_surrogate
    value = logdet_objective(problem, V)
    trace = SolverTrace(maximize=True)
    trace.record(value, value, 0.0)
    logger.debug("Beamforming (%s) on %d cells x %d users, start %.10g", variant, problem.cells, problem.users, value)

    for _ in range(config.max_iters):
        try:
            Gamma = matrix_ldt_gamma_update(problem, V)
            Y, U, C = _receive_factors(problem, variant, V, Gamma)
            V_new = beam_update(problem, U, C)
            surrogate = surrogate_fn(problem, V_new, Gamma, Y)
            value_new = logdet_objective(problem, V_new)
        except SingularDenominator as e:
            logger.warning("Beamforming (%s) stopped: %s", variant, e)
            trace.status = TraceStatus.DEGENERATE
            break
        trace.record(value_new, surrogate, math.sqrt(sum(float(np.sum(np.abs(y) ** 2)) for y in Y)))
        trace.aux = Y
        V_prev, V = V, V_new
        done = config.converged(value, value_new, V_prev, V)
        value = value_new
        if done:
            trace.status = TraceStatus.CONVERGED
            break

    logger.info(
        "Beamforming (%s): %s after %d iterations, sum rate %.10g", variant, trace.status, trace.iterations, value
    )
    return Solution(V, value, trace)
