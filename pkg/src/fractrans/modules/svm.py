"""Maximum-margin linear classification as a max-min-ratios problem."""

import logging
import math
from typing import Any, NamedTuple, Optional, Tuple

import numpy as np

from fractrans.core.errors import InvalidProblem, NotSeparable
from fractrans.modules.inner import OracleResult, grid_oracle
from fractrans.modules.problem import (
    ConstraintSet,
    Curvature,
    FPProblem,
    ProblemKind,
    RatioSpec,
    SolverConfig,
    SolverTrace,
    make_rng,
)
from fractrans.modules.scalar import maxmin_dinkelbach_solve

logger = logging.getLogger(__name__)

# Solutions with a smaller margin are not separating.
MARGIN_THRESHOLD = 1e-9


class MarginSolution(NamedTuple):
    """Unit normal w, offset b and the attained margin."""

    w: np.ndarray
    b: float
    margin: float
    trace: SolverTrace


def _check(points: Any, labels: Any) -> Tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(points, dtype=float))
    t = np.asarray(labels, dtype=float).reshape(-1)
    if t.shape[0] != X.shape[0]:
        raise InvalidProblem(f"{t.shape[0]} labels for {X.shape[0]} points")
    if not np.all(np.isin(t, (-1.0, 1.0))):
        raise InvalidProblem("labels must be -1 or +1")
    if not (np.any(t > 0) and np.any(t < 0)):
        raise InvalidProblem("both classes need at least one point")
    return X, t


def _distance_ratio(x: np.ndarray, t: float) -> RatioSpec:
    n = x.shape[0]

    def norm_grad(z: np.ndarray) -> np.ndarray:
        w = z[:n]
        return np.append(w / max(float(np.linalg.norm(w)), 1e-300), 0.0)

    return RatioSpec(
        numerator=lambda z: t * (x @ z[:n] + z[n]),
        denominator=lambda z: np.linalg.norm(z[:n], axis=0),
        grad_numerator=lambda z: t * np.append(x, 1.0),
        grad_denominator=norm_grad,
        curvature=Curvature.CONCAVE_CONVEX,
        vectorized=True,
    )


def svm_problem(points: Any, labels: Any) -> FPProblem:
    """max over (w, b) of min_i t_i (w^T x_i + b) / ||w||, with ||w|| <= 1 and b free."""
    X, t = _check(points, labels)
    return FPProblem(
        kind=ProblemKind.MAX_MIN,
        ratios=tuple(_distance_ratio(x, ti) for x, ti in zip(X, t)),
        constraint=ConstraintSet.ball(1.0, free_tail=1),
        dimension=X.shape[1] + 1,
    )


def signed_distances(points: Any, labels: Any, w: Any, b: float) -> np.ndarray:
    """t_i (w^T x_i + b) / ||w|| for every point."""
    X, t = _check(points, labels)
    w = np.asarray(w, dtype=float)
    return t * (X @ w + b) / np.linalg.norm(w)


def mean_split(points: Any, labels: Any) -> np.ndarray:
    """Start point: unit normal along the difference of class means, through their midpoint."""
    X, t = _check(points, labels)
    plus, minus = X[t > 0].mean(axis=0), X[t < 0].mean(axis=0)
    w = plus - minus
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        w = np.zeros(X.shape[1])
        w[0] = 1.0
    else:
        w = w / norm
    return np.append(w, -float(w @ (plus + minus)) / 2.0)


def solve_svm_margin(points: Any, labels: Any, config: Optional[SolverConfig] = None) -> MarginSolution:
    """Maximize the margin with the generalized Dinkelbach iteration.

    Raises NotSeparable when the best margin is not positive.
    """
    X, t = _check(points, labels)
    problem = svm_problem(X, t)
    z, margin, trace = maxmin_dinkelbach_solve(problem, config, mean_split(X, t))
    if margin <= MARGIN_THRESHOLD:
        raise NotSeparable(f"best margin {margin:.3e} over {X.shape[0]} points")
    n = X.shape[1]
    scale = float(np.linalg.norm(z[:n]))
    w, b = z[:n] / scale, float(z[n]) / scale
    logger.debug("SVM margin %.10g with w=%s, b=%.6g", margin, w.tolist(), b)
    return MarginSolution(w, b, margin, trace)


def margin_oracle(points: Any, labels: Any, resolution: float = 2e-4, zoom: Optional[float] = 1e-2) -> OracleResult:
    """Grid over the normal angle and the offset of a planar boundary; best_x is (theta, b)."""
    X, t = _check(points, labels)
    if X.shape[1] != 2:
        raise InvalidProblem(f"angle/offset grid needs planar points, got dimension {X.shape[1]}")
    reach = float(np.max(np.linalg.norm(X, axis=1)))

    def margins(Z: np.ndarray) -> np.ndarray:
        normals = np.stack([np.cos(Z[:, 0]), np.sin(Z[:, 0])], axis=1)
        return np.min(t * (normals @ X.T + Z[:, 1:2]), axis=1)

    return grid_oracle(
        margins, resolution, [(-math.pi, math.pi), (-reach, reach)], maximize=True, vectorized=True, zoom=zoom
    )


def separable_points(count: int, gap: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Points in [-2, 2]^2 with alternating labels, kept at distance >= gap from a random line."""
    if count < 2 or not gap > 0:
        raise InvalidProblem("need at least two points and a positive gap")
    rng = make_rng(seed)
    theta = rng.uniform(-math.pi, math.pi)
    normal = np.array([math.cos(theta), math.sin(theta)])
    offset = rng.uniform(-0.5, 0.5)
    X = np.empty((count, 2))
    t = np.where(np.arange(count) % 2 == 0, 1.0, -1.0)
    for k in range(count):
        while True:
            p = rng.uniform(-2.0, 2.0, size=2)
            s = t[k] * (normal @ p + offset)
            if s >= gap:
                X[k] = p
                break
    return X, t
