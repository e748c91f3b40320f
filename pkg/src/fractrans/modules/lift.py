"""Charnes-Cooper variable lift of a single-ratio problem, with an oracle over the lifted variables."""

import logging
from dataclasses import dataclass
from typing import Any, List, Optional, Tuple

import numpy as np

from fractrans.core.errors import DegenerateDenominator, DomainError, InvalidProblem
from fractrans.modules.inner import OracleResult, grid_oracle
from fractrans.modules.problem import (
    DEGENERACY_THRESHOLD,
    FPProblem,
    ProblemKind,
    RatioSpec,
    SetKind,
    make_rng,
)

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-12


class LiftedVector(np.ndarray):
    """q = x / B(x) that remembers the x it was lifted from.

    Slices and arithmetic results are plain lifted coordinates without an origin.
    """

    origin: Optional[np.ndarray]
    denominator: Optional[float]

    def __new__(cls, x: np.ndarray, b: float) -> "LiftedVector":
        obj = np.asarray(x / b).view(cls)
        obj.origin = x.copy()
        obj.denominator = b
        return obj

    def __array_finalize__(self, obj: Any) -> None:
        self.origin = None
        self.denominator = None

    def origin_of(self, z: float) -> Optional[np.ndarray]:
        """The lifted x when (self, z) is still exactly the pair produced by the lift."""
        if self.origin is None or self.denominator is None or z != 1.0 / self.denominator:
            return None
        if not np.array_equal(self.view(np.ndarray), self.origin / self.denominator):
            return None
        return self.origin.copy()


@dataclass(frozen=True, eq=False)
class LiftedProblem:
    """Single-ratio problem rewritten in z = 1/B(x), q = x/B(x).

    The lifted problem maximizes z A(q/z) subject to z B(q/z) <= 1 and q/z in
    the original constraint set.
    """

    problem: FPProblem

    @property
    def ratio(self) -> RatioSpec:
        """The lifted ratio."""
        return self.problem.ratios[0]

    def lift(self, x: np.ndarray) -> Tuple[np.ndarray, float]:
        """Map x to (q, z)."""
        x = np.asarray(x, dtype=float)
        b = float(self.ratio.denominator(x))
        if b < DEGENERACY_THRESHOLD:
            raise DegenerateDenominator(f"cannot lift x={x.tolist()}, denominator is {b:.3e}")
        return LiftedVector(x, b), 1.0 / b

    def recover(self, q: np.ndarray, z: float) -> np.ndarray:
        """Map (q, z) back to x = q / z, returning the original x bit for bit when (q, z) came from `lift`."""
        if not z > 0:
            raise DomainError(f"lifted point with z={z} has no preimage")
        if isinstance(q, LiftedVector):
            origin = q.origin_of(z)
            if origin is not None:
                return origin
        return np.asarray(q, dtype=float) / z

    def objective(self, q: np.ndarray, z: float) -> float:
        """Lifted objective z A(q/z)."""
        return z * float(self.ratio.numerator(self.recover(q, z)))

    def constraint(self, q: np.ndarray, z: float) -> float:
        """Lifted constraint z B(q/z) - 1, feasible when at most zero."""
        return z * float(self.ratio.denominator(self.recover(q, z))) - 1.0

    def is_feasible(self, q: np.ndarray, z: float) -> bool:
        """Check the lifted constraint and membership of q/z in the original set."""
        try:
            x = self.recover(q, z)
            return self.constraint(q, z) <= FEASIBILITY_TOL and self.problem.constraint.contains(x)
        except DomainError:
            return False

    def batch(self, X: np.ndarray) -> np.ndarray:
        """Lifted objective at every row (q, z) of X, NaN where infeasible."""
        X = np.atleast_2d(X)
        q, z = X[:, :-1], X[:, -1]
        out = np.full(X.shape[0], np.nan)
        positive = z > 0
        if not np.any(positive):
            return out
        x = q[positive] / z[positive, None]
        zp = z[positive]
        if self.ratio.vectorized:
            a = np.asarray(self.ratio.numerator(x.T), dtype=float)
            b = np.asarray(self.ratio.denominator(x.T), dtype=float)
        else:
            a = np.array([float(self.ratio.numerator(p)) for p in x])
            b = np.array([float(self.ratio.denominator(p)) for p in x])
        cset = self.problem.constraint
        if cset.kind == SetKind.BOX:
            inside = np.all((x >= cset.lower) & (x <= cset.upper), axis=1)  # type: ignore[operator]
        else:
            inside = np.array([cset.contains(p) for p in x])
        feasible = inside & (zp * b - 1.0 <= FEASIBILITY_TOL)
        values = np.where(feasible, zp * a, np.nan)
        out[positive] = values
        return out

    def bounds(self, samples: int = 1000, seed: int = 0) -> List[Tuple[float, float]]:
        """Bounding box of the lifted variables, estimated by sampling and padded by 10%."""
        d = self.problem.dimension
        cset = self.problem.constraint
        points = cset.sample(make_rng(seed), d, samples)
        if cset.kind == SetKind.BOX:
            points = np.vstack([points, np.broadcast_to(cset.lower, (d,)), np.broadcast_to(cset.upper, (d,))])
        lifted = []
        for x in points:
            try:
                q, z = self.lift(x)
            except DegenerateDenominator:
                continue
            lifted.append(np.append(q, z))
        if not lifted:
            raise DegenerateDenominator("no sampled point could be lifted")
        arr = np.array(lifted)
        lo, hi = arr.min(axis=0), arr.max(axis=0)
        pad = 0.1 * np.maximum(hi - lo, 1e-6)
        return [(float(a), float(b)) for a, b in zip(lo - pad, hi + pad)]


def charnes_cooper_lift(problem: FPProblem) -> LiftedProblem:
    """Lift a single-ratio problem into the (q, z) variables."""
    if problem.kind != ProblemKind.SINGLE:
        raise InvalidProblem(f"Charnes-Cooper lift needs a single ratio, got {problem.kind}")
    return LiftedProblem(problem)


def lifted_grid_oracle(
    lifted: LiftedProblem, resolution: float, zoom: Optional[float] = None, seed: int = 0
) -> Tuple[np.ndarray, OracleResult]:
    """Grid search over the lifted variables.

    Returns
    -------
        the recovered original point and the oracle result in lifted variables

    """
    result = grid_oracle(lifted.batch, resolution, lifted.bounds(seed=seed), vectorized=True, zoom=zoom)
    q, z = result.best_x[:-1], float(result.best_x[-1])
    x = lifted.recover(q, z)
    logger.debug("Lifted oracle: value %.10g at x=%s", result.best_value, x.tolist())
    return x, result
