"""Inner solvers: projections, projected gradient ascent, 1-D search, epigraph step and brute-force oracles."""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from fractrans.core.errors import (
    BudgetExceeded,
    DegenerateDenominator,
    DomainError,
    InnerSolverFailure,
    MaxItersError,
    UnsupportedSet,
)
from fractrans.modules.problem import (
    ConstraintSet,
    FPProblem,
    ProblemKind,
    SetKind,
    evaluate_objective,
    evaluate_objective_batch,
)

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
MIN_STEP = 1e-20
GRID_MAX_DIMENSION = 3
ENUMERATION_BUDGET = 1 << 20


@dataclass
class InnerResult:
    """Outcome of an inner convex solve."""

    x: np.ndarray
    value: float
    iterations: int
    residual: float
    converged: bool


@dataclass
class OracleResult:
    """Best point found by exhaustive search."""

    best_x: Any
    best_value: float
    evaluations: int


def _simplex_vector(v: np.ndarray, total: float) -> np.ndarray:
    n = v.shape[0]
    u = -np.sort(-v)
    thresholds = (np.cumsum(u) - total) / np.arange(1, n + 1)
    k = int(np.flatnonzero(u > thresholds)[-1])
    return np.maximum(v - thresholds[k], 0.0)


def project(cset: ConstraintSet, x: np.ndarray) -> np.ndarray:
    """Euclidean projection of x onto the set, a new array is always returned."""
    x = np.array(x, copy=True)
    match cset.kind:
        case SetKind.UNCONSTRAINED:
            return x
        case SetKind.BOX:
            return np.clip(x, cset.lower, cset.upper)
        case SetKind.BALL:
            lead = x.shape[0] - cset.free_tail
            center = 0.0 if cset.center is None else cset.center
            v = x[:lead] - center
            norm = float(np.linalg.norm(v))
            if norm > cset.radius:  # type: ignore[operator]
                x[:lead] = center + v * (cset.radius / norm)  # type: ignore[operator]
            return x
        case SetKind.COLUMN_BALL:
            cols = x.reshape(x.shape[0], -1)
            norms = np.linalg.norm(cols, axis=0)
            scale = np.minimum(1.0, cset.radius / np.maximum(norms, 1e-300))  # type: ignore[operator]
            return (cols * scale).reshape(x.shape)
        case SetKind.SIMPLEX:
            flat = np.real(x).astype(float).reshape(-1)
            return _simplex_vector(flat, float(cset.total)).reshape(x.shape)  # type: ignore[arg-type]
        case SetKind.ASSIGNMENT:
            return assignment_argmax(np.real(x))
    raise UnsupportedSet(f"no projection onto {cset.kind}")


def assignment_argmax(scores: np.ndarray) -> np.ndarray:
    """One-hot matrix selecting the best column of each row, ties to the lowest index."""
    scores = np.atleast_2d(scores)
    out = np.zeros(scores.shape)
    out[np.arange(scores.shape[0]), np.argmax(scores, axis=1)] = 1.0
    return out


def projected_gradient_max(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    cset: ConstraintSet,
    x0: np.ndarray,
    tol: float = 1e-9,
    max_iters: int = 2000,
    raise_on_max: bool = False,
) -> InnerResult:
    """Maximize a concave f over the set by projected gradient ascent with backtracking.

    The step is halved until the Armijo condition holds and doubled after every
    accepted step. Iterates never decrease f. Stops when the projected-gradient
    residual ||x - P(x + grad f(x))|| drops below tol.

    Args:
    ----
        f: concave objective, may return -inf outside its domain
        grad: gradient (ascent direction) of f
        cset: feasible set
        x0: starting point, projected before use
        tol: residual tolerance
        max_iters: iteration cap
        raise_on_max: raise MaxItersError instead of returning the last iterate

    """
    x = project(cset, x0)
    fx = float(f(x))
    if not math.isfinite(fx):
        raise InnerSolverFailure(f"inner objective is {fx} at the starting point")
    step = 1.0
    residual = math.inf
    for it in range(max_iters):
        g = grad(x)
        residual = float(np.linalg.norm(x - project(cset, x + g)))
        if residual <= tol:
            return InnerResult(x, fx, it, residual, True)
        while True:
            x_new = project(cset, x + step * g)
            f_new = float(f(x_new))
            gain = float(np.real(np.vdot(g, x_new - x)))
            if math.isfinite(f_new) and f_new >= fx + ARMIJO * gain:
                break
            step *= 0.5
            if step < MIN_STEP:
                logger.debug("Projected gradient stalled after %d iterations (residual %.3e)", it, residual)
                return InnerResult(x, fx, it, residual, False)
        x, fx = x_new, f_new
        step *= 2.0

    if raise_on_max:
        raise MaxItersError(f"projected gradient did not reach residual {tol} in {max_iters} iterations")
    logger.debug("Projected gradient hit %d iterations (residual %.3e)", max_iters, residual)
    return InnerResult(x, fx, max_iters, residual, False)


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10, max_iters: int = 300
) -> Tuple[float, float]:
    """Maximize a unimodal scalar function on [lo, hi], the endpoints are always compared."""
    if hi < lo:
        raise DomainError(f"empty interval [{lo}, {hi}]")
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iters):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    candidates = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    best_value, best_x = max(candidates, key=lambda t: t[0])
    return float(best_x), float(best_value)


def epigraph_maxmin_step(
    terms: Sequence[Tuple[Callable[[np.ndarray], float], Callable[[np.ndarray], np.ndarray]]],
    cset: ConstraintSet,
    x0: np.ndarray,
    tol: float = 1e-9,
    max_iters: int = 2000,
) -> Tuple[np.ndarray, float]:
    """Maximize min_i f_i(x) through its epigraph form with SLSQP.

    Solves max s subject to f_i(x) >= s over the set. Returns the projected
    maximizer and the attained min_i f_i.
    """
    x0 = np.asarray(x0, dtype=float)
    d = x0.shape[0]
    bounds: Optional[List[Tuple[Optional[float], Optional[float]]]] = None
    constraints: List[dict] = []
    for f, g in terms:
        constraints.append(
            {
                "type": "ineq",
                "fun": lambda z, f=f: float(f(z[:d])) - z[d],
                "jac": lambda z, g=g: np.append(np.asarray(g(z[:d]), dtype=float), -1.0),
            }
        )
    match cset.kind:
        case SetKind.BOX:
            lo = np.broadcast_to(cset.lower, (d,))  # type: ignore[arg-type]
            hi = np.broadcast_to(cset.upper, (d,))  # type: ignore[arg-type]
            bounds = [(float(a), float(b)) for a, b in zip(lo, hi)] + [(None, None)]
        case SetKind.BALL:
            lead = d - cset.free_tail
            center = np.zeros(lead) if cset.center is None else np.asarray(cset.center, dtype=float)
            r2 = float(cset.radius) ** 2  # type: ignore[arg-type]

            def ball(z: np.ndarray) -> float:
                return r2 - float(np.sum((z[:lead] - center) ** 2))

            def ball_jac(z: np.ndarray) -> np.ndarray:
                jac = np.zeros(d + 1)
                jac[:lead] = -2.0 * (z[:lead] - center)
                return jac

            constraints.append({"type": "ineq", "fun": ball, "jac": ball_jac})
        case SetKind.UNCONSTRAINED:
            pass
        case _:
            raise UnsupportedSet(f"epigraph step does not support {cset.kind}")

    x_start = project(cset, x0)
    s0 = min(float(f(x_start)) for f, _ in terms)
    z0 = np.append(x_start, s0)

    def neg_s(z: np.ndarray) -> float:
        return -float(z[d])

    def neg_s_jac(z: np.ndarray) -> np.ndarray:
        jac = np.zeros(d + 1)
        jac[d] = -1.0
        return jac

    res = minimize(
        neg_s,
        z0,
        jac=neg_s_jac,
        bounds=bounds,
        constraints=constraints,
        method="SLSQP",
        options={"maxiter": max_iters, "ftol": tol},
    )
    if not np.all(np.isfinite(res.x)):
        raise InnerSolverFailure(f"epigraph step failed: {res.message}")
    if not res.success:
        logger.debug("SLSQP reported: %s", res.message)
    x = project(cset, res.x[:d])
    return x, min(float(f(x)) for f, _ in terms)


def _axis(lo: float, hi: float, spacing: float) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    n = int(math.ceil((hi - lo) / spacing - 1e-9)) + 1
    return np.linspace(lo, hi, n)


def _sweep(
    batch: Callable[[np.ndarray], np.ndarray], axes: Sequence[np.ndarray], maximize: bool, chunk: int
) -> Tuple[Optional[np.ndarray], float, int]:
    shape = tuple(len(a) for a in axes)
    total = int(np.prod(shape))
    best_x: Optional[np.ndarray] = None
    best_value = -math.inf if maximize else math.inf
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, total)), shape)
        X = np.column_stack([axes[j][idx[j]] for j in range(len(axes))])
        values = np.asarray(batch(X), dtype=float)
        if np.all(np.isnan(values)):
            continue
        k = int(np.nanargmax(values) if maximize else np.nanargmin(values))
        if (maximize and values[k] > best_value) or (not maximize and values[k] < best_value):
            best_value = float(values[k])
            best_x = X[k].copy()
    return best_x, best_value, total


def _ball_mask(cset: ConstraintSet, X: np.ndarray) -> np.ndarray:
    lead = X.shape[1] - cset.free_tail
    center = 0.0 if cset.center is None else cset.center
    return np.linalg.norm(X[:, :lead] - center, axis=1) <= cset.radius  # type: ignore[operator]


def grid_oracle(
    target: FPProblem | Callable[[np.ndarray], Any],
    resolution: float,
    bounds: Optional[Sequence[Tuple[float, float]]] = None,
    *,
    maximize: Optional[bool] = None,
    vectorized: bool = False,
    zoom: Optional[float] = None,
    chunk: int = 1 << 20,
) -> OracleResult:
    """Exhaustive grid search over a box of dimension at most three.

    With `zoom` set, a coarse grid of that spacing is searched first and the
    grid of spacing `resolution` is then laid over +-2 * zoom around the coarse
    winner.

    Args:
    ----
        target: problem (its constraint supplies the bounds) or objective of a point
        resolution: grid spacing of the final pass
        bounds: per-coordinate (lo, hi), required for callables
        maximize: sense of the search, taken from the problem when missing
        vectorized: a callable target accepts an (n, d) array
        zoom: spacing of the optional coarse pass
        chunk: number of grid points evaluated per batch

    """
    if isinstance(target, FPProblem):
        problem = target
        if problem.kind == ProblemKind.MATRIX:
            raise UnsupportedSet("grid oracle does not search matrix variables")
        if problem.constraint.kind not in (SetKind.BOX, SetKind.BALL, SetKind.UNCONSTRAINED):
            raise UnsupportedSet(f"grid oracle does not search {problem.constraint.kind}")
        if bounds is None:
            bounds = problem.constraint.bounds(problem.dimension)
        sense = problem.maximize if maximize is None else maximize
        cset = problem.constraint

        def batch(X: np.ndarray) -> np.ndarray:
            values = evaluate_objective_batch(problem, X)
            if cset.kind == SetKind.BALL:
                values[~_ball_mask(cset, X)] = np.nan
            return values

        def exact(x: np.ndarray) -> float:
            return evaluate_objective(problem, x)

    else:
        if bounds is None:
            raise UnsupportedSet("grid oracle needs bounds for a callable target")
        sense = True if maximize is None else maximize
        fn = target

        def batch(X: np.ndarray) -> np.ndarray:
            if vectorized:
                return np.asarray(fn(X), dtype=float)
            out = np.full(X.shape[0], np.nan)
            for n, x in enumerate(X):
                try:
                    out[n] = float(fn(x))
                except (DegenerateDenominator, DomainError):
                    pass
            return out

        def exact(x: np.ndarray) -> float:
            return float(batch(x[None, :])[0])

    if len(bounds) > GRID_MAX_DIMENSION:
        raise BudgetExceeded(f"grid oracle supports at most {GRID_MAX_DIMENSION} dimensions, got {len(bounds)}")

    evaluations = 0
    best_x: Optional[np.ndarray] = None
    if zoom is not None and zoom > resolution:
        coarse_x, _, count = _sweep(batch, [_axis(lo, hi, zoom) for lo, hi in bounds], sense, chunk)
        evaluations += count
        if coarse_x is not None:
            fine_axes = [
                _axis(max(lo, c - 2.0 * zoom), min(hi, c + 2.0 * zoom), resolution)
                for (lo, hi), c in zip(bounds, coarse_x)
            ]
            fine_x, _, count = _sweep(batch, fine_axes, sense, chunk)
            evaluations += count
            best_x = fine_x if fine_x is not None else coarse_x
    else:
        best_x, _, evaluations = _sweep(batch, [_axis(lo, hi, resolution) for lo, hi in bounds], sense, chunk)

    if best_x is None:
        raise DegenerateDenominator("objective undefined on every grid point")
    best_value = exact(best_x)
    logger.debug("Grid oracle: %d evaluations, best %.10g at %s", evaluations, best_value, best_x.tolist())
    return OracleResult(best_x, best_value, evaluations)


def enumerate_oracle(
    objective: Callable[[Tuple[int, ...]], float], sizes: Sequence[int], maximize: bool = True
) -> OracleResult:
    """Exhaustive search over all index tuples, the first best tuple wins ties."""
    budget = math.prod(sizes)
    if budget > ENUMERATION_BUDGET:
        raise BudgetExceeded(f"enumeration of {budget} candidates exceeds {ENUMERATION_BUDGET}")
    best_x: Optional[Tuple[int, ...]] = None
    best_value = -math.inf if maximize else math.inf
    for choice in itertools.product(*(range(k) for k in sizes)):
        try:
            value = float(objective(choice))
        except (DegenerateDenominator, DomainError):
            continue
        if (maximize and value > best_value) or (not maximize and value < best_value):
            best_x, best_value = choice, value
    if best_x is None:
        raise DegenerateDenominator("objective undefined on every candidate")
    return OracleResult(best_x, best_value, budget)
