"""Problem model shared by every transform: ratios, outer functions, constraint sets, configuration and traces."""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Protocol, Tuple

import numpy as np

from fractrans.core.errors import ConfigError, DegenerateDenominator, DomainError, InvalidProblem

logger = logging.getLogger(__name__)

# Denominators below this value are treated as modeling errors.
DEGENERACY_THRESHOLD = 1e-12

Evaluator = Callable[[np.ndarray], Any]
GradEvaluator = Callable[[np.ndarray], np.ndarray]


def make_rng(seed: int) -> np.random.Generator:
    """Return the counter-based Philox4x64 generator used for every random draw."""
    return np.random.Generator(np.random.Philox(seed))


class ProblemKind(StrEnum):
    """Families of fractional programs."""

    SINGLE = "single"
    MAX_MIN = "max-min"
    SUM_MAX = "sum-max"
    SUM_MIN = "sum-min"
    SUM_OF_FUNCTIONS = "sum-of-functions"
    LOG_RATIO = "log-ratio"
    MATRIX = "matrix"


class Curvature(StrEnum):
    """Declared curvature of a numerator/denominator pair."""

    CONCAVE_CONVEX = "concave-convex"
    CONVEX_CONCAVE = "convex-concave"
    GENERIC = "generic"


class Monotonicity(StrEnum):
    """Declared monotonicity of an outer function."""

    NONDECREASING = "nondecreasing"
    NONINCREASING = "nonincreasing"


class OuterKind(StrEnum):
    """Built-in outer functions."""

    IDENTITY = "identity"
    LOG1P = "log1p"
    LOG_ONE_MINUS = "log-one-minus"
    NEGATED_IDENTITY = "negated-identity"
    CUSTOM = "custom"


class SetKind(StrEnum):
    """Constraint set families supported by the projections."""

    BOX = "box"
    BALL = "euclidean-ball"
    COLUMN_BALL = "per-column-ball"
    SIMPLEX = "simplex"
    ASSIGNMENT = "discrete-assignment"
    UNCONSTRAINED = "unconstrained"


class TraceStatus(StrEnum):
    """Terminal status of a solve."""

    CONVERGED = "converged"
    MAX_ITERS = "max-iters"
    DEGENERATE = "degenerate"


def finite_difference_gradient(f: Evaluator, x: np.ndarray) -> np.ndarray:
    """Central-difference gradient with per-coordinate step 1e-6 * (1 + |x_j|)."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for j in range(x.size):
        h = 1e-6 * (1.0 + abs(x.flat[j]))
        e = np.zeros_like(x)
        e.flat[j] = h
        grad.flat[j] = (float(f(x + e)) - float(f(x - e))) / (2.0 * h)
    return grad


@dataclass(frozen=True)
class RatioSpec:
    """One ratio term A(x)/B(x)."""

    numerator: Evaluator
    """Numerator A(x)"""
    denominator: Evaluator
    """Denominator B(x)"""
    grad_numerator: Optional[GradEvaluator] = None
    """Gradient of A, finite differences are used when missing"""
    grad_denominator: Optional[GradEvaluator] = None
    """Gradient of B, finite differences are used when missing"""
    curvature: Curvature = Curvature.GENERIC
    """Declared curvature, checked by `validate_problem`"""
    vectorized: bool = False
    """Evaluators accept a (dimension, n) array and return n values"""

    def values(self, x: np.ndarray) -> Tuple[float, float]:
        """Return (A(x), B(x))."""
        return float(self.numerator(x)), float(self.denominator(x))

    def gradients(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return (grad A(x), grad B(x))."""
        if self.grad_numerator is not None:
            ga = np.asarray(self.grad_numerator(x), dtype=float)
        else:
            ga = finite_difference_gradient(self.numerator, x)
        if self.grad_denominator is not None:
            gb = np.asarray(self.grad_denominator(x), dtype=float)
        else:
            gb = finite_difference_gradient(self.denominator, x)
        return ga, gb


@dataclass(frozen=True)
class OuterFunction:
    """Monotone function applied to a ratio in sum-of-functions problems."""

    kind: OuterKind
    monotonicity: Monotonicity
    evaluator: Callable[[Any], Any]
    derivative: Callable[[Any], Any]
    lower: float = -math.inf
    """Open lower end of the domain"""
    upper: float = math.inf
    """Open upper end of the domain"""

    @classmethod
    def identity(cls) -> "OuterFunction":
        """f(r) = r."""
        return cls(OuterKind.IDENTITY, Monotonicity.NONDECREASING, lambda r: r, lambda r: np.ones_like(r))

    @classmethod
    def log1p(cls) -> "OuterFunction":
        """f(r) = ln(1 + r)."""
        return cls(OuterKind.LOG1P, Monotonicity.NONDECREASING, np.log1p, lambda r: 1.0 / (1.0 + r), lower=-1.0)

    @classmethod
    def log_one_minus(cls) -> "OuterFunction":
        """f(r) = ln(1 - r)."""
        return cls(
            OuterKind.LOG_ONE_MINUS,
            Monotonicity.NONINCREASING,
            lambda r: np.log1p(-r),
            lambda r: -1.0 / (1.0 - r),
            upper=1.0,
        )

    @classmethod
    def negated_identity(cls) -> "OuterFunction":
        """f(r) = -r."""
        return cls(
            OuterKind.NEGATED_IDENTITY, Monotonicity.NONINCREASING, lambda r: -r, lambda r: -np.ones_like(r)
        )

    @classmethod
    def custom(
        cls,
        evaluator: Callable[[Any], Any],
        derivative: Callable[[Any], Any],
        monotonicity: Monotonicity,
        lower: float = -math.inf,
        upper: float = math.inf,
    ) -> "OuterFunction":
        """User supplied outer function."""
        return cls(OuterKind.CUSTOM, monotonicity, evaluator, derivative, lower, upper)

    def in_domain(self, r: float) -> bool:
        """Check that r lies strictly inside the domain."""
        return self.lower < r < self.upper

    def __call__(self, r: float) -> float:
        """Evaluate, raising DomainError outside the domain."""
        if not self.in_domain(r):
            raise DomainError(f"{self.kind} outer function evaluated at {r} outside ({self.lower}, {self.upper})")
        return float(self.evaluator(r))

    def value_or_sentinel(self, r: float) -> float:
        """Evaluate, mapping arguments outside the domain to -inf."""
        if not self.in_domain(r):
            return -math.inf
        return float(self.evaluator(r))

    def grad(self, r: float) -> float:
        """Derivative at r."""
        return float(self.derivative(r))


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Feasible set description understood by `inner.project`."""

    kind: SetKind
    lower: Optional[np.ndarray] = None
    """Box lower bounds"""
    upper: Optional[np.ndarray] = None
    """Box upper bounds"""
    radius: Optional[float] = None
    """Ball or per-column ball radius"""
    center: Optional[np.ndarray] = None
    """Ball center, origin when missing"""
    total: Optional[float] = None
    """Simplex coordinate sum"""
    shape: Optional[Tuple[int, int]] = None
    """(points, clusters) of a discrete assignment"""
    free_tail: int = 0
    """Trailing coordinates left unconstrained by a ball"""

    def __post_init__(self) -> None:
        """Check the structural invariants of the set."""
        match self.kind:
            case SetKind.BOX:
                if self.lower is None or self.upper is None:
                    raise InvalidProblem("box needs lower and upper bounds")
                if np.any(np.asarray(self.lower) > np.asarray(self.upper)):
                    raise InvalidProblem("box lower bound exceeds upper bound")
            case SetKind.BALL | SetKind.COLUMN_BALL:
                if self.radius is None or not self.radius > 0:
                    raise InvalidProblem(f"{self.kind} needs a positive radius")
                if self.free_tail < 0:
                    raise InvalidProblem("free_tail must be nonnegative")
            case SetKind.SIMPLEX:
                if self.total is None or not self.total > 0:
                    raise InvalidProblem("simplex needs a positive total")
            case SetKind.ASSIGNMENT:
                if self.shape is None or min(self.shape) < 1:
                    raise InvalidProblem("assignment needs a (points, clusters) shape")

    @classmethod
    def box(cls, lower: Any, upper: Any) -> "ConstraintSet":
        """Componentwise bounds lower <= x <= upper."""
        return cls(SetKind.BOX, lower=np.asarray(lower, dtype=float), upper=np.asarray(upper, dtype=float))

    @classmethod
    def ball(cls, radius: float, center: Any = None, free_tail: int = 0) -> "ConstraintSet":
        """Euclidean ball ||x - center|| <= radius."""
        c = None if center is None else np.asarray(center)
        return cls(SetKind.BALL, radius=float(radius), center=c, free_tail=free_tail)

    @classmethod
    def column_ball(cls, radius: float) -> "ConstraintSet":
        """Every column of a matrix variable inside a ball of the given radius."""
        return cls(SetKind.COLUMN_BALL, radius=float(radius))

    @classmethod
    def simplex(cls, total: float = 1.0) -> "ConstraintSet":
        """x >= 0 with coordinates summing to total."""
        return cls(SetKind.SIMPLEX, total=float(total))

    @classmethod
    def assignment(cls, points: int, clusters: int) -> "ConstraintSet":
        """One-hot rows of a points x clusters matrix."""
        return cls(SetKind.ASSIGNMENT, shape=(points, clusters))

    @classmethod
    def unconstrained(cls) -> "ConstraintSet":
        """The whole space."""
        return cls(SetKind.UNCONSTRAINED)

    def bounds(self, dimension: int) -> List[Tuple[float, float]]:
        """Finite per-coordinate bounding interval, used to seed grid searches."""
        match self.kind:
            case SetKind.BOX:
                lo = np.broadcast_to(self.lower, (dimension,))  # type: ignore[arg-type]
                hi = np.broadcast_to(self.upper, (dimension,))  # type: ignore[arg-type]
                return [(float(a), float(b)) for a, b in zip(lo, hi)]
            case SetKind.BALL:
                c = np.zeros(dimension) if self.center is None else np.broadcast_to(self.center, (dimension,))
                r = float(self.radius)  # type: ignore[arg-type]
                return [(float(ci) - r, float(ci) + r) for ci in c]
            case SetKind.SIMPLEX:
                return [(0.0, float(self.total))] * dimension  # type: ignore[arg-type]
        raise InvalidProblem(f"{self.kind} has no finite bounding box")

    def sample(self, rng: np.random.Generator, dimension: int, count: int) -> np.ndarray:
        """Draw `count` feasible real points, shape (count, dimension)."""
        match self.kind:
            case SetKind.BOX:
                lo = np.broadcast_to(self.lower, (dimension,)).astype(float)  # type: ignore[arg-type]
                hi = np.broadcast_to(self.upper, (dimension,)).astype(float)  # type: ignore[arg-type]
                hi = np.where(np.isfinite(hi), hi, np.where(np.isfinite(lo), lo + 20.0, 10.0))
                lo = np.where(np.isfinite(lo), lo, hi - 20.0)
                return lo + (hi - lo) * rng.random((count, dimension))
            case SetKind.BALL:
                direction = rng.standard_normal((count, dimension))
                direction /= np.linalg.norm(direction, axis=1, keepdims=True)
                scale = float(self.radius) * rng.random((count, 1)) ** (1.0 / dimension)  # type: ignore[arg-type]
                center = 0.0 if self.center is None else self.center
                return center + direction * scale
            case SetKind.SIMPLEX:
                return float(self.total) * rng.dirichlet(np.ones(dimension), size=count)  # type: ignore[arg-type]
            case SetKind.UNCONSTRAINED:
                return 10.0 * rng.standard_normal((count, dimension))
        raise InvalidProblem(f"sampling is not supported for {self.kind}")

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        """Check feasibility of x within tol."""
        x = np.asarray(x)
        match self.kind:
            case SetKind.BOX:
                return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))  # type: ignore[operator]
            case SetKind.BALL:
                v = x if self.center is None else x - self.center
                if self.free_tail:
                    v = v[: v.shape[0] - self.free_tail]
                return bool(np.linalg.norm(v) <= self.radius + tol)  # type: ignore[operator]
            case SetKind.COLUMN_BALL:
                cols = x.reshape(x.shape[0], -1)
                return bool(np.all(np.linalg.norm(cols, axis=0) <= self.radius + tol))  # type: ignore[operator]
            case SetKind.SIMPLEX:
                return bool(np.all(x >= -tol) and abs(float(np.sum(x)) - self.total) <= tol)  # type: ignore[operator]
            case SetKind.ASSIGNMENT:
                is_binary = np.all((np.abs(x) <= tol) | (np.abs(x - 1.0) <= tol))
                return bool(x.shape == self.shape and is_binary and np.allclose(x.sum(axis=1), 1.0, atol=tol))
        return True


class ObjectiveModel(Protocol):
    """Anything exposing the true objective of a matrix-ratio problem."""

    def objective(self, x: np.ndarray) -> float:
        """Evaluate the original objective at x."""
        ...


@dataclass(frozen=True, eq=False)
class FPProblem:
    """A tagged family of ratio terms with weights and a constraint set."""

    kind: ProblemKind
    ratios: Tuple[RatioSpec, ...]
    constraint: ConstraintSet
    dimension: int
    weights: Optional[np.ndarray] = None
    """Positive weights w_i, all ones when missing"""
    outer: Optional[Tuple[OuterFunction, ...]] = None
    """One outer function per ratio, used by the sum-of-functions kind"""
    matrix: Optional[ObjectiveModel] = None
    """Matrix-ratio model evaluated by the matrix kind"""

    def __post_init__(self) -> None:
        """Normalize weights and check the structural invariants."""
        object.__setattr__(self, "ratios", tuple(self.ratios))
        n = len(self.ratios)
        if self.kind == ProblemKind.MATRIX:
            if self.matrix is None:
                raise InvalidProblem("matrix problems need a matrix model")
        elif n == 0:
            raise InvalidProblem(f"{self.kind} problem without ratios")
        if self.kind == ProblemKind.SINGLE and n != 1:
            raise InvalidProblem(f"single-ratio problem with {n} ratios")
        if self.dimension < 1:
            raise InvalidProblem("dimension must be positive")
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float).reshape(-1)
        if self.kind != ProblemKind.MATRIX and w.shape != (n,):
            raise InvalidProblem(f"{w.size} weights for {n} ratios")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidProblem("weights must be finite and strictly positive")
        object.__setattr__(self, "weights", w)
        if self.outer is not None:
            object.__setattr__(self, "outer", tuple(self.outer))
            if len(self.outer) != n:
                raise InvalidProblem(f"{len(self.outer)} outer functions for {n} ratios")
        elif self.kind == ProblemKind.SUM_OF_FUNCTIONS:
            raise InvalidProblem("sum-of-functions problem without outer functions")

    @property
    def maximize(self) -> bool:
        """Sense of the original problem."""
        return self.kind != ProblemKind.SUM_MIN

    @property
    def w(self) -> np.ndarray:
        """Weights as a float array."""
        return self.weights  # type: ignore[return-value]


@dataclass(frozen=True)
class SolverConfig:
    """Iteration limits and tolerances shared by the drivers."""

    max_iters: int = 500
    obj_tol: float = 1e-8
    inner_tol: float = 1e-9
    inner_max_iters: int = 2000
    step_tol: Optional[float] = None
    """When set, convergence also needs ||x_k - x_(k-1)|| <= step_tol * (1 + ||x_(k-1)||)"""
    inner_sweeps: int = 1
    seed: int = 0
    variant: Optional[str] = None

    def __post_init__(self) -> None:
        """Reject impossible limits."""
        if self.max_iters < 1 or self.inner_max_iters < 1 or self.inner_sweeps < 1:
            raise ConfigError("iteration limits must be at least 1")
        if not (self.obj_tol > 0 and self.inner_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.step_tol is not None and not self.step_tol > 0:
            raise ConfigError("step_tol must be positive when set")

    @classmethod
    def from_benchcfg(cls, solver: Dict[str, Any], seed: int = 0, variant: Optional[str] = None) -> "SolverConfig":
        """Build from the SOLVER section of benchcfg.yaml."""
        return cls(
            max_iters=solver["MAX_ITERS"],
            obj_tol=solver["OBJ_TOL"],
            inner_tol=solver["INNER_TOL"],
            inner_max_iters=solver["INNER_MAX_ITERS"],
            step_tol=solver.get("STEP_TOL"),
            inner_sweeps=solver["INNER_SWEEPS"],
            seed=seed,
            variant=variant,
        )

    def converged(self, previous: float, current: float, x_prev: Any = None, x: Any = None) -> bool:
        """Apply the objective-change test and the optional iterate-change test."""
        if not abs(current - previous) <= self.obj_tol:
            return False
        if self.step_tol is None or x_prev is None or x is None:
            return True
        step = float(np.linalg.norm(np.asarray(x) - np.asarray(x_prev)))
        return step <= self.step_tol * (1.0 + float(np.linalg.norm(x_prev)))


@dataclass
class TraceRecord:
    """One row of a solver trace."""

    iter: int = field(metadata={"csvnames": ["iter"]})
    objective: float = field(metadata={"csvnames": ["objective"]})
    """True objective of the original problem"""
    surrogate: float = field(metadata={"csvnames": ["surrogate"]})
    """Surrogate value that produced this iterate"""
    aux_norm: float = field(metadata={"csvnames": ["aux_norm"]})
    """Euclidean norm of all auxiliary variables"""
    elapsed_ms: float = field(metadata={"csvnames": ["elapsed_ms"]})
    """Wall time since the solve started"""


@dataclass
class SolverTrace:
    """Per-iteration history of a solve."""

    maximize: bool = True
    monotone_required: bool = True
    records: List[TraceRecord] = field(default_factory=list)
    status: TraceStatus = TraceStatus.MAX_ITERS
    aux: Any = None
    """Auxiliary state of the last iteration"""
    info: Dict[str, Any] = field(default_factory=dict)
    _start: float = field(default_factory=time.perf_counter, repr=False)

    def record(self, objective: float, surrogate: float, aux_norm: float) -> TraceRecord:
        """Append the next record."""
        rec = TraceRecord(
            iter=len(self.records),
            objective=float(objective),
            surrogate=float(surrogate),
            aux_norm=float(aux_norm),
            elapsed_ms=(time.perf_counter() - self._start) * 1e3,
        )
        self.records.append(rec)
        return rec

    @property
    def objectives(self) -> np.ndarray:
        """Objective column."""
        return np.array([r.objective for r in self.records])

    @property
    def iterations(self) -> int:
        """Number of completed updates (the first record is the start point)."""
        return max(len(self.records) - 1, 0)

    @property
    def final_objective(self) -> float:
        """Objective of the last record."""
        return self.records[-1].objective

    def worst_step(self) -> float:
        """Largest move against the optimization direction, 0 when monotone."""
        values = self.objectives
        if values.size < 2:
            return 0.0
        steps = np.diff(values)
        against = -steps if self.maximize else steps
        return float(max(np.max(against), 0.0))

    def is_monotone(self, slack: float = 1e-10) -> bool:
        """Check the per-step monotonicity contract."""
        return self.worst_step() <= slack


class Solution(NamedTuple):
    """Result of a solver driver."""

    x: Any
    value: float
    trace: SolverTrace


@dataclass(frozen=True)
class Diagnostic:
    """One finding of `validate_problem`."""

    code: str
    message: str
    index: Optional[int] = None
    """Ratio index the finding refers to"""


def evaluate_ratios(problem: FPProblem, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate all numerators and denominators, rejecting degenerate denominators."""
    pairs = [r.values(x) for r in problem.ratios]
    A = np.array([p[0] for p in pairs])
    B = np.array([p[1] for p in pairs])
    bad = np.flatnonzero(~(B >= DEGENERACY_THRESHOLD))
    if bad.size:
        i = int(bad[0])
        raise DegenerateDenominator(f"denominator {i} is {B[i]:.3e} at x={np.asarray(x).tolist()}")
    return A, B


def _combine(problem: FPProblem, ratios: np.ndarray) -> float:
    w = problem.w
    match problem.kind:
        case ProblemKind.SINGLE:
            return float(ratios[0])
        case ProblemKind.MAX_MIN:
            return float(np.min(ratios))
        case ProblemKind.SUM_MAX | ProblemKind.SUM_MIN:
            return float(np.dot(w, ratios))
        case ProblemKind.SUM_OF_FUNCTIONS:
            return float(sum(wi * f(ri) for wi, f, ri in zip(w, problem.outer, ratios)))  # type: ignore[arg-type]
        case ProblemKind.LOG_RATIO:
            if np.any(ratios <= -1.0):
                raise DomainError("log-ratio objective needs every ratio above -1")
            return float(np.dot(w, np.log1p(ratios)))
    raise InvalidProblem(f"cannot combine ratios of a {problem.kind} problem")


def evaluate_objective(problem: FPProblem, x: np.ndarray) -> float:
    """Exact objective of the original problem at x."""
    if problem.kind == ProblemKind.MATRIX:
        return float(problem.matrix.objective(x))  # type: ignore[union-attr]
    A, B = evaluate_ratios(problem, x)
    return _combine(problem, A / B)


def evaluate_objective_batch(problem: FPProblem, X: np.ndarray) -> np.ndarray:
    """Objective at every row of X, NaN where the objective is undefined.

    Uses the vectorized evaluators when every ratio declares them, so that
    oracles can sweep millions of points.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    vectorized = problem.kind != ProblemKind.MATRIX and all(r.vectorized for r in problem.ratios)
    if not vectorized:
        out = np.full(X.shape[0], np.nan)
        for n, x in enumerate(X):
            try:
                out[n] = evaluate_objective(problem, x)
            except (DegenerateDenominator, DomainError):
                pass
        return out

    cols = X.T
    with np.errstate(divide="ignore", invalid="ignore"):
        A = np.stack([np.broadcast_to(r.numerator(cols), (X.shape[0],)) for r in problem.ratios])
        B = np.stack([np.broadcast_to(r.denominator(cols), (X.shape[0],)) for r in problem.ratios])
        R = np.where(B >= DEGENERACY_THRESHOLD, A / B, np.nan)
        w = problem.w[:, None]
        match problem.kind:
            case ProblemKind.SINGLE:
                out = R[0]
            case ProblemKind.MAX_MIN:
                out = np.min(R, axis=0)
            case ProblemKind.SUM_MAX | ProblemKind.SUM_MIN:
                out = np.sum(w * R, axis=0)
            case ProblemKind.LOG_RATIO:
                out = np.sum(w * np.where(R > -1.0, np.log1p(R), np.nan), axis=0)
            case ProblemKind.SUM_OF_FUNCTIONS:
                terms = []
                for i, f in enumerate(problem.outer):  # type: ignore[arg-type]
                    inside = (R[i] > f.lower) & (R[i] < f.upper)
                    terms.append(np.where(inside, f.evaluator(R[i]), np.nan))
                out = np.sum(w * np.stack(terms), axis=0)
            case _:
                raise InvalidProblem(f"cannot batch-evaluate a {problem.kind} problem")
    return np.asarray(out, dtype=float)


def default_start(problem: FPProblem) -> np.ndarray:
    """Feasible starting point used when the caller gives none."""
    c = problem.constraint
    match c.kind:
        case SetKind.BOX:
            lo = np.broadcast_to(c.lower, (problem.dimension,)).astype(float)  # type: ignore[arg-type]
            hi = np.broadcast_to(c.upper, (problem.dimension,)).astype(float)  # type: ignore[arg-type]
            mid = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi), 0.0)
            return np.clip(mid, lo, hi)
        case SetKind.BALL:
            return np.zeros(problem.dimension) if c.center is None else np.array(c.center, dtype=float)
        case SetKind.SIMPLEX:
            return np.full(problem.dimension, float(c.total) / problem.dimension)  # type: ignore[arg-type]
        case SetKind.ASSIGNMENT:
            x = np.zeros(c.shape)  # type: ignore[arg-type]
            x[:, 0] = 1.0
            return x
    return np.zeros(problem.dimension)


def _second_difference(f: Evaluator, x: np.ndarray, d: np.ndarray) -> Tuple[float, float]:
    h = 1e-3 * (1.0 + float(np.linalg.norm(x)))
    center = float(f(x))
    return float(f(x + h * d)) + float(f(x - h * d)) - 2.0 * center, center


def _check_curvature(ratio: RatioSpec, index: int, points: np.ndarray, rng: np.random.Generator) -> List[Diagnostic]:
    if ratio.curvature == Curvature.GENERIC:
        return []
    # +1 means the function must be concave, -1 convex
    want = (1.0, -1.0) if ratio.curvature == Curvature.CONCAVE_CONVEX else (-1.0, 1.0)
    found: List[Diagnostic] = []
    for name, f, sign in (("numerator", ratio.numerator, want[0]), ("denominator", ratio.denominator, want[1])):
        for x in points:
            d = rng.standard_normal(x.shape)
            d /= np.linalg.norm(d)
            sd, center = _second_difference(f, x, d)
            if sign * sd > 1e-8 * max(1.0, abs(center)):
                shape = "concave" if sign > 0 else "convex"
                found.append(
                    Diagnostic(
                        "curvature",
                        f"ratio {index}: {name} is not {shape} near x={x.tolist()} "
                        f"but curvature is tagged {ratio.curvature}",
                        index,
                    )
                )
                break
    return found


def _check_outer(f: OuterFunction, index: int) -> List[Diagnostic]:
    lo = max(f.lower, -10.0)
    hi = min(f.upper, 10.0)
    margin = 1e-3 * (hi - lo)
    grid = np.linspace(lo + margin, hi - margin, 201)
    values = np.array([float(f.evaluator(r)) for r in grid])
    found: List[Diagnostic] = []
    steps = np.diff(values)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(values))))
    increasing = f.monotonicity == Monotonicity.NONDECREASING
    if (increasing and np.any(steps < -tol)) or (not increasing and np.any(steps > tol)):
        found.append(Diagnostic("outer-monotonicity", f"outer function {index} is not {f.monotonicity}", index))
    if np.any(np.diff(steps) > 1e3 * tol):
        found.append(
            Diagnostic("outer-concavity", f"outer function {index} ({f.kind}) is not a concave function", index)
        )
    return found


def validate_problem(problem: FPProblem, samples: int = 100, seed: int = 0) -> List[Diagnostic]:
    """Sample the feasible set and report violated modeling assumptions.

    Never raises on a modeling issue; every finding is logged as a warning
    and returned.
    """
    if samples < 1:
        raise InvalidProblem("validate_problem needs at least one sample")
    found: List[Diagnostic] = []
    nonpositive = np.flatnonzero(~(problem.w > 0))
    for i in nonpositive:
        found.append(Diagnostic("weight", f"weight {i} is {problem.w[i]}, weights must be positive", int(i)))

    if problem.kind != ProblemKind.MATRIX:
        rng = make_rng(seed)
        points = problem.constraint.sample(rng, problem.dimension, samples)
        for i, ratio in enumerate(problem.ratios):
            numerators = np.array([float(ratio.numerator(x)) for x in points])
            denominators = np.array([float(ratio.denominator(x)) for x in points])
            if np.any(numerators < 0):
                at = points[int(np.argmin(numerators))]
                found.append(Diagnostic("numerator-sign", f"ratio {i}: numerator negative at x={at.tolist()}", i))
            if np.any(denominators <= 0):
                at = points[int(np.argmin(denominators))]
                found.append(
                    Diagnostic("denominator-sign", f"ratio {i}: denominator nonpositive at x={at.tolist()}", i)
                )
            found.extend(_check_curvature(ratio, i, points[: min(samples, 20)], rng))

    if problem.outer is not None:
        for i, f in enumerate(problem.outer):
            found.extend(_check_outer(f, i))

    for diag in found:
        logger.warning("%s", diag.message)
    return found
