from typing import Callable

import numpy as np
import pytest

from fractrans.modules.problem import (
    ConstraintSet,
    Curvature,
    FPProblem,
    ProblemKind,
    RatioSpec,
    make_rng,
)


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(1234)


@pytest.fixture
def hump() -> FPProblem:
    """x / (x^2 + 1) on [0, 2], maximized at x = 1 with value 1/2."""
    ratio = RatioSpec(
        numerator=lambda x: x[0],
        denominator=lambda x: x[0] ** 2 + 1.0,
        grad_numerator=lambda x: np.ones(1),
        grad_denominator=lambda x: np.array([2.0 * x[0]]),
        curvature=Curvature.CONCAVE_CONVEX,
        vectorized=True,
    )
    return FPProblem(ProblemKind.SINGLE, (ratio,), ConstraintSet.box([0.0], [2.0]), dimension=1)


def _affine_ratio(a: np.ndarray, b: np.ndarray, curvature: Curvature) -> RatioSpec:
    return RatioSpec(
        numerator=lambda x: a @ x + 1.0,
        denominator=lambda x: b @ x + 1.0,
        grad_numerator=lambda x: a,
        grad_denominator=lambda x: b,
        curvature=curvature,
        vectorized=True,
    )


@pytest.fixture
def affine_problem() -> Callable[..., FPProblem]:
    """Factory of sums of ratios (a_i^T x + 1) / (b_i^T x + 1) with nonnegative a_i, b_i over [0.1, 2]^d."""

    def build(kind: ProblemKind, count: int = 3, dimension: int = 2, seed: int = 0, weights=None) -> FPProblem:
        gen = make_rng(seed)
        curvature = Curvature.CONVEX_CONCAVE if kind == ProblemKind.SUM_MIN else Curvature.CONCAVE_CONVEX
        ratios = tuple(
            _affine_ratio(gen.uniform(0.1, 1.0, dimension), gen.uniform(0.1, 1.0, dimension), curvature)
            for _ in range(count)
        )
        box = ConstraintSet.box(np.full(dimension, 0.1), np.full(dimension, 2.0))
        return FPProblem(kind, ratios, box, dimension=dimension, weights=weights)

    return build
