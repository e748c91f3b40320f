import math

import numpy as np
import pytest

from fractrans.core.errors import DegenerateDenominator, InvalidProblem
from fractrans.modules.inner import grid_oracle
from fractrans.modules.lagrangian import ldt_gamma_update, ldt_objective, ldt_qt_aux_update, logratio_solve
from fractrans.modules.problem import (
    ConstraintSet,
    Curvature,
    FPProblem,
    ProblemKind,
    RatioSpec,
    SolverConfig,
)


def test_single_ratio_at_optimal_gamma():
    assert ldt_objective([3.0], [1.0], [3.0], [1.0]) == pytest.approx(math.log(4.0), abs=1e-12)


def test_sandwich(rng):
    for _ in range(100):
        A, B = rng.uniform(0.1, 5.0, 4), rng.uniform(0.1, 5.0, 4)
        w = rng.uniform(0.5, 2.0, 4)
        exact = float(np.sum(w * np.log1p(A / B)))
        gamma = rng.uniform(0.0, 10.0, 4)
        assert ldt_objective(A, B, gamma, w) <= exact + 1e-12
        assert ldt_objective(A, B, ldt_gamma_update(A, B), w) == pytest.approx(exact, abs=1e-9)


def test_concave_in_gamma(rng):
    for _ in range(20):
        A, B = rng.uniform(0.1, 5.0, 3), rng.uniform(0.1, 5.0, 3)
        w = rng.uniform(0.5, 2.0, 3)
        direction = rng.uniform(0.0, 1.0, 3)
        values = [ldt_objective(A, B, t * direction, w) for t in np.linspace(0.0, 20.0, 201)]
        assert np.all(np.diff(values, 2) <= 1e-12)


def test_qt_aux_of_lifted_ratios():
    y = ldt_qt_aux_update([3.0], [1.0], [3.0], [2.0])
    # sqrt(w (1 + gamma) A) / (A + B)
    assert y[0] == pytest.approx(math.sqrt(24.0) / 4.0)


def test_degenerate():
    with pytest.raises(DegenerateDenominator):
        ldt_gamma_update([1.0], [0.0])


class TestLogRatioSolve:
    @staticmethod
    def linear_link() -> FPProblem:
        # ln(1 + x / 1) on [0, 2], maximized at the upper bound
        ratio = RatioSpec(
            numerator=lambda x: x[0],
            denominator=lambda x: 1.0,
            grad_numerator=lambda x: np.ones(1),
            grad_denominator=lambda x: np.zeros(1),
            curvature=Curvature.CONCAVE_CONVEX,
        )
        return FPProblem(ProblemKind.LOG_RATIO, (ratio,), ConstraintSet.box([0.0], [2.0]), dimension=1)

    def test_reaches_bound(self):
        x, value, trace = logratio_solve(self.linear_link())
        assert x[0] == pytest.approx(2.0, abs=1e-6)
        assert value == pytest.approx(math.log(3.0), abs=1e-6)
        assert trace.is_monotone()

    def test_extra_sweeps_stay_monotone(self):
        _, _, trace = logratio_solve(self.linear_link(), SolverConfig(inner_sweeps=3), np.array([0.1]))
        assert trace.is_monotone()
        assert trace.aux.gamma.shape == (1,)

    def test_rejects_other_kinds(self, hump):
        with pytest.raises(InvalidProblem):
            logratio_solve(hump)

    def test_two_links_match_grid_oracle(self):
        # sum of ln(1 + G_ii p_i / (1 + sum_j!=i G_ij p_j)) over [0, 10]^2
        G = np.array([[2.0, 0.3], [0.2, 1.0]])

        def link(i: int) -> RatioSpec:
            cross = G[i].copy()
            cross[i] = 0.0
            direct = np.zeros(2)
            direct[i] = G[i, i]
            return RatioSpec(
                numerator=lambda p: direct @ p,
                denominator=lambda p: 1.0 + cross @ p,
                grad_numerator=lambda p: direct,
                grad_denominator=lambda p: cross,
                curvature=Curvature.CONCAVE_CONVEX,
                vectorized=True,
            )

        problem = FPProblem(
            ProblemKind.LOG_RATIO, (link(0), link(1)), ConstraintSet.box([0.0, 0.0], [10.0, 10.0]), dimension=2
        )
        _, value, trace = logratio_solve(problem, SolverConfig(max_iters=2000))
        oracle = grid_oracle(problem, 1e-2, zoom=0.1)
        assert value == pytest.approx(oracle.best_value, abs=1e-4)
        assert value == pytest.approx(math.log(6.0) + math.log(13.0 / 3.0), abs=1e-6)
        assert trace.is_monotone()
