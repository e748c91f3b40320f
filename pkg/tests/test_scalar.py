import math

import numpy as np
import pytest

from fractrans.core.errors import DegenerateDenominator, InvalidProblem
from fractrans.modules.inner import grid_oracle
from fractrans.modules.problem import (
    ConstraintSet,
    Curvature,
    FPProblem,
    OuterFunction,
    ProblemKind,
    RatioSpec,
    SolverConfig,
    evaluate_objective,
)
from fractrans.modules.scalar import (
    AuxiliaryState,
    TransformKind,
    dinkelbach_solve,
    maxmin_dinkelbach_solve,
    sum_of_ratios_solve,
    surrogate_gap_samples,
    surrogate_value,
    unified_aux_update,
    unified_qt_solve,
    unified_surrogate_value,
    update_auxiliaries,
)

KIND_OF = {
    TransformKind.QT: ProblemKind.SUM_MAX,
    TransformKind.INVERSE_QT: ProblemKind.SUM_MIN,
    TransformKind.AM_GM: ProblemKind.SUM_MIN,
}


class TestAuxiliaries:
    def test_qt_closed_form(self):
        aux = update_auxiliaries(TransformKind.QT, [4.0, 9.0], [2.0, 3.0])
        np.testing.assert_allclose(aux.y, [1.0, 1.0])

    def test_am_gm_equality(self, rng):
        A, B = rng.uniform(0.1, 5.0, 20), rng.uniform(0.1, 5.0, 20)
        y = update_auxiliaries(TransformKind.AM_GM, A, B).y
        np.testing.assert_allclose(y * A**2, 1.0 / (4.0 * y * B**2), rtol=1e-12)

    @pytest.mark.parametrize("kind", list(TransformKind))
    def test_closed_form_beats_grid(self, kind, rng):
        for _ in range(20):
            A, B = rng.uniform(0.1, 5.0, 1), rng.uniform(0.1, 5.0, 1)
            best = update_auxiliaries(kind, A, B)
            best_value = surrogate_value(kind, A, B, best, [1.0])
            inverse = kind == TransformKind.INVERSE_QT
            center = best.y_tilde[0] if inverse else best.y[0]
            for c in np.linspace(0.05, 3.0, 200) * center:
                trial = AuxiliaryState(y_tilde=np.array([c])) if inverse else AuxiliaryState(y=np.array([c]))
                assert surrogate_value(kind, A, B, trial, [1.0]) <= best_value + 1e-6

    @pytest.mark.parametrize("kind", list(TransformKind))
    def test_tight_at_optimal_aux(self, kind, rng):
        A, B = rng.uniform(0.1, 5.0, 5), rng.uniform(0.1, 5.0, 5)
        w = rng.uniform(0.5, 2.0, 5)
        sign = 1.0 if kind == TransformKind.QT else -1.0
        value = surrogate_value(kind, A, B, update_auxiliaries(kind, A, B), w)
        assert value == pytest.approx(sign * float(np.sum(w * A / B)), rel=1e-12)

    def test_inverse_qt_bracket_guard(self):
        aux = AuxiliaryState(y_tilde=np.array([10.0]))
        assert surrogate_value(TransformKind.INVERSE_QT, [1.0], [1.0], aux, [1.0]) == -math.inf

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateDenominator):
            update_auxiliaries(TransformKind.QT, [1.0], [0.0])
        with pytest.raises(DegenerateDenominator):
            update_auxiliaries(TransformKind.INVERSE_QT, [0.0], [1.0])


class TestSurrogateSandwich:
    @pytest.mark.parametrize("transform", list(TransformKind))
    def test_minorizes_objective(self, transform, affine_problem, rng):
        problem = affine_problem(KIND_OF[transform], weights=[1.0, 0.5, 2.0])
        points = rng.uniform(0.1, 2.0, size=(100, 2))
        anchors = rng.uniform(0.1, 2.0, size=(100, 2))
        for surrogate, objective in surrogate_gap_samples(problem, transform, points, anchors):
            assert surrogate <= objective + 1e-9
        for surrogate, objective in surrogate_gap_samples(problem, transform, anchors, anchors):
            assert surrogate == pytest.approx(objective, abs=1e-9)

    def test_unified_minorizes_mixed_outer(self, rng):
        outer = (OuterFunction.log1p(), OuterFunction.negated_identity(), OuterFunction.log_one_minus())
        w = [1.0, 0.7, 1.5]
        for _ in range(100):
            A, B = rng.uniform(0.1, 1.0, 3), rng.uniform(2.0, 4.0, 3)
            A_hat, B_hat = rng.uniform(0.1, 1.0, 3), rng.uniform(2.0, 4.0, 3)
            exact = sum(wi * f(a / b) for wi, f, a, b in zip(w, outer, A, B))
            aux = unified_aux_update(outer, A_hat, B_hat)
            assert unified_surrogate_value(outer, A, B, aux, w) <= exact + 1e-9
            tight = unified_surrogate_value(outer, A, B, unified_aux_update(outer, A, B), w)
            assert tight == pytest.approx(exact, abs=1e-9)


class TestDinkelbach:
    def test_hump(self, hump):
        x, value, trace = dinkelbach_solve(hump, x0=np.array([0.2]))
        assert value == pytest.approx(0.5, abs=1e-8)
        assert x[0] == pytest.approx(1.0, abs=1e-4)
        assert trace.is_monotone()

    def test_rejects_sum(self, affine_problem):
        with pytest.raises(InvalidProblem):
            dinkelbach_solve(affine_problem(ProblemKind.SUM_MAX))

    def test_matches_unified_qt_on_random_ratios(self, affine_problem):
        for seed in range(20):
            single = affine_problem(ProblemKind.SINGLE, count=1, seed=seed)
            unified = FPProblem(
                ProblemKind.SUM_OF_FUNCTIONS,
                single.ratios,
                single.constraint,
                dimension=2,
                outer=(OuterFunction.identity(),),
            )
            dink = dinkelbach_solve(single)
            qt = unified_qt_solve(unified, SolverConfig(max_iters=2000, obj_tol=1e-12))
            assert qt.value == pytest.approx(dink.value, abs=1e-5)
            assert dink.trace.is_monotone() and qt.trace.is_monotone()

    def test_agrees_with_qt(self, hump):
        dink = dinkelbach_solve(hump, x0=np.array([0.2]))
        qt = sum_of_ratios_solve(hump, TransformKind.QT, x0=np.array([0.2]))
        assert qt.value == pytest.approx(dink.value, abs=1e-6)
        assert qt.trace.is_monotone()


class TestMaxMinDinkelbach:
    def test_balances_ratios(self):
        # min(x / 1, (1 - x) / 1) on [0, 1] peaks at x = 1/2
        ratios = tuple(
            RatioSpec(
                numerator=lambda x, s=s: s * x[0] + (1.0 - s) / 2.0,
                denominator=lambda x: 1.0,
                grad_numerator=lambda x, s=s: np.array([s]),
                grad_denominator=lambda x: np.zeros(1),
                curvature=Curvature.CONCAVE_CONVEX,
            )
            for s in (1.0, -1.0)
        )
        problem = FPProblem(ProblemKind.MAX_MIN, ratios, ConstraintSet.box([0.0], [1.0]), dimension=1)
        x, value, trace = maxmin_dinkelbach_solve(problem, x0=np.array([0.1]))
        assert value == pytest.approx(0.5, abs=1e-6)
        assert trace.is_monotone()

    def test_rejects_single(self, hump):
        with pytest.raises(InvalidProblem):
            maxmin_dinkelbach_solve(hump)

    def test_matches_grid_oracle(self, affine_problem):
        for seed in range(10):
            problem = affine_problem(ProblemKind.MAX_MIN, count=3, seed=seed)
            _, value, trace = maxmin_dinkelbach_solve(problem)
            oracle = grid_oracle(problem, 5e-4, zoom=0.02)
            assert value == pytest.approx(oracle.best_value, abs=1e-3)
            assert trace.is_monotone()


class TestSumOfRatios:
    @pytest.mark.parametrize("transform", list(TransformKind))
    def test_monotone_and_improving(self, transform, affine_problem):
        problem = affine_problem(KIND_OF[transform], count=3, seed=3)
        x0 = np.array([1.0, 1.0])
        start = evaluate_objective(problem, x0)
        x, value, trace = sum_of_ratios_solve(problem, transform, SolverConfig(max_iters=200), x0)
        assert trace.is_monotone()
        assert problem.constraint.contains(x)
        if problem.maximize:
            assert value >= start - 1e-12
        else:
            assert value <= start + 1e-12

    def test_qt_rejects_sum_min(self, affine_problem):
        with pytest.raises(InvalidProblem):
            sum_of_ratios_solve(affine_problem(ProblemKind.SUM_MIN), TransformKind.QT)

    def test_am_gm_rejects_sum_max(self, affine_problem):
        with pytest.raises(InvalidProblem):
            sum_of_ratios_solve(affine_problem(ProblemKind.SUM_MAX), TransformKind.AM_GM)


class TestUnifiedQT:
    def test_identity_outer_matches_dinkelbach(self, hump):
        problem = FPProblem(
            ProblemKind.SUM_OF_FUNCTIONS,
            hump.ratios,
            hump.constraint,
            dimension=1,
            outer=(OuterFunction.identity(),),
        )
        x, value, trace = unified_qt_solve(problem, x0=np.array([0.2]))
        assert value == pytest.approx(0.5, abs=1e-6)
        assert trace.is_monotone()

    def test_sum_min_reported_in_original_sense(self, affine_problem):
        problem = affine_problem(ProblemKind.SUM_MIN, seed=4)
        x0 = np.array([1.0, 1.0])
        x, value, trace = unified_qt_solve(problem, x0=x0)
        assert value == pytest.approx(evaluate_objective(problem, x), rel=1e-12)
        assert value <= evaluate_objective(problem, x0) + 1e-12
        assert not trace.maximize
        assert trace.is_monotone()
