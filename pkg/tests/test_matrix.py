import logging
import math

import numpy as np
import pytest

from fractrans.core.errors import DomainError, InvalidProblem, SingularDenominator, UnsupportedSet
from fractrans.modules.inner import project
from fractrans.modules.matrix import (
    CallableMatrixRatio,
    MatrixVariant,
    StructuredMatrixRatio,
    ball_quadratic_max,
    check_positive_definite,
    convergence_slope,
    extrapolation_weight,
    lambda_bound,
    logdet_objective,
    matrix_ldt_gamma_update,
    matrix_ldt_objective,
    matrix_qt_aux_update,
    matrix_qt_surrogate,
    nonhomogeneous_surrogate,
    nonhomogeneous_x_update,
    psd_sqrt,
    solve_matrix_fp,
)
from fractrans.modules.problem import ConstraintSet, SolverConfig, TraceStatus, make_rng

logger = logging.getLogger(__name__)


def crandn(gen, *shape):
    return gen.standard_normal(shape) + 1j * gen.standard_normal(shape)


def random_pd(gen, n):
    M = crandn(gen, n, n)
    return M @ M.conj().T + 0.5 * np.eye(n)


def structured(seed, n=2, ell=2, m=2, radius=1.0):
    gen = make_rng(seed)
    noise = np.stack([np.eye(ell)] * n)
    return StructuredMatrixRatio(
        crandn(gen, n, ell, m),
        0.5 * crandn(gen, n, n, ell, m),
        noise=noise,
        weights=gen.uniform(0.5, 2.0, n),
        constraints=ConstraintSet.ball(radius),
    )


def callable_ratio(seed, rows=3, cols=2):
    gen = make_rng(seed)
    S = crandn(gen, rows, cols)
    B = random_pd(gen, rows)
    return CallableMatrixRatio(b=lambda x: [B + x * np.eye(rows)], sqrt_a_fn=lambda x: [S])


class TestHelpers:
    def test_psd_sqrt(self, rng):
        A = random_pd(rng, 3)
        S = psd_sqrt(A)
        np.testing.assert_allclose(S @ S, A, atol=1e-10)
        np.testing.assert_allclose(S, S.conj().T, atol=1e-12)

    def test_psd_sqrt_rejects_indefinite(self):
        with pytest.raises(DomainError):
            psd_sqrt(np.diag([1.0, -1.0]))

    def test_singular_denominator(self):
        with pytest.raises(SingularDenominator):
            check_positive_definite(np.diag([1.0, 0.0]))

    def test_lambda_bound_dominates_spectrum(self, rng):
        D = random_pd(rng, 4)
        assert lambda_bound(D) >= np.max(np.linalg.eigvalsh(D))

    def test_extrapolation_weights(self):
        assert [extrapolation_weight(j) for j in range(3)] == [0.0, 0.0, 0.0]
        assert extrapolation_weight(5) == pytest.approx(0.5)

    def test_convergence_slope(self):
        k = np.arange(1, 300, dtype=float)
        values = np.concatenate([[0.0], 1.0 - k**-2.0])
        assert convergence_slope(values, 1.0, 10, 200) == pytest.approx(-2.0, abs=1e-9)
        assert convergence_slope(values, 1.0, 10, 200, floor=1e-3) == pytest.approx(-2.0, abs=1e-9)
        assert math.isnan(convergence_slope(values, 1.0, 10, 200, floor=1e-1))

    def test_needs_one_numerator(self):
        with pytest.raises(InvalidProblem):
            CallableMatrixRatio(b=lambda x: [np.eye(2)])


class TestMatrixQT:
    def test_aux_is_stationary(self):
        problem = callable_ratio(0)
        (Y,) = matrix_qt_aux_update(problem, 0.0)
        S = problem.sqrt_a(0.0)[0]
        B = problem.denominators(0.0)[0]
        # gradient of 2 Re Tr(S^H Y) - Tr(Y^H B Y) in Y
        assert np.linalg.norm(2.0 * (S - B @ Y)) < 1e-8

    def test_sandwich(self):
        problem = structured(1)
        gen = make_rng(2)
        for _ in range(50):
            x, x_hat = crandn(gen, 2, 2), crandn(gen, 2, 2)
            Y = problem.aux(x_hat)
            assert matrix_qt_surrogate(problem, x, Y) <= problem.objective(x) + 1e-9
            tight = matrix_qt_surrogate(problem, x_hat, Y)
            assert tight == pytest.approx(problem.objective(x_hat), rel=1e-10, abs=1e-9)

    def test_gradient_matches_finite_differences(self):
        problem = structured(3)
        x = crandn(make_rng(4), 2, 2)
        g = problem.gradient(x)
        h = 1e-6
        for idx in np.ndindex(x.shape):
            for unit, part in ((1.0, np.real), (1j, np.imag)):
                e = np.zeros(x.shape, dtype=complex)
                e[idx] = unit * h
                fd = (problem.objective(x + e) - problem.objective(x - e)) / (2.0 * h)
                assert fd == pytest.approx(2.0 * part(g[idx]), rel=1e-5, abs=1e-6)

    def test_gradient_projection_identity(self):
        for seed in range(20):
            problem = structured(seed, radius=0.7)
            x = problem.project(crandn(make_rng(seed + 100), 2, 2))
            Y = problem.aux(x)
            lam = [lambda_bound(D) for D in problem.d_matrices(Y)]
            g = problem.gradient(x)
            expected = np.stack([project(problem.constraints[i], x[i] + g[i] / lam[i]) for i in range(2)])
            np.testing.assert_allclose(nonhomogeneous_x_update(problem, Y, x, lam), expected, atol=1e-8)

    def test_nonhomogeneous_surrogate_sandwich(self):
        problem = structured(5)
        gen = make_rng(6)
        for _ in range(50):
            x, z = crandn(gen, 2, 2), crandn(gen, 2, 2)
            Y = problem.aux(z)
            lam = [lambda_bound(D) for D in problem.d_matrices(Y)]
            assert nonhomogeneous_surrogate(problem, x, Y, z, lam) <= matrix_qt_surrogate(problem, x, Y) + 1e-9
            tight = nonhomogeneous_surrogate(problem, z, Y, z, lam)
            assert tight == pytest.approx(problem.objective(z), rel=1e-10, abs=1e-9)


class TestBallQuadratic:
    def test_identity_closed_form(self, rng):
        b = crandn(rng, 4)
        cset = ConstraintSet.ball(0.5)
        x = ball_quadratic_max(np.eye(4), b, cset)
        np.testing.assert_allclose(x, b / max(1.0, np.linalg.norm(b) / 0.5), atol=1e-6)

    def test_interior_solution(self, rng):
        D = random_pd(rng, 3)
        b = 0.01 * crandn(rng, 3)
        x = ball_quadratic_max(D, b, ConstraintSet.ball(10.0))
        np.testing.assert_allclose(D @ x, b, atol=1e-10)

    def test_boundary_solution_satisfies_kkt(self, rng):
        D = random_pd(rng, 3)
        b = 10.0 * crandn(rng, 3)
        x = ball_quadratic_max(D, b, ConstraintSet.ball(0.3))
        assert np.linalg.norm(x) == pytest.approx(0.3, rel=1e-9)
        eta = float(np.real(np.vdot(x, b - D @ x))) / 0.09
        assert eta >= 0.0
        np.testing.assert_allclose(D @ x + eta * x, b, atol=1e-6 * np.linalg.norm(b))

    def test_rejects_box(self):
        with pytest.raises(UnsupportedSet):
            ball_quadratic_max(np.eye(2), np.ones(2), ConstraintSet.box([0, 0], [1, 1]))


class TestSolveMatrixFP:
    @pytest.mark.parametrize("variant", [MatrixVariant.BASIC, MatrixVariant.NONHOMOGENEOUS])
    def test_monotone_variants(self, variant):
        for seed in range(5):
            problem = structured(seed)
            x, value, trace = solve_matrix_fp(problem, variant, SolverConfig(max_iters=300))
            assert trace.monotone_required
            assert trace.is_monotone()
            assert value >= trace.objectives[0]
            assert all(c.contains(xi) for c, xi in zip(problem.constraints, x))

    def test_extrapolated_is_not_held_to_monotonicity(self):
        problem = structured(0)
        _, value, trace = solve_matrix_fp(problem, MatrixVariant.EXTRAPOLATED, SolverConfig(max_iters=300))
        assert not trace.monotone_required
        assert np.isfinite(value)

    def test_variants_report(self):
        problem = structured(7)
        values = {v: solve_matrix_fp(problem, v, SolverConfig(max_iters=2000)) for v in MatrixVariant}
        for v, sol in values.items():
            logger.info("%s: value %.8f after %d iterations", v, sol.value, sol.trace.iterations)

    def test_singular_start(self):
        problem = StructuredMatrixRatio(np.ones((1, 1, 1)), np.zeros((1, 1, 1, 1)))
        with pytest.raises(SingularDenominator):
            solve_matrix_fp(problem)

    def test_converges_on_easy_instance(self):
        _, _, trace = solve_matrix_fp(structured(8), MatrixVariant.BASIC, SolverConfig(max_iters=2000))
        assert trace.status == TraceStatus.CONVERGED


class TestMatrixLDT:
    def test_matches_logdet_at_optimal_gamma(self):
        for seed in range(5):
            problem = callable_ratio(seed)
            gamma = matrix_ldt_gamma_update(problem, 0.3)
            assert matrix_ldt_objective(problem, 0.3, gamma) == pytest.approx(
                logdet_objective(problem, 0.3), abs=1e-10
            )

    def test_sandwich(self, rng):
        problem = callable_ratio(11)
        exact = logdet_objective(problem, 0.0)
        for _ in range(50):
            M = crandn(rng, 2, 2)
            assert matrix_ldt_objective(problem, 0.0, [M @ M.conj().T]) <= exact + 1e-9
