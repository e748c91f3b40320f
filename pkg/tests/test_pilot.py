import logging
import math

import numpy as np
import pytest

from fractrans.core.errors import ConfigError, InvalidProblem
from fractrans.modules.matrix import MatrixVariant
from fractrans.modules.network import NetworkInstance, Topology, generate_pilot_network
from fractrans.modules.pilot import (
    convergence_rates,
    estimation_mse,
    orthogonal_pilots,
    pilot_objective,
    random_pilots,
    solve_pilot_fpp,
)
from fractrans.modules.problem import SolverConfig

logger = logging.getLogger(__name__)


def pilot_net(seed, cells=3, users=3, pilot_length=4, antennas=4) -> NetworkInstance:
    topology = Topology(cells=cells, users_per_cell=users)
    return generate_pilot_network(topology, seed, pilot_length, 20.0, -104.0, antennas=antennas)


class TestPilots:
    def test_orthogonal_within_cell(self):
        net = pilot_net(0)
        S = orthogonal_pilots(net, 0)
        assert S.shape == (3, 3, 4)
        np.testing.assert_allclose(np.linalg.norm(S, axis=-1), math.sqrt(net.max_power))
        for i in range(3):
            gram = S[i] @ S[i].conj().T
            np.testing.assert_allclose(gram, net.max_power * np.eye(3), atol=1e-9)

    def test_random_at_full_power(self):
        net = pilot_net(1)
        np.testing.assert_allclose(np.linalg.norm(random_pilots(net, 5), axis=-1), math.sqrt(net.max_power))

    def test_mse_and_objective_add_up(self):
        net = pilot_net(2)
        S = random_pilots(net, 2)
        total = sum(net.beta[i, i, k] for i in range(3) for k in range(3))
        assert estimation_mse(net, S) + net.antennas * pilot_objective(net, S) == pytest.approx(
            net.antennas * total, rel=1e-10
        )

    def test_too_many_users(self):
        with pytest.raises(InvalidProblem):
            orthogonal_pilots(pilot_net(0, users=3, pilot_length=2), 0)

    def test_needs_pilot_length(self):
        with pytest.raises(InvalidProblem):
            solve_pilot_fpp(NetworkInstance(noise=1.0, max_power=1.0, beta=np.ones((2, 2, 1))))


class TestFPP:
    def test_single_user_closed_form(self):
        net = NetworkInstance(noise=1.0, max_power=4.0, beta=np.ones((1, 1, 1)), pilot_length=1)
        S, value, _ = solve_pilot_fpp(net)
        assert value == pytest.approx(0.8, abs=1e-10)
        assert abs(S[0, 0, 0]) ** 2 == pytest.approx(4.0)

    @pytest.mark.parametrize("variant", [MatrixVariant.BASIC, MatrixVariant.NONHOMOGENEOUS])
    def test_monotone_and_feasible(self, variant):
        net = pilot_net(3)
        S, value, trace = solve_pilot_fpp(net, SolverConfig(max_iters=200), variant)
        assert trace.is_monotone()
        assert value >= pilot_objective(net, orthogonal_pilots(net, 0)) - 1e-12
        assert np.all(np.linalg.norm(S, axis=-1) <= math.sqrt(net.max_power) * (1.0 + 1e-9))

    def test_mse_ordering(self):
        fpp, orthogonal, random = [], [], []
        for seed in range(50):
            net = pilot_net(seed)
            S, _, _ = solve_pilot_fpp(net, SolverConfig(max_iters=100, seed=seed))
            fpp.append(estimation_mse(net, S))
            orthogonal.append(estimation_mse(net, orthogonal_pilots(net, seed)))
            random.append(estimation_mse(net, random_pilots(net, seed)))
            assert fpp[-1] <= orthogonal[-1] + 1e-9 * abs(orthogonal[-1])
        logger.info("Mean MSE: FPP %.6g, orthogonal %.6g, random %.6g", *map(np.mean, (fpp, orthogonal, random)))
        assert np.mean(orthogonal) <= np.mean(random)

    def test_error_slopes(self):
        # three cells sharing two pilot dimensions, real start
        beta = np.array([[1.0, 0.3, 0.2], [0.25, 0.8, 0.35], [0.15, 0.4, 0.9]])[:, :, None]
        net = NetworkInstance(noise=0.1, max_power=1.0, beta=beta, pilot_length=2)
        S0 = np.array([[[1.0, 0.2]], [[0.6, 0.8]], [[-0.3, 1.0]]])
        rates = convergence_rates(net, 2000, 10, 200, S0=S0)
        assert set(rates) == {v.value for v in MatrixVariant}
        for name, (trace, slope) in rates.items():
            logger.info(
                "%s: %.12f after %d iterations, slope %.3f", name, trace.final_objective, trace.iterations, slope
            )
            assert trace.iterations >= 200
        assert rates["basic"][1] <= -0.9
        assert rates["nonhomogeneous"][1] <= -1.8
        assert rates["extrapolated"][1] <= -1.8
        finals = [trace.final_objective for trace, _ in rates.values()]
        assert max(finals) - min(finals) <= 1e-4
        assert rates["basic"][0].is_monotone() and rates["nonhomogeneous"][0].is_monotone()

    def test_rate_window_must_fit(self):
        with pytest.raises(ConfigError):
            convergence_rates(pilot_net(0), 100, 10, 200)
