import logging
import math

import numpy as np
import pytest

from fractrans.core.errors import InvalidProblem
from fractrans.modules.inner import grid_oracle
from fractrans.modules.network import NetworkInstance, Topology, generate_network
from fractrans.modules.power import (
    fixed_point_residual,
    fixed_point_solve,
    full_power,
    random_power,
    sinr,
    solve_power_control,
    sum_rate,
)
from fractrans.modules.problem import SolverConfig, TraceStatus

logger = logging.getLogger(__name__)

TIGHT = SolverConfig(max_iters=10000, obj_tol=1e-13, step_tol=1e-12)


@pytest.fixture
def symmetric() -> NetworkInstance:
    return NetworkInstance(noise=1.0, max_power=1.0, gains=np.ones((2, 2)))


def drops(count, cells=3):
    topology = Topology(cells=cells)
    return [generate_network(topology, seed, 40.0, -104.0) for seed in range(count)]


class TestSymmetricPair:
    def test_matches_grid_oracle(self, symmetric):
        _, value, trace = solve_power_control(symmetric)
        oracle = grid_oracle(lambda p: sum_rate(symmetric, p), 1e-3, [(0.0, 1.0)] * 2, zoom=1e-2)
        assert value == pytest.approx(oracle.best_value, abs=1e-4)
        assert value == pytest.approx(2.0 * math.log(1.5), abs=1e-12)
        assert trace.status == TraceStatus.CONVERGED

    def test_gamma_equals_final_sinr(self, symmetric):
        p, _, trace = solve_power_control(symmetric)
        np.testing.assert_allclose(trace.aux.gamma, sinr(symmetric, p), atol=1e-8)


class TestRandomDrops:
    def test_monotone_and_beats_baselines(self):
        fp, random = [], []
        for net in drops(50):
            _, value, trace = solve_power_control(net)
            assert trace.is_monotone()
            assert value >= sum_rate(net, full_power(net)) - 1e-12
            fp.append(value)
            random.append(sum_rate(net, random_power(net, net.seed)))
        assert np.mean(fp) >= np.mean(random)

    def test_powers_within_cap(self):
        for net in drops(5):
            p, _, _ = solve_power_control(net, p0=random_power(net, 99))
            assert np.all(p >= 0.0) and np.all(p <= net.max_power)

    def test_fixed_point_residual_at_convergence(self):
        converged = 0
        for net in drops(50):
            p, _, trace = solve_power_control(net, TIGHT)
            if trace.status != TraceStatus.CONVERGED:
                continue
            converged += 1
            assert fixed_point_residual(net, p) <= 1e-6
        logger.info("%d of 50 power control runs converged", converged)
        assert converged >= 10

    def test_fixed_point_iteration_is_not_held_to_monotonicity(self):
        net = drops(1)[0]
        _, value, trace = fixed_point_solve(net, SolverConfig(max_iters=50))
        assert not trace.monotone_required
        assert np.isfinite(value)


def test_needs_gain_matrix():
    net = NetworkInstance(noise=1.0, max_power=1.0, beta=np.ones((2, 2, 1)))
    with pytest.raises(InvalidProblem):
        solve_power_control(net)
