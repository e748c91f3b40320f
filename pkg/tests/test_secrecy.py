import logging
import math

import numpy as np
import pytest

from fractrans.core.errors import InvalidProblem
from fractrans.modules.network import NetworkInstance, secrecy_network
from fractrans.modules.problem import TraceStatus, validate_problem
from fractrans.modules.secrecy import (
    displayed_rates,
    naive_secrecy_problem,
    secrecy_objective,
    secrecy_oracle,
    secrecy_rates,
    solve_secrecy,
    start_points,
    warm_start,
)

logger = logging.getLogger(__name__)


@pytest.fixture
def two_links() -> NetworkInstance:
    legit = [[1.0, 0.1], [0.09, 0.87]]
    eaves = [[0.5, 0.11], [0.13, 0.39]]
    return secrecy_network(legit, eaves, noise_dbm=-10.0, eaves_noise_dbm=0.0, max_power_dbm=10.0)


def test_single_link_transmits_at_full_power():
    net = secrecy_network([[1.0]], [[0.5]], noise_dbm=-10.0, eaves_noise_dbm=0.0, max_power_dbm=10.0)
    p, value, trace = solve_secrecy(net)
    assert p[0] == pytest.approx(10.0, abs=1e-3)
    assert value == pytest.approx(math.log(101.0) - math.log(6.0), abs=1e-4)
    assert trace.is_monotone()


def test_matches_exhaustive_search(two_links):
    p, value, trace = solve_secrecy(two_links)
    oracle = secrecy_oracle(two_links, 1e-3, zoom=1e-2)
    logger.info("FP %.8f in %d iterations, oracle %.8f", value, trace.iterations, oracle.best_value)
    assert value == pytest.approx(oracle.best_value, abs=1e-3)
    assert trace.status == TraceStatus.CONVERGED
    assert trace.iterations <= 50
    assert trace.is_monotone()
    assert np.all(p <= two_links.max_power)


def test_warm_start_lies_near_the_optimum(two_links):
    p0 = warm_start(two_links)
    assert p0 is not None and p0.shape == (2,)
    assert secrecy_objective(two_links)(p0)[0] == pytest.approx(2.9391988, abs=1e-5)
    assert warm_start(secrecy_network(np.eye(4), np.eye(4), -10.0, 0.0, 10.0)) is None


def test_batch_objective_matches_rates(two_links):
    P = np.array([[1.0, 2.0], [10.0, 0.5]])
    expected = [float(np.sum(secrecy_rates(two_links, p))) for p in P]
    np.testing.assert_allclose(secrecy_objective(two_links)(P), expected, rtol=1e-12)


def test_displayed_rates_are_clamped(two_links):
    p = np.array([1e-9, 10.0])
    raw = secrecy_rates(two_links, p)
    np.testing.assert_array_equal(displayed_rates(two_links, p), np.maximum(raw, 0.0))
    assert np.all(displayed_rates(two_links, p) >= 0.0)


def test_start_points(two_links):
    starts = start_points(two_links)
    assert len(starts) == 3
    np.testing.assert_array_equal(starts[0], [10.0, 10.0])
    assert starts[1][0] == 10.0 and starts[1][1] < 1e-6


def test_naive_formulation_is_flagged(two_links):
    codes = {d.code for d in validate_problem(naive_secrecy_problem(two_links))}
    assert "outer-concavity" in codes


def test_needs_eavesdropper():
    with pytest.raises(InvalidProblem):
        solve_secrecy(NetworkInstance(noise=1.0, max_power=1.0, gains=np.eye(2)))
