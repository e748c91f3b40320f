import logging

import numpy as np
import pytest

from fractrans.core.errors import InvalidProblem
from fractrans.modules.network import GraphInstance, planted_graph
from fractrans.modules.ncut import (
    association_ratios,
    ncut_oracle,
    ncut_value,
    one_hot,
    random_assignment,
    same_partition,
    solve_ncut_fpc,
)

logger = logging.getLogger(__name__)


@pytest.fixture
def pairs() -> GraphInstance:
    W = np.array([[1, 0.9, 0.1, 0.1], [0.9, 1, 0.1, 0.1], [0.1, 0.1, 1, 0.9], [0.1, 0.1, 0.9, 1]])
    return GraphInstance(W=W, clusters=2)


class TestFourNodes:
    def test_oracle_splits_pairs(self, pairs):
        result = ncut_oracle(pairs)
        assert same_partition(result.best_x, [0, 0, 1, 1])
        assert result.evaluations == 16

    @pytest.mark.parametrize("init", [[0, 0, 0, 1], [0, 0, 1, 0], [0, 0, 1, 1], [0, 1, 0, 0], [0, 1, 1, 1]])
    def test_fpc_reaches_optimum(self, pairs, init):
        labels, value, trace = solve_ncut_fpc(pairs, init)
        assert same_partition(labels, [0, 0, 1, 1])
        assert value == pytest.approx(2.0 - 2.0 * 3.8 / 4.2, abs=1e-12)
        assert value == pytest.approx(ncut_oracle(pairs).best_value, abs=1e-12)
        assert trace.is_monotone()

    @pytest.mark.parametrize("init", [[0, 1, 0, 1], [0, 1, 1, 0]])
    def test_crossing_split_is_a_fixed_point(self, pairs, init):
        labels, value, trace = solve_ncut_fpc(pairs, init)
        assert same_partition(labels, init)
        assert value == pytest.approx(2.0 - 2.0 * 2.2 / 4.2, abs=1e-12)
        assert value == pytest.approx(0.95238, abs=1e-5)
        assert trace.is_monotone()

    def test_empty_cluster_restart(self, pairs):
        labels, _, trace = solve_ncut_fpc(pairs, [0, 0, 0, 0])
        assert trace.info["restarts"] >= 1
        assert trace.is_monotone()
        assert labels.shape == (4,)


def test_planted_graphs():
    hits = 0
    for seed in range(20):
        graph = planted_graph(10, 2, 0.9, 0.05, 0.3, seed)
        labels, value, trace = solve_ncut_fpc(graph, random_assignment(10, 2, seed))
        assert trace.is_monotone()
        assert value == pytest.approx(ncut_value(graph, labels), abs=1e-12)
        hits += value <= ncut_oracle(graph).best_value + 1e-9
    logger.info("FPC reached the global normalized cut on %d of 20 planted graphs", hits)


def test_association_ratio_of_empty_cluster(pairs):
    ratios = association_ratios(pairs, one_hot([0, 0, 0, 0], 2))
    assert ratios[1] == 0.0
    assert ratios[0] == pytest.approx(1.0)


def test_random_assignment_is_balanced():
    labels = random_assignment(10, 3, 0)
    assert sorted(np.bincount(labels)) == [3, 3, 4]


def test_same_partition():
    assert same_partition([0, 0, 1], [1, 1, 0])
    assert not same_partition([0, 0, 1], [0, 1, 1])
    assert not same_partition([0, 1], [0, 1, 1])


def test_rejects_bad_labels(pairs):
    with pytest.raises(InvalidProblem):
        one_hot([0, 2], 2)
    with pytest.raises(InvalidProblem):
        solve_ncut_fpc(pairs, [0, 1, 1])
