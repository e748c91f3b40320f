"""Normalized-cut clustering by the matrix quadratic transform (FPC)."""

import logging
from typing import Any, Optional

import numpy as np

from fractrans.core.errors import InvalidProblem
from fractrans.modules.inner import OracleResult, assignment_argmax, enumerate_oracle
from fractrans.modules.matrix import psd_sqrt
from fractrans.modules.network import GraphInstance
from fractrans.modules.problem import (
    DEGENERACY_THRESHOLD,
    Solution,
    SolverConfig,
    SolverTrace,
    TraceStatus,
    make_rng,
)

logger = logging.getLogger(__name__)


def one_hot(labels: Any, clusters: int) -> np.ndarray:
    """Assignment matrix of a label vector."""
    labels = np.asarray(labels, dtype=int)
    if labels.ndim != 1 or np.any(labels < 0) or np.any(labels >= clusters):
        raise InvalidProblem(f"labels must lie in [0, {clusters}), got {labels.tolist()}")
    X = np.zeros((labels.size, clusters))
    X[np.arange(labels.size), labels] = 1.0
    return X


def association_ratios(graph: GraphInstance, X: np.ndarray) -> np.ndarray:
    """x_k^T W x_k / d^T x_k per cluster, 0 for an empty cluster."""
    volume = graph.degrees @ X
    inner = np.einsum("ik,ij,jk->k", X, graph.W, X)
    return np.where(volume > DEGENERACY_THRESHOLD, inner / np.maximum(volume, DEGENERACY_THRESHOLD), 0.0)


def ncut_value(graph: GraphInstance, labels: Any) -> float:
    """Normalized cut K - sum_k x_k^T W x_k / d^T x_k."""
    X = one_hot(labels, graph.clusters)
    return float(graph.clusters - np.sum(association_ratios(graph, X)))


def random_assignment(nodes: int, clusters: int, seed: int) -> np.ndarray:
    """Balanced random labels, no cluster left empty when nodes >= clusters."""
    return make_rng(seed).permutation(np.arange(nodes) % clusters)


def solve_ncut_fpc(graph: GraphInstance, init: Any, config: Optional[SolverConfig] = None) -> Solution:
    """Minimize the normalized cut from an initial assignment.

    Each iteration sets y_k = W^1/2 x_k / d^T x_k and reassigns every node to
    the cluster maximizing mu_k = 2 W^1/2 y_k - ||y_k||^2 d. Stops once the
    assignment repeats. An empty cluster gets a random unit y_k; the number of
    such restarts is kept in `trace.info["restarts"]`.
    """
    config = config or SolverConfig()
    K = graph.clusters
    root = psd_sqrt(graph.W)
    rng = make_rng(config.seed)
    d = graph.degrees
    X = one_hot(init, K)
    if X.shape[0] != graph.nodes:
        raise InvalidProblem(f"{X.shape[0]} labels for {graph.nodes} nodes")

    value = float(K - np.sum(association_ratios(graph, X)))
    trace = SolverTrace(maximize=False)
    trace.record(value, value, 0.0)
    restarts = 0

    for _ in range(config.max_iters):
        volume = d @ X
        Y = np.empty((graph.nodes, K))
        for k in range(K):
            if volume[k] > DEGENERACY_THRESHOLD:
                Y[:, k] = root @ X[:, k] / volume[k]
            else:
                y = rng.standard_normal(graph.nodes)
                Y[:, k] = y / np.linalg.norm(y)
                restarts += 1
                logger.warning("Cluster %d is empty, restarting its auxiliary from a random direction", k)
        scores = 2.0 * root @ Y - np.sum(Y**2, axis=0) * d[:, None]
        X_new = assignment_argmax(scores)
        value_new = float(K - np.sum(association_ratios(graph, X_new)))
        trace.record(value_new, K - float(np.sum(scores * X_new)), float(np.linalg.norm(Y)))
        trace.aux = Y
        stable = np.array_equal(X_new, X)
        X, value = X_new, value_new
        if stable:
            trace.status = TraceStatus.CONVERGED
            break

    trace.info["restarts"] = restarts
    labels = np.argmax(X, axis=1)
    logger.debug("FPC: %s after %d iterations, ncut %.10g", trace.status, trace.iterations, value)
    return Solution(labels, value, trace)


def ncut_oracle(graph: GraphInstance) -> OracleResult:
    """Global minimum of the normalized cut by enumerating every labeling."""
    return enumerate_oracle(lambda labels: ncut_value(graph, labels), [graph.clusters] * graph.nodes, maximize=False)


def same_partition(a: Any, b: Any) -> bool:
    """Check that two label vectors induce the same partition up to relabeling."""
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    if a.shape != b.shape:
        return False
    forward: dict = {}
    backward: dict = {}
    for u, v in zip(a.tolist(), b.tolist()):
        if forward.setdefault(u, v) != v or backward.setdefault(v, u) != u:
            return False
    return True
