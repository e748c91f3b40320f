import numpy as np
import pytest

from fractrans.core.errors import ArtifactError, BadTopology, InvalidProblem
from fractrans.modules.network import (
    GraphInstance,
    NetworkInstance,
    Topology,
    dbm_to_mw,
    generate_mimo_network,
    generate_network,
    generate_pilot_network,
    generate_uplink_network,
    instance_from_yaml,
    instance_to_yaml,
    load_instance,
    mw_to_dbm,
    pathloss_db,
    planted_graph,
    save_instance,
    secrecy_network,
    torus_distance,
)


def test_pathloss_at_half_kilometre():
    assert pathloss_db(0.5) == pytest.approx(116.78, abs=5e-3)


def test_dbm_round_trip():
    assert dbm_to_mw(30.0) == pytest.approx(1000.0)
    assert mw_to_dbm(dbm_to_mw(-104.0)) == pytest.approx(-104.0)


def test_torus_wraps_around():
    d = torus_distance(np.array([0.1, 0.1]), np.array([1.9, 0.1]), 2.0)
    assert d == pytest.approx(0.2)


class TestValidation:
    def test_rejects_nonpositive_noise(self):
        with pytest.raises(InvalidProblem):
            NetworkInstance(noise=0.0, max_power=1.0, gains=np.eye(2))

    def test_rejects_negative_gain(self):
        with pytest.raises(InvalidProblem):
            NetworkInstance(noise=1.0, max_power=1.0, gains=np.array([[1.0, -0.1], [0.1, 1.0]]))

    def test_rejects_nonsquare_gains(self):
        with pytest.raises(InvalidProblem):
            NetworkInstance(noise=1.0, max_power=1.0, gains=np.ones((2, 3)))

    def test_eavesdropper_needs_noise(self):
        with pytest.raises(InvalidProblem):
            NetworkInstance(noise=1.0, max_power=1.0, gains=np.eye(2), eaves_gains=np.eye(2))

    def test_default_weights(self):
        net = NetworkInstance(noise=1.0, max_power=1.0, gains=np.eye(3))
        np.testing.assert_array_equal(net.weights, np.ones(3))

    def test_graph_must_be_symmetric(self):
        with pytest.raises(InvalidProblem):
            GraphInstance(W=np.array([[1.0, 0.5], [0.2, 1.0]]), clusters=1)

    def test_graph_isolated_node(self):
        with pytest.raises(InvalidProblem):
            GraphInstance(W=np.array([[1.0, 0.0], [0.0, 0.0]]), clusters=1)

    def test_topology_radius(self):
        with pytest.raises(BadTopology):
            Topology(cells=4, cell_radius_km=0.03, min_distance_km=0.035)


class TestGenerators:
    def test_network_is_reproducible(self):
        topology = Topology(cells=7)
        a = generate_network(topology, 3, 40.0, -104.0)
        b = generate_network(topology, 3, 40.0, -104.0)
        np.testing.assert_array_equal(a.gains, b.gains)
        assert a.gains.shape == (7, 7)
        assert a.noise == 1.0
        assert a.max_power == pytest.approx(1e4)

    def test_different_seeds_differ(self):
        topology = Topology(cells=4)
        a = generate_network(topology, 1, 40.0, -104.0)
        b = generate_network(topology, 2, 40.0, -104.0)
        assert not np.allclose(a.gains, b.gains)

    def test_network_needs_one_user_per_cell(self):
        with pytest.raises(BadTopology):
            generate_network(Topology(cells=3, users_per_cell=2), 0, 40.0, -104.0)

    def test_uplink_gains_follow_schedule(self):
        net = generate_uplink_network(Topology(cells=3, users_per_cell=4), 0, 23.0, -104.0)
        g = net.uplink_gains([0, 3, 1])
        assert g.shape == (3, 3)
        assert g[2, 1] == net.beta[2, 1, 3]
        with pytest.raises(InvalidProblem):
            net.uplink_gains([0, 1])

    def test_pilot_network(self):
        net = generate_pilot_network(Topology(cells=3, users_per_cell=2), 0, 2, 20.0, -104.0, antennas=4)
        assert net.beta.shape == (3, 3, 2)
        assert net.links == 6
        assert net.pilot_length == 2

    def test_mimo_network(self):
        net = generate_mimo_network(2, 2, 4, 2, 2, 10.0, 1.0, 0)
        assert net.channels.shape == (2, 2, 2, 2, 4)
        assert net.links == 4
        with pytest.raises(BadTopology):
            generate_mimo_network(2, 2, 4, 2, 3, 10.0, 1.0, 0)

    def test_secrecy_network_units(self):
        net = secrecy_network(np.eye(2), 0.1 * np.eye(2), -50.0, -50.0, 30.0)
        assert net.noise == pytest.approx(1e-5)
        assert net.max_power == pytest.approx(1000.0)

    def test_planted_graph(self):
        graph = planted_graph(10, 2, 0.8, 0.1, 0.3, 0)
        assert graph.nodes == 10
        np.testing.assert_array_equal(graph.planted, [0] * 5 + [1] * 5)
        assert np.all(np.linalg.eigvalsh(graph.W) > -1e-10)


class TestSerialization:
    def test_network_yaml(self):
        net = generate_network(Topology(cells=3), 5, 40.0, -104.0)
        back = instance_from_yaml(instance_to_yaml(net))
        assert isinstance(back, NetworkInstance)
        np.testing.assert_allclose(back.gains, net.gains, rtol=1e-15)
        assert back.seed == 5

    def test_complex_channels_yaml(self):
        net = generate_mimo_network(1, 2, 2, 2, 1, 1.0, 1.0, 4)
        back = instance_from_yaml(instance_to_yaml(net))
        np.testing.assert_allclose(back.channels, net.channels, rtol=1e-15)

    def test_graph_file(self, tmp_path):
        graph = planted_graph(6, 3, 0.9, 0.2, 0.1, 1)
        path = str(tmp_path / "graph.yaml")
        save_instance(graph, path)
        back = load_instance(path)
        assert isinstance(back, GraphInstance)
        np.testing.assert_allclose(back.W, graph.W, rtol=1e-15)
        np.testing.assert_array_equal(back.planted, graph.planted)

    def test_integer_valued_arrays_decode_as_float(self):
        net = NetworkInstance(noise=1.0, max_power=2.0, gains=np.array([[2, 1], [0, 3]]), weights=np.array([1, 2]))
        back = instance_from_yaml(instance_to_yaml(net))
        assert back.gains.dtype == np.float64
        assert back.weights.dtype == np.float64
        np.testing.assert_array_equal(back.gains, [[2.0, 1.0], [0.0, 3.0]])
        text = (
            "type: GraphInstance\n"
            "W: {shape: [2, 2], data: [1, 1, 1, 1]}\n"
            "clusters: 2\n"
            "planted: {shape: [2], data: [0, 1]}\n"
        )
        back = instance_from_yaml(text)
        assert back.W.dtype == np.float64
        assert back.planted.dtype.kind == "i"

    def test_unknown_type(self):
        with pytest.raises(InvalidProblem):
            instance_from_yaml("type: Mystery\n")

    def test_unknown_field(self):
        with pytest.raises(InvalidProblem):
            instance_from_yaml("type: NetworkInstance\nnoise: 1.0\nmax_power: 1.0\ncolour: red\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactError):
            load_instance(str(tmp_path / "absent.yaml"))
