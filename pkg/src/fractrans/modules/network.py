"""Wireless network and similarity graph instances, their generators and YAML serialization."""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
import yaml

from fractrans.core.errors import ArtifactError, BadTopology, InvalidProblem
from fractrans.modules.problem import make_rng

logger = logging.getLogger(__name__)

# Distance dependent pathloss 128.1 + 37.6 log10(d) dB, d in km.
PATHLOSS_INTERCEPT_DB = 128.1
PATHLOSS_SLOPE_DB = 37.6


def dbm_to_mw(dbm: float) -> float:
    """Convert dBm to mW."""
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    """Convert mW to dBm."""
    return 10.0 * math.log10(mw)


def pathloss_db(distance_km: Any) -> Any:
    """Pathloss in dB at the given distance in km."""
    return PATHLOSS_INTERCEPT_DB + PATHLOSS_SLOPE_DB * np.log10(distance_km)


@dataclass(eq=False)
class NetworkInstance:
    """Wireless network data shared by the application solvers.

    All powers and gains are linear. `gains[i, j]` is the power gain from
    transmitter j to receiver i. Large-scale gains `beta[i, j, k]` run from
    user (j, k) to base station i and back. MIMO channels
    `channels[i, k, j]` map the antennas of base station j to user (i, k).
    """

    noise: float
    max_power: float
    gains: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    eaves_gains: Optional[np.ndarray] = None
    """Power gain from transmitter j to the eavesdropper of link i"""
    eaves_noise: Optional[float] = None
    beta: Optional[np.ndarray] = None
    pilot_length: Optional[int] = None
    antennas: int = 1
    """Base station antennas of pilot instances"""
    channels: Optional[np.ndarray] = None
    streams: int = 1
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        """Check the physical invariants of the instance."""
        if not self.noise > 0:
            raise InvalidProblem(f"noise power must be positive, got {self.noise}")
        if not self.max_power > 0:
            raise InvalidProblem(f"power cap must be positive, got {self.max_power}")
        for name in ("gains", "eaves_gains", "beta"):
            value = getattr(self, name)
            if value is None:
                continue
            value = np.asarray(value, dtype=float)
            if np.any(value < 0) or not np.all(np.isfinite(value)):
                raise InvalidProblem(f"{name} must be finite and nonnegative")
            setattr(self, name, value)
        if self.gains is not None and (self.gains.ndim != 2 or self.gains.shape[0] != self.gains.shape[1]):
            raise InvalidProblem(f"gains must be a square matrix, got shape {self.gains.shape}")
        if self.eaves_gains is not None:
            if self.gains is None or self.eaves_gains.shape != self.gains.shape:
                raise InvalidProblem("eavesdropper gains need legitimate gains of the same shape")
            if self.eaves_noise is None or not self.eaves_noise > 0:
                raise InvalidProblem("eavesdropper noise must be positive")
        if self.beta is not None and self.beta.ndim != 3:
            raise InvalidProblem(f"beta must have shape (cells, cells, users), got {self.beta.shape}")
        if self.channels is not None:
            self.channels = np.asarray(self.channels, dtype=complex)
            if self.channels.ndim != 5:
                raise InvalidProblem(f"channels must have shape (L, K, L, N, M), got {self.channels.shape}")
        if self.weights is None:
            self.weights = np.ones(self.links)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.links,) or np.any(self.weights <= 0):
            raise InvalidProblem("one positive weight per link is required")

    @property
    def links(self) -> int:
        """Number of links (or users for MIMO instances)."""
        if self.gains is not None:
            return self.gains.shape[0]
        if self.channels is not None:
            return self.channels.shape[0] * self.channels.shape[1]
        if self.beta is not None:
            return self.beta.shape[0] * self.beta.shape[2]
        raise InvalidProblem("instance has neither gains, beta nor channels")

    @property
    def cells(self) -> int:
        """Number of cells."""
        if self.channels is not None:
            return self.channels.shape[0]
        if self.beta is not None:
            return self.beta.shape[0]
        return self.links

    def uplink_gains(self, schedule: Any) -> np.ndarray:
        """Link gains when cell j serves its candidate `schedule[j]`."""
        if self.beta is None:
            raise InvalidProblem("uplink gains need large-scale gains")
        schedule = np.asarray(schedule, dtype=int)
        if schedule.shape != (self.cells,):
            raise InvalidProblem(f"one candidate per cell is required, got {schedule.tolist()}")
        cells = np.arange(self.cells)
        return self.beta[:, cells, schedule]


@dataclass(eq=False)
class GraphInstance:
    """Symmetric similarity graph to be split into `clusters` groups."""

    W: np.ndarray
    clusters: int
    planted: Optional[np.ndarray] = None
    """Generating partition, when known"""
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        """Check symmetry, entry range and positive degrees."""
        self.W = np.asarray(self.W, dtype=float)
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1]:
            raise InvalidProblem(f"similarity matrix must be square, got shape {self.W.shape}")
        if not np.allclose(self.W, self.W.T, atol=1e-12, rtol=0.0):
            raise InvalidProblem("similarity matrix must be symmetric")
        if np.any(self.W < 0) or np.any(self.W > 1):
            raise InvalidProblem("similarities must lie in [0, 1]")
        if np.any(self.degrees <= 0):
            raise InvalidProblem("every node needs a positive degree")
        if not 1 <= self.clusters <= self.nodes:
            raise InvalidProblem(f"cannot form {self.clusters} clusters from {self.nodes} nodes")
        if self.planted is not None:
            self.planted = np.asarray(self.planted, dtype=int)

    @property
    def nodes(self) -> int:
        """Number of nodes."""
        return self.W.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """Row sums d_i."""
        return self.W.sum(axis=1)


@dataclass(frozen=True)
class Topology:
    """Cell layout of a generated network."""

    cells: int
    users_per_cell: int = 1
    cell_radius_km: float = 0.5
    min_distance_km: float = 0.035
    shadowing_db: float = 8.0

    def __post_init__(self) -> None:
        """Reject layouts that cannot be dropped."""
        if self.cells < 1 or self.users_per_cell < 1:
            raise BadTopology(f"need at least one cell and one user, got {self.cells} and {self.users_per_cell}")
        if not self.cell_radius_km > 0 or not self.min_distance_km > 0:
            raise BadTopology("cell radius and minimum distance must be positive")
        if self.min_distance_km >= self.cell_radius_km:
            raise BadTopology(
                f"minimum distance {self.min_distance_km} km must be below the cell radius {self.cell_radius_km} km"
            )
        if self.shadowing_db < 0:
            raise BadTopology(f"shadowing deviation must be nonnegative, got {self.shadowing_db}")

    @classmethod
    def from_benchcfg(cls, section: Dict[str, Any], users_per_cell: int = 1) -> "Topology":
        """Build from a scenario section carrying the network fields."""
        return cls(
            cells=section["CELLS"],
            users_per_cell=users_per_cell,
            cell_radius_km=section["CELL_RADIUS_KM"],
            min_distance_km=section["MIN_DISTANCE_KM"],
            shadowing_db=section["SHADOWING_DB"],
        )

    @property
    def side_km(self) -> float:
        """Side of the square torus holding the cell grid."""
        return 2.0 * self.cell_radius_km * math.ceil(math.sqrt(self.cells))


def torus_distance(a: np.ndarray, b: np.ndarray, side: float) -> np.ndarray:
    """Euclidean distance on a square torus, broadcasting over leading axes."""
    delta = np.abs(np.asarray(a) - np.asarray(b))
    delta = np.minimum(delta, side - delta)
    return np.sqrt(np.sum(delta**2, axis=-1))


def drop_users(topology: Topology, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Place base stations on a grid and users uniformly in an annulus around their base station.

    Returns
    -------
        base station positions (L, 2) and user positions (L, K, 2), in km

    """
    per_row = math.ceil(math.sqrt(topology.cells))
    idx = np.arange(topology.cells)
    spacing = 2.0 * topology.cell_radius_km
    bs = np.column_stack([(idx % per_row + 0.5) * spacing, (idx // per_row + 0.5) * spacing])
    shape = (topology.cells, topology.users_per_cell)
    r_lo, r_hi = topology.min_distance_km, topology.cell_radius_km
    radius = np.sqrt(rng.uniform(r_lo**2, r_hi**2, size=shape))
    angle = rng.uniform(0.0, 2.0 * math.pi, size=shape)
    users = bs[:, None, :] + np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
    return bs, np.mod(users, topology.side_km)


def large_scale_gains(topology: Topology, rng: np.random.Generator) -> np.ndarray:
    """Pathloss plus log-normal shadowing between every user and every base station.

    Returns
    -------
        linear gains beta of shape (L, L, K), beta[i, j, k] between base station i and user (j, k)

    """
    bs, users = drop_users(topology, rng)
    distance = torus_distance(bs[:, None, None, :], users[None, :, :, :], topology.side_km)
    shadowing = rng.normal(0.0, topology.shadowing_db, size=distance.shape) if topology.shadowing_db > 0 else 0.0
    return 10.0 ** (-(pathloss_db(distance) + shadowing) / 10.0)


def generate_network(topology: Topology, seed: int, max_power_dbm: float, noise_dbm: float) -> NetworkInstance:
    """Downlink interference network with one link per cell.

    Gains are normalized to the noise power so that the instance has unit noise.
    """
    if topology.users_per_cell != 1:
        raise BadTopology("the interference network serves one user per cell")
    beta = large_scale_gains(topology, make_rng(seed))
    noise_mw = dbm_to_mw(noise_dbm)
    # transmitter j is base station j, receiver i is user (i, 0)
    gains = beta[:, :, 0].T / noise_mw
    logger.debug("Generated %d-link network from seed %d", topology.cells, seed)
    return NetworkInstance(noise=1.0, max_power=dbm_to_mw(max_power_dbm), gains=gains, seed=seed)


def generate_uplink_network(topology: Topology, seed: int, max_power_dbm: float, noise_dbm: float) -> NetworkInstance:
    """Uplink network with `users_per_cell` scheduling candidates in every cell."""
    beta = large_scale_gains(topology, make_rng(seed)) / dbm_to_mw(noise_dbm)
    return NetworkInstance(noise=1.0, max_power=dbm_to_mw(max_power_dbm), beta=beta, seed=seed)


def generate_pilot_network(
    topology: Topology, seed: int, pilot_length: int, pilot_power_dbm: float, noise_dbm: float, antennas: int = 1
) -> NetworkInstance:
    """Multi-cell uplink with per-user large-scale gains for pilot design."""
    if pilot_length < 1 or antennas < 1:
        raise BadTopology("pilot length and antenna count must be at least 1")
    beta = large_scale_gains(topology, make_rng(seed)) / dbm_to_mw(noise_dbm)
    return NetworkInstance(
        noise=1.0,
        max_power=dbm_to_mw(pilot_power_dbm),
        beta=beta,
        pilot_length=pilot_length,
        antennas=antennas,
        seed=seed,
    )


def generate_mimo_network(
    cells: int,
    users: int,
    tx_antennas: int,
    rx_antennas: int,
    streams: int,
    max_power: float,
    noise: float,
    seed: int,
) -> NetworkInstance:
    """Downlink MIMO network with i.i.d. CN(0, 1) channel entries."""
    if min(cells, users, tx_antennas, rx_antennas, streams) < 1:
        raise BadTopology("all MIMO dimensions must be at least 1")
    if streams > min(tx_antennas, rx_antennas):
        raise BadTopology(f"{streams} streams do not fit {tx_antennas}x{rx_antennas} antennas")
    rng = make_rng(seed)
    shape = (cells, users, cells, rx_antennas, tx_antennas)
    channels = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    return NetworkInstance(
        noise=noise,
        max_power=max_power,
        channels=channels,
        streams=streams,
        weights=np.ones(cells * users),
        seed=seed,
    )


def secrecy_network(
    legit_gains: Any,
    eaves_gains: Any,
    noise_dbm: float,
    eaves_noise_dbm: float,
    max_power_dbm: float,
) -> NetworkInstance:
    """Secure transmission instance with the noise and power levels given in dBm."""
    return NetworkInstance(
        noise=dbm_to_mw(noise_dbm),
        max_power=dbm_to_mw(max_power_dbm),
        gains=np.asarray(legit_gains, dtype=float),
        eaves_gains=np.asarray(eaves_gains, dtype=float),
        eaves_noise=dbm_to_mw(eaves_noise_dbm),
    )


def planted_graph(
    nodes: int, clusters: int, intra: float, inter: float, jitter: float, seed: int
) -> GraphInstance:
    """Planted-partition similarity graph.

    Block similarities (`intra` inside a block, `inter` across blocks, 1 on
    the diagonal) are multiplied entrywise with a Gaussian kernel over random
    points of scatter `jitter`. Both factors are PSD, so W is PSD.
    """
    if not 0 <= inter <= intra <= 1:
        raise BadTopology(f"need 0 <= inter <= intra <= 1, got inter={inter}, intra={intra}")
    if not 1 <= clusters <= nodes or jitter < 0:
        raise BadTopology(f"cannot plant {clusters} clusters on {nodes} nodes with jitter {jitter}")
    rng = make_rng(seed)
    labels = np.arange(nodes) * clusters // nodes
    same = labels[:, None] == labels[None, :]
    block = np.where(same, intra, inter)
    np.fill_diagonal(block, 1.0)
    points = jitter * rng.standard_normal((nodes, 2))
    sq = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    W = block * np.exp(-0.5 * sq)
    return GraphInstance(W=(W + W.T) / 2.0, clusters=clusters, planted=labels, seed=seed)


INSTANCE_TYPES = {"NetworkInstance": NetworkInstance, "GraphInstance": GraphInstance}
# Array fields holding labels; every other array decodes as float64.
INTEGER_FIELDS = frozenset({"planted"})


def _encode(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return {
                "shape": list(value.shape),
                "real": value.real.ravel().tolist(),
                "imag": value.imag.ravel().tolist(),
            }
        return {"shape": list(value.shape), "data": value.ravel().tolist()}
    if isinstance(value, np.generic):
        return value.item()
    return value


def _decode(name: str, value: Any) -> Any:
    if isinstance(value, dict) and "shape" in value:
        shape = tuple(value["shape"])
        if "real" in value:
            return (np.asarray(value["real"], dtype=float) + 1j * np.asarray(value["imag"], dtype=float)).reshape(
                shape
            )
        data = np.asarray(value["data"], dtype=int if name in INTEGER_FIELDS else float)
        return data.reshape(shape)
    return value


def instance_to_yaml(instance: NetworkInstance | GraphInstance) -> str:
    """Serialize an instance to a YAML mapping."""
    doc: Dict[str, Any] = {"type": type(instance).__name__}
    for f in dataclasses.fields(instance):
        doc[f.name] = _encode(getattr(instance, f.name))
    return yaml.safe_dump(doc, sort_keys=False)


def instance_from_yaml(text: str) -> NetworkInstance | GraphInstance:
    """Rebuild an instance serialized by `instance_to_yaml`."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise InvalidProblem(f"instance is not valid YAML: {e}") from e
    if not isinstance(doc, dict) or doc.get("type") not in INSTANCE_TYPES:
        raise InvalidProblem("instance document has no known type")
    cls = INSTANCE_TYPES[doc.pop("type")]
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - names
    if unknown:
        raise InvalidProblem(f"unknown instance fields: {sorted(unknown)}")
    return cls(**{k: _decode(k, v) for k, v in doc.items()})


def save_instance(instance: NetworkInstance | GraphInstance, path: str) -> None:
    """Write an instance to a YAML file."""
    try:
        with open(path, "w") as f:
            f.write(instance_to_yaml(instance))
    except OSError as e:
        raise ArtifactError(f"Could not write instance to {path}: {e}") from e


def load_instance(path: str) -> NetworkInstance | GraphInstance:
    """Read an instance from a YAML file."""
    try:
        with open(path) as f:
            return instance_from_yaml(f.read())
    except OSError as e:
        raise ArtifactError(f"Could not read instance from {path}: {e}") from e
