"""Distributed on-line maximum-likelihood refinement (doMLE).

Every non-anchor node i keeps a local map: its own position estimate and a
copy of each non-anchor neighbor's. At each round the nodes measure fresh
RSSI on their links, take a gradient step on the log-distance least-squares
cost f_i over their whole map, and one random pair of adjacent non-anchor
nodes averages the entries their maps share.
"""

from collections.abc import Iterable
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .channel import ChannelParams, sample_rssi_matrix
from .const import DEFAULT_D_MIN, STREAM_GOSSIP, STREAM_RSSI
from .domds import CommStats
from .exceptions import ConfigurationError, DomainError, SingularityError
from .mds_core import Scenario, squared_distances
from .utils.logger import _LOGGER, INDENT
from .utils.utils import StreamFactory

LN10 = float(np.log(10.0))


@dataclass(frozen=True, eq=False)
class LocalizationGraph:
    """Connected radio graph with its anchor set.

    adjacency[i, j] is True when i and j hear each other.
    """

    n_nodes: int
    edges: frozenset[tuple[int, int]]
    anchors: tuple[int, ...]
    adjacency: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        anchors = tuple(sorted({int(a) for a in self.anchors}))
        if any(a < 0 or a >= self.n_nodes for a in anchors):
            raise ConfigurationError(f"Anchor indices must lie in [0, {self.n_nodes}), got {anchors}")
        edges = frozenset((min(i, j), max(i, j)) for i, j in self.edges)
        if any(i == j for i, j in edges):
            raise ConfigurationError("Self-loops are not allowed in the localization graph")
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_nodes))
        graph.add_edges_from(edges)
        if self.n_nodes > 1 and not nx.is_connected(graph):
            raise ConfigurationError(
                f"Localization graph is not connected "
                f"({nx.number_connected_components(graph)} components)"
            )
        adjacency = nx.to_numpy_array(graph, nodelist=list(range(self.n_nodes))) > 0
        adjacency.setflags(write=False)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "adjacency", adjacency)

    @property
    def is_anchor(self) -> np.ndarray:
        """Boolean mask of anchor nodes."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[list(self.anchors)] = True
        return mask

    @property
    def unknown(self) -> tuple[int, ...]:
        """Nodes whose positions are estimated."""
        anchors = set(self.anchors)
        return tuple(i for i in range(self.n_nodes) if i not in anchors)

    def neighbors(self, i: int) -> tuple[int, ...]:
        """N_i: non-anchor neighbors of i."""
        return tuple(int(j) for j in np.flatnonzero(self.adjacency[i] & ~self.is_anchor))

    def anchor_neighbors(self, i: int) -> tuple[int, ...]:
        """M_i: anchor neighbors of i."""
        return tuple(int(k) for k in np.flatnonzero(self.adjacency[i] & self.is_anchor))

    def map_domain(self, i: int) -> tuple[int, ...]:
        """Nodes whose positions node i keeps: N_i ∪ {i}."""
        return tuple(sorted(set(self.neighbors(i)) | {i}))

    @property
    def gossip_edges(self) -> list[tuple[int, int]]:
        """Edges with both endpoints non-anchor, in sorted order."""
        anchors = set(self.anchors)
        return sorted((i, j) for i, j in self.edges if i not in anchors and j not in anchors)


def build_graph(
    positions: np.ndarray, anchors: Iterable[int], radius: float = np.inf
) -> LocalizationGraph:
    """Connect every pair of nodes closer than the radio radius."""
    positions = np.asarray(positions, dtype=float)
    if not radius > 0:
        raise ConfigurationError(f"Radio radius must be positive, got {radius}")
    n = positions.shape[0]
    within = squared_distances(positions) <= radius**2
    edges = {(i, j) for i in range(n) for j in range(i + 1, n) if within[i, j]}
    graph = LocalizationGraph(n, frozenset(edges), tuple(anchors))
    _LOGGER.debug("::build_graph:: %d nodes, %d edges, radius %s", n, len(edges), radius)
    return graph


@dataclass(frozen=True, eq=False)
class LocalMap:
    """Node `owner`'s estimates of the positions listed in `domain`."""

    owner: int
    domain: tuple[int, ...]
    positions: np.ndarray

    def __post_init__(self) -> None:
        if self.owner not in self.domain:
            raise DomainError(f"Local map of node {self.owner} must contain its own estimate")
        positions = np.array(self.positions, dtype=float)
        if positions.shape[0] != len(self.domain):
            raise DomainError(
                f"Local map has {positions.shape[0]} positions for {len(self.domain)} nodes"
            )
        object.__setattr__(self, "positions", positions)

    def index(self, node: int) -> int:
        """Row of `node` inside the map."""
        return self.domain.index(node)

    def position(self, node: int) -> np.ndarray:
        """Estimate of `node`'s position."""
        return self.positions[self.index(node)]

    @property
    def own(self) -> np.ndarray:
        """The owner's own estimate."""
        return self.position(self.owner)


@dataclass(frozen=True, eq=False)
class LogResidualObs:
    """ℓ̂_ij(n) for every directed link, zero where there is no link."""

    values: np.ndarray
    tick: int = 0

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise DomainError("Log-distance observations must be finite")


def _residuals(residuals: LogResidualObs | np.ndarray) -> np.ndarray:
    if isinstance(residuals, LogResidualObs):
        return residuals.values
    return np.asarray(residuals, dtype=float)


def log_residual(p_rssi: float | np.ndarray, params: ChannelParams) -> float | np.ndarray:
    """ℓ̂ = (−P − PL₀)/(10η), a noisy log₁₀ distance."""
    return (-np.asarray(p_rssi, dtype=float) - params.pl0) / (10.0 * params.eta)


def log_residual_variance(params: ChannelParams) -> float:
    """Variance σ²/(100η²T) of a T-averaged log-distance observation."""
    return params.sigma2 / (100.0 * params.eta**2 * params.t_samples)


def _floored(d: np.ndarray | float, d_min: float) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d_min <= 0 and np.any(d <= 0):
        raise SingularityError("Two positions coincide inside a log-distance term")
    return np.maximum(d, d_min)


def _terms(
    i: int,
    local_map: LocalMap,
    graph: LocalizationGraph,
    anchor_positions: np.ndarray,
) -> tuple[list[int], np.ndarray]:
    """Neighbor ids and the positions node i uses for them."""
    peers = list(graph.neighbors(i)) + list(graph.anchor_neighbors(i))
    points = [local_map.position(j) for j in graph.neighbors(i)]
    points += [anchor_positions[k] for k in graph.anchor_neighbors(i)]
    return peers, np.array(points, dtype=float).reshape(len(peers), local_map.positions.shape[1])


def local_cost(
    i: int,
    local_map: LocalMap,
    graph: LocalizationGraph,
    residuals: LogResidualObs | np.ndarray,
    anchor_positions: np.ndarray,
    d_min: float = DEFAULT_D_MIN,
) -> float:
    """f_i: squared log-distance residuals over non-anchor and anchor neighbors."""
    peers, points = _terms(i, local_map, graph, anchor_positions)
    if not peers:
        return 0.0
    d = _floored(np.linalg.norm(local_map.own - points, axis=1), d_min)
    return float(np.sum((_residuals(residuals)[i, peers] - np.log10(d)) ** 2))


def local_gradient(
    i: int,
    local_map: LocalMap,
    graph: LocalizationGraph,
    residuals: LogResidualObs | np.ndarray,
    anchor_positions: np.ndarray,
    d_min: float = DEFAULT_D_MIN,
) -> np.ndarray:
    """∂f_i over every position in the map (same shape as map.positions)."""
    grad = np.zeros_like(local_map.positions)
    peers, points = _terms(i, local_map, graph, anchor_positions)
    if not peers:
        return grad
    diff = local_map.own - points
    d = _floored(np.linalg.norm(diff, axis=1), d_min)
    coef = -2.0 * (_residuals(residuals)[i, peers] - np.log10(d)) / (d**2 * LN10)
    pulls = coef[:, None] * diff
    grad[local_map.index(i)] = pulls.sum(axis=0)
    for row, j in enumerate(graph.neighbors(i)):
        grad[local_map.index(j)] -= pulls[row]
    return grad


def local_step(local_map: LocalMap, gradient: np.ndarray, gamma: float) -> LocalMap:
    """z̃ = z − γ∇f_i on every position of the map."""
    return LocalMap(local_map.owner, local_map.domain, local_map.positions - gamma * gradient)


def gossip_step(
    map_i: LocalMap, map_j: LocalMap, graph: LocalizationGraph
) -> tuple[LocalMap, LocalMap]:
    """Average the entries both maps hold; everything else is left as is."""
    i, j = map_i.owner, map_j.owner
    if not graph.adjacency[i, j]:
        raise DomainError(f"Nodes {i} and {j} are not neighbors")
    if i in graph.anchors or j in graph.anchors:
        raise DomainError(f"Gossip pair ({i}, {j}) includes an anchor")
    shared = sorted(set(map_i.domain) & set(map_j.domain))
    pos_i = map_i.positions.copy()
    pos_j = map_j.positions.copy()
    for node in shared:
        a, b = map_i.index(node), map_j.index(node)
        mean = 0.5 * (pos_i[a] + pos_j[b])
        pos_i[a] = mean
        pos_j[b] = mean
    return (
        LocalMap(i, map_i.domain, pos_i),
        LocalMap(j, map_j.domain, pos_j),
    )


@dataclass(frozen=True, eq=False)
class MapBank:
    """Every local map in one array.

    est[i, l] is node i's estimate of node l, meaningful where holds[i, l].
    fixed holds the known anchor coordinates.
    """

    est: np.ndarray
    holds: np.ndarray
    fixed: np.ndarray
    tick: int = 0

    @property
    def n(self) -> int:
        """Number of nodes."""
        return self.est.shape[0]

    def local_map(self, i: int) -> LocalMap:
        """Node i's map."""
        domain = tuple(int(l) for l in np.flatnonzero(self.holds[i]))
        return LocalMap(i, domain, self.est[i, list(domain)])


def init_bank(graph: LocalizationGraph, positions: np.ndarray) -> MapBank:
    """Seed every map from the same initial positions; anchors stay fixed."""
    positions = np.asarray(positions, dtype=float)
    n, p = positions.shape
    if n != graph.n_nodes:
        raise ConfigurationError(f"Got {n} initial positions for {graph.n_nodes} nodes")
    holds = np.zeros((n, n), dtype=bool)
    for i in graph.unknown:
        holds[i, list(graph.map_domain(i))] = True
    est = np.where(holds[:, :, None], positions[None, :, :], 0.0)
    fixed = np.where(graph.is_anchor[:, None], positions, 0.0)
    return MapBank(est, holds, fixed, 0)


def owner_positions(bank: MapBank, graph: LocalizationGraph) -> np.ndarray:
    """Each node's own entry of its own map; anchors report their known position."""
    own = bank.est[np.arange(bank.n), np.arange(bank.n)]
    return np.where(graph.is_anchor[:, None], bank.fixed, own)


def sample_log_residuals(
    graph: LocalizationGraph,
    positions: np.ndarray,
    params: ChannelParams,
    rng: np.random.Generator,
    tick: int = 0,
) -> LogResidualObs:
    """Fresh RSSI on every directed link turned into log-distances."""
    rssi = sample_rssi_matrix(positions, params, rng)
    values = np.where(graph.adjacency, log_residual(rssi, params), 0.0)
    return LogResidualObs(values, tick)


def bank_gradient(
    bank: MapBank,
    graph: LocalizationGraph,
    residuals: LogResidualObs | np.ndarray,
    anchor_positions: np.ndarray,
    d_min: float = DEFAULT_D_MIN,
) -> np.ndarray:
    """local_gradient of every node at once, shaped like bank.est."""
    n = bank.n
    res = _residuals(residuals)
    unknown = ~graph.is_anchor
    own = bank.est[np.arange(n), np.arange(n)]

    # entries node i uses for its neighbors: its own copy or the anchor truth
    peers = np.where(graph.is_anchor[None, :, None], anchor_positions[None, :, :], bank.est)
    mask = graph.adjacency & unknown[:, None]
    diff = own[:, None, :] - peers
    d = _floored(np.where(mask, np.linalg.norm(diff, axis=2), 1.0), d_min)
    coef = np.where(mask, -2.0 * (res - np.log10(d)) / (d**2 * LN10), 0.0)
    pulls = coef[:, :, None] * diff

    grad = np.where((mask & unknown[None, :])[:, :, None], -pulls, 0.0)
    grad[np.arange(n), np.arange(n)] += pulls.sum(axis=1)
    return grad


def total_cost(
    positions: np.ndarray,
    graph: LocalizationGraph,
    residuals: LogResidualObs | np.ndarray,
    d_min: float = DEFAULT_D_MIN,
) -> float:
    """Σ_i f_i with every map equal to `positions`."""
    res = _residuals(residuals)
    mask = graph.adjacency & ~graph.is_anchor[:, None]
    d = np.sqrt(squared_distances(positions))
    d = _floored(np.where(mask, d, 1.0), d_min)
    return float(np.sum(np.where(mask, (res - np.log10(d)) ** 2, 0.0)))


def domle_round(
    bank: MapBank,
    graph: LocalizationGraph,
    scenario: Scenario,
    channel: ChannelParams,
    gamma: float,
    streams: StreamFactory,
    d_min: float = DEFAULT_D_MIN,
) -> tuple[MapBank, CommStats]:
    """One round: fresh residuals, local steps everywhere, one gossip pair."""
    pairs = graph.gossip_edges
    if not pairs:
        raise DomainError("doMLE needs at least one edge between two non-anchor nodes")
    tick = bank.tick + 1
    anchor_positions = scenario.positions
    residuals = sample_log_residuals(
        graph, scenario.positions, channel, streams.stream(tick, STREAM_RSSI), tick
    )
    grad = bank_gradient(bank, graph, residuals, anchor_positions, d_min)
    est = bank.est - gamma * grad

    i, j = pairs[int(streams.stream(tick, STREAM_GOSSIP).integers(len(pairs)))]
    shared = bank.holds[i] & bank.holds[j]
    mean = 0.5 * (est[i, shared] + est[j, shared])
    est[i, shared] = mean
    est[j, shared] = mean
    scalars = 2 * int(shared.sum()) * est.shape[2]
    if tick % 1000 == 0:
        _LOGGER.debug(f"{INDENT}doMLE round {tick}: gossip ({i}, {j}), |∇| {np.linalg.norm(grad):.3g}")
    return MapBank(est, bank.holds, bank.fixed, tick), CommStats(1, 2, 2, scalars)
