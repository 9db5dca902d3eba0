"""Distributed asynchronous on-line MDS-MAP (doMDS).

Node i owns row i of U, its own eigenvalue estimates and its row of the
sparse observation. One tick is:

  1. every node refreshes its observation row S_n(i, ·) and row average;
  2. a uniformly drawn node ι broadcasts (U(ι), S̄(ι)); node i hears it when
     Q_i = 1 (never the broadcaster itself);
  3. every node forms δ(i), the entries M̂(i,i), M̂(i,ι) and Y(i), a local
     surrogate of row i of MU;
  4. a second node ι′ broadcasts U(ι′)ᵀY(ι′);
  5. every node forms Λ(i), a surrogate of UᵀMU, and updates U(i), λ(i).

The per-node functions below follow that message flow literally and
`local_round` composes them. `domds_round` runs the same tick on the whole
network at once with array operations.
"""

import itertools
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelParams, ObservationModel, SparseObservation, sample_observation
from .const import (
    MAX_ENUMERATION_NODES,
    STREAM_ATS,
    STREAM_ATS_DELTA,
    STREAM_ATS_SECOND,
    STREAM_OBSERVATION,
    VARIANT_DECOUPLED,
    VARIANT_LITERAL,
    VARIANTS,
)
from .exceptions import ConfigurationError, DomainError, ProtocolError
from .mds_core import Scenario, double_center
from .oja_central import DEFAULT_BOX, ProjectionBox, project_box, rotate_to_axes
from .utils.logger import _LOGGER, INDENT
from .utils.utils import StreamFactory


@dataclass(frozen=True, eq=False)
class AtsEvent:
    """One draw of the asynchronous transmission sequence."""

    broadcaster: int
    received: np.ndarray
    q: float

    def __post_init__(self) -> None:
        if not 0 < self.q < 1:
            raise ConfigurationError(f"Reception probability must lie in (0, 1), got {self.q}")
        if self.received[self.broadcaster]:
            raise ProtocolError(f"Broadcaster {self.broadcaster} cannot receive its own message")

    @property
    def n(self) -> int:
        """Number of nodes."""
        return len(self.received)


@dataclass(frozen=True, eq=False)
class NodeState:
    """State physically held by node i.

    rayleigh is the node's running average of Λ(i); lam is its diagonal.
    """

    node_id: int
    u_row: np.ndarray
    lam: np.ndarray
    last_row_avg: float = 0.0
    rayleigh: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.rayleigh is None:
            object.__setattr__(self, "rayleigh", np.diag(np.asarray(self.lam, dtype=float)))


@dataclass(frozen=True, eq=False)
class Phase1Msg:
    """First broadcast: sender's U row and row average (p+1 scalars)."""

    sender: int
    u_row: np.ndarray
    row_avg: float

    @property
    def payload_size(self) -> int:
        """Number of scalars on the air."""
        return len(self.u_row) + 1


@dataclass(frozen=True, eq=False)
class Phase2Msg:
    """Second broadcast: sender's p×p product U(ι′)ᵀY(ι′) (p² scalars)."""

    sender: int
    product: np.ndarray

    @property
    def payload_size(self) -> int:
        """Number of scalars on the air."""
        return int(self.product.size)


@dataclass(frozen=True, eq=False)
class DeltaMsg:
    """Extra broadcast of the decoupled variant: sender's row average."""

    sender: int
    row_avg: float

    @property
    def payload_size(self) -> int:
        """Number of scalars on the air."""
        return 1


BroadcastMsg = Phase1Msg | Phase2Msg | DeltaMsg


@dataclass(frozen=True)
class CommStats:
    """Communication accounting."""

    ticks: int = 0
    broadcasts_sent: int = 0
    messages_delivered: int = 0
    scalars_transmitted: int = 0

    def __add__(self, other: "CommStats") -> "CommStats":
        return CommStats(
            self.ticks + other.ticks,
            self.broadcasts_sent + other.broadcasts_sent,
            self.messages_delivered + other.messages_delivered,
            self.scalars_transmitted + other.scalars_transmitted,
        )


@dataclass(frozen=True, eq=False)
class Network:
    """All node states stored as arrays; row i is node i's data."""

    u: np.ndarray
    lam: np.ndarray
    rayleigh: np.ndarray
    row_avg: np.ndarray
    tick: int = 0

    @property
    def n(self) -> int:
        """Number of nodes."""
        return self.u.shape[0]

    @property
    def p(self) -> int:
        """Embedding dimension."""
        return self.u.shape[1]

    def node(self, i: int) -> NodeState:
        """Return node i's state."""
        return NodeState(
            node_id=i,
            u_row=self.u[i].copy(),
            lam=self.lam[i].copy(),
            last_row_avg=float(self.row_avg[i]),
            rayleigh=self.rayleigh[i].copy(),
        )

    def nodes(self) -> list[NodeState]:
        """Return every node's state in index order."""
        return [self.node(i) for i in range(self.n)]

    @classmethod
    def from_nodes(cls, nodes: Sequence[NodeState], tick: int = 0) -> "Network":
        """Stack node states back into a network."""
        ordered = sorted(nodes, key=lambda node: node.node_id)
        return cls(
            u=np.array([node.u_row for node in ordered], dtype=float),
            lam=np.array([node.lam for node in ordered], dtype=float),
            rayleigh=np.array([node.rayleigh for node in ordered], dtype=float),
            row_avg=np.array([node.last_row_avg for node in ordered], dtype=float),
            tick=tick,
        )


def init_network(n: int, p: int, rng: np.random.Generator) -> Network:
    """U₀ rows uniform in [−1, 1]^p, λ₀ = 0."""
    return Network(
        u=rng.uniform(-1.0, 1.0, size=(n, p)),
        lam=np.zeros((n, p)),
        rayleigh=np.zeros((n, p, p)),
        row_avg=np.zeros(n),
        tick=0,
    )


def sample_ats(n_nodes: int, q: float, rng: np.random.Generator) -> AtsEvent:
    """Uniform broadcaster, independent Bernoulli(q) receivers."""
    if not 0 < q < 1:
        raise ConfigurationError(f"Reception probability must lie in (0, 1), got {q}")
    if n_nodes < 2:
        raise DomainError(f"Need at least two nodes, got {n_nodes}")
    broadcaster = int(rng.integers(n_nodes))
    received = (rng.random(n_nodes) < q).astype(np.int8)
    received[broadcaster] = 0
    return AtsEvent(broadcaster, received, q)


def ats_outcomes(n_nodes: int, q: float) -> Iterator[tuple[AtsEvent, float]]:
    """Enumerate every ATS outcome with its probability."""
    for broadcaster in range(n_nodes):
        others = [k for k in range(n_nodes) if k != broadcaster]
        for flags in itertools.product((0, 1), repeat=n_nodes - 1):
            received = np.zeros(n_nodes, dtype=np.int8)
            received[others] = flags
            heard = sum(flags)
            prob = q**heard * (1.0 - q) ** (n_nodes - 1 - heard) / n_nodes
            yield AtsEvent(broadcaster, received, q), prob


# -- per-node protocol ------------------------------------------------------


def delta_estimate(
    i: int,
    own_row_avg: float,
    msg: BroadcastMsg | None,
    q: float,
    n_nodes: int,
) -> float:
    """δ(i) = S̄(i)/N + S̄(ι)Q_i/q; the second term only when a message arrived."""
    delta = own_row_avg / n_nodes
    if msg is not None:
        if isinstance(msg, Phase2Msg):
            raise ProtocolError(f"Node {i} cannot form δ from a phase-2 message")
        if msg.sender == i:
            raise ProtocolError(f"Node {i} cannot receive its own broadcast")
        delta += msg.row_avg / q
    return float(delta)


def mhat_entry(
    i: int,
    j: int,
    row_avg_i: float,
    row_avg_j: float,
    s_ij: float,
    delta_i: float,
) -> float:
    """M̂(i,j) = (S̄(i) + S̄(j))/2 − (S(i,j) + δ(i))/2."""
    return 0.5 * (row_avg_i + row_avg_j) - 0.5 * (s_ij + delta_i)


def phase1_message(node: NodeState) -> Phase1Msg:
    """Payload of a phase-1 broadcast."""
    return Phase1Msg(node.node_id, node.u_row.copy(), node.last_row_avg)


def compute_y(
    i: int,
    node: NodeState,
    msg1: Phase1Msg | None,
    ats: AtsEvent,
    s_row: np.ndarray,
    q: float,
    delta: float | None = None,
) -> np.ndarray:
    """Y(i) = M̂(i,i)U(i) + (N/q)U(ι)M̂(i,ι)Q_i.

    delta defaults to the estimate built from msg1 itself; the decoupled
    variant passes one built from an independent draw.
    """
    n = len(s_row)
    heard = bool(ats.received[i])
    if heard and msg1 is None:
        raise ProtocolError(f"Node {i} is flagged as receiver but holds no phase-1 message")
    if delta is None:
        delta = delta_estimate(i, node.last_row_avg, msg1 if heard else None, q, n)
    y = mhat_entry(i, i, node.last_row_avg, node.last_row_avg, 0.0, delta) * node.u_row
    if heard:
        m_hat = mhat_entry(
            i, msg1.sender, node.last_row_avg, msg1.row_avg, s_row[msg1.sender], delta
        )
        y = y + (n / q) * m_hat * msg1.u_row
    return y


def phase2_message(node: NodeState, y: np.ndarray) -> Phase2Msg:
    """Payload of a phase-2 broadcast."""
    return Phase2Msg(node.node_id, np.outer(node.u_row, y))


def compute_lambda_matrix(
    i: int,
    node: NodeState,
    y_i: np.ndarray,
    msg2: Phase2Msg | None,
    q: float,
    n_nodes: int,
    received: bool | None = None,
) -> np.ndarray:
    """Λ(i) = U(i)ᵀY(i) + (N/q)U(ι′)ᵀY(ι′)Q′_i."""
    if received is None:
        received = msg2 is not None
    if received and msg2 is None:
        raise ProtocolError(f"Node {i} is flagged as receiver but holds no phase-2 message")
    lam_mat = np.outer(node.u_row, y_i)
    if received:
        lam_mat = lam_mat + (n_nodes / q) * msg2.product
    return lam_mat


def node_update(
    node: NodeState,
    y: np.ndarray,
    lam_mat: np.ndarray,
    gamma: float,
    box: ProjectionBox = DEFAULT_BOX,
) -> NodeState:
    """U(i) ← Π_K[U(i) + γ(Y(i) − U(i)Λ(i))], λ(i) ← λ(i) + γ(diag Λ(i) − λ(i))."""
    u_row = project_box(node.u_row + gamma * (y - node.u_row @ lam_mat), box)
    lam = node.lam + gamma * (np.diag(lam_mat) - node.lam)
    rayleigh = node.rayleigh + gamma * (lam_mat - node.rayleigh)
    return replace(node, u_row=u_row, lam=lam, rayleigh=rayleigh)


def node_position(node: NodeState) -> np.ndarray:
    """Ẑ(i) = (√λ₁(i)u₁(i), …) with negative λ clamped to zero.

    Columns keep their index order: a node cannot sort by its own λ without
    disagreeing with other nodes about which axis is which.
    """
    return node.u_row * np.sqrt(np.maximum(node.lam, 0.0))


def node_axis_position(node: NodeState) -> np.ndarray:
    """Ẑ(i) rotated onto the eigen-axes of the node's own Rayleigh matrix."""
    return rotate_to_axes(node.u_row, node.rayleigh)


def local_round(
    nodes: Sequence[NodeState],
    sparse: SparseObservation,
    ats1: AtsEvent,
    ats2: AtsEvent,
    gamma: float,
    q: float,
    box: ProjectionBox = DEFAULT_BOX,
    ats_delta: AtsEvent | None = None,
) -> list[NodeState]:
    """One tick executed node by node, exchanging only broadcast messages."""
    n = len(nodes)
    nodes = [replace(node, last_row_avg=float(sparse.row_avg[node.node_id])) for node in nodes]
    msg1 = phase1_message(nodes[ats1.broadcaster])

    deltas: list[float | None] = [None] * n
    if ats_delta is not None:
        sender = nodes[ats_delta.broadcaster]
        delta_msg = DeltaMsg(sender.node_id, sender.last_row_avg)
        deltas = [
            delta_estimate(
                i, nodes[i].last_row_avg, delta_msg if ats_delta.received[i] else None, q, n
            )
            for i in range(n)
        ]

    ys = [
        compute_y(
            i,
            nodes[i],
            msg1 if ats1.received[i] else None,
            ats1,
            sparse.s[i],
            q,
            deltas[i],
        )
        for i in range(n)
    ]
    msg2 = phase2_message(nodes[ats2.broadcaster], ys[ats2.broadcaster])
    return [
        node_update(
            nodes[i],
            ys[i],
            compute_lambda_matrix(
                i, nodes[i], ys[i], msg2 if ats2.received[i] else None, q, n
            ),
            gamma,
            box,
        )
        for i in range(n)
    ]


# -- vectorized network tick -------------------------------------------------


def delta_vector(row_avg: np.ndarray, ats: AtsEvent, q: float) -> np.ndarray:
    """δ(i) for every node from one draw."""
    n = len(row_avg)
    return row_avg / n + row_avg[ats.broadcaster] * ats.received / q


def mhat_matrix(s: np.ndarray, row_avg: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Every entry M̂(i,j) with node i's δ(i)."""
    return 0.5 * (row_avg[:, None] + row_avg[None, :]) - 0.5 * (s + delta[:, None])


def y_matrix(
    u: np.ndarray,
    s: np.ndarray,
    row_avg: np.ndarray,
    ats: AtsEvent,
    delta: np.ndarray,
    q: float,
) -> np.ndarray:
    """Y(i) for every node."""
    n = u.shape[0]
    b = ats.broadcaster
    mhat_diag = row_avg - 0.5 * delta
    mhat_b = 0.5 * (row_avg + row_avg[b]) - 0.5 * (s[:, b] + delta)
    return mhat_diag[:, None] * u + (n / q) * (ats.received * mhat_b)[:, None] * u[b][None, :]


def lambda_matrices(u: np.ndarray, y: np.ndarray, ats2: AtsEvent, q: float) -> np.ndarray:
    """Λ(i) for every node."""
    n = u.shape[0]
    b = ats2.broadcaster
    local = np.einsum("ip,iq->ipq", u, y)
    return local + (n / q) * ats2.received[:, None, None] * np.outer(u[b], y[b])[None, :, :]


def tick_stats(network: Network, ats1: AtsEvent, ats2: AtsEvent, ats_delta: AtsEvent | None) -> CommStats:
    """Accounting for one tick."""
    p = network.p
    broadcasts = 2
    delivered = int(ats1.received.sum() + ats2.received.sum())
    scalars = (p + 1) + p * p
    if ats_delta is not None:
        broadcasts += 1
        delivered += int(ats_delta.received.sum())
        scalars += 1
    return CommStats(1, broadcasts, delivered, scalars)


def domds_round(
    network: Network,
    scenario: Scenario,
    channel: ChannelParams,
    obs: ObservationModel,
    q: float,
    gamma: float,
    streams: StreamFactory,
    variant: str = VARIANT_LITERAL,
    box: ProjectionBox = DEFAULT_BOX,
) -> tuple[Network, CommStats]:
    """One doMDS tick on the whole network.

    Draws for tick n come from the (n, purpose) sub-streams, so a tick can be
    replayed in isolation.
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"Unknown doMDS variant: {variant}")
    n = network.n
    if n < 2:
        raise DomainError(f"Need at least two nodes, got {n}")
    tick = network.tick + 1

    sparse = sample_observation(scenario, obs, channel, streams.stream(tick, STREAM_OBSERVATION))
    ats1 = sample_ats(n, q, streams.stream(tick, STREAM_ATS))
    ats2 = sample_ats(n, q, streams.stream(tick, STREAM_ATS_SECOND))
    ats_delta = (
        sample_ats(n, q, streams.stream(tick, STREAM_ATS_DELTA))
        if variant == VARIANT_DECOUPLED
        else None
    )

    u = network.u
    row_avg = sparse.row_avg
    delta = delta_vector(row_avg, ats_delta if ats_delta is not None else ats1, q)
    y = y_matrix(u, sparse.s, row_avg, ats1, delta, q)
    lam_mat = lambda_matrices(u, y, ats2, q)

    u_next = project_box(u + gamma * (y - np.einsum("ip,ipq->iq", u, lam_mat)), box)
    diag = np.diagonal(lam_mat, axis1=1, axis2=2)
    updated = Network(
        u=u_next,
        lam=network.lam + gamma * (diag - network.lam),
        rayleigh=network.rayleigh + gamma * (lam_mat - network.rayleigh),
        row_avg=row_avg,
        tick=tick,
    )
    return updated, tick_stats(network, ats1, ats2, ats_delta)


def network_positions(network: Network, axes: bool = True) -> np.ndarray:
    """Every node's position estimate (axis readout or per-column readout)."""
    if axes:
        return rotate_to_axes(network.u, network.rayleigh)
    return network.u * np.sqrt(np.maximum(network.lam, 0.0))


# -- exact expectations for small networks ----------------------------------


def _expected_delta(row_avg: np.ndarray, q: float) -> np.ndarray:
    n = len(row_avg)
    expected = np.zeros(n)
    for ats, prob in ats_outcomes(n, q):
        expected += prob * delta_vector(row_avg, ats, q)
    return expected


def expected_y(u: np.ndarray, s: np.ndarray, q: float, variant: str = VARIANT_DECOUPLED) -> np.ndarray:
    """Exact E[Y] over the ATS draws for a fixed observation matrix s."""
    n = u.shape[0]
    if n > MAX_ENUMERATION_NODES:
        raise DomainError(f"Exact enumeration is limited to {MAX_ENUMERATION_NODES} nodes, got {n}")
    row_avg = s.mean(axis=1)
    fixed_delta = _expected_delta(row_avg, q) if variant == VARIANT_DECOUPLED else None
    expected = np.zeros_like(u, dtype=float)
    for ats, prob in ats_outcomes(n, q):
        delta = fixed_delta if fixed_delta is not None else delta_vector(row_avg, ats, q)
        expected += prob * y_matrix(u, s, row_avg, ats, delta, q)
    return expected


def expected_lambda_matrix(
    u: np.ndarray, s: np.ndarray, q: float, variant: str = VARIANT_DECOUPLED
) -> np.ndarray:
    """Exact E[Λ(i)] for every node; the second draw is independent of Y's."""
    n = u.shape[0]
    y_mean = expected_y(u, s, q, variant)
    expected = np.zeros((n, u.shape[1], u.shape[1]))
    for ats2, prob in ats_outcomes(n, q):
        expected += prob * lambda_matrices(u, y_mean, ats2, q)
    return expected


def literal_y_bias(u: np.ndarray, s: np.ndarray, q: float) -> np.ndarray:
    """E[Y] − MU under the literal variant, which reuses one draw for δ and Y."""
    bias = expected_y(u, s, q, VARIANT_LITERAL) - double_center(s).m @ u
    _LOGGER.debug(f"{INDENT}literal-variant Y bias norm {np.linalg.norm(bias):.6g}")
    return bias
