"""Log-normal shadowing RSSI model and the sparse observation process.

RSSI follows P = −PL(d) + ε with PL(d) = PL₀ + 10η log₁₀(d/d₀), d₀ = 1 m and
ε ~ N(0, σ²). Averaging T draws and inverting with the bias constant C gives
an unbiased estimate of d². Each tick, node i observes entry (i,j) of its row
with probability q_ij and reweights it by 1/q_ij.
"""

from dataclasses import dataclass

import numpy as np

from .const import REFERENCE_DISTANCE
from .exceptions import ConfigurationError, DomainError
from .mds_core import Scenario, squared_distances
from .utils.logger import _LOGGER


@dataclass(frozen=True)
class ChannelParams:
    """Parameters of the log-normal shadowing model."""

    pl0: float = -61.71
    eta: float = 2.44
    sigma2: float = 0.0
    t_samples: int = 1

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise ConfigurationError(f"Path-loss exponent must be positive, got {self.eta}")
        if not self.sigma2 >= 0:
            raise ConfigurationError(f"Shadowing variance must be ≥ 0, got {self.sigma2}")
        if int(self.t_samples) != self.t_samples or self.t_samples < 1:
            raise ConfigurationError(f"t_samples must be an integer ≥ 1, got {self.t_samples}")

    @property
    def d0(self) -> float:
        """Reference distance; fixed because the estimator assumes it."""
        return REFERENCE_DISTANCE

    @property
    def sigma(self) -> float:
        """Shadowing standard deviation (dB)."""
        return float(np.sqrt(self.sigma2))


@dataclass(frozen=True)
class RssiSample:
    """One received signal strength value (dB) on the link src -> dst."""

    value: float
    src: int
    dst: int

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise DomainError(f"RSSI sample needs two distinct nodes, got {self.src}")


@dataclass(frozen=True, eq=False)
class ObservationModel:
    """Per-link observation probabilities q_ij; the diagonal is unused."""

    q_obs: np.ndarray

    def __post_init__(self) -> None:
        q = np.array(self.q_obs, dtype=float)
        n = q.shape[0]
        if q.shape != (n, n):
            raise ConfigurationError(f"q matrix must be square, got shape {q.shape}")
        off = ~np.eye(n, dtype=bool)
        if np.any(q[off] <= 0) or np.any(q[off] > 1):
            raise ConfigurationError("Observation probabilities must lie in (0, 1]")
        np.fill_diagonal(q, 1.0)
        q.setflags(write=False)
        object.__setattr__(self, "q_obs", q)

    @classmethod
    def uniform(cls, n: int, q: float) -> "ObservationModel":
        """Same probability q on every link."""
        return cls(np.full((n, n), float(q)))

    @classmethod
    def from_matrix(cls, q: np.ndarray) -> "ObservationModel":
        """Per-link probabilities from an N×N matrix."""
        return cls(np.asarray(q, dtype=float))

    @property
    def n(self) -> int:
        """Number of nodes."""
        return self.q_obs.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """W = [1/q_ij] with a zero diagonal."""
        w = 1.0 / self.q_obs
        np.fill_diagonal(w, 0.0)
        return w


@dataclass(frozen=True, eq=False)
class SparseObservation:
    """One tick of reweighted squared-distance estimates, row i held by node i."""

    s: np.ndarray
    mask: np.ndarray
    row_avg: np.ndarray


def path_loss(d: float, params: ChannelParams) -> float:
    """Average path loss PL(d) = PL₀ + 10η log₁₀(d/d₀) in dB."""
    if not d > 0:
        raise DomainError(f"Distance must be positive, got {d}")
    return params.pl0 + 10.0 * params.eta * np.log10(d / params.d0)


def sample_rssi(
    i: int, j: int, d: float, params: ChannelParams, rng: np.random.Generator
) -> RssiSample:
    """Draw one RSSI value −PL(d) + ε on link i -> j."""
    if i == j:
        raise DomainError(f"RSSI sample needs two distinct nodes, got {i}")
    value = -path_loss(d, params) + params.sigma * rng.standard_normal()
    return RssiSample(float(value), i, j)


def bias_constant(params: ChannelParams) -> float:
    """C = 10^(σ² ln10 / (2T(10η)²)); C = 1 exactly when σ² = 0."""
    exponent = params.sigma2 * np.log(10.0) / (2.0 * params.t_samples * (10.0 * params.eta) ** 2)
    return float(10.0**exponent)


def estimate_sq_distance(mean_rssi: float | np.ndarray, params: ChannelParams) -> float | np.ndarray:
    """Invert a T-averaged RSSI into an unbiased squared-distance estimate."""
    c4 = bias_constant(params) ** 4
    return 10.0 ** ((-np.asarray(mean_rssi) - params.pl0) / (5.0 * params.eta)) / c4


def estimator_variance(d: float, params: ChannelParams) -> float:
    """Variance d⁴(C⁸ − 1) of the squared-distance estimator."""
    return float(d**4 * (bias_constant(params) ** 8 - 1.0))


def _mean_rssi_matrix(
    sq_dist: np.ndarray, params: ChannelParams, rng: np.random.Generator, lead: tuple[int, ...]
) -> np.ndarray:
    """T-averaged RSSI for every ordered pair; the diagonal is meaningless."""
    n = sq_dist.shape[-1]
    off = ~np.eye(n, dtype=bool)
    if np.any(sq_dist[off] <= 0):
        raise DomainError("Two nodes share the same position; path loss is undefined")
    d = np.sqrt(np.where(off, sq_dist, 1.0))
    mean_pl = params.pl0 + 10.0 * params.eta * np.log10(d / params.d0)
    noise = rng.standard_normal(lead + (params.t_samples, n, n)).mean(axis=-3)
    return -mean_pl + params.sigma * noise


def sample_rssi_matrix(
    positions: np.ndarray, params: ChannelParams, rng: np.random.Generator
) -> np.ndarray:
    """T-averaged RSSI on every directed link, zero on the diagonal."""
    rssi = _mean_rssi_matrix(squared_distances(positions), params, rng, ())
    np.fill_diagonal(rssi, 0.0)
    return rssi


def sample_observation(
    scenario: Scenario,
    obs: ObservationModel,
    params: ChannelParams,
    rng: np.random.Generator,
) -> SparseObservation:
    """Draw one tick S_n = W ∘ A_n ∘ D_n."""
    n = scenario.n
    if n < 2:
        raise DomainError(f"Need at least two nodes, got {n}")
    if obs.n != n:
        raise ConfigurationError(f"Observation model is {obs.n}×{obs.n}, scenario has {n} nodes")
    sq_dist = squared_distances(scenario.positions)
    mask = rng.random((n, n)) < obs.q_obs
    np.fill_diagonal(mask, False)
    d_est = estimate_sq_distance(_mean_rssi_matrix(sq_dist, params, rng, ()), params)
    s = np.where(mask, d_est * obs.weights, 0.0)
    return SparseObservation(s, mask.astype(np.int8), s.mean(axis=1))


def sample_observation_batch(
    scenario: Scenario,
    obs: ObservationModel,
    params: ChannelParams,
    rng: np.random.Generator,
    ticks: int,
) -> SparseObservation:
    """Draw `ticks` independent observations at once (arrays gain a leading axis)."""
    n = scenario.n
    if obs.n != n:
        raise ConfigurationError(f"Observation model is {obs.n}×{obs.n}, scenario has {n} nodes")
    _LOGGER.debug("::sample_observation_batch:: %d ticks, N=%d", ticks, n)
    sq_dist = squared_distances(scenario.positions)
    mask = rng.random((ticks, n, n)) < obs.q_obs
    mask[:, np.arange(n), np.arange(n)] = False
    d_est = estimate_sq_distance(_mean_rssi_matrix(sq_dist, params, rng, (ticks,)), params)
    s = np.where(mask, d_est * obs.weights, 0.0)
    return SparseObservation(s, mask.astype(np.int8), s.mean(axis=-1))
