"""Centralized on-line MDS with Oja's stochastic PCA rule.

Each tick feeds a noisy Gram matrix m_n with E[m_n] = M. The iteration
U ← Π_K[U + γ(m_n U − U Uᵀ m_n U)] drives U towards an orthonormal basis of
the principal subspace of M, and λ tracks the Rayleigh quotients of its
columns. mean_field and lyapunov are the drift and the Lyapunov function
used to analyse the recursion; the tests use them as oracles.
"""

from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConfigurationError, DomainError
from .utils.logger import _LOGGER, INDENT


@dataclass(frozen=True, eq=False)
class OjaState:
    """Iterate of the centralized recursion.

    u: N×p eigenvector estimates; lam: p Rayleigh-quotient estimates;
    rayleigh: p×p running average of Uᵀ m_n U (its diagonal is lam);
    iter: number of ticks applied.
    """

    u: np.ndarray
    lam: np.ndarray
    rayleigh: np.ndarray
    iter: int = 0

    @property
    def p(self) -> int:
        """Embedding dimension."""
        return self.u.shape[1]


@dataclass(frozen=True)
class StepSchedule:
    """γ_n = a / n^beta."""

    a: float = 0.015
    beta: float = 0.7

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ConfigurationError(f"Step base must be positive, got {self.a}")
        if not 0.5 <= self.beta <= 1.0:
            raise ConfigurationError(f"Step decay exponent must lie in [0.5, 1], got {self.beta}")
        if self.beta == 0.5:
            _LOGGER.warning(
                "Step schedule a/√n does not satisfy Σγ² < ∞; convergence is not guaranteed"
            )

    def gamma(self, n: int) -> float:
        """Step size at tick n ≥ 1."""
        return self.a / float(n) ** self.beta


@dataclass(frozen=True)
class ProjectionBox:
    """Hypercube K = [−alpha, alpha]^(N×p)."""

    alpha: float = 2.0

    def __post_init__(self) -> None:
        if not self.alpha > 1:
            raise ConfigurationError(f"Box half-width must exceed 1, got {self.alpha}")


DEFAULT_BOX = ProjectionBox()


def init_state(n: int, p: int, rng: np.random.Generator) -> OjaState:
    """U₀ uniform in [−1, 1], λ₀ = 0."""
    return OjaState(
        u=rng.uniform(-1.0, 1.0, size=(n, p)),
        lam=np.zeros(p),
        rayleigh=np.zeros((p, p)),
        iter=0,
    )


def project_box(u: np.ndarray, box: ProjectionBox = DEFAULT_BOX) -> np.ndarray:
    """Euclidean projection onto the hypercube (componentwise clamp)."""
    return np.clip(u, -box.alpha, box.alpha)


def oja_step(
    state: OjaState, m_n: np.ndarray, gamma: float, box: ProjectionBox = DEFAULT_BOX
) -> OjaState:
    """Apply U ← Π_K[U + γ(m_n U − U(Uᵀ m_n U))]; λ is left as is."""
    u = state.u
    mu = m_n @ u
    u_next = project_box(u + gamma * (mu - u @ (u.T @ mu)), box)
    return replace(state, u=u_next, iter=state.iter + 1)


def eigenvalue_step(state: OjaState, m_n: np.ndarray, gamma: float) -> np.ndarray:
    """λ_k ← λ_k + γ(u_kᵀ m_n u_k − λ_k), evaluated at the previous U."""
    quotients = np.einsum("ik,ij,jk->k", state.u, m_n, state.u)
    return state.lam + gamma * (quotients - state.lam)


def rayleigh_step(state: OjaState, m_n: np.ndarray, gamma: float) -> np.ndarray:
    """Matrix form of eigenvalue_step: R ← R + γ(Uᵀ m_n U − R)."""
    return state.rayleigh + gamma * (state.u.T @ m_n @ state.u - state.rayleigh)


def oja_update(
    state: OjaState, m_n: np.ndarray, gamma: float, box: ProjectionBox = DEFAULT_BOX
) -> OjaState:
    """One full tick: U, λ and the Rayleigh matrix, all from U_{n−1}."""
    rayleigh = rayleigh_step(state, m_n, gamma)
    return OjaState(
        u=oja_step(state, m_n, gamma, box).u,
        lam=eigenvalue_step(state, m_n, gamma),
        rayleigh=rayleigh,
        iter=state.iter + 1,
    )


def _scaled_columns(u: np.ndarray, lam: np.ndarray) -> np.ndarray:
    order = np.argsort(-lam, kind="stable")
    clamped = np.maximum(lam[order], 0.0)
    if np.any(lam < 0):
        _LOGGER.debug(f"{INDENT}negative eigenvalue estimate clamped: {lam.min():.3g}")
    return u[..., order] * np.sqrt(clamped)


def assemble_positions(state: OjaState) -> np.ndarray:
    """Ẑ = (√λ₁u₁, …, √λ_p u_p) with columns sorted by λ descending."""
    return _scaled_columns(state.u, state.lam)


def rotate_to_axes(u: np.ndarray, rayleigh: np.ndarray) -> np.ndarray:
    """Rotate rows of U onto the eigen-axes of a (stack of) p×p Rayleigh matrices.

    With sym(R) = V D Vᵀ (descending D, each column of V signed so that its
    largest-magnitude entry is positive) returns U V √max(D, 0). A single R
    applies to every row; a stack of R gives one per row.
    """
    sym = 0.5 * (rayleigh + np.swapaxes(rayleigh, -1, -2))
    values, vectors = np.linalg.eigh(sym)
    order = np.argsort(-values, axis=-1, kind="stable")
    values = np.take_along_axis(values, order, axis=-1)
    vectors = np.take_along_axis(vectors, order[..., None, :], axis=-1)
    pivot = np.argmax(np.abs(vectors), axis=-2)[..., None, :]
    signs = np.where(np.take_along_axis(vectors, pivot, axis=-2) < 0, -1.0, 1.0)
    vectors = vectors * signs
    rotated = np.matmul(u[..., None, :], vectors)[..., 0, :]
    return rotated * np.sqrt(np.maximum(values, 0.0))


def axis_positions(state: OjaState) -> np.ndarray:
    """Readout rotated onto the eigen-axes of the running Rayleigh matrix.

    The symmetric Oja rule settles on an arbitrary orthonormal basis of the
    principal subspace, so per-column scaling alone does not reproduce M.
    This readout gives ẐẐᵀ = U R Uᵀ, which tends to M.
    """
    return rotate_to_axes(state.u, state.rayleigh)


def mean_field(u: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Drift h(U) = MU − U UᵀMU of the recursion."""
    mu = m @ u
    return mu - u @ (u.T @ mu)


def lyapunov(u: np.ndarray, m: np.ndarray) -> float:
    """V(U) = exp(‖U‖²) / trace(UᵀMU)."""
    quad = float(np.trace(u.T @ m @ u))
    if quad <= 0:
        raise DomainError(f"Lyapunov function needs trace(UᵀMU) > 0, got {quad}")
    return float(np.exp(np.sum(u * u)) / quad)


def lyapunov_gradient(u: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Analytic gradient of `lyapunov` for symmetric M: 2V(U − MU/trace)."""
    quad = float(np.trace(u.T @ m @ u))
    value = lyapunov(u, m)
    return 2.0 * value * (u - (m @ u) / quad)


def martingale_noise(u: np.ndarray, m_n: np.ndarray, m: np.ndarray) -> np.ndarray:
    """ξ_n = (m_n U − MU) − U(UᵀMU − Uᵀ m_n U)."""
    return (m_n @ u - m @ u) - u @ (u.T @ m @ u - u.T @ m_n @ u)


def run_oja(
    m_source: Callable[[int], np.ndarray],
    state: OjaState,
    schedule: StepSchedule,
    box: ProjectionBox = DEFAULT_BOX,
    iterations: int = 1,
    on_tick: Callable[[OjaState], None] | None = None,
) -> OjaState:
    """Drive the recursion for `iterations` ticks; m_source(n) yields m_n."""
    _LOGGER.debug(
        "::run_oja:: ticks %d..%d, a=%s beta=%s",
        state.iter + 1,
        state.iter + iterations,
        schedule.a,
        schedule.beta,
    )
    for _ in range(iterations):
        n = state.iter + 1
        state = oja_update(state, m_source(n), schedule.gamma(n), box)
        if on_tick is not None:
            on_tick(state)
    return state
