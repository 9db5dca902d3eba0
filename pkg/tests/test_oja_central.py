"""Test the centralized Oja recursion and its analysis helpers."""

import logging

import numpy as np
import pytest

from wsnloc.channel import ObservationModel, sample_observation_batch
from wsnloc.exceptions import ConfigurationError, DomainError
from wsnloc.mds_core import double_center, principal_projector, similarity_from_positions, top_eigs
from wsnloc.oja_central import (
    OjaState,
    ProjectionBox,
    StepSchedule,
    assemble_positions,
    axis_positions,
    eigenvalue_step,
    init_state,
    lyapunov,
    lyapunov_gradient,
    martingale_noise,
    mean_field,
    oja_step,
    oja_update,
    project_box,
    rayleigh_step,
    rotate_to_axes,
    run_oja,
)

from . import uniform_scenario

DIAG = np.diag([3.0, 1.0, 0.5])


def state_of(u, lam=None):
    """Support function."""
    u = np.asarray(u, dtype=float)
    lam = np.zeros(u.shape[1]) if lam is None else np.asarray(lam, dtype=float)
    return OjaState(u=u, lam=lam, rayleigh=np.diag(lam))


def test_init_state(rng):
    """U₀ is uniform in [−1, 1] and λ₀ = 0."""
    state = init_state(50, 2, rng)
    assert state.u.shape == (50, 2)
    assert np.all(np.abs(state.u) <= 1.0)
    assert np.all(state.lam == 0.0)
    assert state.iter == 0


def test_project_box():
    """Entries are clamped componentwise to [−α, α]."""
    u = np.array([[3.0, -0.5], [-2.5, 1.9]])
    np.testing.assert_allclose(project_box(u), [[2.0, -0.5], [-2.0, 1.9]])
    np.testing.assert_allclose(project_box(u, ProjectionBox(alpha=3.0)), u)


def test_schedule():
    """γ_n = a/n^β and parameter validation."""
    schedule = StepSchedule(a=0.5, beta=1.0)
    assert schedule.gamma(1) == 0.5
    assert schedule.gamma(4) == pytest.approx(0.125)
    with pytest.raises(ConfigurationError):
        StepSchedule(a=0.0)
    with pytest.raises(ConfigurationError):
        StepSchedule(beta=0.4)
    with pytest.raises(ConfigurationError):
        StepSchedule(beta=1.2)
    with pytest.raises(ConfigurationError):
        ProjectionBox(alpha=1.0)


def test_schedule_boundary_warns(caplog):
    """β = ½ is accepted with a warning."""
    with caplog.at_level(logging.WARNING):
        StepSchedule(beta=0.5)
    assert "not guaranteed" in caplog.text


def test_oja_step_zero_gamma():
    """γ = 0 leaves U unchanged."""
    u = np.array([[0.3, 0.1], [0.2, -0.4], [-0.5, 0.3]])
    state = oja_step(state_of(u), DIAG, 0.0)
    np.testing.assert_array_equal(state.u, u)
    assert state.iter == 1


def test_oja_step_fixed_point(scenario20):
    """Orthonormal top eigenvectors are a fixed point of the deterministic step."""
    m = double_center(similarity_from_positions(scenario20)).m
    _, vectors = top_eigs(m, 2)
    state = oja_step(state_of(vectors), m, 0.01)
    np.testing.assert_allclose(state.u, vectors, atol=1e-12)


def test_antiparallel_columns_are_invariant(scenario20):
    """Columns (v, −v) stay antiparallel under the default schedule in a 5 × 9 m room."""
    m = double_center(similarity_from_positions(scenario20)).m
    v = np.linspace(-1.0, 1.0, scenario20.n)
    state = state_of(np.column_stack([v, -v]))
    schedule = StepSchedule()
    for n in range(1, 201):
        state = oja_step(state, m, schedule.gamma(n))
    np.testing.assert_allclose(state.u[:, 1], -state.u[:, 0], atol=1e-9)
    assert np.all(np.abs(state.u) <= ProjectionBox().alpha)
    with pytest.raises(DomainError):
        principal_projector(state.u)


def test_oja_power_iteration(rng):
    """p = 1 on diag(3, 1, 0.5) converges to ±e₁."""
    state = state_of(rng.uniform(-1.0, 1.0, size=(3, 1)))
    for _ in range(10000):
        state = oja_step(state, DIAG, 0.05)
    u = state.u[:, 0]
    assert abs(u[0]) / np.linalg.norm(u) >= 0.999
    assert np.linalg.norm(u) == pytest.approx(1.0, abs=1e-3)


def test_eigenvalue_step():
    """One step from λ = 0 with γ = ½ gives (1.5, 0.5); the fixed point is stable."""
    m = np.diag([3.0, 1.0])
    state = state_of(np.eye(2))
    np.testing.assert_allclose(eigenvalue_step(state, m, 0.5), [1.5, 0.5])
    np.testing.assert_allclose(eigenvalue_step(state_of(np.eye(2), [3.0, 1.0]), m, 0.5), [3.0, 1.0])


def test_eigenvalue_convergence():
    """λ converges geometrically under a constant step."""
    m = np.diag([3.0, 1.0])
    state = state_of(np.eye(2))
    for _ in range(200):
        state = OjaState(state.u, eigenvalue_step(state, m, 0.1), state.rayleigh, state.iter + 1)
    np.testing.assert_allclose(state.lam, [3.0, 1.0], atol=1e-8)


def test_oja_update_uses_previous_iterate():
    """λ and the Rayleigh matrix are evaluated at U_{n−1}."""
    m = np.diag([3.0, 1.0])
    state = state_of(np.array([[0.5, 0.0], [0.0, 0.5]]))
    nxt = oja_update(state, m, 0.2)
    np.testing.assert_allclose(nxt.lam, 0.2 * np.array([0.75, 0.25]))
    np.testing.assert_allclose(nxt.rayleigh, 0.2 * np.diag([0.75, 0.25]))
    np.testing.assert_allclose(nxt.u, oja_step(state, m, 0.2).u)


def test_rayleigh_step_off_diagonal():
    """The Rayleigh matrix keeps the cross terms that λ drops."""
    m = np.array([[2.0, 1.0], [1.0, 2.0]])
    state = state_of(np.eye(2))
    np.testing.assert_allclose(rayleigh_step(state, m, 0.5), 0.5 * m)
    np.testing.assert_allclose(np.diag(rayleigh_step(state, m, 0.5)), eigenvalue_step(state, m, 0.5))


def test_assemble_positions():
    """Columns are scaled by √λ, clamped at zero and ordered by λ."""
    u = np.array([[0.2, 0.6], [0.4, -0.8]])
    np.testing.assert_allclose(assemble_positions(state_of(u, [1.0, 1.0])), u)
    z = assemble_positions(state_of(u, [4.0, 0.0]))
    np.testing.assert_allclose(z[:, 0], 2.0 * u[:, 0])
    np.testing.assert_allclose(z[:, 1], 0.0)
    z = assemble_positions(state_of(u, [-0.2, 1.0]))
    np.testing.assert_allclose(z[:, 0], u[:, 1])
    np.testing.assert_allclose(z[:, 1], 0.0)


def test_rotate_to_axes():
    """A diagonal Rayleigh matrix only scales; a stack applies row by row."""
    u = np.array([[0.2, 0.6], [0.4, -0.8]])
    np.testing.assert_allclose(rotate_to_axes(u, np.diag([4.0, 1.0])), u * [2.0, 1.0])
    stack = np.array([np.diag([4.0, 1.0]), np.diag([1.0, 9.0])])
    z = rotate_to_axes(u, stack)
    np.testing.assert_allclose(z[0], [0.4, 0.6])
    np.testing.assert_allclose(np.abs(z[1]), [2.4, 0.4])


def test_axis_readout_gram(rng):
    """ẐẐᵀ = U R Uᵀ for a symmetric Rayleigh matrix."""
    u = rng.standard_normal((6, 2))
    a = rng.standard_normal((2, 2))
    r = a @ a.T
    z = axis_positions(OjaState(u, np.diag(r).copy(), r))
    np.testing.assert_allclose(z @ z.T, u @ r @ u.T, atol=1e-12)


def test_mean_field_zeros(scenario20):
    """h vanishes on orthonormal eigenbases and at the origin."""
    m = double_center(similarity_from_positions(scenario20)).m
    _, vectors = top_eigs(m, 2)
    np.testing.assert_allclose(mean_field(vectors, m), 0.0, atol=1e-12)
    np.testing.assert_array_equal(mean_field(np.zeros((20, 2)), m), 0.0)


def test_lyapunov_values():
    """V(e₁) = e/3 for p = 1 on diag(3, 1), V(c e₁) = e^{c²}/(3c²)."""
    m = np.diag([3.0, 1.0])
    e1 = np.array([[1.0], [0.0]])
    assert lyapunov(e1, m) == pytest.approx(np.e / 3.0)
    assert lyapunov(2.0 * e1, m) == pytest.approx(np.exp(4.0) / 12.0)
    with pytest.raises(DomainError):
        lyapunov(np.array([[0.0], [0.0]]), m)


def test_lyapunov_descent(rng):
    """⟨∇V, h⟩ ≤ 0 at random points; the analytic gradient matches differences."""
    step = 1e-6
    for _ in range(1000):
        u = rng.standard_normal((3, 1))
        u /= np.linalg.norm(u)
        numeric = np.zeros_like(u)
        for k in range(3):
            shift = np.zeros_like(u)
            shift[k, 0] = step
            numeric[k, 0] = (lyapunov(u + shift, DIAG) - lyapunov(u - shift, DIAG)) / (2 * step)
        drift = mean_field(u, DIAG)
        assert float(np.sum(numeric * drift)) <= 1e-8
        analytic = lyapunov_gradient(u, DIAG)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)
        if np.linalg.norm(drift) > 1e-6:
            assert float(np.sum(analytic * drift)) < 0.0


def test_martingale_noise_zero_mean(rng, testbed):
    """E[ξ] = 0 at fixed U in K and E‖ξ‖² stays under a bound uniform over K."""
    scenario = uniform_scenario(5, seed=2)
    n, p = scenario.n, 2
    alpha = ProjectionBox().alpha
    batch = sample_observation_batch(
        scenario, ObservationModel.uniform(n, 0.7), testbed, rng, 100_000
    )
    s = batch.s
    # double centering of every tick at once
    m_n = -0.5 * (
        s - s.mean(axis=2, keepdims=True) - s.mean(axis=1, keepdims=True)
        + s.mean(axis=(1, 2), keepdims=True)
    )
    m = double_center(similarity_from_positions(scenario)).m
    # ‖ξ‖ ≤ ‖m_n − M‖(‖U‖ + ‖U‖³) in Frobenius norm and ‖U‖ ≤ α√(Np) on K
    radius = alpha * np.sqrt(n * p)
    bound = np.mean(np.sum((m_n - m) ** 2, axis=(1, 2))) * (radius + radius**3) ** 2
    for _ in range(10):
        u = rng.uniform(-alpha, alpha, size=(n, p))
        xi = martingale_noise(u, m_n, m)
        assert xi.shape == (100_000, n, p)
        np.testing.assert_allclose(xi[7], martingale_noise(u, m_n[7], m), atol=1e-9)

        direction = rng.standard_normal((n, p))
        projected = np.einsum("tik,ik->t", xi, direction)
        se = projected.std() / np.sqrt(projected.size)
        assert se > 0
        assert abs(projected.mean()) <= 3 * se

        second_moment = float(np.mean(np.sum(xi**2, axis=(1, 2))))
        assert np.isfinite(second_moment)
        assert second_moment <= bound


def test_run_oja_callbacks():
    """on_tick fires once per iteration and the tick counter advances."""
    seen = []
    state = run_oja(
        lambda n: DIAG,
        state_of(np.full((3, 1), 0.5)),
        StepSchedule(a=0.1, beta=0.7),
        iterations=25,
        on_tick=lambda s: seen.append(s.iter),
    )
    assert seen == list(range(1, 26))
    assert state.iter == 25


def test_oja_converges_to_principal_subspace(rng):
    """Noise-free M on ten nodes: projector error ≤ 1e-3 and ẐẐᵀ close to M."""
    scenario = uniform_scenario(10, seed=5, width=1.0, height=1.8)
    m = double_center(similarity_from_positions(scenario)).m
    _, vectors = top_eigs(m, 2)
    state = run_oja(
        lambda n: m,
        init_state(10, 2, rng),
        StepSchedule(a=0.5, beta=0.7),
        iterations=100_000,
    )
    error = np.linalg.norm(principal_projector(state.u) - principal_projector(vectors))
    assert error <= 1e-3
    z = axis_positions(state)
    assert np.linalg.norm(z @ z.T - m) <= 1e-2 * np.linalg.norm(m)
