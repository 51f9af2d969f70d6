import math

import numpy as np
import pytest

from prethermal_probes.dynamics import prethermal_state, unified_generator_v
from prethermal_probes.errors import NumericalError
from prethermal_probes.numerics import (
    general_eig,
    hermitian_eig,
    propagate_spectral,
    propagate_stepwise,
)
from prethermal_probes.probes import thermal_rates, v_model


# --- hermitian_eig ---
def test_hermitian_eig_identity():
    system = hermitian_eig(np.eye(3))
    np.testing.assert_allclose(system.eigenvalues, [1.0, 1.0, 1.0])


def test_hermitian_eig_prethermal_matrix():
    state = prethermal_state(4.0, 1.0, -1.0 / 3.0)
    p, s = state.p_tilde, state.sigma_tilde
    system = hermitian_eig(state.matrix())
    expected = sorted([1 - 2 * p, p - s, p + s])
    np.testing.assert_allclose(system.eigenvalues, expected, atol=1e-14)


def test_hermitian_eig_random_reconstruction():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    a = a + a.conj().T
    system = hermitian_eig(a)
    rebuilt = system.right @ np.diag(system.eigenvalues) @ system.right.conj().T
    assert np.max(np.abs(rebuilt - a)) < 1e-10
    np.testing.assert_allclose(system.right.conj().T @ system.right, np.eye(8), atol=1e-10)


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(ValueError, match="not Hermitian"):
        hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


# --- general_eig ---
def test_general_eig_diagonal_and_rotation():
    np.testing.assert_allclose(sorted(general_eig(np.diag([-1.0, -2.0])).eigenvalues.real), [-2.0, -1.0])
    rotation = general_eig(np.array([[0.0, -1.0], [1.0, 0.0]])).eigenvalues
    np.testing.assert_allclose(sorted(rotation.imag), [-1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(rotation.real, [0.0, 0.0], atol=1e-14)


def test_general_eig_reduced_generator_slowest_mode():
    """가장 느린 감쇠 모드가 섭동 공식 −φΔ²/(k(k+φ)) 와 0.2% 안에서 일치."""
    rates = thermal_rates(v_model())
    system = general_eig(unified_generator_v(rates, 1e-4).matrix)
    decaying = [lam.real for lam in system.eigenvalues if abs(lam) > 1e-12]
    slowest = max(decaying)
    lepe = -rates.phi * 1e-8 / (rates.k * (rates.k + rates.phi))
    assert slowest == pytest.approx(lepe, rel=2e-3)
    assert slowest == pytest.approx(-3.5691e-8, rel=1e-4)


def test_general_eig_dimension_cap():
    with pytest.raises(ValueError, match="exceeds"):
        general_eig(np.zeros((1025, 1025)))


def test_general_eig_non_finite():
    with pytest.raises(NumericalError):
        general_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))


# --- propagate_spectral ---
def test_propagate_zero_generator():
    v0 = np.array([0.3, -0.2, 1.0])
    result = propagate_spectral(np.zeros((3, 3)), v0, [0.0, 1.0, 1e6])
    np.testing.assert_allclose(result.states, np.tile(v0, (3, 1)))


def test_propagate_scalar_decay():
    k = 0.1426120
    result = propagate_spectral(np.array([[-k]]), np.array([1.0]), [1.0 / k])
    assert result.states[0, 0] == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_propagate_initial_time_exact():
    rates = thermal_rates(v_model())
    gen = unified_generator_v(rates, 1e-4)
    v0 = np.array([1.0 / 3.0, 0.0, 0.0, 1.0])
    result = propagate_spectral(gen.matrix, v0, [0.0])
    np.testing.assert_array_equal(result.states[0], v0)


def test_propagate_semigroup_property():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) - 3.0 * np.eye(n)
        v0 = rng.normal(size=n) + 1j * rng.normal(size=n)
        t1 = rng.uniform(0.0, 2.0)
        t2 = t1 + rng.uniform(0.0, 2.0)
        first = propagate_spectral(g, v0, [t1]).states[0]
        composed = propagate_spectral(g, first, [t2 - t1]).states[0]
        direct = propagate_spectral(g, v0, [t2]).states[0]
        scale = max(np.linalg.norm(direct), 1.0)
        np.testing.assert_allclose(composed, direct, rtol=1e-9, atol=1e-9 * scale)


def test_propagate_matches_stepwise_integration():
    rates = thermal_rates(v_model())
    gen = unified_generator_v(rates, 1e-4)
    v0 = np.array([0.0, 0.0, 0.0, 1.0])
    times = np.array([0.5, 5.0, 50.0, 500.0])
    spectral = propagate_spectral(gen.matrix, v0, times).states
    stepwise = propagate_stepwise(gen.matrix, v0, times).states
    np.testing.assert_allclose(spectral, stepwise, atol=1e-8)


def test_stiff_stepwise_reaches_long_times():
    rates = thermal_rates(v_model())
    gen = unified_generator_v(rates, 1e-4)
    v0 = np.array([0.0, 0.0, 0.0, 1.0])
    times = np.array([1.0, 1.0e3, 1.0e6])
    spectral = propagate_spectral(gen.matrix, v0, times).states
    result = propagate_stepwise(gen.matrix, v0, times, method="BDF")
    assert result.method == "stepwise"
    np.testing.assert_allclose(result.states, spectral, atol=1e-7)


def test_stepwise_rejects_unknown_method():
    with pytest.raises(ValueError, match="stepwise method"):
        propagate_stepwise(np.eye(2), np.ones(2), [1.0], method="RK4")


def test_propagate_defective_generator_falls_back_to_expm():
    """Jordan 블록은 고유벡터가 평행 → expm 경로."""
    g = np.array([[-1.0, 1.0], [0.0, -1.0]])
    times = np.array([0.5, 2.0])
    result = propagate_spectral(g, np.array([0.0, 1.0]), times)
    assert result.method == "expm"
    expected = np.stack([times * np.exp(-times), np.exp(-times)], axis=1)
    np.testing.assert_allclose(result.states, expected, rtol=1e-10)


def test_propagate_rejects_negative_time():
    with pytest.raises(ValueError):
        propagate_spectral(np.eye(2), np.ones(2), [-1.0])
