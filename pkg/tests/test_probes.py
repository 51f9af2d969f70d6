import math

import numpy as np
import pytest

from prethermal_probes.probes import (
    SpectralDensity,
    bose_einstein,
    cluster_energies,
    energy_variance,
    gibbs_derivative,
    gibbs_state,
    initial_state,
    nlevel_model,
    qubit_model,
    thermal_rates,
    v_model,
)


# --- 열욕 ---
def test_bose_einstein_values():
    assert bose_einstein(1.0, math.inf) == 0.0
    assert bose_einstein(1.0, 4.0) == pytest.approx(0.0186574, rel=1e-5)
    assert bose_einstein(1.0, math.log(2.0)) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("nu,beta", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_bose_einstein_rejects_bad_input(nu, beta):
    with pytest.raises(ValueError):
        bose_einstein(nu, beta)


def test_spectral_density_ohmic_and_custom():
    density = SpectralDensity(gamma=0.07)
    assert density(2.0) == pytest.approx(0.14)
    assert density(-1.0) == 0.0
    custom = SpectralDensity(gamma=0.07, function=lambda w: 0.07 * w * math.exp(-w / 10.0))
    assert custom(1.0) == pytest.approx(0.07 * math.exp(-0.1))
    with pytest.raises(ValueError):
        SpectralDensity(gamma=0.0)


def test_thermal_rates_reference_values():
    rates = thermal_rates(v_model())
    assert rates.k == pytest.approx(0.1426120, rel=1e-6)
    assert rates.phi == pytest.approx(0.1478363, rel=1e-6)
    assert rates.drive == pytest.approx(rates.k * math.exp(-4.0), rel=1e-12)


def test_thermal_rates_zero_temperature():
    rates = thermal_rates(v_model(beta=math.inf))
    assert rates.k == pytest.approx(2 * 0.07)
    assert rates.phi == rates.k


# --- 모델 ---
def test_nlevel_energies_equally_spaced():
    model = nlevel_model(4, delta=1e-4)
    np.testing.assert_allclose(model.energies, [0.0, 1 - 3e-4, 1 - 2e-4, 1 - 1e-4, 1.0])
    assert model.degeneracy == 4
    assert v_model().energies == (0.0, 1.0 - 1e-4, 1.0)
    assert qubit_model().energies == (0.0, 1.0)


def test_model_rejects_large_splitting():
    with pytest.raises(ValueError, match="quasidegeneracy"):
        v_model(delta=0.05)


def test_model_rejects_too_many_levels():
    with pytest.raises(ValueError, match="729"):
        nlevel_model(26)


def test_cluster_energies_merges_manifold():
    clustered = cluster_energies([0.0, 0.9998, 0.9999, 1.0], tol=1e-2)
    np.testing.assert_allclose(clustered, [0.0, 1.0, 1.0, 1.0])


# --- Gibbs ---
def test_gibbs_qubit_populations():
    pops = np.real(np.diag(gibbs_state(qubit_model())))
    np.testing.assert_allclose(pops, [0.982014, 0.017986], atol=1e-6)


def test_gibbs_v_model_degenerate_limit():
    pops = np.real(np.diag(gibbs_state(v_model(delta=0.0))))
    np.testing.assert_allclose(pops[1:], [0.017668, 0.017668], atol=1e-6)
    clustered = np.real(np.diag(gibbs_state(v_model(), clustered=True)))
    np.testing.assert_allclose(clustered, pops, atol=1e-15)


def test_gibbs_zero_temperature_is_ground():
    rho = gibbs_state(v_model(beta=math.inf))
    np.testing.assert_allclose(np.real(np.diag(rho)), [1.0, 0.0, 0.0])


def test_gibbs_derivative_matches_finite_difference():
    model = v_model()
    h = 1e-5
    numeric = (gibbs_state(model.with_beta(4.0 + h)) - gibbs_state(model.with_beta(4.0 - h))) / (2 * h)
    np.testing.assert_allclose(gibbs_derivative(model), numeric, atol=1e-9)
    assert abs(np.trace(gibbs_derivative(model))) < 1e-15


def test_energy_variance_qubit():
    e = math.exp(-4.0)
    assert energy_variance(qubit_model()) == pytest.approx(e / (1 + e) ** 2, rel=1e-12)


# --- 초기 상태 ---
def test_initial_states_reference_values():
    model = v_model()
    ground = initial_state("ground", model)
    assert (ground.p0, ground.sigma0R, ground.xi) == (0.0, 0.0, 0.0)

    mixed = initial_state("maximally-mixed", model)
    assert mixed.p0 == pytest.approx(1 / 3)
    assert mixed.xi == pytest.approx(-1 / 3)

    ambient = initial_state("ambient-thermal", model, beta_ambient=2.5)
    assert ambient.p0 == pytest.approx(0.070510, abs=1e-6)
    assert ambient.xi == pytest.approx(-0.070510, abs=1e-6)


def test_initial_state_custom_and_rejections():
    model = v_model()
    custom = initial_state("custom", model, custom={"p2": 0.5, "p3": 0.5, "a": 0.0, "b": 0.0, "sigma0R": -0.5})
    assert custom.xi == pytest.approx(-1.0)

    with pytest.raises(ValueError, match="min eigenvalue"):
        initial_state("custom", model, custom={"p2": 0.5, "p3": 0.5, "a": 0.0, "b": 0.0, "sigma0R": 0.9})
    with pytest.raises(ValueError, match="beta_ambient"):
        initial_state("ambient-thermal", model)
    with pytest.raises(ValueError, match="unknown"):
        initial_state("coherent", model)
