import math
from unittest.mock import patch

import numpy as np
import pytest

from prethermal_probes import dynamics
from prethermal_probes.dynamics import (
    ReducedState,
    analyze_timescales,
    build_redfield_generator,
    check_generator,
    closed_form_derivative,
    closed_form_evolution,
    evolve,
    evolve_reduced,
    lepe_eigenvalues,
    prethermal_state,
    restrict_to_v_coordinates,
    unified_generator_v,
)
from prethermal_probes.errors import NumericalError
from prethermal_probes.probes import gibbs_state, initial_state, nlevel_model, qubit_model, thermal_rates, v_model

DELTA = 1e-4
E4 = math.exp(-4.0)


@pytest.fixture
def reference_v():
    model = v_model()
    return model, thermal_rates(model)


def _inits(model):
    return {
        kind: initial_state(kind, model, beta_ambient=2.5)
        for kind in ("ground", "maximally-mixed", "ambient-thermal")
    }


# --- 축약 생성자 ---
def test_unified_generator_entries(reference_v):
    _, rates = reference_v
    g = unified_generator_v(rates, DELTA).matrix
    k, phi = rates.k, rates.phi
    expected = np.array([
        [-phi, -k, 0.0, (phi - k) / 2],
        [-phi, -k, DELTA, (phi - k) / 2],
        [0.0, -DELTA, -k, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
    np.testing.assert_array_equal(g, expected)


def test_unified_generator_stationary_point(reference_v):
    _, rates = reference_v
    g = unified_generator_v(rates, DELTA).matrix
    stationary = np.linalg.solve(g[:3, :3], -g[:3, 3])
    np.testing.assert_allclose(stationary, [0.017668, 0.0, 0.0], atol=1e-6)


def test_unified_generator_without_splitting_has_no_sigma_i_coupling(reference_v):
    _, rates = reference_v
    g = unified_generator_v(rates, 0.0).matrix
    assert g[2, 0] == 0.0 and g[2, 1] == 0.0 and g[1, 2] == 0.0


def test_zero_temperature_drive_vanishes():
    rates = thermal_rates(v_model(beta=math.inf))
    g = unified_generator_v(rates, DELTA).matrix
    assert g[0, 3] == 0.0
    ground = np.array([0.0, 0.0, 0.0, 1.0])
    np.testing.assert_array_equal(g @ ground, np.zeros(4))


def test_unified_generator_rejects_negative_delta(reference_v):
    with pytest.raises(ValueError):
        unified_generator_v(reference_v[1], -1e-4)


# --- LEPE ---
def test_lepe_fig1_values(reference_v):
    lepe = lepe_eigenvalues(reference_v[1], DELTA)
    assert lepe.lambda1 == pytest.approx(-3.5691e-8, rel=1e-4)
    assert lepe.tau1 == pytest.approx(2.8018e7, rel=1e-4)
    assert lepe.tau2 == pytest.approx(7.0120, rel=1e-4)
    assert lepe.separation_ratio == pytest.approx(3.996e6, rel=1e-3)


def test_lepe_zero_splitting(reference_v):
    lepe = lepe_eigenvalues(reference_v[1], 0.0)
    assert lepe.lambda1 == 0.0
    assert math.isinf(lepe.tau1)


def test_lepe_scales_with_delta_squared(reference_v):
    small = lepe_eigenvalues(reference_v[1], 1e-4).lambda1
    large = lepe_eigenvalues(reference_v[1], 1e-3).lambda1
    assert large / small == pytest.approx(100.0, rel=1e-12)


# --- 닫힌 형태 해 ---
def test_closed_form_initial_condition(reference_v):
    model, rates = reference_v
    for init in _inits(model).values():
        state = closed_form_evolution(rates, DELTA, ReducedState(init.p0, init.sigma0R), 0.0)
        assert state.p == pytest.approx(init.p0, abs=1e-12)
        assert state.sigmaR == pytest.approx(init.sigma0R, abs=1e-12)


def test_closed_form_long_time_limit(reference_v):
    _, rates = reference_v
    state = closed_form_evolution(rates, DELTA, ReducedState(0.0, 0.0), 1e11)
    assert state.p == pytest.approx(0.017668, abs=1e-6)
    assert state.sigmaR == pytest.approx(0.0, abs=1e-12)


def test_closed_form_plateau_ground(reference_v):
    _, rates = reference_v
    lepe = lepe_eigenvalues(rates, DELTA)
    state = closed_form_evolution(rates, DELTA, ReducedState(0.0, 0.0), math.sqrt(lepe.tau1 * lepe.tau2))
    assert state.p == pytest.approx(0.0089931, abs=1e-4)
    assert state.sigmaR == pytest.approx(0.0089931, abs=1e-4)


def test_closed_form_ode_residual_is_second_order(reference_v):
    """해석해는 느린 모드 지수에만 λ₁ 을 쓰므로 잔차는 |λ₁| 규모로 제한된다."""
    model, rates = reference_v
    g = unified_generator_v(rates, DELTA).matrix
    lam1 = abs(lepe_eigenvalues(rates, DELTA).lambda1)
    times = np.logspace(-2, 9, 60)
    for init in _inits(model).values():
        start = ReducedState(init.p0, init.sigma0R)
        state = closed_form_evolution(rates, DELTA, start, times)
        d_p, d_sigma = closed_form_derivative(rates, DELTA, start, times)
        vectors = np.stack([state.p, state.sigmaR, np.zeros_like(times), np.ones_like(times)])
        rhs = g @ vectors
        residual = max(np.max(np.abs(d_p - rhs[0])), np.max(np.abs(d_sigma - rhs[1])))
        assert residual <= 0.5 * lam1 + 1e-12


def test_numeric_matches_closed_form_on_log_grid(reference_v):
    model, rates = reference_v
    gen = unified_generator_v(rates, DELTA)
    times = np.logspace(-2, 9, 200)
    for init in _inits(model).values():
        numeric = evolve_reduced(gen, init, times)
        closed = closed_form_evolution(rates, DELTA, ReducedState(init.p0, init.sigma0R), times)
        assert np.max(np.abs(numeric[:, 0] - closed.p)) < 1e-6
        assert np.max(np.abs(numeric[:, 1] - closed.sigmaR)) < 1e-6


def test_numeric_matches_closed_form_at_fixed_time(reference_v):
    _, rates = reference_v
    gen = unified_generator_v(rates, DELTA)
    numeric = evolve_reduced(gen, ReducedState(0.0, 0.0), [1e4])[0]
    closed = closed_form_evolution(rates, DELTA, ReducedState(0.0, 0.0), 1e4)
    assert numeric[0] == pytest.approx(closed.p, abs=1e-8)
    assert numeric[1] == pytest.approx(closed.sigmaR, abs=1e-8)


def test_sigma_i_stays_small(reference_v):
    model, rates = reference_v
    gen = unified_generator_v(rates, DELTA)
    numeric = evolve_reduced(gen, initial_state("maximally-mixed", model), np.logspace(-2, 9, 200))
    bound = 5 * DELTA / rates.k * np.max(np.abs(numeric[:, 1]))
    assert np.max(np.abs(numeric[:, 2])) <= bound


def test_plateau_flat_inside_window(reference_v):
    model, rates = reference_v
    gen = unified_generator_v(rates, DELTA)
    lepe = lepe_eigenvalues(rates, DELTA)
    times = np.logspace(math.log10(10 * lepe.tau2), math.log10(1e-3 * lepe.tau1), 30)
    for init in _inits(model).values():
        plateau = prethermal_state(4.0, 1.0, init.xi)
        numeric = evolve_reduced(gen, init, times)
        np.testing.assert_allclose(numeric[:, 0], plateau.p_tilde, rtol=1e-2)
        np.testing.assert_allclose(numeric[:, 1], plateau.sigma_tilde, rtol=1e-2)


# --- prethermal 상태 ---
def test_prethermal_state_values():
    ground = prethermal_state(4.0, 1.0, 0.0)
    assert ground.p_tilde == pytest.approx(0.0089931, abs=1e-7)
    assert ground.sigma_tilde == pytest.approx(0.0089931, abs=1e-7)

    mixed = prethermal_state(4.0, 1.0, -1.0 / 3.0)
    assert mixed.p_tilde == pytest.approx((E4 + 1 / 3) / (2 * (1 + E4)), rel=1e-12)
    assert mixed.p_tilde == pytest.approx(0.172662, abs=1e-6)

    antisymmetric = prethermal_state(4.0, 1.0, -1.0)
    assert antisymmetric.p_tilde == pytest.approx(0.5)
    assert 1 - 2 * antisymmetric.p_tilde == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("beta", [0.5, 2.0, 4.0, 6.0])
def test_prethermal_antisymmetric_eigenvalue_is_temperature_independent(beta):
    eigenvalues = np.linalg.eigvalsh(prethermal_state(beta, 1.0, -0.25).matrix())
    assert np.min(np.abs(eigenvalues - 0.25)) < 1e-14
    assert np.all(eigenvalues >= -1e-14)


@pytest.mark.parametrize("xi", [0.1, -1.5])
def test_prethermal_state_rejects_xi_outside_bound(xi):
    with pytest.raises(ValueError, match=r"\[-1, 0\]"):
        prethermal_state(4.0, 1.0, xi)


# --- Redfield ---
def test_redfield_restriction_reproduces_reduced_generator(reference_v):
    model, rates = reference_v
    full = build_redfield_generator(model, "unified")
    np.testing.assert_allclose(
        restrict_to_v_coordinates(full),
        unified_generator_v(rates, DELTA).matrix,
        atol=1e-12,
    )


@pytest.mark.parametrize("variant", ["unified", "full-secular", "nonsecular"])
def test_redfield_reference_state_is_stationary(variant):
    for model in (v_model(), qubit_model()):
        gen = build_redfield_generator(model, variant)
        assert np.max(np.abs(gen.matrix @ gen.reference_state.reshape(-1))) < 1e-10
        assert check_generator(gen) == []


def test_redfield_exact_gibbs_for_exact_variants():
    model = v_model()
    for variant in ("full-secular", "nonsecular"):
        gen = build_redfield_generator(model, variant)
        np.testing.assert_allclose(gen.reference_state, gibbs_state(model))


def test_redfield_rejects_non_diagonal_hamiltonian():
    model = v_model()
    h = model.hamiltonian()
    h[0, 1] = h[1, 0] = 0.1
    with pytest.raises(ValueError, match="diagonal"):
        build_redfield_generator(model, hamiltonian=h)


def test_redfield_rejects_unknown_variant():
    with pytest.raises(ValueError):
        build_redfield_generator(v_model(), "lindblad")


@pytest.mark.parametrize("variant", ["unified", "full-secular", "nonsecular"])
def test_qubit_relaxation_rate(variant):
    model = qubit_model()
    rates = thermal_rates(model)
    gen = build_redfield_generator(model, variant)
    report = analyze_timescales(gen, initial=initial_state("ground", model).rho)
    assert 1.0 / report.tau1 == pytest.approx(rates.k * (1 + E4), rel=1e-10)
    assert len(report.timescales) == 1
    assert not report.window_open


def test_redfield_evolution_matches_closed_form(reference_v):
    model, rates = reference_v
    gen = build_redfield_generator(model, "unified")
    times = np.logspace(-2, 9, 120)
    for init in _inits(model).values():
        traj = evolve(gen, init.rho, times)
        closed = closed_form_evolution(rates, DELTA, ReducedState(init.p0, init.sigma0R), times)
        assert np.max(np.abs(traj.excited_mean() - closed.p)) < 1e-6
        assert np.max(np.abs(traj.coherence().real - closed.sigmaR)) < 1e-6
        assert np.max(traj.trace_errors) < 1e-10
        assert np.min(traj.min_eigs) > -1e-8


def test_evolve_initial_and_long_time(reference_v):
    model, rates = reference_v
    gen = build_redfield_generator(model, "unified")
    rho0 = initial_state("maximally-mixed", model).rho
    tau1 = lepe_eigenvalues(rates, DELTA).tau1
    traj = evolve(gen, rho0, [0.0, 100 * tau1])
    np.testing.assert_allclose(traj.states[0], rho0, atol=1e-15)
    np.testing.assert_allclose(traj.states[1], gen.reference_state, atol=1e-8)


def test_evolve_falls_back_to_stepwise_when_eigensolver_fails(reference_v):
    model, rates = reference_v
    gen = unified_generator_v(rates, DELTA)
    init = initial_state("ground", model)
    times = [0.0, 1.0, 100.0, 1.0e4]
    with patch.object(dynamics, "propagate_spectral", side_effect=NumericalError("eigensolver did not converge")):
        traj = evolve(gen, init.rho, times)
    assert traj.method == "stepwise"
    closed = closed_form_evolution(rates, DELTA, ReducedState(init.p0, init.sigma0R), times)
    np.testing.assert_allclose(traj.excited_mean(), closed.p, atol=1e-7)
    np.testing.assert_allclose(traj.coherence().real, closed.sigmaR, atol=1e-7)


# --- 시간 척도 ---
def test_timescales_reduced_v_model(reference_v):
    _, rates = reference_v
    report = analyze_timescales(unified_generator_v(rates, DELTA))
    lepe = lepe_eigenvalues(rates, DELTA)
    assert report.tau1 == pytest.approx(lepe.tau1, rel=5e-3)
    assert report.tau2 == pytest.approx(1 / rates.k, rel=1e-5)
    assert report.tau3 == pytest.approx(1 / (rates.k + rates.phi), rel=1e-5)
    assert report.window_open
    assert report.plateau_window == (report.tau2, report.tau1)


def test_timescales_redfield_with_ground_init(reference_v):
    model, rates = reference_v
    gen = build_redfield_generator(model, "unified")
    report = analyze_timescales(gen, initial=initial_state("ground", model).rho)
    assert report.tau1 == pytest.approx(lepe_eigenvalues(rates, DELTA).tau1, rel=5e-3)
    assert report.tau2 == pytest.approx(1 / rates.k, rel=1e-5)
    assert report.filtered_modes > 0
    assert 1e6 < report.separation_ratio < 1e7


def test_timescales_qubit_without_initial_state_has_no_window():
    report = analyze_timescales(build_redfield_generator(qubit_model(), "unified"))
    assert report.separation_ratio == pytest.approx(2.0, rel=1e-10)
    assert not report.window_open


@pytest.mark.parametrize("n_excited", [3, 4])
def test_timescales_bunched_slow_modes_keep_window_open(n_excited):
    model = nlevel_model(n_excited)
    gen = build_redfield_generator(model, "unified")
    report = analyze_timescales(gen, initial=initial_state("ground", model).rho)
    # 느린 모드들이 서로 가까워 τ₁/τ₂ 는 작지만 빠른 쪽과의 gap 은 크다
    assert report.separation_ratio < 100.0
    assert report.gap_ratio > 1e6
    assert report.window_open
    fast, slow = report.plateau_window
    assert fast < 10.0
    assert slow > 1e7
    assert fast < report.plateau_time < slow


def test_timescales_zero_splitting_non_relaxing(reference_v):
    _, rates = reference_v
    report = analyze_timescales(unified_generator_v(rates, 0.0))
    assert report.non_relaxing_modes == 1
    assert math.isinf(report.tau1)
    assert report.tau2 == pytest.approx(1 / rates.k, rel=1e-10)
