import numpy as np
import pytest
from hypothesis import given, strategies as st

from superrad.errors import NonFinite, SolverSingular
from superrad.matter import MatterState, initial_state
from superrad.optics import (LightState, backscattered_flux, boundary_flux_imbalance,
                             cumulative_transfer, flux_residual, propagate_light,
                             rk4_step_matrices)
from superrad.two_mode import solve_light


def _uniform(n0=1.0, eps=0.0, size=401, length=500.0, phase=0.0):
    xi = np.linspace(0, length, size)
    psi = np.zeros((2, size), complex)
    psi[0] = np.sqrt(n0)
    psi[1] = eps * np.sqrt(n0) * np.exp(1j * phase)
    return MatterState(orders=(0, 2), psi=psi, xi=xi)


def _matched(eps=0.5, rate=0.002, length=1000.0, size=1001, n0=1.0):
    """Uniform grating whose phase cancels the refractive index (maximal Bragg gain r|Q|)."""
    xi = np.linspace(0, length, size)
    n = n0 * (1 + eps**2)
    psi = np.zeros((2, size), complex)
    psi[0] = np.sqrt(n0)
    psi[1] = eps * np.sqrt(n0) * np.exp(-2j * rate * n * xi)
    return MatterState(orders=(0, 2), psi=psi, xi=xi), rate


RATE = -1.3e-6      # Lambda/chi at the default parameters


def _tf_state(size=512, eps=0.3):
    """Condensate-like state with realistic scaled magnitudes."""
    xi = np.linspace(-100, 1100, size)
    s = initial_state(1.35e6, xi, (0, 2), sample_length=1000.0)
    psi = s.psi.copy()
    psi[1] = eps * psi[0] * np.exp(0.01j * xi)
    return s.replace(psi=psi)


def test_vacuum_propagation():
    s = MatterState(orders=(0, 2), psi=np.zeros((2, 64)), xi=np.linspace(0, 10, 64))
    light = propagate_light(s, 0.7 - 0.2j, coupling=-3.0, chi=2.0)
    assert np.allclose(light.e_plus, 0.7 - 0.2j, rtol=0, atol=1e-15)
    assert not np.any(light.e_minus)
    assert flux_residual(light) == 0.0
    assert backscattered_flux(light, 1e9) == 0.0


def test_refractive_phase_without_coherence():
    s = _uniform(n0=2.0, size=1601)
    rate = -0.004
    light = propagate_light(s, 1.0, coupling=rate, chi=1.0)
    assert np.allclose(np.abs(light.e_plus), 1.0, atol=1e-13)
    assert not np.any(np.abs(light.e_minus) > 1e-300)
    expected = rate * 2.0 * s.xi[-1]
    assert np.angle(light.e_plus[-1]) == pytest.approx(np.angle(np.exp(-1j * expected)), abs=1e-10)


def test_first_order_reflection_from_weak_grating():
    n0, eps, rate, length, e_i = 1.0, 1e-5, 2e-3, 500.0, 0.8
    s = _uniform(n0=n0, eps=eps, length=length, size=801)
    light = propagate_light(s, e_i, coupling=rate, chi=1.0)
    # e-' - i r n e- = i r Q* e+,  e+ ~ e_i exp(-i r n xi),  e-(L) = 0
    q = eps * n0
    n = n0 * (1 + eps**2)
    expected = -1j * rate * q * e_i * (1 - np.exp(-2j * rate * n * length)) / (2j * rate * n)
    assert abs(light.e_minus[0] - expected) / abs(expected) < 1e-3
    small_phase = abs(expected) / (eps * e_i * rate * length * n0)
    assert 0.5 < small_phase <= 1.0


@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False,
                          allow_infinity=False))
def test_linear_in_boundary_amplitude(alpha):
    s = _tf_state()
    base = propagate_light(s, 1.0, coupling=RATE, chi=1.0)
    scaled = propagate_light(s, alpha, coupling=RATE, chi=1.0)
    assert np.max(np.abs(scaled.e_plus - alpha * base.e_plus)) <= 1e-12 * abs(alpha) * np.abs(base.e_plus).max()
    assert np.max(np.abs(scaled.e_minus - alpha * base.e_minus)) <= 1e-12 * abs(alpha) * np.abs(base.e_plus).max()


def test_boundary_conditions_and_flux_identities():
    s, rate = _matched(eps=0.5, size=4001)   # kappa L = 1
    light = propagate_light(s, 0.5j, coupling=rate, chi=1.0)
    assert light.e_plus[0] == pytest.approx(0.5j, abs=1e-15)
    assert abs(light.e_minus[-1]) < 1e-12
    reflectivity = abs(light.e_minus[0]) ** 2 / 0.25
    assert reflectivity == pytest.approx(np.tanh(1.0) ** 2, rel=1e-6)
    assert flux_residual(light) < 1e-6
    assert boundary_flux_imbalance(light) < 1e-6


def test_realistic_state_conserves_flux():
    light = propagate_light(_tf_state(eps=0.8), 1.0, coupling=RATE, chi=1.0)
    assert flux_residual(light) < 1e-10
    assert boundary_flux_imbalance(light) < 1e-10


def test_residual_detects_perturbed_backward_field():
    s, rate = _matched(eps=0.5)
    light = propagate_light(s, 1.0, coupling=rate, chi=1.0)
    broken = LightState(light.e_plus, light.e_minus * 1.01, light.tau)
    assert flux_residual(broken) > 1e-3


def test_backscattered_flux_is_quadratic():
    light = LightState(np.ones(4, complex), np.array([0.3j, 0, 0, 0]))
    doubled = LightState(light.e_plus, 2 * light.e_minus)
    assert backscattered_flux(doubled, 7.0) == pytest.approx(4 * backscattered_flux(light, 7.0))
    assert backscattered_flux(light, 7.0) == pytest.approx(7.0 * 0.09)


def test_agrees_with_independent_magnus_shooting():
    s = _tf_state(eps=0.6)
    tau = 0.37
    light = propagate_light(s, 1.0, coupling=RATE, chi=1.0, tau=tau)
    ep, em = solve_light(s.psi[0], s.psi[1], s.xi, tau, 1.0, RATE)
    assert np.max(np.abs(light.e_minus - em)) < 1e-8
    assert np.max(np.abs(light.e_plus - ep)) < 1e-8


def test_transfer_scan_matches_sequential_product():
    rng = np.random.default_rng(3)
    steps = rng.normal(size=(37, 2, 2)) + 1j * rng.normal(size=(37, 2, 2))
    scan = cumulative_transfer(steps)
    acc = np.eye(2, dtype=complex)
    assert np.allclose(scan[0], acc)
    for j in range(37):
        acc = steps[j] @ acc
        assert np.allclose(scan[j + 1], acc, rtol=1e-12)


def test_step_matrices_are_pseudo_unitary_to_high_order():
    s = _tf_state(eps=0.5)
    density = np.sum(np.abs(s.psi) ** 2, axis=0)
    grating = s.psi[1] * np.conj(s.psi[0])
    m = rk4_step_matrices(density, grating, RATE, s.xi[1] - s.xi[0])
    sigma = np.diag([1.0, -1.0])
    defect = np.conj(np.swapaxes(m, 1, 2)) @ sigma @ m - sigma
    assert np.max(np.abs(defect)) < 1e-9


def test_non_finite_state_rejected():
    s = _uniform()
    psi = s.psi.copy()
    psi[0, 3] = np.nan
    with pytest.raises(NonFinite):
        propagate_light(s.replace(psi=psi), 1.0, -0.01, 1.0)


def test_degenerate_transfer_reported():
    # kappa L = 20: the transfer matrix condition number is ~exp(40)
    s, rate = _matched(eps=1.0, rate=0.01, length=2000.0, size=4001)
    with pytest.raises(SolverSingular) as info:
        propagate_light(s, 1.0, coupling=rate, chi=1.0)
    assert not info.value.condition < 1e12


def test_requires_positive_chi():
    with pytest.raises(ValueError):
        propagate_light(_uniform(), 1.0, -0.01, 0.0)
