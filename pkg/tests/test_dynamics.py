import numpy as np
import pytest
from scipy.optimize import curve_fit
from scipy.signal import argrelmax

from superrad.analysis import fit_gaussian_pulse
from superrad.dynamics import (SimulationTrace, detector_filter, evolve, low_pass,
                               run_kapitza_dirac_check, run_simulation)
from superrad.errors import LadderOverflow
from superrad.units import build_scaled_model, params_for_rate

from helpers import KD_RATE, small_model

US = 1e-6


def _trace(times, flux):
    return SimulationTrace(times=times, flux=flux, filtered_flux=flux, orders=(0, 2),
                           populations=np.zeros((times.size, 2)))


@pytest.fixture(scope="module")
def short():
    params = params_for_rate(870.0)                # pulse at ~35 us
    model = small_model(params, grid_points=128, n_orders=11)
    return model, params, run_simulation(model, params, duration=60 * US,
                                         snapshot_times=(10.03e-6, 25e-6))


class TestSimulationInvariants:
    def test_times_uniform_and_increasing(self, short):
        model, _, trace = short
        dt = np.diff(trace.times)
        assert np.all(dt > 0)
        assert np.allclose(dt, model.dtau / (2 * model.omega_r), rtol=1e-9)
        assert trace.filtered_flux.shape == trace.flux.shape
        assert trace.times[0] == pytest.approx(0.05 * US, rel=1e-9)   # 0.1 us steps, midpoint sampled

    def test_snapshots_at_nearest_step(self, short):
        _, _, trace = short
        got = [s.time for s in trace.snapshots]
        assert got == pytest.approx([10.05e-6, 24.95e-6], abs=1e-12) or \
            got == pytest.approx([10.05e-6, 25.05e-6], abs=1e-12)
        snap = trace.snapshots[0]
        assert snap.densities.shape[0] == len(trace.orders)
        assert np.all(snap.i_plus >= snap.i_minus)

    def test_diagnostics(self, short):
        _, _, trace = short
        d = trace.diagnostics
        assert d["max_flux_residual"] <= 1e-6
        assert d["max_boundary_imbalance"] <= 1e-6
        assert d["atom_number_drift"] <= 1e-8
        assert d["steps"] == trace.times.size

    def test_deterministic(self, short):
        model, params, trace = short
        again = run_simulation(model, params, duration=60 * US,
                               snapshot_times=(10.03e-6, 25e-6))
        assert np.array_equal(trace.flux, again.flux)
        assert np.array_equal(trace.populations, again.populations)
        assert np.array_equal(trace.e_minus_input, again.e_minus_input)


def test_no_pump_means_no_flux_and_static_populations():
    params = params_for_rate(KD_RATE).replace(seed_calibration_factor=0.0)
    model = small_model(params, grid_points=128, n_orders=5)
    trace = run_simulation(model, params, duration=20 * US)
    assert not np.any(trace.flux)
    assert np.allclose(trace.populations, trace.populations[0], rtol=1e-12, atol=1e-12)


def test_no_seed_means_no_backscatter():
    params = params_for_rate(KD_RATE)
    model = small_model(params, grid_points=128, n_orders=5)
    trace = run_simulation(model, params, duration=20 * US, seed=False)
    assert not np.any(trace.e_minus_input)
    assert not np.any(trace.flux)


def test_ladder_overflow_names_the_fix():
    params = params_for_rate(KD_RATE)
    model = build_scaled_model(params, grid_points=256, n_orders=3)
    with pytest.raises(LadderOverflow, match="increase n_orders"):
        run_simulation(model, params)


def test_strang_step_is_second_order():
    params = params_for_rate(KD_RATE)
    base = small_model(params, grid_points=128, n_orders=9)
    tau_end = float(base.to_tau(30 * US))

    def final(dtau):
        model = small_model(params, grid_points=128, n_orders=9, dtau=dtau)
        return evolve(model, params.atom_number, int(round(tau_end / dtau))).psi

    coarse = 4 * base.dtau
    ref = final(coarse / 8)
    e1 = np.linalg.norm(final(coarse) - ref)
    e2 = np.linalg.norm(final(coarse / 2) - ref)
    assert 3.2 < e1 / e2 < 4.8


class TestLowRatePulse:
    def test_first_pulse_near_65us(self, low_rate_run):
        """Reported pulse maximum for the default configuration."""
        _, trace = low_rate_run
        metrics = fit_gaussian_pulse(trace)
        assert metrics.converged
        assert 52 * US <= metrics.center <= 78 * US

    def test_peak_flux_scale(self, low_rate_run):
        _, trace = low_rate_run
        assert 1e9 < trace.flux.max() < 1e11        # 1e3..1e5 photons per us

    def test_ringing_after_first_pulse(self, low_rate_run):
        _, trace = low_rate_run
        metrics = fit_gaussian_pulse(trace)
        stop = metrics.window[1]
        later = trace.flux[stop:]
        maxima = argrelmax(later)[0]
        significant = maxima[later[maxima] > 1e-3 * trace.flux.max()]
        assert significant.size >= 2


class TestKapitzaDirac:
    def test_high_rate_populates_minus2_and_plus4(self, kd_run):
        params, model, trace = kd_run
        final = trace.populations[-1] / params.atom_number
        assert final[trace.orders.index(-2)] > 0.01
        assert final[trace.orders.index(4)] > 0.01

    def test_low_rate_flags_false(self, low_rate_params):
        model = build_scaled_model(low_rate_params, n_orders=13)
        report = run_kapitza_dirac_check(model, low_rate_params)
        assert not report["kapitza_dirac"]

    def test_no_pump_flags_false(self):
        params = params_for_rate(KD_RATE).replace(seed_calibration_factor=0.0)
        report = run_kapitza_dirac_check(small_model(params, n_orders=5), params,
                                         duration=10 * US)
        assert not report["minus2_populated"] and not report["plus4_populated"]
        assert report["fractions"][-2] == 0.0


class TestDetectorFilter:
    times = np.arange(2000) * 0.1 * US

    def test_constant_converges_within_five_time_constants(self):
        out = low_pass(np.full(self.times.size, 3.0), self.times, 2.5 * US)
        assert out[0] < 3.0
        assert np.all(np.abs(out[self.times >= 5 * 2.5 * US] - 3.0) <= 3.0 * np.exp(-5) * 1.01)
        assert out[-1] == pytest.approx(3.0, rel=1e-12)

    def test_impulse_decays_with_time_constant(self):
        tc = 2.5 * US
        impulse = np.zeros(self.times.size)
        impulse[100] = 1.0
        out = low_pass(impulse, self.times, tc)
        assert not np.any(out[:100])
        t, y = self.times[100:400] - self.times[100], out[100:400]
        (amp, fitted), _ = curve_fit(lambda t, a, c: a * np.exp(-t / c), t, y, p0=(y[0], 1e-6))
        assert fitted == pytest.approx(tc, rel=1e-2)

    def test_short_spike_broadens(self):
        spike = np.exp(-0.5 * ((self.times - 50 * US) / (1 * US / 2.355)) ** 2)  # 1 us FWHM
        filtered = detector_filter(_trace(self.times, spike), 2.5 * US).filtered_flux
        above = self.times[filtered >= 0.5 * filtered.max()]
        assert above[-1] - above[0] >= 2.5 * US

    def test_requires_positive_time_constant(self):
        with pytest.raises(ValueError):
            detector_filter(_trace(self.times, np.ones(self.times.size)), 0.0)
