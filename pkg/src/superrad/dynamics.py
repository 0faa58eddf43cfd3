"""Time stepping of the coupled matter/light system and the detector model."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import LadderOverflow, NonFinite
from .matter import (coupling_step, initial_state, kinetic_half_step,
                     momentum_populations)
from .optics import (backscattered_flux, boundary_flux_imbalance, flux_residual,
                     propagate_light)

log = logging.getLogger(__name__)

LADDER_GUARD = 1e-3


@dataclass(frozen=True)
class Snapshot:
    time: float
    z_um: np.ndarray
    densities: np.ndarray  # (orders, grid), |psi_m|^2
    i_plus: np.ndarray     # C |e+|^2, photons/s
    i_minus: np.ndarray


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    times: np.ndarray                 # s
    flux: np.ndarray                  # photons/s
    filtered_flux: np.ndarray
    orders: tuple
    populations: np.ndarray           # (steps, orders)
    snapshots: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    e_minus_input: np.ndarray | None = None   # complex e-(0) per step, scaled units

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def population(self, m):
        return self.populations[:, self.orders.index(m)]


def detector_filter(trace, time_constant):
    """Single-pole causal low-pass of the flux, started from zero."""
    if not time_constant > 0:
        raise ValueError("time_constant must be positive")
    return trace.replace(filtered_flux=low_pass(trace.flux, trace.times, time_constant))


def low_pass(signal, times, time_constant):
    signal = np.asarray(signal, dtype=float)
    if signal.size < 2:
        return signal.copy()
    dt = times[1] - times[0]
    decay = np.exp(-dt / time_constant)
    return lfilter([1.0 - decay], [1.0, -decay], signal)


def _step(state, model, e_i, tau_mid):
    """One Strang step kinetic/coupling/kinetic; returns the state and midpoint light.

    The coupling uses the exponential midpoint rule: the light is solved for
    the matter state predicted half way through the coupling interval.
    """
    dtau, lam, chi = model.dtau, model.coupling, model.chi
    if model.kinetic:
        state = kinetic_half_step(state, dtau)
    light = propagate_light(state, e_i, lam, chi, tau=state.tau)
    predicted = coupling_step(state, light, 0.5 * dtau, lam,
                              tau=state.tau + 0.25 * dtau, potential=model.potential)
    light = propagate_light(predicted, e_i, lam, chi, tau=tau_mid)
    state = coupling_step(state, light, dtau, lam, tau=tau_mid, potential=model.potential)
    if model.kinetic:
        state = kinetic_half_step(state, dtau)
    return state, light


def evolve(model, atom_number, n_steps, *, seed=True, state=None):
    """Advance the matter state by ``n_steps`` steps without recording anything."""
    if state is None:
        state = initial_state(atom_number, model.xi, model.orders, model.sample_length,
                              seed=seed)
    for _ in range(n_steps):
        state, _ = _step(state, model, model.e_i, state.tau + 0.5 * model.dtau)
    return state


def run_simulation(model, params, snapshot_times=(), *, ladder_guard=LADDER_GUARD,
                   seed=True, duration=None):
    """Integrate over the rectangular pump pulse and record the backscattered flux.

    Flux is sampled from the midpoint light of each step; populations are
    taken at the end of the step.  ``ladder_guard`` is the largest tolerated
    population of either outermost order as a fraction of the atom number
    (``None`` disables the check).
    """
    duration = params.pulse_duration if duration is None else duration
    n_steps = int(round(float(model.to_tau(duration)) / model.dtau))
    if n_steps < 1:
        raise ValueError("pulse shorter than one time step")
    atom_number = params.atom_number
    e_i = model.e_i
    C = model.flux_constant
    z_um = model.z_um()

    state = initial_state(atom_number, model.xi, model.orders, model.sample_length, seed=seed)
    start_atoms = float(np.sum(momentum_populations(state)))

    step_mid = (np.arange(n_steps) + 0.5) * model.dtau
    times = model.to_seconds(step_mid)
    wanted = {}
    for t in snapshot_times:
        j = int(np.clip(np.argmin(np.abs(times - t)), 0, n_steps - 1))
        wanted.setdefault(j, []).append(float(t))

    flux = np.empty(n_steps)
    amplitude = np.empty(n_steps, dtype=complex)
    populations = np.empty((n_steps, len(model.orders)))
    snapshots = []
    max_residual = max_imbalance = max_condition = 0.0
    outer_max = 0.0

    for j in range(n_steps):
        state, light = _step(state, model, e_i, step_mid[j])
        pops = momentum_populations(state)
        if not (np.all(np.isfinite(pops)) and np.all(np.isfinite(light.e_minus))):
            raise NonFinite("simulation produced non-finite values", step=j)
        flux[j] = backscattered_flux(light, C)
        amplitude[j] = light.e_minus[0]
        populations[j] = pops
        max_residual = max(max_residual, flux_residual(light))
        max_imbalance = max(max_imbalance, boundary_flux_imbalance(light))
        max_condition = max(max_condition, light.condition)
        outer = max(pops[0], pops[-1]) / atom_number
        outer_max = max(outer_max, outer)
        if ladder_guard is not None and outer > ladder_guard:
            raise LadderOverflow(
                f"outermost order population {outer:.3g} N_at exceeds {ladder_guard:g} N_at "
                f"at t={times[j] * 1e6:.2f} us; increase n_orders")
        if j in wanted:
            snapshots.append(Snapshot(
                time=float(times[j]), z_um=z_um,
                densities=np.abs(state.psi) ** 2,
                i_plus=C * np.abs(light.e_plus) ** 2,
                i_minus=C * np.abs(light.e_minus) ** 2))

    end_atoms = float(np.sum(populations[-1]))
    diagnostics = {
        "steps": n_steps,
        "max_flux_residual": max_residual,
        "max_boundary_imbalance": max_imbalance,
        "max_condition": max_condition,
        "atom_number_drift": abs(end_atoms - start_atoms) / start_atoms,
        "outermost_order_max_fraction": outer_max,
        "single_particle_rate": params.single_particle_rate,
    }
    log.debug("run finished: %s", diagnostics)
    trace = SimulationTrace(times=times, flux=flux, filtered_flux=flux, orders=model.orders,
                            populations=populations, snapshots=snapshots,
                            diagnostics=diagnostics, e_minus_input=amplitude)
    return detector_filter(trace, params.detector_time_constant)


def run_kapitza_dirac_check(model, params, threshold=0.01, **kwargs):
    """Report whether ``m=-2`` and ``m=+4`` each exceed ``threshold`` N_at at the end."""
    trace = run_simulation(model, params, **kwargs)
    final = trace.populations[-1] / params.atom_number
    fractions = {m: float(final[trace.orders.index(m)]) if m in trace.orders else 0.0
                 for m in (-2, 2, 4)}
    return {
        "fractions": fractions,
        "minus2_populated": fractions[-2] > threshold,
        "plus4_populated": fractions[4] > threshold,
        "kapitza_dirac": fractions[-2] > threshold and fractions[4] > threshold,
        "trace": trace,
    }
