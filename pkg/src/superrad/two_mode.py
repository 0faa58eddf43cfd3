"""Reduced two-order model (``psi_0``, ``psi_2``) without kinetic terms.

Used as a cross-check of the full solver.  Nothing here calls into
:mod:`superrad.matter` or :mod:`superrad.optics`: the light problem is solved
by backward single shooting with fourth-order Magnus cells instead of a
forward RK4 transfer matrix, and the matter update is the closed-form 2x2
exponential.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class TwoModeState:
    psi0: np.ndarray
    psi2: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray
    xi: np.ndarray
    tau: float = 0.0

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @property
    def coherence(self):
        return self.psi2 * np.conj(self.psi0)

    def populations(self):
        return (np.trapezoid(np.abs(self.psi0) ** 2, self.xi),
                np.trapezoid(np.abs(self.psi2) ** 2, self.xi))


def _expm2(a00, a01, a10, a11):
    """Closed-form exponential of a batch of 2x2 matrices."""
    mean = 0.5 * (a00 + a11)
    b00 = a00 - mean
    s = np.sqrt(b00 * b00 + a01 * a10)
    cosh = np.cosh(s)
    small = np.abs(s) < 1e-8
    sinhc = np.where(small, 1.0 + s * s / 6.0, np.sinh(s) / np.where(small, 1.0, s))
    scale = np.exp(mean)
    return (scale * (cosh + sinhc * b00), scale * sinhc * a01,
            scale * sinhc * a10, scale * (cosh - sinhc * b00))


def solve_light(psi0, psi2, xi, tau, e_i, rate):
    """Envelopes for the two-order source terms with ``e+(start)=e_i``, ``e-(end)=0``.

    ``rate`` is ``Lambda / chi``.  Starting from ``(1, 0)`` at the far end,
    the solution is carried back to the input face through the inverse cell
    propagators and then rescaled to the required input amplitude.
    """
    density = np.abs(psi0) ** 2 + np.abs(psi2) ** 2
    grating = psi2 * np.conj(psi0) * np.exp(-2j * tau)
    h = xi[1] - xi[0]

    # Two-point Gauss-Legendre nodes on each cell, linear interpolation of coefficients.
    w1, w2 = 0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0
    n1 = (1 - w1) * density[:-1] + w1 * density[1:]
    n2 = (1 - w2) * density[:-1] + w2 * density[1:]
    q1 = (1 - w1) * grating[:-1] + w1 * grating[1:]
    q2 = (1 - w2) * grating[:-1] + w2 * grating[1:]

    # Generator A = rate * [[-i n, -i q], [i q*, i n]]
    def gen(n, q):
        return -1j * rate * n, -1j * rate * q, 1j * rate * np.conj(q), 1j * rate * n

    a1 = gen(n1, q1)
    a2 = gen(n2, q2)
    # Commutator [A2, A1]
    c00 = a2[1] * a1[2] - a1[1] * a2[2]
    c01 = a2[0] * a1[1] + a2[1] * a1[3] - a1[0] * a2[1] - a1[1] * a2[3]
    c10 = a2[2] * a1[0] + a2[3] * a1[2] - a1[2] * a2[0] - a1[3] * a2[2]
    c11 = -c00
    k = SQRT3 / 12.0 * h * h
    omega = [0.5 * h * (x + y) + k * c for x, y, c in zip(a1, a2, (c00, c01, c10, c11))]
    # exp(-Omega) carries the solution from the right edge of a cell to its left edge.
    m00, m01, m10, m11 = _expm2(*(-o for o in omega))

    size = xi.size
    e_plus = np.empty(size, dtype=complex)
    e_minus = np.empty(size, dtype=complex)
    p, q = 1.0 + 0j, 0.0 + 0j
    e_plus[-1], e_minus[-1] = p, q
    for j in range(size - 2, -1, -1):
        p, q = m00[j] * p + m01[j] * q, m10[j] * p + m11[j] * q
        e_plus[j], e_minus[j] = p, q
    scale = e_i / e_plus[0]
    return e_plus * scale, e_minus * scale


def _rotate(psi0, psi2, e_plus, e_minus, lam, dtau, tau):
    """Exact evolution under the 2x2 coupling Hamiltonian with fixed light."""
    g = lam * np.conj(e_minus) * e_plus * np.exp(2j * tau)   # <2|H|0>
    shift = lam * (np.abs(e_plus) ** 2 + np.abs(e_minus) ** 2)
    mag = np.abs(g)
    angle = mag * dtau
    unit = np.where(mag > 0, g / np.where(mag > 0, mag, 1.0), 0.0)
    c, s = np.cos(angle), np.sin(angle)
    common = np.exp(-1j * shift * dtau)
    new0 = common * (c * psi0 - 1j * s * np.conj(unit) * psi2)
    new2 = common * (c * psi2 - 1j * s * unit * psi0)
    return new0, new2


def initial_two_mode(atom_number, xi, sample_length, e_i, lam, chi, seeded=True):
    """Thomas-Fermi ``psi_0`` on ``[0, sample_length]`` plus a one-atom ``psi_2`` seed."""
    half = sample_length / 2.0
    profile = np.maximum(1.0 - ((xi - half) / half) ** 2, 0.0)
    profile *= atom_number / np.trapezoid(profile, xi)
    psi0 = np.sqrt(profile).astype(complex)
    psi2 = psi0 / np.sqrt(atom_number) if seeded else np.zeros_like(psi0)
    e_plus, e_minus = solve_light(psi0, psi2, xi, 0.0, e_i, lam / chi)
    return TwoModeState(psi0=psi0, psi2=psi2, e_plus=e_plus, e_minus=e_minus, xi=xi)


def _advance(state, dtau, e_i, lam, chi):
    tau, rate = state.tau, lam / chi
    mid = tau + 0.5 * dtau
    p0, p2 = _rotate(state.psi0, state.psi2, state.e_plus, state.e_minus, lam,
                     0.5 * dtau, tau + 0.25 * dtau)
    ep, em = solve_light(p0, p2, state.xi, mid, e_i, rate)
    p0, p2 = _rotate(state.psi0, state.psi2, ep, em, lam, dtau, mid)
    new_ep, new_em = solve_light(p0, p2, state.xi, tau + dtau, e_i, rate)
    new = state.replace(psi0=p0, psi2=p2, e_plus=new_ep, e_minus=new_em, tau=tau + dtau)
    return new, ep, em


def step_two_mode(state, dtau, e_i, lam, chi):
    """One exponential-midpoint step; the returned state carries its own light."""
    return _advance(state, dtau, e_i, lam, chi)[0]


def coherence_rate(state, lam):
    """Time derivative of the grating ``psi_2 conj(psi_0)`` from the reduced equations."""
    return (1j * lam * np.conj(state.e_minus) * state.e_plus * np.exp(2j * state.tau)
            * (np.abs(state.psi2) ** 2 - np.abs(state.psi0) ** 2))


def run_two_mode(model, params, duration=None, seeded=True):
    """Integrate the reduced model; returns a :class:`SimulationTrace` in SI units.

    Flux is sampled from the mid-step light, as in the full solver.
    """
    from .dynamics import SimulationTrace, low_pass

    duration = params.pulse_duration if duration is None else duration
    n_steps = int(round(2.0 * model.omega_r * duration / model.dtau))
    state = initial_two_mode(params.atom_number, model.xi, model.sample_length,
                             model.e_i, model.coupling, model.chi, seeded)
    C = model.flux_constant
    flux = np.empty(n_steps)
    amplitude = np.empty(n_steps, dtype=complex)
    pops = np.empty((n_steps, 2))
    for j in range(n_steps):
        state, _, em = _advance(state, model.dtau, model.e_i, model.coupling, model.chi)
        if not np.isfinite(em[0]):
            raise NonFinite("two-mode oracle diverged", step=j)
        flux[j] = C * abs(em[0]) ** 2
        amplitude[j] = em[0]
        pops[j] = state.populations()
    times = (np.arange(n_steps) + 0.5) * model.dtau / (2.0 * model.omega_r)
    return SimulationTrace(times=times, flux=flux,
                           filtered_flux=low_pass(flux, times, params.detector_time_constant),
                           orders=(0, 2), populations=pops,
                           diagnostics={"model": "two_mode", "steps": n_steps},
                           e_minus_input=amplitude)
