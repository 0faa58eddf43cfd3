"""Counter-propagating light envelopes at fixed time.

With retardation neglected the envelopes obey a linear two-component ODE in
``xi`` whose coefficients depend on the instantaneous matter state:

    d/dxi (e+, e-) = (Lambda/chi) [[-i n, -i Q], [i Q*, i n]] (e+, e-)

with ``n = sum_m |psi_m|^2`` and ``Q = sum_m psi_m conj(psi_{m-2})
exp(-2i (m-1) tau)``.  The boundary conditions ``e+(0) = e_i`` and
``e-(end) = 0`` sit at opposite ends, so the problem is solved with the
transfer matrix of the whole grid.  The coefficient matrix preserves
``|e+|^2 - |e-|^2``, which makes the transfer matrix pseudo-unitary and its
lower-right entry bounded below by one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, SolverSingular

__all__ = [
    "LightState",
    "light_coefficients",
    "rk4_step_matrices",
    "cumulative_transfer",
    "propagate_light",
    "flux_residual",
    "boundary_flux_imbalance",
    "backscattered_flux",
]

MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class LightState:
    e_plus: np.ndarray
    e_minus: np.ndarray
    tau: float = 0.0
    condition: float = 1.0

    @property
    def e_i(self):
        return self.e_plus[0]


def light_coefficients(state, tau=None):
    """Total density ``n(xi)`` and grating sum ``Q(xi)`` at time ``tau``."""
    if tau is None:
        tau = state.tau
    psi = state.psi
    density = np.sum(np.abs(psi) ** 2, axis=0)
    orders = np.asarray(state.orders[1:], dtype=float)
    phases = np.exp(-2j * (orders - 1.0) * tau)
    grating = np.sum(psi[1:] * np.conj(psi[:-1]) * phases[:, None], axis=0)
    return density, grating


def _generator(density, grating, rate):
    a = np.empty(density.shape + (2, 2), dtype=complex)
    a[..., 0, 0] = -1j * rate * density
    a[..., 0, 1] = -1j * rate * grating
    a[..., 1, 0] = 1j * rate * np.conj(grating)
    a[..., 1, 1] = 1j * rate * density
    return a


def _matmul(a, b):
    """Batched 2x2 product; explicit components beat ``@`` for tiny matrices."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
    a00, a01, a10, a11 = a[..., 0, 0], a[..., 0, 1], a[..., 1, 0], a[..., 1, 1]
    b00, b01, b10, b11 = b[..., 0, 0], b[..., 0, 1], b[..., 1, 0], b[..., 1, 1]
    out[..., 0, 0] = a00 * b00 + a01 * b10
    out[..., 0, 1] = a00 * b01 + a01 * b11
    out[..., 1, 0] = a10 * b00 + a11 * b10
    out[..., 1, 1] = a10 * b01 + a11 * b11
    return out


def rk4_step_matrices(density, grating, rate, h):
    """Classical RK4 one-step matrices between neighbouring grid points.

    Coefficients are interpolated linearly inside each cell.  Returns an
    array of shape ``(grid-1, 2, 2)``.
    """
    a = _generator(density, grating, rate)
    a0, a1 = a[:-1], a[1:]
    am = 0.5 * (a0 + a1)
    eye = np.eye(2)
    k1 = a0
    k2 = _matmul(am, eye + 0.5 * h * k1)
    k3 = _matmul(am, eye + 0.5 * h * k2)
    k4 = _matmul(a1, eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def cumulative_transfer(steps):
    """Prefix products ``[I, M0, M1 M0, ..., M_{n-1} ... M0]``.

    Computed with a log-depth inclusive scan over batched 2x2 products.
    """
    out = steps.copy()
    shift = 1
    while shift < out.shape[0]:
        nxt = out.copy()
        nxt[shift:] = _matmul(out[shift:], out[:-shift])
        out = nxt
        shift *= 2
    return np.concatenate((np.eye(2, dtype=complex)[None], out), axis=0)


def propagate_light(state, e_i, coupling, chi, tau=None):
    """Solve for ``(e+, e-)`` on the grid of ``state`` at time ``tau``.

    Raises :class:`NonFinite` for non-finite envelopes and
    :class:`SolverSingular` if the boundary combination is degenerate.
    """
    if tau is None:
        tau = state.tau
    if not np.all(np.isfinite(state.psi)):
        raise NonFinite("matter envelopes are not finite")
    if not chi > 0:
        raise ValueError("chi must be positive")
    xi = state.xi
    density, grating = light_coefficients(state, tau)
    steps = rk4_step_matrices(density, grating, coupling / chi, xi[1] - xi[0])
    transfer = cumulative_transfer(steps)
    total = transfer[-1]
    if not np.all(np.isfinite(total)):
        raise NonFinite("transfer matrix overflowed")

    condition = float(np.linalg.cond(total))
    t22 = total[1, 1]
    if not condition < MAX_CONDITION or abs(t22) < 1e-12 * np.abs(total).max():
        raise SolverSingular("two-point boundary combination is degenerate", condition)

    e_minus0 = -total[1, 0] * e_i / t22
    e_plus = transfer[:, 0, 0] * e_i + transfer[:, 0, 1] * e_minus0
    e_minus = transfer[:, 1, 0] * e_i + transfer[:, 1, 1] * e_minus0
    return LightState(e_plus=e_plus, e_minus=e_minus, tau=float(tau),
                      condition=condition)


def flux_residual(light):
    """Largest deviation of ``|e+|^2 - |e-|^2`` from its input-face value, relative to ``|e_i|^2``."""
    scale = abs(light.e_i) ** 2
    if scale == 0:
        return 0.0
    net = np.abs(light.e_plus) ** 2 - np.abs(light.e_minus) ** 2
    return float(np.max(np.abs(net - net[0])) / scale)


def boundary_flux_imbalance(light):
    """Relative violation of ``|e+(0)|^2 = |e-(0)|^2 + |e+(end)|^2``."""
    scale = abs(light.e_plus[0]) ** 2
    if scale == 0:
        return 0.0
    out = abs(light.e_minus[0]) ** 2 + abs(light.e_plus[-1]) ** 2
    return float(abs(scale - out) / scale)


def backscattered_flux(light, flux_constant):
    """Photon flux leaving the input face, ``C |e-(0)|^2``."""
    return flux_constant * abs(light.e_minus[0]) ** 2
