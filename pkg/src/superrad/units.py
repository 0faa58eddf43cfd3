"""Laboratory parameters and their conversion to the dimensionless model.

Positions are scaled as ``xi = k_l z`` and times as ``tau = 2 omega_r t``.
Light envelopes are scaled so that ``|e|^2`` is the number of photons per
unit ``xi``; the photon flux through the condensate cross-section is then
``c k_l |e|^2`` (see :func:`flux_constant`).

The atomic dipole moment never appears explicitly.  It is eliminated with
the two-level relation ``|d|^2 = 3 pi eps0 hbar Gamma / k_l^3``.  The
saturation intensity enters only through :func:`scattering_rate`, i.e. when
a quoted single-particle rate is converted into a pump power.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as const

from .errors import ConfigError, SaturationError

TWO_PI = 2.0 * math.pi

# Rb-87 D1 line, Steck "Rubidium 87 D Line Data" rev. 2.2.1.
RB87_D1_LINEWIDTH = TWO_PI * 5.7500e6
RB87_D1_WAVELENGTH = 794.979e-9
# Effective far-detuned saturation intensity of the D1 line, W/m^2.
RB87_D1_SATURATION_INTENSITY = 44.876

SATURATION_LIMIT = 0.1


def two_level_saturation_intensity(linewidth, wavelength):
    """Closed two-level value ``pi h c Gamma / (3 lambda^3)``."""
    return math.pi * const.h * const.c * linewidth / (3.0 * wavelength**3)


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory-unit inputs, all SI.  Defaults follow the reference experiment."""

    atom_number: float = 1.35e6
    tf_radius_axial: float = 65e-6
    tf_radius_radial: float = 6.4e-6
    wavelength: float = RB87_D1_WAVELENGTH
    detuning: float = -TWO_PI * 2.6e9
    linewidth: float = RB87_D1_LINEWIDTH
    saturation_intensity: float = RB87_D1_SATURATION_INTENSITY
    pump_power: float = 2.4857e-7          # R = 0.447e3 /s with the other defaults
    pump_waist: float = 13.2e-6
    recoil_frequency: float = TWO_PI * 3.6e3
    pulse_duration: float = 200e-6
    seed_calibration_factor: float = 0.895
    detector_time_constant: float = 2.5e-6

    def __post_init__(self):
        for name in ("tf_radius_axial", "tf_radius_radial", "wavelength", "linewidth",
                     "saturation_intensity", "pump_waist", "recoil_frequency",
                     "pulse_duration", "detector_time_constant"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be finite and positive, got {value!r}")
        if not (math.isfinite(self.atom_number) and self.atom_number >= 1):
            raise ConfigError(f"atom_number must be >= 1, got {self.atom_number!r}")
        if not (math.isfinite(self.pump_power) and self.pump_power >= 0):
            raise ConfigError(f"pump_power must be >= 0, got {self.pump_power!r}")
        if not (math.isfinite(self.seed_calibration_factor) and self.seed_calibration_factor >= 0):
            raise ConfigError("seed_calibration_factor must be >= 0")
        if not math.isfinite(self.detuning) or self.detuning == 0:
            raise ConfigError("detuning must be finite and nonzero")

    @property
    def length(self):
        """Condensate length ``L = 2 z0``."""
        return 2.0 * self.tf_radius_axial

    @property
    def k_l(self):
        return TWO_PI / self.wavelength

    @property
    def peak_intensity(self):
        """On-axis pump intensity of the Gaussian beam, ``2P / (pi w^2)``."""
        return 2.0 * self.pump_power / (math.pi * self.pump_waist**2)

    @property
    def single_particle_rate(self):
        return scattering_rate(self.peak_intensity, self.saturation_intensity,
                               self.linewidth, self.detuning)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class ScaledModel:
    """Dimensionless model handed to the solvers.

    ``xi`` is the computational grid.  The condensate occupies
    ``[0, sample_length]`` and the grid extends beyond it by a margin on both
    sides so the periodic kinetic step never wraps populated amplitude.
    """

    coupling: float            # Lambda
    chi: float
    xi: np.ndarray
    dtau: float
    orders: tuple
    e_i: complex
    area: float
    k_l: float
    omega_r: float
    sample_length: float
    kinetic: bool = True
    potential: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.ndim != 1 or xi.size < 2 or np.any(np.diff(xi) <= 0):
            raise ConfigError("xi grid must be one-dimensional and strictly increasing")
        if not self.dtau > 0:
            raise ConfigError("dtau must be positive")
        if not self.chi > 0:
            raise ConfigError("chi must be positive")
        orders = tuple(int(m) for m in self.orders)
        if len(orders) < 2 or any(m % 2 for m in orders) or any(
                b - a != 2 for a, b in zip(orders, orders[1:])):
            raise ConfigError(f"orders must be consecutive even integers, got {orders}")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "orders", orders)

    @property
    def dxi(self):
        return self.xi[1] - self.xi[0]

    @property
    def flux_constant(self):
        return flux_constant(self.k_l)

    def to_seconds(self, tau):
        return np.asarray(tau) / (2.0 * self.omega_r)

    def to_tau(self, t):
        return 2.0 * self.omega_r * np.asarray(t)

    def z_um(self):
        return self.xi / self.k_l * 1e6

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def summary(self):
        return {
            "coupling": self.coupling,
            "chi": self.chi,
            "grid_points": int(self.xi.size),
            "xi_min": float(self.xi[0]),
            "xi_max": float(self.xi[-1]),
            "dtau": self.dtau,
            "orders": list(self.orders),
            "e_i": abs(self.e_i),
            "area": self.area,
            "k_l": self.k_l,
            "omega_r": self.omega_r,
            "sample_length": self.sample_length,
            "kinetic": self.kinetic,
            "flux_constant": self.flux_constant,
        }


def _check_finite(**values):
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


def scattering_rate(intensity, saturation_intensity, linewidth, detuning):
    """Single-particle spontaneous scattering rate of a driven two-level atom."""
    _check_finite(intensity=intensity, saturation_intensity=saturation_intensity,
                  linewidth=linewidth, detuning=detuning)
    if intensity < 0 or saturation_intensity <= 0 or linewidth <= 0:
        raise ValueError("need intensity >= 0, saturation_intensity > 0, linewidth > 0")
    s = intensity / saturation_intensity
    return linewidth * s / (2.0 * (1.0 + s + (2.0 * detuning / linewidth) ** 2))


def intensity_for_rate(rate, saturation_intensity, linewidth, detuning):
    """Invert :func:`scattering_rate` for the intensity."""
    if not 0 <= rate < linewidth / 2:
        raise ValueError("rate must lie in [0, linewidth/2)")
    lorentz = 1.0 + (2.0 * detuning / linewidth) ** 2
    return saturation_intensity * 2.0 * rate * lorentz / (linewidth - 2.0 * rate)


def pump_power_for_rate(params, rate):
    """Pump power whose on-axis intensity gives single-particle rate ``rate``."""
    intensity = intensity_for_rate(rate, params.saturation_intensity,
                                   params.linewidth, params.detuning)
    return intensity * math.pi * params.pump_waist**2 / 2.0


def params_for_rate(rate, base=None, **changes):
    base = (base or PhysicalParams()).replace(**changes)
    return base.replace(pump_power=pump_power_for_rate(base, rate))


def fresnel_number(radius, wavelength, length):
    if min(radius, wavelength, length) <= 0:
        raise ValueError("radius, wavelength and length must be positive")
    return math.pi * radius**2 / (wavelength * length)


def pump_overlap_fraction(pump_waist, radius):
    """Fraction of Gaussian beam power inside ``radius``."""
    if pump_waist <= 0 or radius <= 0:
        raise ValueError("pump_waist and radius must be positive")
    if math.isinf(radius):
        return 1.0
    return -math.expm1(-2.0 * radius**2 / pump_waist**2)


def flux_constant(k_l):
    """Photons per second carried by a unit ``|e|^2``."""
    return const.c * k_l


def saturation_parameter(params):
    """Off-resonant excitation ``(I/I_s) (Gamma / 2 delta)^2`` at the beam centre."""
    return (params.peak_intensity / params.saturation_intensity
            * (params.linewidth / (2.0 * params.detuning)) ** 2)


def dipole_moment_squared(linewidth, k_l):
    """Two-level ``|d|^2`` from the natural linewidth."""
    return 3.0 * math.pi * const.epsilon_0 * const.hbar * linewidth / k_l**3


def symmetric_orders(n_orders):
    if n_orders < 3 or n_orders % 2 == 0:
        raise ConfigError(f"n_orders must be odd and >= 3, got {n_orders}")
    half = n_orders // 2
    return tuple(range(-2 * half, 2 * half + 1, 2))


def default_dtau(params, dt=1e-7):
    return 2.0 * params.recoil_frequency * dt


def build_scaled_model(params, grid_points=512, n_orders=9, dtau=None, *,
                       margin=0.1, orders=None, kinetic=True, potential=None):
    """Dimensionless model for ``params``.

    ``margin`` is the padding on each side of the condensate as a fraction of
    its length.  ``orders`` overrides the symmetric ladder built from
    ``n_orders``.
    """
    if grid_points < 64:
        raise ConfigError("grid_points must be >= 64")
    if margin < 0.1:
        raise ConfigError("margin must be at least 10% of the sample length")
    if dtau is None:
        dtau = default_dtau(params)
    if not dtau > 0:
        raise ConfigError("dtau must be positive")
    orders = tuple(orders) if orders is not None else symmetric_orders(n_orders)

    s = saturation_parameter(params)
    if s > SATURATION_LIMIT:
        raise SaturationError(
            f"saturation parameter {s:.3g} exceeds {SATURATION_LIMIT}: "
            "the linear-polarization model does not apply")

    k_l = params.k_l
    omega_l = const.c * k_l
    omega_r = params.recoil_frequency
    area = math.pi * params.tf_radius_radial**2
    d2 = dipole_moment_squared(params.linewidth, k_l)
    coupling = d2 * omega_l * k_l / (4.0 * omega_r * const.hbar * params.detuning
                                     * const.epsilon_0 * area)
    chi = const.c * k_l / (2.0 * omega_r)

    photon_flux = (params.pump_power / (const.hbar * omega_l)
                   * pump_overlap_fraction(params.pump_waist, params.tf_radius_radial))
    e_i = params.seed_calibration_factor * math.sqrt(photon_flux / flux_constant(k_l))

    sample_length = k_l * params.length
    pad = margin * sample_length
    xi = np.linspace(-pad, sample_length + pad, grid_points)

    return ScaledModel(coupling=coupling, chi=chi, xi=xi, dtau=float(dtau),
                       orders=orders, e_i=complex(e_i), area=area, k_l=k_l,
                       omega_r=omega_r, sample_length=sample_length,
                       kinetic=kinetic, potential=potential)
