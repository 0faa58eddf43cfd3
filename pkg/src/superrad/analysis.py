"""Pulse metrics and scaling-law fits.

Gaussian pulse fits work internally in microseconds with the signal
normalized to its peak, which keeps the least-squares problem well scaled.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal, stats

from .errors import DegenerateFit, EmptyTrace

__all__ = [
    "PulseMetrics",
    "ScalingFit",
    "gaussian",
    "first_pulse_window",
    "fit_gaussian_pulse",
    "fit_amplitude_vs_R",
    "fit_width_vs_R",
    "fit_amplitude_vs_N",
]

START_FRACTION = 0.05
PEAK_PROMINENCE = 0.1
XTOL = 1e-10
MAX_ITERATIONS = 200


@dataclass(frozen=True)
class PulseMetrics:
    amplitude: float   # photons/s
    center: float      # s
    width: float       # s
    residual: float    # rms misfit over the window, relative to the amplitude
    converged: bool
    covariance: np.ndarray | None = field(default=None, repr=False)
    window: tuple = (0, 0)

    def to_dict(self):
        out = {k: v for k, v in dataclasses.asdict(self).items() if k != "covariance"}
        out["window"] = list(self.window)
        if self.covariance is not None:
            out["covariance"] = np.asarray(self.covariance).tolist()
        return out


@dataclass(frozen=True)
class ScalingFit:
    kind: str          # linear_R | width_R | power_N
    parameters: dict
    goodness: float    # coefficient of determination, clipped to [0, 1]
    covariance: np.ndarray | None = field(default=None, repr=False)
    threshold: float | None = None

    def to_dict(self):
        out = {"kind": self.kind, "parameters": dict(self.parameters),
               "goodness": self.goodness, "threshold": self.threshold}
        if self.covariance is not None:
            out["covariance"] = np.asarray(self.covariance).tolist()
        return out


def gaussian(t, amplitude, center, width):
    return amplitude * np.exp(-0.5 * ((t - center) / width) ** 2)


def _gaussian_jacobian(p, t, y):
    a, mu, s = p
    u = (t - mu) / s
    g = np.exp(-0.5 * u * u)
    return np.column_stack((g, a * g * u / s, a * g * u * u / s))


def _r_squared(y, model):
    total = np.sum((y - np.mean(y)) ** 2)
    if total == 0:
        return 1.0 if np.allclose(y, model) else 0.0
    return float(np.clip(1.0 - np.sum((y - model) ** 2) / total, 0.0, 1.0))


def first_pulse_window(y):
    """Index range ``[start, stop)`` covering the first superradiant pulse.

    The first pulse is the earliest peak with prominence of at least 10% of
    the maximum that also reaches half the maximum.  The window opens at the
    last sample below 5% of that peak and closes at the first prominent
    minimum after it (or the end of the trace).
    """
    y = np.asarray(y, dtype=float)
    top = y.max()
    peaks, _ = signal.find_peaks(np.concatenate(([0.0], y, [0.0])),
                                 prominence=PEAK_PROMINENCE * top)
    peaks = peaks - 1
    peaks = peaks[y[peaks] >= 0.5 * top]
    peak = int(peaks[0]) if peaks.size else int(np.argmax(y))

    below = np.nonzero(y[:peak] < START_FRACTION * y[peak])[0]
    start = int(below[-1]) if below.size else 0
    minima, _ = signal.find_peaks(-y[peak:], prominence=PEAK_PROMINENCE * y[peak])
    stop = peak + int(minima[0]) + 1 if minima.size else y.size
    return start, stop, peak


def _initial_width(t, y, peak):
    half = 0.5 * y[peak]
    left = np.nonzero(y[:peak] < half)[0]
    right = np.nonzero(y[peak:] < half)[0]
    lo = t[left[-1]] if left.size else t[0]
    hi = t[peak + right[0]] if right.size else t[-1]
    fwhm = hi - lo
    if not fwhm > 0:
        fwhm = t[-1] - t[0] if t[-1] > t[0] else 1.0
    return fwhm / 2.355


def fit_gaussian_pulse(trace, filtered=False):
    """Gaussian fit ``A exp(-(t - mu)^2 / (2 sigma^2))`` to the first pulse.

    ``filtered`` selects the detector-filtered flux instead of the raw one.
    Pathological traces come back with ``converged=False``.
    """
    times = np.asarray(trace.times, dtype=float)
    y = np.asarray(trace.filtered_flux if filtered else trace.flux, dtype=float)
    if y.size == 0 or not np.any(y != 0):
        raise EmptyTrace("flux trace is identically zero")
    if np.count_nonzero(y) < 10 or not np.all(np.isfinite(y)):
        return PulseMetrics(float(np.nanmax(y)), float(times[np.nanargmax(y)]), float("nan"),
                            float("nan"), False)

    start, stop, peak = first_pulse_window(y)
    t_us = times * 1e6
    scale = y[peak]
    tw, yw = t_us[start:stop], y[start:stop] / scale
    p0 = np.array([1.0, t_us[peak], _initial_width(t_us, y, peak)])
    if tw.size < 4:
        return PulseMetrics(float(scale), float(times[peak]), p0[2] * 1e-6, float("nan"),
                            False, window=(start, stop))

    res = optimize.least_squares(
        lambda p: gaussian(tw, *p) - yw, p0,
        jac=lambda p: _gaussian_jacobian(p, tw, yw),
        method="lm", xtol=XTOL, ftol=XTOL, gtol=XTOL, max_nfev=MAX_ITERATIONS * 4)
    a, mu, s = res.x
    s = abs(s)
    residual = float(np.sqrt(np.mean(res.fun ** 2)) / abs(a)) if a != 0 else float("inf")
    try:
        jac = res.jac
        dof = max(tw.size - 3, 1)
        cov = np.linalg.inv(jac.T @ jac) * (2 * res.cost / dof)
        units = np.array([scale, 1e-6, 1e-6])
        cov = cov * np.outer(units, units)
    except np.linalg.LinAlgError:
        cov = None
    # a centre outside the record means the trace never turned over (no pulse seen)
    converged = bool(res.success and a > 0 and s > 0 and np.all(np.isfinite(res.x))
                     and t_us[0] <= mu <= t_us[-1])
    return PulseMetrics(amplitude=float(a * scale), center=float(mu * 1e-6),
                        width=float(s * 1e-6), residual=residual, converged=converged,
                        covariance=cov, window=(start, stop))


def _as_points(points):
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        raise DegenerateFit("no points to fit")
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DegenerateFit("points must be a sequence of (x, y) pairs")
    if not np.all(np.isfinite(arr)):
        raise DegenerateFit("points must be finite")
    return arr[:, 0], arr[:, 1]


def _require_spread(x, minimum=3, span=None):
    if np.unique(x).size < 2:
        raise DegenerateFit("all abscissae are equal")
    if x.size < minimum:
        raise DegenerateFit(f"need at least {minimum} points, got {x.size}")
    if span is not None and x.min() > 0 and x.max() / x.min() < span:
        raise DegenerateFit(f"abscissae must span at least a factor {span}")


def _ols(x, y):
    """Slope, intercept, their covariance and R^2 of a straight-line fit."""
    fit = stats.linregress(x, y)
    a, b = float(fit.slope), float(fit.intercept)
    resid = y - (a * x + b)
    s2 = np.sum(resid ** 2) / max(x.size - 2, 1)
    design = np.column_stack((x, np.ones(x.size)))
    cov = s2 * np.linalg.inv(design.T @ design)
    return a, b, cov, _r_squared(y, a * x + b)


def fit_amplitude_vs_R(points):
    """Ordinary least squares ``A = a R + b``; threshold ``-b/a`` when ``b < 0``."""
    rate, amp = _as_points(points)
    _require_spread(rate, span=2.0)
    a, b, cov, r2 = _ols(rate, amp)
    threshold = -b / a if (b < 0 and a != 0) else None
    return ScalingFit("linear_R", {"slope": a, "intercept": b}, r2, cov, threshold)


def _width_model(p, r):
    return np.sqrt((p[0] / r) ** 2 + p[1] ** 2)


def fit_width_vs_R(points):
    """Nonlinear fit ``sigma = sqrt((p1/R)^2 + p2^2)`` with ``p1, p2 >= 0``.

    Returns ``p1`` (dimensionless, rate times time) and ``p2`` in the time
    unit of the input widths.
    """
    rate, width = _as_points(points)
    _require_spread(rate)
    if np.any(rate <= 0) or np.any(width <= 0):
        raise DegenerateFit("rates and widths must be positive")
    r_scale, w_scale = np.median(rate), np.median(width)
    r, w = rate / r_scale, width / w_scale

    def jac(p):
        model = np.maximum(_width_model(p, r), 1e-300)
        return np.column_stack((p[0] / (r * r * model), p[1] / model))

    p0 = np.array([np.median(w * r), 0.5 * w.min()])
    res = optimize.least_squares(lambda p: _width_model(p, r) - w, p0, jac=jac,
                                 bounds=([0.0, 0.0], [np.inf, np.inf]), method="trf",
                                 xtol=XTOL, ftol=XTOL, gtol=XTOL,
                                 max_nfev=MAX_ITERATIONS * 4)
    q1, q2 = res.x
    p1, p2 = q1 * r_scale * w_scale, q2 * w_scale
    units = np.array([r_scale * w_scale, w_scale])
    dof = max(rate.size - 2, 1)
    try:
        cov = np.linalg.pinv(res.jac.T @ res.jac) * (2 * res.cost / dof) * np.outer(units, units)
    except np.linalg.LinAlgError:
        cov = None
    model = _width_model((p1, p2), rate)
    return ScalingFit("width_R", {"p1": float(p1), "p2": float(p2)},
                      _r_squared(width, model), cov)


def fit_amplitude_vs_N(points):
    """Power law ``A = c N^k`` from a straight-line fit in log-log space."""
    number, amp = _as_points(points)
    if np.any(number <= 0) or np.any(amp <= 0):
        raise DegenerateFit("atom numbers and amplitudes must be positive")
    _require_spread(number, span=2.0)
    x, y = np.log(number), np.log(amp)
    k, log_c, cov, r2 = _ols(x, y)
    return ScalingFit("power_N", {"exponent": k, "prefactor": float(np.exp(log_c))}, r2, cov)
