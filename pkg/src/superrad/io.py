"""CSV and JSON output of traces, snapshots, summaries and sweep metrics.

Floats are written with 17 significant digits so every value survives a
write/read cycle bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import SimulationTrace
from .errors import ConfigError

FLOAT_FORMAT = "%.17g"
TRACE_PREFIX = ("t_us", "flux_per_us", "filtered_flux_per_us")


def order_column(m):
    return f"N_{int(m)}"


def trace_header(orders):
    return list(TRACE_PREFIX) + [order_column(m) for m in orders]


def write_trace_csv(path, trace):
    data = np.column_stack([trace.times * 1e6, trace.flux * 1e-6,
                            trace.filtered_flux * 1e-6, trace.populations])
    np.savetxt(path, data, delimiter=",", header=",".join(trace_header(trace.orders)),
               comments="", fmt=FLOAT_FORMAT)


def read_trace_csv(path):
    """SI :class:`SimulationTrace` from a CSV in the documented schema.

    Raises :class:`ConfigError` on any schema mismatch, including truncated rows.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if tuple(header[:3]) != TRACE_PREFIX:
        raise ConfigError(f"{path}: header must start with {','.join(TRACE_PREFIX)}")
    orders = []
    for name in header[3:]:
        if not name.startswith("N_"):
            raise ConfigError(f"{path}: unexpected column {name!r}")
        try:
            orders.append(int(name[2:]))
        except ValueError:
            raise ConfigError(f"{path}: bad order column {name!r}") from None
    body = [r for r in rows[1:] if r]
    if not body:
        raise ConfigError(f"{path}: no data rows")
    if any(len(r) != len(header) for r in body):
        raise ConfigError(f"{path}: ragged or truncated rows")
    try:
        data = np.array(body, dtype=float)
    except ValueError:
        raise ConfigError(f"{path}: non-numeric entries") from None
    if not np.all(np.isfinite(data)):
        raise ConfigError(f"{path}: non-finite entries")
    t_us = data[:, 0]
    if t_us.size > 1 and np.any(np.diff(t_us) <= 0):
        raise ConfigError(f"{path}: times must be strictly increasing")
    return trace_from_columns(t_us, data[:, 1], data[:, 2], tuple(orders), data[:, 3:])


def trace_from_columns(t_us, flux_per_us, filtered_per_us, orders=(), populations=None):
    if populations is None:
        populations = np.zeros((len(t_us), len(orders)))
    return SimulationTrace(times=np.asarray(t_us) * 1e-6, flux=np.asarray(flux_per_us) * 1e6,
                           filtered_flux=np.asarray(filtered_per_us) * 1e6,
                           orders=tuple(orders), populations=np.asarray(populations))


def write_snapshot_csvs(directory, snapshot, orders, index):
    """Two files per snapshot: matter densities and light intensities."""
    directory = Path(directory)
    stem = f"snapshot_{index:02d}"
    matter = directory / f"{stem}_matter.csv"
    light = directory / f"{stem}_light.csv"
    np.savetxt(matter, np.column_stack([snapshot.z_um, snapshot.densities.T]), delimiter=",",
               header=",".join(["z_um"] + [f"psi2_{m}" for m in orders]), comments="",
               fmt=FLOAT_FORMAT)
    np.savetxt(light, np.column_stack([snapshot.z_um, snapshot.i_plus * 1e-6,
                                       snapshot.i_minus * 1e-6]),
               delimiter=",", header="z_um,I_plus,I_minus", comments="", fmt=FLOAT_FORMAT)
    return matter, light


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def write_json(path, payload):
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


METRIC_FIELDS = ("amplitude", "center", "width", "residual", "converged")


def write_metrics_csv(path, rows, columns):
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})
