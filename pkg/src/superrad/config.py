"""Run configuration: strict TOML parsing, overrides and provenance round trip.

A configuration has four sections::

    [physical]   PhysicalParams fields in SI units, or ``scattering_rate``
                 in place of ``pump_power``
    [numerics]   grid_points, n_orders, dtau, margin, model, kinetic and the
                 run tolerances
    [output]     directory, snapshot_times (s), filter
    [sweep]      parameter, values, scattering_rates, workers

Unknown sections or keys are rejected.  A JSON run summary written by the
CLI is also accepted as a configuration; its ``config`` block holds every
resolved value.
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .units import PhysicalParams, default_dtau, pump_power_for_rate

SWEEP_PARAMETERS = ("pump_power", "atom_number", "scattering_rate")
MODELS = ("full", "two_mode")


@dataclass(frozen=True)
class Numerics:
    grid_points: int = 512
    n_orders: int = 9
    dtau: float | None = None        # None: 0.1 us physical step
    margin: float = 0.1
    model: str = "full"
    kinetic: bool = True
    ladder_guard: float = 1e-3
    flux_tolerance: float = 1e-6
    drift_tolerance: float = 1e-8


@dataclass(frozen=True)
class Output:
    directory: str = "out"
    snapshot_times: tuple = ()
    filter: bool = True


@dataclass(frozen=True)
class Sweep:
    parameter: str = "scattering_rate"
    values: tuple = ()
    scattering_rates: tuple = ()     # atom_number sweeps: one series per rate
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    physical: PhysicalParams = field(default_factory=PhysicalParams)
    numerics: Numerics = field(default_factory=Numerics)
    output: Output = field(default_factory=Output)
    sweep: Sweep | None = None

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def resolved(self):
        """Copy with derived defaults filled in (currently ``dtau``)."""
        if self.numerics.dtau is not None:
            return self
        return self.replace(numerics=dataclasses.replace(
            self.numerics, dtau=default_dtau(self.physical)))

    def to_dict(self):
        cfg = self.resolved()
        out = {
            "physical": cfg.physical.to_dict(),
            "numerics": dataclasses.asdict(cfg.numerics),
            "output": {**dataclasses.asdict(cfg.output),
                       "snapshot_times": list(cfg.output.snapshot_times)},
        }
        if cfg.sweep is not None:
            sweep = dataclasses.asdict(cfg.sweep)
            sweep["values"] = list(cfg.sweep.values)
            sweep["scattering_rates"] = list(cfg.sweep.scattering_rates)
            out["sweep"] = sweep
        return out


_SECTIONS = {"physical": PhysicalParams, "numerics": Numerics, "output": Output,
             "sweep": Sweep}


def _field_types(cls):
    return {f.name: f for f in dataclasses.fields(cls)}


def _coerce(section, key, value, default):
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list")
        try:
            return tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where} must be a list of numbers") from None
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{where} must be an integer")
        return value
    # floats, including Optional[float] defaulting to None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where} must be finite")
    return value


def _build_section(name, table):
    cls = _SECTIONS[name]
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    fields = _field_types(cls)
    extra = {"scattering_rate"} if name == "physical" else set()
    unknown = set(table) - set(fields) - extra
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    defaults = cls()
    kwargs = {k: _coerce(name, k, v, getattr(defaults, k))
              for k, v in table.items() if k in fields}
    if name != "physical":
        return cls(**kwargs)

    # A quoted rate replaces the pump power.
    rate = table.get("scattering_rate")
    if rate is not None:
        if "pump_power" in table:
            raise ConfigError("give either physical.pump_power or physical.scattering_rate")
        rate = _coerce(name, "scattering_rate", rate, 0.0)
    params = cls(**kwargs)
    if rate is not None:
        try:
            params = params.replace(pump_power=pump_power_for_rate(params, rate))
        except ValueError as exc:
            raise ConfigError(f"physical.scattering_rate: {exc}") from None
    return params


def _validate(cfg):
    num = cfg.numerics
    if num.model not in MODELS:
        raise ConfigError(f"numerics.model must be one of {MODELS}")
    if num.grid_points < 64:
        raise ConfigError("numerics.grid_points must be >= 64")
    if num.n_orders < 3 or num.n_orders % 2 == 0:
        raise ConfigError("numerics.n_orders must be odd and >= 3")
    if num.dtau is not None and not num.dtau > 0:
        raise ConfigError("numerics.dtau must be positive")
    for key in ("ladder_guard", "flux_tolerance", "drift_tolerance"):
        if not getattr(num, key) > 0:
            raise ConfigError(f"numerics.{key} must be positive")
    if any(t < 0 for t in cfg.output.snapshot_times):
        raise ConfigError("output.snapshot_times must be non-negative")
    if cfg.sweep is not None:
        sw = cfg.sweep
        if sw.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"sweep.parameter must be one of {SWEEP_PARAMETERS}")
        if not sw.values:
            raise ConfigError("sweep.values is empty")
        if sw.workers < 1:
            raise ConfigError("sweep.workers must be >= 1")
        if sw.scattering_rates and sw.parameter != "atom_number":
            raise ConfigError("sweep.scattering_rates only applies to atom_number sweeps")
    return cfg


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    try:
        cfg = RunConfig(
            physical=_build_section("physical", data.get("physical", {})),
            numerics=_build_section("numerics", data.get("numerics", {})),
            output=_build_section("output", data.get("output", {})),
            sweep=_build_section("sweep", data["sweep"]) if "sweep" in data else None,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return _validate(cfg)


def parse_override(text):
    """``section.key=value`` with ``value`` read as a TOML literal (bare words as strings)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    path, raw = text.split("=", 1)
    parts = path.strip().split(".")
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"override key {path!r} must be section.key")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return parts[0], parts[1], value


def apply_overrides(data, overrides):
    data = {k: dict(v) if isinstance(v, dict) else v for k, v in data.items()}
    for text in overrides:
        section, key, value = parse_override(text)
        table = data.setdefault(section, {})
        if not isinstance(table, dict):
            raise ConfigError(f"cannot override inside non-table {section!r}")
        if section == "physical" and key in ("scattering_rate", "pump_power"):
            # the two are alternatives; the override wins
            table.pop("pump_power" if key == "scattering_rate" else "scattering_rate", None)
        table[key] = value
    return data


def read_config_data(path):
    """Raw tables from a TOML file or from the ``config`` block of a JSON summary."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        data = data.get("config", data) if isinstance(data, dict) else data
        if isinstance(data, dict):
            # resolved summaries carry explicit nulls for unset optionals
            data = {s: {k: v for k, v in t.items() if v is not None} if isinstance(t, dict) else t
                    for s, t in data.items()}
        return data
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path=None, overrides=()):
    data = read_config_data(path) if path is not None else {}
    return config_from_dict(apply_overrides(data, overrides))
