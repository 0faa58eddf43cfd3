"""Command-line entry point: ``superrad run | sweep | analyze``.

Exit codes: 0 success, 2 configuration or schema error, 3 solver error,
4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import analysis, io
from .config import RunConfig, config_from_dict, load_config
from .dynamics import run_simulation
from .errors import ConfigError, EmptyTrace, SolverError, SuperradError
from .two_mode import run_two_mode
from .units import build_scaled_model, pump_power_for_rate

log = logging.getLogger("superrad")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


class ToleranceExceeded(SolverError):
    """A conservation diagnostic exceeded its configured tolerance."""


def exit_code_for(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, SolverError):
        return EXIT_SOLVER
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_SOLVER


def simulate(cfg: RunConfig):
    """Run one configuration; returns ``(trace, model)``."""
    cfg = cfg.resolved()
    num, params = cfg.numerics, cfg.physical
    if num.model == "two_mode":
        model = build_scaled_model(params, num.grid_points, dtau=num.dtau, margin=num.margin,
                                   orders=(0, 2), kinetic=False)
        if cfg.output.snapshot_times:
            log.warning("snapshots are not recorded by the two-mode model")
        trace = run_two_mode(model, params)
    else:
        model = build_scaled_model(params, num.grid_points, num.n_orders, num.dtau,
                                   margin=num.margin, kinetic=num.kinetic)
        trace = run_simulation(model, params, cfg.output.snapshot_times,
                               ladder_guard=num.ladder_guard)
        diag = trace.diagnostics
        if diag["max_flux_residual"] > num.flux_tolerance:
            raise ToleranceExceeded(
                f"flux residual {diag['max_flux_residual']:.3g} > {num.flux_tolerance:g}")
        if diag["atom_number_drift"] > num.drift_tolerance:
            raise ToleranceExceeded(
                f"atom-number drift {diag['atom_number_drift']:.3g} > {num.drift_tolerance:g}")
    if not cfg.output.filter:
        trace = trace.replace(filtered_flux=trace.flux.copy())
    return trace, model


def pulse_metrics(trace):
    """Raw and filtered first-pulse fits; ``None`` entries for an all-zero trace."""
    out = {}
    for key, filtered in (("flux", False), ("filtered_flux", True)):
        try:
            out[key] = analysis.fit_gaussian_pulse(trace, filtered=filtered).to_dict()
        except EmptyTrace:
            out[key] = None
    return out


def _prepare_directory(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    probe = path / ".write_test"
    probe.write_text("")
    probe.unlink()
    return path


def run_to_directory(cfg: RunConfig, directory):
    """Simulate and write trace, snapshots and the JSON summary; returns the summary."""
    cfg = cfg.resolved()
    directory = _prepare_directory(directory)
    trace, model = simulate(cfg)

    trace_path = directory / "trace.csv"
    io.write_trace_csv(trace_path, trace)
    snapshots = []
    for i, snap in enumerate(trace.snapshots):
        matter, light = io.write_snapshot_csvs(directory, snap, trace.orders, i)
        snapshots.append({"time_us": snap.time * 1e6, "matter": matter.name, "light": light.name})
    # Metrics from the file as written, so `analyze` on it reproduces them exactly.
    metrics = pulse_metrics(io.read_trace_csv(trace_path))

    summary = {
        "model": cfg.numerics.model,
        "config": cfg.to_dict(),
        "scaled_model": model.summary(),
        "single_particle_rate": cfg.physical.single_particle_rate,
        "diagnostics": trace.diagnostics,
        "metrics": metrics,
        "snapshots": snapshots,
        "final_populations": dict(zip((str(m) for m in trace.orders),
                                      trace.populations[-1].tolist())),
        "trace": trace_path.name,
    }
    io.write_json(directory / "summary.json", summary)
    return summary


def _report(exc):
    print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
    return exit_code_for(exc)


def _apply_flags(cfg, out=None, snapshots=None, no_filter=False, workers=None):
    output = cfg.output
    if out is not None:
        output = dataclasses.replace(output, directory=str(out))
    if snapshots is not None:
        output = dataclasses.replace(output, snapshot_times=tuple(t * 1e-6 for t in snapshots))
    if no_filter:
        output = dataclasses.replace(output, filter=False)
    cfg = cfg.replace(output=output)
    if workers is not None:
        if cfg.sweep is None:
            raise ConfigError("--workers requires a [sweep] section")
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = cfg.replace(sweep=dataclasses.replace(cfg.sweep, workers=workers))
    return cfg


def cmd_run(config_path=None, overrides=(), *, out=None, snapshots=None, no_filter=False):
    try:
        cfg = _apply_flags(load_config(config_path, overrides), out, snapshots, no_filter)
        summary = run_to_directory(cfg, cfg.output.directory)
    except (SuperradError, OSError) as exc:
        return _report(exc)
    m = summary["metrics"]["flux"]
    if m is not None:
        log.info("first pulse: A=%.4g /us, mu=%.3f us, sigma=%.3f us",
                 m["amplitude"] * 1e-6, m["center"] * 1e6, m["width"] * 1e6)
    return EXIT_OK


def sweep_points(cfg: RunConfig):
    """``(series_rate, RunConfig)`` per sweep point, in output order."""
    sw = cfg.sweep
    base = cfg.physical
    series = sw.scattering_rates if sw.scattering_rates else (None,)
    points = []
    for rate in series:
        for value in sw.values:
            if sw.parameter == "scattering_rate":
                params = base.replace(pump_power=pump_power_for_rate(base, value))
            elif sw.parameter == "pump_power":
                params = base.replace(pump_power=value)
            else:
                params = base.replace(atom_number=value)
                if rate is not None:
                    params = params.replace(pump_power=pump_power_for_rate(params, rate))
            points.append((rate, cfg.replace(physical=params, sweep=None)))
    return points


def _sweep_worker(job):
    index, rate, cfg_dict, directory = job
    value_cfg = config_from_dict(cfg_dict)
    row = {"point": index, "series_rate": rate,
           "scattering_rate": value_cfg.physical.single_particle_rate,
           "atom_number": value_cfg.physical.atom_number,
           "pump_power": value_cfg.physical.pump_power}
    try:
        summary = run_to_directory(value_cfg, directory)
    except (SuperradError, OSError, ValueError) as exc:
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}",
                   exit_code=exit_code_for(exc))
        return row
    row.update(status="ok", error="", exit_code=EXIT_OK)
    for key, prefix in (("flux", ""), ("filtered_flux", "filtered_")):
        metrics = summary["metrics"][key] or {}
        for name in io.METRIC_FIELDS:
            row[prefix + name] = metrics.get(name)
    return row


METRICS_COLUMNS = (["point", "series_rate", "parameter", "value", "scattering_rate",
                    "atom_number", "pump_power", "status", "exit_code"]
                   + list(io.METRIC_FIELDS) + ["filtered_" + f for f in io.METRIC_FIELDS]
                   + ["error"])


def _fit_or_error(fit, points):
    try:
        return fit(points).to_dict()
    except SuperradError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def scaling_fits(rows, parameter, filtered=True):
    """Scaling fits over the successful, converged sweep points."""
    fits = {}
    good = [r for r in rows if r["status"] == "ok" and r.get("converged")]
    if parameter in ("scattering_rate", "pump_power"):
        fits["amplitude_vs_R"] = _fit_or_error(
            analysis.fit_amplitude_vs_R, [(r["scattering_rate"], r["amplitude"]) for r in good])
        fits["width_vs_R"] = _fit_or_error(
            analysis.fit_width_vs_R, [(r["scattering_rate"], r["width"]) for r in good])
        if filtered:
            ok = [r for r in good if r.get("filtered_converged")]
            fits["filtered_width_vs_R"] = _fit_or_error(
                analysis.fit_width_vs_R, [(r["scattering_rate"], r["filtered_width"]) for r in ok])
    else:
        series = sorted({r["series_rate"] for r in rows}, key=lambda x: (x is None, x))
        for rate in series:
            pts = [(r["atom_number"], r["amplitude"]) for r in good if r["series_rate"] == rate]
            label = "amplitude_vs_N" if rate is None else f"amplitude_vs_N@R={rate:g}"
            fits[label] = _fit_or_error(analysis.fit_amplitude_vs_N, pts)
    return fits


def cmd_sweep(config_path=None, overrides=(), *, out=None, no_filter=False, workers=None):
    try:
        cfg = _apply_flags(load_config(config_path, overrides), out, None, no_filter, workers)
        if cfg.sweep is None:
            raise ConfigError("configuration has no [sweep] section")
        root = _prepare_directory(cfg.output.directory)
        points = sweep_points(cfg)
    except (SuperradError, OSError, ValueError) as exc:
        return _report(exc if isinstance(exc, (SuperradError, OSError)) else ConfigError(str(exc)))

    sw = cfg.sweep
    jobs = [(i, rate, pcfg.to_dict(), str(root / f"point_{i:03d}"))
            for i, (rate, pcfg) in enumerate(points)]
    if sw.workers == 1:
        rows = [_sweep_worker(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=sw.workers) as pool:
            rows = list(pool.map(_sweep_worker, jobs))
    values = [v for _ in (sw.scattering_rates or (None,)) for v in sw.values]
    for row, value in zip(rows, values):
        row["parameter"], row["value"] = sw.parameter, value
        if row["status"] != "ok":
            print(f"point {row['point']} ({sw.parameter}={value:g}) failed: {row['error']}",
                  file=sys.stderr)

    fits = scaling_fits(rows, sw.parameter, filtered=cfg.output.filter)
    try:
        io.write_metrics_csv(root / "metrics.csv", rows, METRICS_COLUMNS)
        io.write_json(root / "fits.json", {"config": cfg.to_dict(), "fits": fits,
                                            "points": rows})
    except OSError as exc:
        return _report(exc)
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_SOLVER


def cmd_analyze(trace_path):
    try:
        trace = io.read_trace_csv(trace_path)
    except OSError as exc:
        return _report(exc)
    except ConfigError as exc:
        return _report(exc)
    try:
        metrics = {"flux": analysis.fit_gaussian_pulse(trace).to_dict(),
                   "filtered_flux": analysis.fit_gaussian_pulse(trace, filtered=True).to_dict()}
    except EmptyTrace as exc:
        return _report(exc)
    print(json.dumps(io._jsonable(metrics), indent=2))
    return EXIT_OK


def _snapshot_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("snapshot times must be comma-separated numbers (us)")


def build_parser():
    parser = argparse.ArgumentParser(prog="superrad",
                                     description="Superradiant Rayleigh scattering simulator")
    verbose = argparse.ArgumentParser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="TOML configuration or JSON run summary")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override a configuration value")
        p.add_argument("--no-filter", action="store_true", help="disable the detector low-pass")

    run = sub.add_parser("run", parents=[verbose], help="single simulation")
    common(run)
    run.add_argument("--snapshots", type=_snapshot_list, metavar="T1,T2,...",
                     help="snapshot times in microseconds")
    sweep = sub.add_parser("sweep", parents=[verbose], help="parameter sweep with scaling fits")
    common(sweep)
    sweep.add_argument("--workers", type=int, help="concurrent sweep points")
    analyze = sub.add_parser("analyze", parents=[verbose], help="fit the first pulse of a trace CSV")
    analyze.add_argument("trace", type=Path)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config, args.overrides, out=args.out, snapshots=args.snapshots,
                       no_filter=args.no_filter)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.overrides, out=args.out, no_filter=args.no_filter,
                         workers=args.workers)
    return cmd_analyze(args.trace)


if __name__ == "__main__":
    sys.exit(main())
