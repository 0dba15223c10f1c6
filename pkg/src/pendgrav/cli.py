"""Command line interface: ``pendgrav {budget,gravity,simulate,analyze,optimize}``."""

from __future__ import annotations

import argparse
import math
import sys

from . import budget as nb
from .config import SystemConfig, apply_overrides, load_config
from .errors import PendgravError
from .gravity import (
    driven_response,
    exact_force_harmonics,
    linearized_fundamental,
    min_resolvable_source_mass,
    noise_asd_at,
    rms_displacement_closed_form,
    snr_and_integration_time,
)
from .oscillator import susceptibility
from .optimize import OBJECTIVES, Parameter, SearchSpace, default_constraints, optimize
from .spectral import WelchConfig, calibrate, fit_resonance, lockin, welch_psd
from .timeseries import read_record, record_bytes, record_csv, simulate_experiment


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return f"{x:.9e}"


def _kv(pairs, out):
    for key, value in pairs:
        out.write(f"{key}={_fmt(value)}\n")


def _table(rows, out):
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        out.write(f"{key:<{width}}  {_fmt(value)}\n")


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _band(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("band must be 'lo,hi' in Hz") from None
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError("band needs 0 < lo < hi")
    return lo, hi


def _param(text):
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError("param must be name:lower:upper[:log]")
    scale = "logarithmic" if len(parts) == 4 and parts[3] in ("log", "logarithmic") else "linear"
    try:
        return Parameter(parts[0], float(parts[1]), float(parts[2]), scale)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _config(args) -> SystemConfig:
    return load_config(args.config) if args.config else SystemConfig()


def cmd_budget(args, out):
    config = _config(args)
    derived = config.derive()
    grid = nb.default_grid(derived, args.fmin, args.fmax, args.points)
    result = nb.compute_budget(config, grid)
    csv = result.to_csv()
    f_m = derived.trapped_frequency
    summary = [
        ("trap_frequency_hz", f_m),
        ("total_asd_at_trap_m_rthz", float(result.total.asd[grid.frequencies == f_m][0])),
        ("thermal_asd_at_trap_m_rthz", float(result.components["thermal"].asd[grid.frequencies == f_m][0])),
        ("natural_quality_at_trap", derived.natural_quality_at_trap),
        ("effective_temperature_k", derived.effective_temperature),
        ("gas_damping_rate_hz", nb.gas_damping_rate(config.environment, config.pendulum) / (2 * math.pi)),
        ("gas_quality_limit", nb.gas_damping_limit(config.environment, config.pendulum, f_m)),
    ]
    if args.out:
        _write_text(args.out, csv)
        _kv(summary, out)
    else:
        out.write(csv)
    return 0


def gravity_rows(config: SystemConfig, integration_time: float):
    derived = config.derive()
    f_m = derived.trapped_frequency
    f_d = config.drive_frequency()
    q = derived.effective_quality
    drive = exact_force_harmonics(config.source, config.pendulum.probe_mass)
    closed = rms_displacement_closed_form(config.source, q, f_m)
    exact = driven_response(drive, derived, q, f_d)
    linear = linearized_fundamental(config.source, config.pendulum.probe_mass) * abs(
        susceptibility(derived, f_d, q)
    )
    asd = noise_asd_at(config, f_d)
    return [
        ("source_mass_kg", config.source.source_mass),
        ("mean_separation_m", config.source.mean_separation),
        ("drive_amplitude_m", config.source.drive_amplitude),
        ("trap_frequency_hz", f_m),
        ("drive_frequency_hz", f_d),
        ("effective_quality", q),
        ("closed_form_rms_displacement_m", closed),
        ("exact_fundamental_force_n", drive.force_fundamental),
        ("exact_response_m", exact),
        ("linearized_response_m", linear),
        ("noise_asd_at_drive_m_rthz", asd),
        ("integration_time_s", integration_time),
        ("snr_closed_form", snr_and_integration_time(closed, asd, integration_time).snr_amplitude),
        ("snr_exact", snr_and_integration_time(exact, asd, integration_time).snr_amplitude),
        ("min_source_mass_kg", min_resolvable_source_mass(config, integration_time)),
    ]


def cmd_gravity(args, out):
    _table(gravity_rows(_config(args), args.integration_s), out)
    return 0


def cmd_simulate(args, out):
    config = _config(args)
    series = simulate_experiment(
        config, args.duration_s, args.sample_rate_hz, args.seed,
        noise=not args.no_noise, signal=not args.no_signal,
    )
    with open(args.out, "wb") as fh:
        fh.write(record_bytes(series))
    if args.csv:
        _write_text(args.csv, record_csv(series))
    _kv([("samples", len(series)), ("sample_rate_hz", series.sample_rate),
         ("seed", series.seed)] + list(series.metadata.items()), out)
    return 0


def cmd_analyze(args, out):
    config = _config(args)
    series = calibrate(read_record(args.record))
    bw = 1.0 / args.segment_s
    welch = WelchConfig.for_bandwidth(series.sample_rate, bw)
    psd = welch_psd(series, welch)
    if args.out:
        lines = ["frequency_hz,asd_m_rthz"]
        lines += [f"{f:.9e},{a:.9e}" for f, a in zip(psd.frequencies, psd.asd)]
        _write_text(args.out, "\n".join(lines) + "\n")

    results = [("resolution_bandwidth_hz", psd.bandwidth)]
    f_ref = args.lockin_hz if args.lockin_hz else config.drive_frequency()
    lk = lockin(series, f_ref, args.integration_s)
    results += [
        ("lockin_frequency_hz", f_ref),
        ("lockin_integration_s", lk.integration_time),
        ("lockin_in_phase_m", lk.in_phase),
        ("lockin_quadrature_m", lk.quadrature),
        ("lockin_amplitude_m", lk.amplitude),
        ("lockin_phase_rad", lk.phase),
        ("lockin_sigma_m", lk.statistical_sigma),
        ("lockin_snr", lk.snr),
    ]
    fit_status = "skipped"
    if args.band or not args.no_fit:
        f_m = config.derive().trapped_frequency
        band = args.band or (max(bw, f_m - 10.0), f_m + 10.0)
        try:
            # the drive tone would sharpen the apparent line; mask its bins
            fit = fit_resonance(psd, band, args.model, exclude=(f_ref,))
        except PendgravError as exc:
            if args.band:
                raise
            fit_status = f"failed ({exc})"
        else:
            fit_status = "ok"
            results += [
                ("fit_center_frequency_hz", fit.center_frequency),
                ("fit_quality", fit.quality),
                ("fit_peak_asd_m_rthz", fit.peak_asd),
                ("fit_residual_norm", fit.residual_norm),
            ]
    out.write(f"fit: {fit_status}\n")
    for key, value in results:
        out.write(f"{key.replace('_', ' ')}: {_fmt(value)}\n")
    if args.machine:
        _kv(results, out)
    return 0


def cmd_optimize(args, out):
    config = _config(args)
    params = tuple(args.param or [_param("cavity.trap_frequency_hz:50:2000:log")])
    space = SearchSpace(params, tuple(default_constraints(config)))
    objective = OBJECTIVES[args.objective]
    result = optimize(lambda p: objective(config, p), space, args.budget, args.seed, args.starts)
    if args.out:
        _write_text(args.out, result.trace_csv())
    pairs = [(k, v) for k, v in result.best_point.items()]
    pairs += [("best_objective", result.best_objective), ("evaluations", result.evaluations)]
    if args.validate_seeds > 0:
        best = apply_overrides(config, result.best_point)
        f_d = best.drive_frequency()
        rate = args.sample_rate_hz or max(20000.0, 20.0 * f_d)
        snrs = []
        for k in range(args.validate_seeds):
            rec = calibrate(simulate_experiment(best, args.duration_s, rate, args.seed + k))
            snrs.append(lockin(rec, f_d, 1.0).snr)
        snrs.sort()
        pairs.append(("validation_median_lockin_snr", snrs[len(snrs) // 2]))
    _kv(pairs, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (section.key = value)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file")

    parser = argparse.ArgumentParser(prog="pendgrav", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("budget", parents=[common], help="noise budget CSV")
    p.add_argument("--fmin", type=float, default=10.0)
    p.add_argument("--fmax", type=float, default=1e5)
    p.add_argument("--points", type=int, default=2001)
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("gravity", parents=[common], help="gravity signal table")
    p.add_argument("--integration-s", type=float, default=1.0)
    p.set_defaults(func=cmd_gravity)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic record")
    p.add_argument("--duration-s", type=float, default=10.0)
    p.add_argument("--sample-rate-hz", type=float, default=1e6)
    p.add_argument("--csv", help="also write time_s,value CSV")
    p.add_argument("--no-noise", action="store_true", help="tone only")
    p.add_argument("--no-signal", action="store_true", help="noise only")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", parents=[common], help="ASD, lock-in and peak fit of a record")
    p.add_argument("record", help="GSIM1 record file")
    p.add_argument("--segment-s", type=float, default=1.0, help="Welch segment (1/bandwidth)")
    p.add_argument("--lockin-hz", type=float, help="reference frequency (default: drive)")
    p.add_argument("--integration-s", type=float, default=1.0)
    p.add_argument("--band", type=_band, help="fit band 'lo,hi' in Hz")
    p.add_argument("--model", choices=("viscous", "structural"), default="viscous")
    p.add_argument("--no-fit", action="store_true")
    p.add_argument("--machine", action="store_true", help="also print key=value lines")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("optimize", parents=[common], help="search experiment parameters")
    p.add_argument("--objective", choices=sorted(OBJECTIVES), default="snr")
    p.add_argument("--param", type=_param, action="append",
                   help="free parameter name:lower:upper[:log] (repeatable)")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--starts", type=int, default=4)
    p.add_argument("--validate-seeds", type=int, default=3)
    p.add_argument("--duration-s", type=float, default=10.0)
    p.add_argument("--sample-rate-hz", type=float)
    p.set_defaults(func=cmd_optimize)
    return parser


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (PendgravError, OSError, ValueError) as exc:
        print(f"pendgrav {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
