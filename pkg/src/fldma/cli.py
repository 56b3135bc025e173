"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 numerical precondition
violation, 3 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__, csvio
from .array import PolarLocation, beampattern, correlation_mean, correlation_var, generate_offsets
from .errors import ConfigError, PreconditionError
from .experiments import SCHEMES, SWEEPABLE, SweepSpec, default_workers, lemma1_oracle, monte_carlo, preset, scenario_bound
from .scenario import Scenario, config_echo, flatten_config, parse_overrides, tomllib
from .waveform import ici_coefficients, slight_offset_error

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_IO = 0, 1, 2, 3

SWEEP_HEADER = ["sweep_value", "scheme", "mean_se", "stderr", "ci95", "bound", "rho_max", "trials", "ill_conditioned", "label"]


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _scheme_list(text: str) -> tuple:
    names = tuple(s.strip().upper() for s in text.split(",") if s.strip())
    for n in names:
        if n not in SCHEMES:
            raise argparse.ArgumentTypeError(f"unknown scheme {n!r}; choose from {', '.join(SCHEMES)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML scenario file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a scenario key (repeatable)")
    common.add_argument("--output", "-o", help="write to this file instead of stdout")
    common.add_argument("--format", choices=("csv", "pretty"), default="csv")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: $FLDMA_WORKERS or 1)")

    parser = argparse.ArgumentParser(prog="fldma", description="Far-field FDA location-division multiple access simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("beampattern", parents=[common], help="range-angle beampattern around a focus")
    p.add_argument("--focus-distance", type=float, default=None, help="metres (default R_max/2)")
    p.add_argument("--focus-angle", type=float, default=0.0, help="degrees")
    p.add_argument("--r-min", type=float, default=0.0)
    p.add_argument("--r-max", type=float, default=None, help="metres (default scenario R_max)")
    p.add_argument("--r-points", type=int, default=121)
    p.add_argument("--theta-min", type=float, default=None, help="degrees (default -theta_max)")
    p.add_argument("--theta-max", type=float, default=None, help="degrees (default theta_max)")
    p.add_argument("--theta-points", type=int, default=121)

    p = sub.add_parser("correlation-stats", parents=[common], help="beam-correlation mean/variance vs brute force")
    p.add_argument("--p-values", type=_float_list, default=_float_list("-0.05,-0.025,0,0.025,0.05"))
    p.add_argument("--q-values", type=_float_list, default=_float_list("-0.05,-0.025,0,0.025,0.05"))
    p.add_argument("--shuffles", type=int, default=1000)

    p = sub.add_parser("ici-check", parents=[common], help="ICI size for small offset ratios")
    p.add_argument("--rho-values", type=_float_list, default=_float_list("0.02,0.05,0.1"))

    for name, helptext in (("simulate", "Monte-Carlo run of one scenario"), ("sweep", "Monte-Carlo sweep over one parameter")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--schemes", type=_scheme_list, default=SCHEMES)
        if name == "sweep":
            p.add_argument("--parameter", choices=SWEEPABLE, required=True)
            p.add_argument("--values", type=_float_list, required=True)

    p = sub.add_parser("bounds", parents=[common], help="analytic FLDMA rate bounds over one parameter")
    p.add_argument("--parameter", choices=SWEEPABLE, default="snr_db")
    p.add_argument("--values", type=_float_list, default=_float_list("0,10,20,30"))

    p = sub.add_parser("preset", parents=[common], help="run a named figure preset")
    p.add_argument("name")
    return parser


def _scenario(args) -> Scenario:
    return Scenario.load(args.config, args.overrides)


def _explicit_keys(args) -> dict:
    """Only the keys the user set, for patching preset scenarios."""
    flat = {}
    if args.config:
        with open(args.config, "rb") as fh:
            try:
                flat.update(flatten_config(tomllib.load(fh)))
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{args.config}: {exc}") from None
    flat.update(parse_overrides(args.overrides))
    return flat


def _sweep_rows(result):
    spec = result.spec
    for p in result.points:
        yield [p.value, p.scheme, p.mean, p.stderr, p.ci95, p.bound, p.rho_max, p.trials, p.ill_conditioned, spec.label]


def cmd_beampattern(args):
    sc = _scenario(args)
    plan = sc.plan()
    focus = PolarLocation(sc.r_max / 2 if args.focus_distance is None else args.focus_distance, math.radians(args.focus_angle))
    r_hi = sc.r_max if args.r_max is None else args.r_max
    t_lo = -sc.theta_max_deg if args.theta_min is None else args.theta_min
    t_hi = sc.theta_max_deg if args.theta_max is None else args.theta_max
    rs = np.linspace(args.r_min, r_hi, args.r_points)
    ts = np.linspace(t_lo, t_hi, args.theta_points)
    mag = beampattern(plan, focus, rs, np.radians(ts))
    rows = [[r, t, mag[i, j]] for i, r in enumerate(rs) for j, t in enumerate(ts)]
    return "beampattern", ["distance_m", "angle_deg", "magnitude"], rows, config_echo(sc)


def cmd_correlation_stats(args):
    sc = _scenario(args)
    m = sc.num_antennas
    rows = []
    for i, p in enumerate(args.p_values):
        for j, q in enumerate(args.q_values):
            mean = correlation_mean(p, q, m)
            var = correlation_var(p, q, m)
            oracle = lemma1_oracle(p, q, m, args.shuffles, [sc.seed, i, j])
            rows.append([p, q, mean.real, mean.imag, var, oracle.mean.real, oracle.mean.imag, oracle.variance, oracle.mean_stderr])
    header = ["p", "q", "mean_re", "mean_im", "var", "oracle_mean_re", "oracle_mean_im", "oracle_var", "stderr"]
    return "correlation-stats", header, rows, config_echo(sc) + [f"shuffles = {args.shuffles}"]


def cmd_ici_check(args):
    sc = _scenario(args)
    grid = sc.grid
    rows = []
    for rho in args.rho_values:
        plan = generate_offsets(sc.scheme, sc.num_antennas, rho_max=rho, seed=sc.seed, subcarrier_spacing=sc.subcarrier_spacing)
        coeffs = ici_coefficients(plan, grid)
        off = np.delete(coeffs.beta_by_shift, grid.num_subcarriers - 1, axis=0)
        max_beta = float(np.max(np.abs(off))) if off.size else 0.0
        rows.append([rho, slight_offset_error(plan, grid), float(np.max(np.abs(coeffs.alpha - 1.0))), max_beta])
    return "ici-check", ["rho_max", "frobenius_error", "max_alpha_dev", "max_beta"], rows, config_echo(sc)


def _workers(args) -> int:
    return default_workers() if args.workers is None else max(1, args.workers)


def cmd_simulate(args):
    sc = _scenario(args)
    spec = SweepSpec(sc, "snr_db", [sc.snr_db], args.schemes, "simulate")
    result = monte_carlo(spec, _workers(args))
    return "simulate", SWEEP_HEADER, list(_sweep_rows(result)), config_echo(sc)


def cmd_sweep(args):
    sc = _scenario(args)
    spec = SweepSpec(sc, args.parameter, args.values, args.schemes, args.parameter)
    result = monte_carlo(spec, _workers(args))
    echo = config_echo(sc) + [f"sweep.parameter = {args.parameter}"]
    return "sweep", SWEEP_HEADER, list(_sweep_rows(result)), echo


def cmd_bounds(args):
    sc = _scenario(args)
    rows = []
    for v in args.values:
        point = sc.replace(**{args.parameter: v})
        bound = scenario_bound(point, "FLDMA_MMSE")
        rows.append([v, "FLDMA_BOUND", math.nan, math.nan, math.nan, bound, point.overhead_rho, 0, 0, "two_ue" if point.num_ues == 2 else "multi_ue"])
    echo = config_echo(sc) + [f"sweep.parameter = {args.parameter}"]
    return "bounds", SWEEP_HEADER, rows, echo


def cmd_preset(args):
    specs = preset(args.name, **_explicit_keys(args))
    workers = _workers(args)
    rows, echo = [], [f"preset = {args.name}"]
    for spec in specs:
        result = monte_carlo(spec, workers)
        rows.extend(_sweep_rows(result))
        echo.append(f"[{spec.label}] sweep.parameter = {spec.parameter}")
        echo.extend(f"[{spec.label}] {line}" for line in config_echo(spec.base))
    return f"preset {args.name}", SWEEP_HEADER, rows, echo


COMMANDS = {
    "beampattern": cmd_beampattern,
    "correlation-stats": cmd_correlation_stats,
    "ici-check": cmd_ici_check,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "bounds": cmd_bounds,
    "preset": cmd_preset,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which would collide with EXIT_PRECONDITION
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        kind, header, rows, echo = COMMANDS[args.command](args)
    except PreconditionError as exc:
        print(f"fldma: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"fldma: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fldma: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    text = csvio.render(kind, header, rows, echo) if args.format == "csv" else csvio.render_pretty(header, rows)
    try:
        if args.output:
            with open(args.output, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"fldma: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
