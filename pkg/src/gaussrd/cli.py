"""Command-line front end: ``gaussrd {moments,exponents,second-order,simulate,validate}``.

Output is CSV with a fixed header, ``.`` decimals and lowercase ``inf`` /
``nan`` sentinels. Rates are in nats per symbol unless ``--bits`` is given,
which converts on output only.
"""

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from .distortion import CodebookKind, DistortionSetup
from .ensemble import SimPlan, pe_conditional, pe_direct, pe_quadrature
from .errors import CapabilityError, GaussRDError, ValidationError
from .sources import source_from_config
from .validation import run_all

LN2 = math.log(2.0)


class ConfigError(Exception):
    """Raised for unreadable or malformed input; reported with exit status 2."""


def fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x) + 0.0  # folds -0.0 into 0.0
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def load_source(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read source file {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return source_from_config(cfg)
    except ValidationError as exc:
        where = f" (field '{exc.field}')" if exc.field else ""
        raise ConfigError(f"{path}: invalid source{where}: {exc}") from exc


def _setup(model, D):
    if D is None:
        raise ConfigError("--distortion is required for this command")
    return DistortionSetup(model.sigma2, D)


def _write_csv(header, rows, out):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return text


def _unit(bits):
    return (1.0 / LN2, "bits") if bits else (1.0, "nats")


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_moments(args):
    model = load_source(args.source)
    m = model.moments()
    nu = 1.0 / (2.0 * m.dispersion) if m.dispersion > 0 else math.inf
    _write_csv(["sigma2", "zeta", "var_x2", "dispersion", "md_constant"],
               [[m.sigma2, m.zeta, m.var_x2, m.dispersion, nu]], args.out)
    return 0


def _plot_script(csv_path, unit):
    return f"""set datafile separator ','
set key top left
set xlabel 'R ({unit} per symbol)'
set ylabel 'excess-distortion exponent ({unit})'
set multiplot layout 1,2
set title 'exponents'
plot '{csv_path}' using 1:3 skip 1 with lines title 'spherical', \\
     '' using 1:5 skip 1 with lines title 'iid gaussian'
set title 'critical power level'
set ylabel 'alpha'
plot '{csv_path}' using 1:2 skip 1 with lines title 'spherical', \\
     '' using 1:4 skip 1 with lines title 'iid gaussian'
unset multiplot
"""


def cmd_exponents(args):
    model = load_source(args.source)
    setup = _setup(model, args.distortion)
    scale, unit = _unit(args.bits)
    r0 = asy.rd_function(setup.sigma2, setup.D)
    r_min = r0 if args.r_min is None else args.r_min / scale
    r_max = r0 + 0.5 if args.r_max is None else args.r_max / scale
    if args.r_steps < 1 or r_max < r_min or r_min < 0:
        raise ConfigError("need 0 <= --r-min <= --r-max and --r-steps >= 1")
    grid = np.linspace(r_min, r_max, args.r_steps) if args.r_steps > 1 else np.array([r_min])
    rows = []
    for R in grid:
        sp = asy.exponent(model, setup, float(R), CodebookKind.SPHERICAL)
        iid = asy.exponent(model, setup, float(R), CodebookKind.IID)
        rows.append([R * scale, sp.alpha, sp.exponent * scale, iid.alpha, iid.exponent * scale])
    _write_csv(["R", "alpha_sp", "E_sp", "alpha_iid", "E_iid"], rows, args.out)
    if args.emit_plot:
        if not args.out:
            raise ConfigError("--emit-plot needs --out so the script can reference the CSV")
        out = Path(args.out)
        out.with_suffix(".gp").write_text(_plot_script(out.name, unit))
    return 0


def cmd_second_order(args):
    model = load_source(args.source)
    setup = _setup(model, args.distortion)
    m = model.moments()
    scale, unit = _unit(args.bits)
    rows = []
    for n in args.n_grid:
        pt = asy.second_order_logM(n, args.epsilon, m.sigma2, m.zeta, setup.D, args.coeff)
        rows.append([n, pt.log_m * scale, pt.rate * scale])
    header = ["n", "log_m" if not args.bits else "log2_m", f"rate_{unit}_per_symbol"]
    _write_csv(header, rows, args.out)
    return 0


def cmd_simulate(args):
    model = load_source(args.source)
    setup = _setup(model, args.distortion)
    if args.n is None:
        raise ConfigError("--n is required")
    scale, _unit_name = _unit(args.bits)
    kind = CodebookKind(args.kind)
    if args.method == "direct":
        if args.m_count is None:
            raise ConfigError("--method direct needs --m-count")
        est = pe_direct(model, setup, args.n, args.m_count, args.trials, seed=args.seed, kind=kind,
                        workers=args.workers)
    else:
        if (args.log_m is None) == (args.rate is None):
            raise ConfigError("give exactly one of --log-m and --rate")
        log_m = args.log_m / scale if args.log_m is not None else args.n * args.rate / scale
        plan = SimPlan(n=args.n, log_m=log_m, kind=kind, samples=args.samples, seed=args.seed,
                       worker_streams=args.workers)
        if args.method == "quadrature":
            try:
                est = pe_quadrature(model, setup, plan)
            except CapabilityError as exc:
                raise CapabilityError(f"{exc}; use --method conditional") from exc
        else:
            est = pe_conditional(model, setup, plan)
    _write_csv(["method", "kind", "n", "log_m" if not args.bits else "log2_m", "value", "log_value",
                "std_error", "samples", "seed"],
               [[est.method.value, est.kind.value, est.n, est.log_m * scale, est.value, est.log_value,
                 est.std_error, est.samples, est.seed]], args.out)
    return 0


def cmd_validate(args):
    results = run_all(quick=args.quick, gupper_scale=0.5 if args.corrupt_gupper else 1.0)
    lines = []
    for r in results:
        lines.append(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  [{r.grid}]  worst slack {fmt(r.worst_slack)}")
    failed = [r.name for r in results if not r.passed]
    lines.append(f"{len(results) - len(failed)}/{len(results)} invariants hold")
    report = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(report)
    sys.stdout.write(report)
    if failed:
        sys.stderr.write("failed invariant(s): " + "; ".join(failed) + "\n")
        return 1
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("blocklengths must be positive")
    return vals


def _u64(text):
    val = int(text)
    if not 0 <= val < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--source", help="JSON source configuration")
    common.add_argument("--distortion", "-D", type=float, help="distortion level D, 0 < D < sigma2")
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--bits", action="store_true", help="print rates in bits instead of nats")

    parser = argparse.ArgumentParser(prog="gaussrd",
                                     description="Refined asymptotics of rate-distortion with Gaussian codebooks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", parents=[common], help="moment summary of the source")
    p.set_defaults(func=cmd_moments, needs_source=True)

    p = sub.add_parser("exponents", parents=[common], help="excess-distortion exponents over a rate grid")
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--r-steps", type=int, default=26)
    p.add_argument("--emit-plot", action="store_true", help="also write a gnuplot script next to --out")
    p.set_defaults(func=cmd_exponents, needs_source=True)

    p = sub.add_parser("second-order", parents=[common], help="second-order codebook sizes")
    p.add_argument("--n-grid", type=_int_list, default=[100, 200, 400, 800, 1600])
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--coeff", type=float, default=0.0, help="coefficient of the ln n term")
    p.set_defaults(func=cmd_second_order, needs_source=True)

    p = sub.add_parser("simulate", parents=[common], help="estimate the ensemble excess-distortion probability")
    p.add_argument("--method", choices=["conditional", "quadrature", "direct"], default="conditional")
    p.add_argument("--n", type=int)
    rate = p.add_mutually_exclusive_group()
    rate.add_argument("--log-m", type=float)
    rate.add_argument("--rate", type=float)
    p.add_argument("--kind", choices=[k.value for k in CodebookKind], default="spherical")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--m-count", type=int)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate, needs_source=True)

    p = sub.add_parser("validate", parents=[common], help="run the invariant suites")
    p.add_argument("--quick", action="store_true", help="reduced grids")
    p.add_argument("--corrupt-gupper", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate, needs_source=False)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.needs_source and not args.source:
            raise ConfigError("--source is required")
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except GaussRDError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
