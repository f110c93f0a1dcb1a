"""Command-line entry point ``lfd``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical abort.
"""

import argparse
import csv
import logging
import sys

import numpy as np

from .config import load_config
from .errors import ConfigError, DomainError, GridFormatError, LFDError, NumericalAbort, SingularMatrixError, StateError
from .laguerre import CoefficientSeries, LaguerreSpec, analyze, choose_laguerre_params, synthesize
from .migration import ProgressLog, run_impulse, run_migration
from .model_io import (
    KIND_COEFFICIENTS,
    GridImage,
    SeismicSection,
    image_grid,
    read_grid,
    write_grid,
)
from .stencil import drp_paper_coefficients, relative_symbol_error, symbol, taylor_coefficients
from .wavelet import WaveletSpec

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
STENCIL_CSV_HEADER = ("provenance", "kh", "symbol", "exact", "relative_error")

log = logging.getLogger("lfd")


def _add_log(p):
    p.add_argument("--log", metavar="CSV", help="write per-harmonic progress records to this CSV file")


def build_parser():
    parser = argparse.ArgumentParser(prog="lfd", description="Laguerre finite-difference one-way wave-equation solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("migrate", help="post-stack exploding-reflector depth migration")
    p.add_argument("--model", required=True, help="LFDG velocity grid (true velocities, m/s)")
    p.add_argument("--section", required=True, help="LFDG zero-offset section")
    p.add_argument("--config", required=True, help="key = value run configuration")
    p.add_argument("--out", required=True, help="output LFDG depth image")
    _add_log(p)

    p = sub.add_parser("impulse", help="impulse response of a single surface trace")
    p.add_argument("--config", required=True, help="key = value run configuration")
    p.add_argument("--out", required=True, help="output LFDG snapshot image")
    _add_log(p)

    p = sub.add_parser("snapshot", help="impulse-response field at a chosen time")
    p.add_argument("--config", required=True, help="key = value run configuration")
    p.add_argument("--time", required=True, type=float, help="snapshot time in seconds")
    p.add_argument("--out", required=True, help="output LFDG snapshot image")
    _add_log(p)

    p = sub.add_parser("laguerre", help="forward or inverse Laguerre transform of a grid")
    p.add_argument("direction", choices=("analyze", "synthesize"), help="transform direction")
    p.add_argument("--in", dest="inp", required=True, help="input LFDG (section for analyze, coefficients for synthesize)")
    p.add_argument("--out", required=True, help="output LFDG")
    p.add_argument("--eta", required=True, type=float, help="scale parameter eta (1/s)")
    p.add_argument("--alpha", required=True, type=int, help="Laguerre order alpha")
    p.add_argument("--nterms", required=True, type=int, help="number of series terms")
    p.add_argument("--dt", type=float, help="synthesize: output sample interval (s)")
    p.add_argument("--duration", type=float, help="synthesize: output record length (s)")

    p = sub.add_parser("stencil-check", help="dispersion curves of the second-derivative stencils")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--points", type=int, default=315, help="number of kh samples on [0, pi] (default 315)")

    p = sub.add_parser("params", help="search Laguerre parameters for a record length")
    p.add_argument("--horizon", required=True, type=float, help="record length T (s)")
    p.add_argument("--f0", required=True, type=float, help="pulse peak frequency (Hz)")
    p.add_argument("--epsilon", required=True, type=float, help="target relative L2 error")
    p.add_argument("--t0", type=float, default=0.2, help="pulse centre (s), default 0.2")
    p.add_argument("--g", type=float, default=4.0, help="pulse width parameter, default 4")
    return parser


def _write_image(values, model, path):
    write_grid(image_grid(np.asarray(values, dtype=np.float32), model.hx, model.hz, model.origin_x,
                          model.origin_z), path)


def cmd_migrate(args):
    cfg = load_config(args.config)
    with ProgressLog(args.log) as progress:
        model = read_grid(args.model)
        image = run_migration(model, args.section, cfg, progress)
    _write_image(image, model, args.out)
    print(f"wrote depth image {image.shape[0]} x {image.shape[1]} to {args.out}")


def cmd_impulse(args, times=None):
    cfg = load_config(args.config)
    with ProgressLog(args.log) as progress:
        result = run_impulse(cfg, times=times, progress=progress)
    _write_image(result.image, result.model, args.out)
    print(f"wrote snapshot (eta={result.spec.eta:.6g}, n={result.spec.n_terms}) to {args.out}")


def cmd_snapshot(args):
    cmd_impulse(args, times=[args.time])


def cmd_laguerre(args):
    src = read_grid(args.inp)
    if args.direction == "analyze":
        if not isinstance(src, SeismicSection):
            raise ConfigError("analyze expects a section grid")
        spec = LaguerreSpec(args.alpha, args.eta, args.nterms, src.record_length)
        coeffs = analyze(src.data, src.dt, spec)
        write_grid(GridImage(KIND_COEFFICIENTS, coeffs.values.astype(np.float32), src.dx, args.eta,
                             src.origin_x, float(args.alpha)), args.out)
        print(f"wrote {args.nterms} x {src.nx} coefficients to {args.out}")
        return
    if not (isinstance(src, GridImage) and src.kind == KIND_COEFFICIENTS):
        raise ConfigError("synthesize expects a coefficient grid")
    if args.dt is None or args.duration is None:
        raise ConfigError("synthesize needs --dt and --duration")
    if src.values.shape[0] != args.nterms:
        raise ConfigError(f"file holds {src.values.shape[0]} terms, --nterms says {args.nterms}")
    spec = LaguerreSpec(args.alpha, args.eta, args.nterms, args.duration)
    nt = int(np.floor(args.duration / args.dt + 1e-9)) + 1
    data = synthesize(CoefficientSeries(spec, src.values.astype(float)), np.arange(nt) * args.dt)
    write_grid(SeismicSection(data, args.dt, src.d_fast, src.origin_fast), args.out)
    print(f"wrote {nt} x {data.shape[1]} section to {args.out}")


def stencil_rows(points=315):
    kh = np.linspace(0.0, np.pi, points)
    tables = [("drp_paper", drp_paper_coefficients())]
    tables += [(f"taylor{n}", taylor_coefficients(n)) for n in range(1, 7)]
    for name, coeffs in tables:
        sym = symbol(coeffs, kh)
        err = relative_symbol_error(coeffs, kh)
        for k, s, e in zip(kh, sym, err):
            yield name, k, s, -k * k, e


def cmd_stencil_check(args):
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STENCIL_CSV_HEADER)
        for name, k, s, ex, e in stencil_rows(args.points):
            w.writerow([name, f"{k:.6f}", f"{s:.12g}", f"{ex:.12g}", f"{e:.6e}"])
    print(f"wrote dispersion table to {args.out}")


def cmd_params(args):
    spec = choose_laguerre_params(args.horizon, WaveletSpec(args.f0, args.t0, args.g), epsilon=args.epsilon)
    print(f"alpha = {spec.alpha}")
    print(f"eta = {spec.eta:.10g}")
    print(f"nterms = {spec.n_terms}")
    print(f"horizon = {spec.horizon:g}")


COMMANDS = {
    "migrate": cmd_migrate,
    "impulse": cmd_impulse,
    "snapshot": cmd_snapshot,
    "laguerre": cmd_laguerre,
    "stencil-check": cmd_stencil_check,
    "params": cmd_params,
}


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stdout)
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (NumericalAbort, SingularMatrixError, StateError) as exc:
        print(f"lfd: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DomainError, GridFormatError, OSError) as exc:
        print(f"lfd: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LFDError as exc:
        print(f"lfd: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
