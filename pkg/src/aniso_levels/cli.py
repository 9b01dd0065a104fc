"""Command line: ``verify``, ``scan`` and ``average``."""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from .errors import ConfigError, ConvergenceError, ZeroMeanError
from .pipeline import analyse, dumps, load_config, parse_config, run_average, violated
from .scan import parse_scan_config, run_scan

EXIT_OK, EXIT_VIOLATED, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 1, 2, 3


def _emit(text: str, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _overrides(data: dict, args) -> dict:
    grid = dict(data.get("grid") or {})
    if args.grid_n is not None:
        grid["n"] = args.grid_n
    if args.grid_L is not None:
        grid["L"] = args.grid_L
    if grid:
        data = {**data, "grid": grid}
    if getattr(args, "seed", None) is not None:
        data = {**data, "seed": args.seed}
    return data


def parse_radii(text: str) -> np.ndarray:
    """``"0,0.5,1"`` or ``"start:stop:count"``."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return np.linspace(float(a), float(b), int(n))
        return np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError as exc:
        raise ConfigError(f"bad --radii {text!r}: {exc}") from exc


def cmd_verify(args) -> int:
    cfg = parse_config(_overrides(load_config(args.config), args))
    try:
        report = analyse(cfg, dump_dir=args.dump_wavefunctions)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.partial is not None:
            _emit(dumps(exc.partial), args.out)
        return EXIT_CONVERGENCE
    _emit(dumps(report), args.out)
    return EXIT_VIOLATED if violated(report) else EXIT_OK


def cmd_scan(args) -> int:
    data = load_config(args.config) if args.config else {}
    if args.count is not None:
        data["count"] = args.count
    if args.construction is not None:
        data["construction"] = args.construction
    grid = dict(data.get("grid") or {})
    if args.grid_n is not None:
        grid["n"] = args.grid_n
    if args.grid_L is not None:
        grid["L"] = args.grid_L
    if grid:
        data["grid"] = grid
    scan_cfg = parse_scan_config(data)
    code, rows = run_scan(scan_cfg, args.seed if args.seed is not None else 0, args.out, args.jobs)
    bad = sum(1 for r in rows if r["ground"] == "violated" or r["excited"] == "violated")
    print(f"{len(rows)} specs, {bad} violated, reports in {args.out}", file=sys.stderr)
    return code


def cmd_average(args) -> int:
    cfg = parse_config(load_config(args.config))
    rows = run_average(cfg, parse_radii(args.radii))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["r", "vbar", "residual"])
    for r, v, e in rows:
        writer.writerow([repr(r), repr(v), repr(e)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aniso-levels",
                                     description="Ground and first excited levels of anisotropic potentials "
                                                 "compared with their angular average.")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the full analysis for one config")
    v.add_argument("--config", required=True)
    v.add_argument("--out", help="write the JSON report here instead of stdout")
    v.add_argument("--seed", type=int)
    v.add_argument("--grid-n", type=int)
    v.add_argument("--grid-L", type=float)
    v.add_argument("--dump-wavefunctions", metavar="DIR",
                   help="write psi0.bin/psi1.bin (little-endian float64, 'dims:' header)")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("scan", help="verify a randomised corpus of Gaussian-sum wells")
    s.add_argument("--config", help="scan config (ranges, construction, solver blocks)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int)
    s.add_argument("--construction", choices=["inversion_symmetric", "generic", "broken_symmetry"])
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--grid-n", type=int)
    s.add_argument("--grid-L", type=float)
    s.set_defaults(func=cmd_scan)

    a = sub.add_parser("average", help="tabulate the angular average and its zero-mean residual")
    a.add_argument("--config", required=True)
    a.add_argument("--radii", required=True, help="comma list or start:stop:count")
    a.add_argument("--out")
    a.set_defaults(func=cmd_average)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ZeroMeanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
