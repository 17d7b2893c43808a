"""Command-line interface: ``price``, ``bench`` and ``figures``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (emit_figures, run_benchmark, table_csv, table_json, timing_csv,
                    timing_json)
from .config import ConfigError, load_config

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON config file (defaults: benchmark set)")
    p.add_argument("--method", metavar="LIST", help="comma-separated: taylor1,taylor2,spline,fft,mc")
    p.add_argument("--theta", metavar="LIST", help="comma-separated angles in radians or pi6,pi3,pi2,pi")
    p.add_argument("--paths", type=int, metavar="N", help="Monte Carlo paths")
    p.add_argument("--seed", type=int, metavar="N", help="Monte Carlo seed")
    p.add_argument("--delta", type=float, metavar="D", help="Monte Carlo subordinator time step")
    p.add_argument("--fft-n", type=int, metavar="N", help="FFT grid size (power of two)")
    p.add_argument("--knots", type=int, metavar="N", help="spline knots")
    p.add_argument("--knot-spacing", choices=("graded", "uniform"), help="spline knot placement")
    p.add_argument("--interval", metavar="A,B", help="truncation window for v+")
    p.add_argument("--vstar", type=float, metavar="V", help="Taylor expansion point (annualized variance)")
    p.add_argument("--output", metavar="PATH", help="output file (bench/price) or directory (figures)")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    p.add_argument("--jobs", type=int, metavar="N", help="worker processes for Monte Carlo")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ouexchange",
        description="Exchange option prices under an OU stochastic covariance model with IG subordinators.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("price", "price one angle"),
                        ("bench", "full table over angles and methods, with timings"),
                        ("figures", "write plotting datasets")):
        _common(sub.add_parser(name, help=help_))
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    o: dict = {}

    def put(section, key, value):
        if value is not None:
            o.setdefault(section, {})[key] = value

    if args.method is not None:
        o["methods"] = [m.strip() for m in args.method.split(",") if m.strip()]
    if args.theta is not None:
        o["theta_list"] = [t.strip() for t in args.theta.split(",") if t.strip()]
    put("mc", "npaths", args.paths)
    put("mc", "seed", args.seed)
    put("mc", "delta", args.delta)
    put("mc", "jobs", args.jobs)
    put("numeric", "fft_n", args.fft_n)
    put("numeric", "spline_knots", args.knots)
    put("numeric", "spline_spacing", args.knot_spacing)
    put("numeric", "vstar_override", args.vstar)
    if args.interval is not None:
        put("numeric", "interval", [x.strip() for x in args.interval.split(",")])
    put("output", "format", args.format)
    if args.output is not None:
        key = "figures_dir" if args.command == "figures" else "path"
        put("output", key, args.output)
    return o


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _timing_path(path: str, fmt: str) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}_timing.{fmt}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.interval is not None and len(args.interval.split(",")) != 2:
            raise ConfigError("numeric.interval", f"expected A,B, got {args.interval!r}")
        cfg = load_config(args.config, _overrides(args))
        if args.command == "price" and len(cfg.theta_list) != 1:
            raise ConfigError("theta_list", "price takes exactly one angle (use bench for a table)")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "figures":
        files = emit_figures(cfg, cfg.output.figures_dir)
        print(f"wrote {len(files)} files to {cfg.output.figures_dir}", file=sys.stderr)
        return EXIT_OK

    table = run_benchmark(cfg)
    fmt = cfg.output.format
    _write(table_json(table) if fmt == "json" else table_csv(table), cfg.output.path)
    if args.command == "bench":
        timing = timing_json(table) if fmt == "json" else timing_csv(table)
        if cfg.output.path is None:
            sys.stderr.write(timing)
        else:
            _timing_path(cfg.output.path, fmt).write_text(timing)
        if cfg.output.emit_figures:
            emit_figures(cfg, cfg.output.figures_dir)
    for theta, err in table.failures:
        print(f"cell failed (theta={theta:.6g}, {err.method}): {err.message}", file=sys.stderr)
    return EXIT_PARTIAL if table.failures else EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
