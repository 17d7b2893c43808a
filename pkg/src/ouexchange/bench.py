"""Price tables across loading angles and methods, timing, and figure datasets."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, angle_label
from .margrabe import d_margrabe, margrabe_price
from .mc import SimConfig, TRAJECTORY_KINDS, FactorDraws, export_paths, price_from_draws, simulate_factor_draws
from .moments import pdf_fft
from .pricers import PriceReport, build_spline, price_fft, price_spline, price_taylor, spline_knots

TIMING_REPEATS = 5


@dataclass(frozen=True)
class CellError:
    method: str
    message: str


@dataclass
class BenchmarkRow:
    theta: float
    cells: dict = field(default_factory=dict)  # method -> PriceReport | CellError


@dataclass
class BenchmarkTable:
    methods: tuple[str, ...]
    rows: list[BenchmarkRow]
    config_echo: dict

    @property
    def failures(self) -> list[tuple[float, CellError]]:
        return [(r.theta, c) for r in self.rows for c in r.cells.values() if isinstance(c, CellError)]

    def timing(self) -> dict[str, float]:
        """Median runtime per method over the rows where it succeeded."""
        out = {}
        for m in self.methods:
            ts = [r.cells[m].runtime_seconds for r in self.rows
                  if isinstance(r.cells.get(m), PriceReport)]
            if ts:
                out[m] = statistics.median(ts)
        return out

    def speedups(self) -> dict[str, float]:
        """runtime(mc) / runtime(method) for every other timed method."""
        t = self.timing()
        if "mc" not in t:
            return {}
        return {m: t["mc"] / v for m, v in t.items() if m != "mc" and v > 0}


def _timed(fn, repeats: int):
    """Run ``fn`` ``repeats`` times; return the first report with the median runtime."""
    reports = [fn() for _ in range(repeats)]
    med = statistics.median(r.runtime_seconds for r in reports)
    first = reports[0]
    return PriceReport(first.method, first.price, med, first.config_echo, first.ci)


def _analytic_cell(cfg: RunConfig, theta: float, method: str) -> PriceReport:
    mp = cfg.model.with_theta(theta)
    cp, num = cfg.contract, cfg.numeric
    if method in ("taylor1", "taylor2"):
        fn = lambda: price_taylor(mp, cp, int(method[-1]), num.vstar_override)
    elif method == "spline":
        fn = lambda: price_spline(mp, cp, num.interval, num.spline_knots,
                                  num.spline_boundary, num.moment_route, num.fft_n,
                                  num.spline_spacing)
    elif method == "fft":
        fn = lambda: price_fft(mp, cp, num.interval, num.fft_n)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _timed(fn, TIMING_REPEATS)


class _McCache:
    """Factor draws do not depend on the angle; simulate once per table."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.draws: FactorDraws | None = None
        self.sim_seconds = 0.0

    def report(self, theta: float) -> PriceReport:
        cfg = self.cfg
        if self.draws is None:
            t0 = time.perf_counter()
            self.draws = simulate_factor_draws(cfg.model, cfg.contract.T, cfg.mc)
            self.sim_seconds = time.perf_counter() - t0
        res = price_from_draws(cfg.model.with_theta(theta), cfg.contract, self.draws)
        return PriceReport("mc", res.price, self.sim_seconds + res.runtime_seconds,
                           {**cfg.mc.to_dict(), "stderr": res.stderr}, res.ci95)


def run_benchmark(cfg: RunConfig) -> BenchmarkTable:
    """One row per angle, one cell per method; a failing cell is recorded, not raised."""
    mc = _McCache(cfg)
    rows = []
    for theta in cfg.theta_list:
        row = BenchmarkRow(theta)
        for method in cfg.methods:
            try:
                row.cells[method] = mc.report(theta) if method == "mc" else _analytic_cell(cfg, theta, method)
            except Exception as e:  # isolate the cell
                row.cells[method] = CellError(method, f"{type(e).__name__}: {e}")
        rows.append(row)
    return BenchmarkTable(tuple(cfg.methods), rows, cfg.to_dict())


# ---------------------------------------------------------------------------
# serialization (deterministic: no timings in the price outputs)


def _fmt(x: float) -> str:
    return repr(float(x))


def table_rows(table: BenchmarkTable) -> list[dict]:
    out = []
    for row in table.rows:
        for m in table.methods:
            cell = row.cells[m]
            rec = {"theta": row.theta, "theta_label": angle_label(row.theta), "method": m}
            if isinstance(cell, PriceReport):
                rec.update(price=cell.price,
                           ci_low=cell.ci[0] if cell.ci else None,
                           ci_high=cell.ci[1] if cell.ci else None, error=None)
            else:
                rec.update(price=None, ci_low=None, ci_high=None, error=cell.message)
            out.append(rec)
    return out


def table_csv(table: BenchmarkTable) -> str:
    buf = io.StringIO()
    cols = ["theta", "theta_label", "method", "price", "ci_low", "ci_high", "error"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for rec in table_rows(table):
        w.writerow(["" if rec[c] is None else (_fmt(rec[c]) if isinstance(rec[c], float) else rec[c])
                    for c in cols])
    return buf.getvalue()


def table_json(table: BenchmarkTable) -> str:
    doc = {"config": table.config_echo, "rows": table_rows(table)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def timing_csv(table: BenchmarkTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "median_runtime_seconds", "mc_speedup"])
    sp = table.speedups()
    for m, t in table.timing().items():
        w.writerow([m, f"{t:.6g}", f"{sp[m]:.6g}" if m in sp else ""])
    return buf.getvalue()


def timing_json(table: BenchmarkTable) -> str:
    return json.dumps({"median_runtime_seconds": table.timing(), "mc_speedup": table.speedups()},
                      indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# figure datasets


def _write_columns(path: Path, header: list[str], cols) -> Path:
    arr = np.column_stack(cols)
    np.savetxt(path, arr, delimiter=",", header=",".join(header), comments="", fmt="%.12g")
    return path


def taylor_curves(cfg: RunConfig, v0: float = 0.25, npoints: int = 200):
    """(v, C(v), first- and second-order expansions around v0) on (0, 1]."""
    cp = cfg.contract
    v = np.linspace(1.0 / npoints, 1.0, npoints)
    c0 = float(margrabe_price(cp, v0 * cp.T))
    d1 = float(d_margrabe(cp, v0, 1))
    d2 = float(d_margrabe(cp, v0, 2))
    t1 = c0 + d1 * (v - v0)
    t2 = t1 + 0.5 * d2 * (v - v0) ** 2
    return v, margrabe_price(cp, v * cp.T), t1, t2


def emit_figures(cfg: RunConfig, directory) -> list[Path]:
    """Write the plotting datasets into ``directory``; returns the files written."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    v, c, t1, t2 = taylor_curves(cfg)
    written.append(_write_columns(d / "margrabe_taylor.csv", ["v", "C_MT", "taylor1", "taylor2"],
                                  [v, c, t1, t2]))

    a, b = cfg.numeric.interval
    knots = spline_knots((a, b), cfg.numeric.spline_knots, cfg.numeric.spline_spacing)
    sp = build_spline(cfg.contract, knots, cfg.numeric.spline_boundary)
    xs = np.linspace(a, b, 2001)
    written.append(_write_columns(d / "spline_error.csv", ["v", "error"],
                                  [xs, margrabe_price(cfg.contract, np.maximum(xs, 0.0)) - sp(xs)]))

    for theta in cfg.theta_list:
        grid = pdf_fft(cfg.model.with_theta(theta), cfg.contract.T, cfg.numeric.interval, cfg.numeric.fft_n)
        path = d / f"density_{angle_label(theta)}.csv"
        grid.write_text(path)
        written.append(path)

    npaths = cfg.mc.emit_paths or 3
    sim = SimConfig(npaths=max(cfg.mc.npaths, 100), delta=cfg.mc.delta, seed=cfg.mc.seed,
                    emit_paths=npaths, weights=cfg.mc.weights)
    mp = cfg.model.with_theta(cfg.theta_list[0])
    for kind in TRAJECTORY_KINDS:
        written.extend(export_paths(mp, cfg.contract.T, sim, kind).write(d / "trajectories"))
    return written
