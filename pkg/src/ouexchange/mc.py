"""Conditional ("partial") Monte Carlo: simulate only the integrated factors.

Each factor's integral is discretized on its subordinator clock [0, lam T]
with step delta:

    X+ = lam^{-1} [(1 - e^{-lam T}) X0 + sum_k w_k dZ_k]

where dZ_k are IG increments over subordinator time delta. The default
weights ``right`` use w_k = 1 - exp(-(lam T - k delta)); ``cell-average``
averages that weight over each step, which removes the O(delta) bias of the
mean.

Paths are generated in fixed-size chunks, each with its own RNG stream keyed
by (seed, chunk index), so results do not depend on the number of workers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .margrabe import margrabe_price
from .model import ContractParams, ModelParams

CHUNK_PATHS = 4096
WEIGHT_SCHEMES = ("right", "cell-average")
_EXPORT_STREAM = 2**31 - 1


@dataclass(frozen=True)
class SimConfig:
    """delta=None gives every factor 1000 steps (delta = lam T / 1000)."""

    npaths: int = 1_000_000
    delta: float | None = None
    seed: int = 20240601
    emit_paths: int | None = None
    weights: str = "right"
    jobs: int = 1

    def __post_init__(self):
        if int(self.npaths) != self.npaths or self.npaths < 1:
            raise ValueError(f"npaths must be a positive integer, got {self.npaths!r}")
        if self.delta is not None and not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if self.weights not in WEIGHT_SCHEMES:
            raise ValueError(f"weights must be one of {WEIGHT_SCHEMES}, got {self.weights!r}")
        if int(self.jobs) < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs!r}")
        if self.emit_paths is not None and int(self.emit_paths) < 1:
            raise ValueError(f"emit_paths must be positive, got {self.emit_paths!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    def to_dict(self) -> dict:
        return {"npaths": self.npaths, "delta": self.delta, "seed": self.seed,
                "emit_paths": self.emit_paths, "weights": self.weights, "jobs": self.jobs}


@dataclass(frozen=True)
class McResult:
    price: float
    stderr: float
    ci95: tuple[float, float]
    npaths: int
    sample_vplus: np.ndarray | None = None
    runtime_seconds: float = 0.0


@dataclass(frozen=True)
class FactorDraws:
    """Integrated factors per path, columns (F1, F2) and (V1, V2).

    They do not depend on the loading angle, so one set of draws serves
    every angle.
    """

    F: np.ndarray
    V: np.ndarray

    def vplus(self, mp: ModelParams) -> np.ndarray:
        w1, w2 = mp.weights
        return self.F[:, 0] + self.F[:, 1] + w1 * self.V[:, 0] + w2 * self.V[:, 1]

    def covariance_entries(self, mp: ModelParams) -> np.ndarray:
        """Columns s11, s22, s12 of diag(F) + A diag(V) A'."""
        A = mp.loading
        s11 = self.F[:, 0] + A[0, 0] ** 2 * self.V[:, 0] + A[0, 1] ** 2 * self.V[:, 1]
        s22 = self.F[:, 1] + A[1, 0] ** 2 * self.V[:, 0] + A[1, 1] ** 2 * self.V[:, 1]
        s12 = A[0, 0] * A[1, 0] * self.V[:, 0] + A[0, 1] * A[1, 1] * self.V[:, 1]
        return np.column_stack([s11, s22, s12])


def sample_ig_increment(a_dt: float, b: float, rng: np.random.Generator, size=None):
    """IG(mean a_dt / b, shape a_dt^2) by the Michael-Schucany-Haas transformation.

    This is the law with characteristic function exp(-a_dt (sqrt(b^2 - 2iu) - b)).
    """
    if not (a_dt > 0 and b > 0):
        raise ValueError("a_dt and b must be positive")
    mu = a_dt / b
    shape = a_dt * a_dt
    y = rng.standard_normal(size)
    y = y * y
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = y * (mu / (2.0 * shape))
        # smaller root of the quadratic, written to avoid cancellation
        x = mu / (1.0 + z + np.sqrt(z * (z + 2.0)))
        u = rng.random(size)
        x = np.where(u * (mu + x) <= mu, x, mu * mu / x)
    return x


def _steps(lam: float, T: float, delta: float | None) -> tuple[float, int]:
    horizon = lam * T
    d = horizon / 1000.0 if delta is None else float(delta)
    n = int(math.floor(horizon / d + 1e-9))
    if n < 1:
        raise ValueError(f"step {d} exceeds the subordinator horizon lam T = {horizon}")
    return d, n


def _weights(lam: float, T: float, d: float, n: int, scheme: str) -> np.ndarray:
    L = lam * T
    k = np.arange(1, n + 1)
    if scheme == "right":
        w = -np.expm1(-(L - k * d))
    else:
        # mean of 1 - e^{-(L - s)} over s in [(k-1) d, k d]
        w = 1.0 - np.exp(-(L - k * d)) * (-np.expm1(-d)) / d
    return w / lam


def _factor_plan(mp: ModelParams, T: float, cfg: SimConfig):
    plan = []
    for f in mp.factors():
        d, n = _steps(f.lam, T, cfg.delta)
        init = -math.expm1(-f.lam * T) / f.lam * f.x0
        plan.append((f.a * d, f.b, _weights(f.lam, T, d, n, cfg.weights), init))
    return plan


def simulate_integrated_factors(mp: ModelParams, T: float, cfg: SimConfig,
                                rng: np.random.Generator, size: int | None = None):
    """Draw (F+, V+): arrays of shape (size, 2), or pairs when ``size`` is None."""
    m = 1 if size is None else int(size)
    cols = []
    for a_dt, b, w, init in _factor_plan(mp, T, cfg):
        dz = sample_ig_increment(a_dt, b, rng, (m, w.size))
        cols.append(init + dz @ w)
    F = np.column_stack(cols[:2])
    V = np.column_stack(cols[2:])
    if size is None:
        return (float(F[0, 0]), float(F[0, 1])), (float(V[0, 0]), float(V[0, 1]))
    return F, V


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _simulate_chunk(args):
    mp, T, cfg, index, size = args
    return simulate_integrated_factors(mp, T, cfg, _chunk_rng(cfg.seed, index), size)


def simulate_factor_draws(mp: ModelParams, T: float, cfg: SimConfig) -> FactorDraws:
    sizes = [min(CHUNK_PATHS, cfg.npaths - lo) for lo in range(0, cfg.npaths, CHUNK_PATHS)]
    tasks = [(mp, T, cfg, i, s) for i, s in enumerate(sizes)]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=int(cfg.jobs)) as ex:
            parts = list(ex.map(_simulate_chunk, tasks))
    else:
        parts = [_simulate_chunk(t) for t in tasks]
    return FactorDraws(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def price_from_draws(mp: ModelParams, cp: ContractParams, draws: FactorDraws) -> McResult:
    t0 = time.perf_counter()
    v = draws.vplus(mp)
    payoff = margrabe_price(cp, np.maximum(v, 0.0))
    n = payoff.size
    price = float(np.mean(payoff))
    stderr = float(np.std(payoff, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    half = 1.96 * stderr
    return McResult(price, stderr, (price - half, price + half), n, v,
                    time.perf_counter() - t0)


def price_mc(mp: ModelParams, cp: ContractParams, cfg: SimConfig,
             draws: FactorDraws | None = None) -> McResult:
    """Mean of the conditional price over simulated v+.

    ``draws`` (from ``simulate_factor_draws`` with the same T) may be passed
    to reuse factor paths across loading angles.
    """
    t0 = time.perf_counter()
    if draws is None:
        draws = simulate_factor_draws(mp, cp.T, cfg)
    res = price_from_draws(mp, cp, draws)
    return replace(res, runtime_seconds=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# trajectories

TRAJECTORY_KINDS = ("subordinator", "ou", "correlation")


@dataclass(frozen=True)
class Trajectories:
    """``values[i, k]`` is path i at calendar time t[k]; NaN marks a missing value."""

    kind: str
    t: np.ndarray
    values: np.ndarray

    def write(self, directory, prefix: str = "") -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        out = []
        for i, row in enumerate(self.values):
            path = directory / f"{prefix}{self.kind}_path{i + 1}.csv"
            lines = ["t,value"]
            for t, v in zip(self.t, row):
                lines.append(f"{t:.10g}," + ("" if math.isnan(v) else f"{v:.10g}"))
            path.write_text("\n".join(lines) + "\n")
            out.append(path)
        return out


def export_paths(mp: ModelParams, T: float, cfg: SimConfig, kind: str) -> Trajectories:
    """Sample paths on a calendar grid with step delta (default T / 1000).

    ``subordinator`` and ``ou`` follow the first idiosyncratic factor: its
    driving IG process Z_{lam t} and the OU level with
    F_{t+dt} = e^{-lam dt} F_t + dZ. ``correlation`` is
    sigma12 / sqrt(sigma11 sigma22) of the instantaneous covariance.
    """
    if kind not in TRAJECTORY_KINDS:
        raise ValueError(f"kind must be one of {TRAJECTORY_KINDS}, got {kind!r}")
    if cfg.emit_paths is None:
        raise ValueError("emit_paths must be set to export trajectories")
    dt = T / 1000.0 if cfg.delta is None else float(cfg.delta)
    n = int(math.floor(T / dt + 1e-9))
    if n < 1:
        raise ValueError(f"step {dt} exceeds the horizon {T}")
    t = dt * np.arange(n + 1)
    facs = list(mp.factors())
    rows = []
    for i in range(int(cfg.emit_paths)):
        rng = np.random.Generator(np.random.SFC64(
            np.random.SeedSequence(cfg.seed, spawn_key=(_EXPORT_STREAM, i))))
        levels, subs = [], []
        for f in facs:
            dz = sample_ig_increment(f.a * f.lam * dt, f.b, rng, n)
            z = np.concatenate([[0.0], np.cumsum(dz)])
            decay = math.exp(-f.lam * dt)
            tail, _ = lfilter([1.0], [1.0, -decay], dz, zi=[decay * f.x0])
            x = np.concatenate([[f.x0], tail])
            subs.append(z)
            levels.append(x)
        if kind == "subordinator":
            rows.append(subs[0])
        elif kind == "ou":
            rows.append(levels[0])
        else:
            A = mp.loading
            F1, F2, V1, V2 = levels
            s11 = F1 + A[0, 0] ** 2 * V1 + A[0, 1] ** 2 * V2
            s22 = F2 + A[1, 0] ** 2 * V1 + A[1, 1] ** 2 * V2
            s12 = A[0, 0] * A[1, 0] * V1 + A[0, 1] * A[1, 1] * V2
            with np.errstate(invalid="ignore", divide="ignore"):
                rho = np.where((s11 > 0) & (s22 > 0), s12 / np.sqrt(s11 * s22), np.nan)
            rows.append(np.clip(rho, -1.0, 1.0))
    return Trajectories(kind, t, np.array(rows))
