"""Approximate unconditional prices E[C(v+_T)]: Taylor, cubic spline, FFT density."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .margrabe import MIN_DERIVATIVE_VARIANCE, d_margrabe, margrabe_price
from .model import ContractParams, ModelParams
from .moments import (ConstrainedMoments, ConvergenceError, DensityGrid,
                      constrained_centered_moments, pdf_fft, unconstrained_moments)

# probability of the truncation window below which the spline price is rejected
SPLINE_MASS_BOUNDS = (0.9, 1.01)

METHODS = ("taylor1", "taylor2", "spline", "fft", "mc")
KNOT_SPACINGS = ("graded", "uniform")


@dataclass(frozen=True)
class PriceReport:
    method: str
    price: float
    runtime_seconds: float
    config_echo: dict = field(default_factory=dict)
    ci: tuple[float, float] | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if (self.ci is not None) != (self.method == "mc"):
            raise ValueError("a confidence interval is reported for mc and only for mc")
        if self.ci is not None and not self.ci[0] <= self.price <= self.ci[1]:
            raise ValueError("confidence interval does not bracket the price")


# ---------------------------------------------------------------------------
# Taylor


def taylor_terms(mp: ModelParams, cp: ContractParams, vstar_override: float | None = None):
    """Expansion point and the central moments E(v+/T - v*)^l, l = 1, 2."""
    ms = unconstrained_moments(mp, cp.T)
    mean = ms.vstar / cp.T
    var = ms.vplus_var_terms / cp.T ** 2
    if vstar_override is None:
        return mean, 0.0, var
    v0 = float(vstar_override)
    return v0, mean - v0, var + (mean - v0) ** 2


def price_taylor(mp: ModelParams, cp: ContractParams, order: int = 1,
                 vstar_override: float | None = None) -> PriceReport:
    """Expansion of the conditional price around v* in annualized variance.

    v* defaults to E v+_T / T; with an override the first-order term is kept.
    """
    if order not in (1, 2):
        raise ValueError(f"Taylor order must be 1 or 2, got {order!r}")
    t0 = time.perf_counter()
    vstar, c1, c2 = taylor_terms(mp, cp, vstar_override)
    price = float(margrabe_price(cp, vstar * cp.T))
    moments = (c1, c2)[:order]
    for l, c in enumerate(moments, start=1):
        if c != 0.0:
            price += float(d_margrabe(cp, vstar, l)) / math.factorial(l) * c
    return PriceReport(f"taylor{order}", price, time.perf_counter() - t0,
                       {"order": order, "vstar": vstar,
                        "vstar_override": vstar_override})


# ---------------------------------------------------------------------------
# spline


@dataclass(frozen=True)
class SplineCoefficients:
    """Piecewise cubic: on [v_j, v_{j+1}) the value is sum_l alpha[l, j] (v - v_j)^l."""

    knots: np.ndarray
    alpha: np.ndarray

    def _cell(self, v: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.knots, v, side="right") - 1, 0, self.knots.size - 2)

    def __call__(self, v, nu: int = 0):
        v = np.asarray(v, dtype=float)
        j = self._cell(v)
        t = v - self.knots[j]
        out = np.zeros_like(t)
        for l in range(3, nu - 1, -1):
            coef = self.alpha[l, j] * math.factorial(l) / math.factorial(l - nu)
            out = out * t + coef
        return out[()] if out.ndim == 0 else out


def fit_spline(knots, values, boundary: str = "natural",
               end_slopes: tuple[float | None, float | None] = (None, None)) -> SplineCoefficients:
    """Cubic spline through (knots, values).

    ``boundary='clamped'`` uses ``end_slopes``; an end whose slope is None
    falls back to a zero second derivative.
    """
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or knots.size < 4 or np.any(np.diff(knots) <= 0):
        raise ValueError("knots must be strictly increasing with at least 4 entries")
    if boundary == "natural":
        bc = "natural"
    elif boundary == "clamped":
        bc = tuple((2, 0.0) if s is None else (1, float(s)) for s in end_slopes)
    else:
        raise ValueError(f"boundary must be 'clamped' or 'natural', got {boundary!r}")
    cs = CubicSpline(knots, np.asarray(values, dtype=float), bc_type=bc)
    return SplineCoefficients(knots, np.ascontiguousarray(cs.c[::-1]))


def build_spline(cp: ContractParams, knots, boundary: str = "clamped") -> SplineCoefficients:
    """Spline of the conditional price in total variance.

    Clamped ends use the analytic slope; a knot at (or next to) zero variance,
    where the price has no finite derivative, gets a natural end instead.
    """
    knots = np.asarray(knots, dtype=float)
    if knots.size and knots[0] < 0:
        raise ValueError("knots must be nonnegative variances")
    values = margrabe_price(cp, knots)
    slopes: list[float | None] = [None, None]
    if boundary == "clamped":
        for i, w in ((0, knots[0]), (1, knots[-1])):
            if w / cp.T > MIN_DERIVATIVE_VARIANCE:
                slopes[i] = float(d_margrabe(cp, w / cp.T, 1)) / cp.T
    return fit_spline(knots, values, boundary, tuple(slopes))


def spline_knots(interval, nknots: int, spacing: str = "graded") -> np.ndarray:
    """Knot grid on [a, b].

    ``graded`` places a + (b - a) s^2 for uniform s, which concentrates knots
    where the price bends sharply at small variance.
    """
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise ValueError(f"interval must satisfy a < b, got {interval!r}")
    s = np.linspace(0.0, 1.0, int(nknots))
    if spacing == "graded":
        return a + (b - a) * s * s
    if spacing == "uniform":
        return a + (b - a) * s
    raise ValueError(f"spacing must be one of {KNOT_SPACINGS}, got {spacing!r}")


def spline_expectation(spline: SplineCoefficients, cm: ConstrainedMoments) -> float:
    """sum_j sum_l alpha[l, j] E[(v - v_j)^l 1_[v_j, v_{j+1})]."""
    if cm.knots.shape != spline.knots.shape or np.any(cm.knots != spline.knots):
        raise ValueError("moment table and spline use different knots")
    return float(np.sum(spline.alpha.T * cm.centered[:, :4]))


def price_spline(mp: ModelParams, cp: ContractParams, interval=(0.0, 5.0), nknots: int = 64,
                 boundary: str = "clamped", route: str = "convolution",
                 fft_n: int = 4096, spacing: str = "graded") -> PriceReport:
    if nknots < 4:
        raise ValueError(f"nknots must be >= 4, got {nknots!r}")
    t0 = time.perf_counter()
    knots = spline_knots(interval, nknots, spacing)
    spline = build_spline(cp, knots, boundary)
    cm = constrained_centered_moments(mp, cp.T, knots, 3, route=route, fft_n=fft_n)
    lo, hi = SPLINE_MASS_BOUNDS
    if not lo <= cm.raw[0] <= hi:
        raise ConvergenceError(f"window [{knots[0]}, {knots[-1]}) holds probability {cm.raw[0]:.6f}, "
                               f"outside [{lo}, {hi}]; widen the interval")
    price = spline_expectation(spline, cm)
    return PriceReport("spline", price, time.perf_counter() - t0,
                       {"interval": [float(knots[0]), float(knots[-1])], "nknots": int(nknots),
                        "boundary": boundary, "route": route, "spacing": spacing})


# ---------------------------------------------------------------------------
# FFT density


def grid_expectation(grid: DensityGrid, fn) -> float:
    """Trapezoid integral of fn(x) pdf(x) over the closed periodic grid."""
    xs = np.append(grid.x, grid.interval[1])
    ps = np.append(grid.pdf, grid.pdf[0])
    return float(np.trapezoid(fn(xs) * ps, xs))


def price_fft(mp: ModelParams, cp: ContractParams, interval=(0.0, 5.0), n: int = 4096) -> PriceReport:
    t0 = time.perf_counter()
    grid = pdf_fft(mp, cp.T, interval, n)
    price = grid_expectation(grid, lambda x: margrabe_price(cp, x))
    return PriceReport("fft", price, time.perf_counter() - t0,
                       {"interval": [float(interval[0]), float(interval[1])], "n": int(n)})
