"""Moments and density of the integrated covariance and of v+ = tr(M Sigma+).

Three routes:

* ``unconstrained_moments``: first and second moments of the entries of
  Sigma+_T from the cumulants of the independent factors.
* windowed (constrained) moments E[v^k 1_[a,b)(v)] from a trapezoid rule
  applied to the convolution of the window's Fourier transform with the
  characteristic function of v+ (``constrained_raw_moments``).
* ``pdf_fft``: the density of v+ on a grid by FFT inversion, from which the
  same windowed moments follow by direct quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .charfn import (IGParams, _decay, cf_vplus, d_integral_I_at_zero,
                     d_log_cf_vplus)
from .expderiv import exp_derivatives
from .model import ModelParams

MAX_CONSTRAINED_ORDER = 6


class ConvergenceError(RuntimeError):
    """A truncated integral did not meet its tolerance."""


@dataclass(frozen=True)
class MomentSet:
    """First and second moments of the entries of Sigma+_T and of v+_T."""

    m11: float
    m22: float
    m12: float
    m11sq: float
    m22sq: float
    m12sq: float
    m1122: float
    m1112: float
    m2212: float
    vstar: float
    vplus_var_terms: float

    @property
    def vplus_sd(self) -> float:
        return math.sqrt(max(self.vplus_var_terms, 0.0))

    def vplus_second_moment_about(self, x: float) -> float:
        """E (v+ - x)^2."""
        return self.vplus_var_terms + (self.vstar - x) ** 2


def _factor_cumulants(mp: ModelParams, T: float):
    """Mean and variance of each integrated factor, with its loading vectors.

    Yields (mean, var, c) where c = (c11, c22, c12) are the coefficients
    with which the factor enters (s11, s22, s12).
    """
    A = mp.loading
    for f in mp.factors():
        p = IGParams(f.a, f.b, f.lam, T)
        mean = (-1j * d_integral_I_at_zero(p, 1)).real + _decay(f.lam, T) * f.x0
        var = -d_integral_I_at_zero(p, 2).real
        if f.kind == "F":
            c = (1.0, 0.0, 0.0) if f.index == 0 else (0.0, 1.0, 0.0)
        else:
            a1, a2 = A[0, f.index], A[1, f.index]
            c = (a1 * a1, a2 * a2, a1 * a2)
        yield mean, var, c


def unconstrained_moments(mp: ModelParams, T: float) -> MomentSet:
    if not T > 0:
        raise ValueError(f"T must be positive, got {T!r}")
    mean = np.zeros(3)
    cov = np.zeros((3, 3))
    vmean = vvar = 0.0
    for mu, var, c in _factor_cumulants(mp, T):
        c = np.asarray(c)
        mean += mu * c
        cov += var * np.outer(c, c)
        w = c[0] + c[1] - 2.0 * c[2]
        vmean += w * mu
        vvar += w * w * var
    second = cov + np.outer(mean, mean)
    return MomentSet(
        m11=float(mean[0]), m22=float(mean[1]), m12=float(mean[2]),
        m11sq=float(second[0, 0]), m22sq=float(second[1, 1]), m12sq=float(second[2, 2]),
        m1122=float(second[0, 1]), m1112=float(second[0, 2]), m2212=float(second[1, 2]),
        vstar=float(vmean), vplus_var_terms=float(vvar),
    )


# ---------------------------------------------------------------------------
# windowed moments by convolution


def _alias_period(mp: ModelParams, T: float, lo: float, hi: float) -> float:
    """Period of the trapezoid rule in the y variable.

    A step h replicates the window at shifts 2 pi / h; the copies must lie
    below zero (where v+ has no mass) or far in the right tail.
    """
    ms = unconstrained_moments(mp, T)
    far = ms.vstar + 40.0 * ms.vplus_sd + 1.0
    return 2.0 * max(hi, hi - lo, far - lo)


def _truncation_point(mp: ModelParams, T: float, tol: float) -> float:
    x = 8.0
    while abs(complex(cf_vplus(mp, T, -x))) > tol:
        x *= 2.0
        if x > 1e8:
            raise ConvergenceError("characteristic function of v+ does not decay; cannot truncate")
    return x


@dataclass
class _ConvolutionGrid:
    """D^k g(-y_j), k = 0..kmax, on y_j = j h for j = 0..J (g is the CF of v+)."""

    h: float
    y: np.ndarray
    dg: list

    @classmethod
    def build(cls, mp: ModelParams, T: float, lo: float, hi: float, kmax: int,
              tol: float = 1e-13, max_points: int = 2_000_000) -> "_ConvolutionGrid":
        h = 2.0 * math.pi / _alias_period(mp, T, lo, hi)
        Y = _truncation_point(mp, T, tol)
        J = int(math.ceil(Y / h))
        if J > max_points:
            raise ConvergenceError(f"convolution grid needs {J} points (limit {max_points})")
        y = h * np.arange(J + 1)
        x = -y
        g = cf_vplus(mp, T, x)
        dK = [d_log_cf_vplus(mp, T, n, x) for n in range(1, kmax + 1)]
        return cls(h, y, exp_derivatives(g, dK))

    def window_sums(self, edges: np.ndarray, k: int, chunk: int = 8192) -> np.ndarray:
        """h sum_{j in Z} f(y_j, c, d) D^k g(-y_j) for consecutive edge pairs (c, d)."""
        edges = np.asarray(edges, dtype=float)
        width = np.diff(edges)
        G = self.dg[k]
        tot = 1j * width * G[0]
        half = np.zeros(width.shape, dtype=complex)
        for lo in range(1, self.y.size, chunk):
            y = self.y[lo:lo + chunk]
            E = np.exp(1j * np.outer(edges, y))
            F = (E[1:] - E[:-1]) / y
            half += F @ G[lo:lo + chunk]
        # y < 0 half: f(-y) = -conj f(y) and D^k g(y) = (-1)^k conj D^k g(-y)
        tot = tot + half + (-1) ** (k + 1) * np.conj(half)
        return self.h * tot

    def tail_weight(self, frac: float = 0.05) -> float:
        """Rough size of the integrand over the last ``frac`` of the grid."""
        n = max(1, int(frac * self.y.size))
        tail = slice(self.y.size - n, None)
        worst = max(float(np.max(np.abs(d[tail]))) for d in self.dg)
        return worst * 2.0 / max(self.y[-1], 1e-300) * n * self.h


def _real_moment(z: np.ndarray, what: str, rtol: float = 1e-6, atol: float = 1e-10) -> np.ndarray:
    bad = np.abs(z.imag) > rtol * np.abs(z.real) + atol
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ConvergenceError(f"{what}: imaginary residue {z.imag.flat[i]:.3e} "
                               f"against real part {z.real.flat[i]:.3e}")
    return z.real


def _check_kmax(kmax: int) -> None:
    if not 0 <= kmax <= MAX_CONSTRAINED_ORDER:
        raise ValueError(f"kmax must be in 0..{MAX_CONSTRAINED_ORDER}, got {kmax!r}")


def window_raw_moments(mp: ModelParams, T: float, edges, kmax: int = 3,
                       tail_tol: float = 1e-9) -> np.ndarray:
    """E[v^k 1_[e_j, e_{j+1})(v)] for every consecutive pair of ``edges``.

    Returns an array of shape (len(edges) - 1, kmax + 1).
    """
    _check_kmax(kmax)
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) < 0):
        raise ValueError("edges must be a nondecreasing vector with at least two entries")
    grid = _ConvolutionGrid.build(mp, T, float(edges[0]), float(edges[-1]), kmax)
    if grid.tail_weight() > tail_tol:
        raise ConvergenceError(f"truncated tail estimate {grid.tail_weight():.2e} exceeds {tail_tol:.0e}")
    out = np.empty((edges.size - 1, kmax + 1))
    for k in range(kmax + 1):
        z = (1j) ** (-k) * (-0.5j / math.pi) * grid.window_sums(edges, k)
        out[:, k] = _real_moment(z, f"constrained moment of order {k}")
    return out


def constrained_raw_moments(mp: ModelParams, T: float, interval, kmax: int = 3) -> np.ndarray:
    """[m(0, a, b), ..., m(kmax, a, b)] with m(k, a, b) = E[v^k 1_[a,b)(v)]."""
    a, b = map(float, interval)
    if not a <= b:
        raise ValueError(f"interval must satisfy a <= b, got {interval!r}")
    if a == b:
        _check_kmax(kmax)
        return np.zeros(kmax + 1)
    return window_raw_moments(mp, T, [a, b], kmax)[0]


def constrained_cf(mp: ModelParams, T: float, u: float, interval) -> complex:
    """E[exp(i u v) 1_[a,b)(v)] by convolution of the window transform with the CF."""
    a, b = map(float, interval)
    if not a <= b:
        raise ValueError(f"interval must satisfy a <= b, got {interval!r}")
    if a == b:
        return 0j
    h = 2.0 * math.pi / _alias_period(mp, T, a, b)
    Y = _truncation_point(mp, T, 1e-13) + abs(u)
    J = int(math.ceil(Y / h))
    y = h * np.arange(-J, J + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = (np.exp(1j * b * y) - np.exp(1j * a * y)) / y
    f[J] = 1j * (b - a)
    g = cf_vplus(mp, T, u - y)
    return complex(-0.5j / math.pi * h * np.sum(f * g))


# ---------------------------------------------------------------------------
# centering


def center_moments(raw, shift: float) -> np.ndarray:
    """E[(v - s)^l 1] from E[v^i 1] for l = 0..len(raw)-1 (binomial shift)."""
    raw = np.asarray(raw, dtype=float)
    L = raw.shape[-1]
    out = np.zeros_like(raw)
    for l in range(L):
        for i in range(l + 1):
            out[..., l] += comb(l, i) * (-shift) ** (l - i) * raw[..., i]
    return out


def uncenter_moments(centered, shift: float) -> np.ndarray:
    """Inverse of ``center_moments``."""
    return center_moments(centered, -shift)


@dataclass(frozen=True)
class ConstrainedMoments:
    """Moments of v+ restricted to [knots[0], knots[-1]) and to each knot cell.

    ``raw[k]`` is E[v^k 1_[a,b)(v)] over the whole window; row j of
    ``centered`` holds E[(v - v_j)^l 1_[v_j, v_{j+1})(v)] for l = 0..lmax.
    """

    interval: tuple[float, float]
    raw: np.ndarray
    knots: np.ndarray
    centered: np.ndarray
    route: str


def constrained_centered_moments(mp: ModelParams, T: float, knots, lmax: int = 3,
                                 route: str = "convolution", fft_n: int = 4096,
                                 grid: "DensityGrid | None" = None) -> ConstrainedMoments:
    """Per-cell moments of v+ centered at each cell's left knot.

    ``route`` picks the convolution integrals or quadrature of ``pdf_fft``
    over [knots[0], knots[-1]) (``grid`` may be passed to reuse a density).
    """
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or knots.size < 2 or np.any(np.diff(knots) <= 0):
        raise ValueError("knots must be strictly increasing with at least two entries")
    _check_kmax(lmax)
    if route == "convolution":
        raw_cells = window_raw_moments(mp, T, knots, lmax)
        centered = np.array([center_moments(row, s) for row, s in zip(raw_cells, knots[:-1])])
    elif route == "pdf":
        if grid is None:
            grid = pdf_fft(mp, T, (knots[0], knots[-1]), fft_n)
        centered = grid.cell_moments(knots, lmax, centered=True)
        raw_cells = grid.cell_moments(knots, lmax, centered=False)
    else:
        raise ValueError(f"unknown route {route!r}; expected 'convolution' or 'pdf'")
    return ConstrainedMoments((float(knots[0]), float(knots[-1])), raw_cells.sum(axis=0),
                              knots, centered, route)


# ---------------------------------------------------------------------------
# density by FFT


@dataclass(frozen=True)
class DensityGrid:
    """Density of v+ on x_j = a + eta j, j < n.

    The inversion returns the density folded with period b - a, so the grid
    always integrates to about 1; ``window_mass`` is the actual probability
    of [a, b) and measures how much of the law the window misses.
    """

    x: np.ndarray
    pdf: np.ndarray
    eta: float
    delta: float
    interval: tuple[float, float]
    raw_min: float
    window_mass: float

    def _closed(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.append(self.x, self.interval[1]), np.append(self.pdf, self.pdf[0]))

    def mass(self) -> float:
        return float(self.eta * np.sum(self.pdf))

    def moment(self, k: int) -> float:
        xs, ps = self._closed()
        return float(np.trapezoid(xs ** k * ps, xs))

    def skewness(self) -> float:
        m0, m1, m2, m3 = (self.moment(k) for k in range(4))
        mu = m1 / m0
        var = m2 / m0 - mu * mu
        return (m3 / m0 - 3 * mu * var - mu ** 3) / var ** 1.5

    def mode(self) -> float:
        return float(self.x[int(np.argmax(self.pdf))])

    def cdf(self, v) -> np.ndarray:
        """Trapezoid integral of the piecewise-linear density from a to v."""
        xs, ps = self._closed()
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (ps[1:] + ps[:-1]) * np.diff(xs))])
        v = np.clip(np.asarray(v, dtype=float), xs[0], xs[-1])
        i = np.clip(np.searchsorted(xs, v, side="right") - 1, 0, xs.size - 2)
        t = v - xs[i]
        slope = (ps[i + 1] - ps[i]) / (xs[i + 1] - xs[i])
        return cum[i] + t * ps[i] + 0.5 * slope * t * t

    def cell_moments(self, knots, lmax: int, centered: bool = True) -> np.ndarray:
        """Trapezoid moments over each knot cell, of (x - v_j)^l or x^l."""
        xs, ps = self._closed()
        knots = np.asarray(knots, dtype=float)
        out = np.zeros((knots.size - 1, lmax + 1))
        for j in range(knots.size - 1):
            c, d = knots[j], knots[j + 1]
            inner = xs[(xs > c) & (xs < d)]
            pts = np.concatenate([[c], inner, [d]])
            vals = np.interp(pts, xs, ps, left=0.0, right=0.0)
            base = pts - c if centered else pts
            for l in range(lmax + 1):
                out[j, l] = np.trapezoid(base ** l * vals, pts)
        return out

    def write_text(self, path, delimiter: str = ",") -> None:
        np.savetxt(path, np.column_stack([self.x, self.pdf]), delimiter=delimiter,
                   header=f"x{delimiter}pdf", comments="", fmt="%.10g")


def pdf_fft(mp: ModelParams, T: float, interval=(0.0, 5.0), n: int = 4096,
            mass_bounds: tuple[float, float] = (0.9, 1.01)) -> DensityGrid:
    """Density of v+ on [a, b) by trapezoid-rule Fourier inversion and one FFT."""
    a, b = map(float, interval)
    if not b > a:
        raise ValueError(f"interval must satisfy a < b, got {interval!r}")
    if n < 2 or n & (n - 1):
        raise ValueError(f"n must be a power of two, got {n!r}")
    eta = (b - a) / n
    delta = 2.0 * math.pi / (b - a)
    u = delta * np.arange(n)
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    hk = w * delta * np.exp(-1j * a * u) * cf_vplus(mp, T, u)
    raw = np.fft.fft(hk).real / math.pi
    window = constrained_cf(mp, T, 0.0, (a, b)).real
    if not mass_bounds[0] <= window <= mass_bounds[1]:
        raise ConvergenceError(f"probability of [{a}, {b}) is {window:.6f}, outside "
                               f"[{mass_bounds[0]}, {mass_bounds[1]}]; widen the interval")
    return DensityGrid(a + eta * np.arange(n), np.maximum(raw, 0.0), eta, delta, (a, b),
                       float(raw.min()), float(window))
