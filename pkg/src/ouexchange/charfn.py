"""Characteristic functions of the integrated covariance of IG-driven OU factors.

Every factor contributes a term

    I(lam t, th) = int_0^{lam t} Psi(th / lam * (1 - exp(-lam t + s))) ds

where Psi is the IG characteristic exponent. ``integral_I`` evaluates it in
closed form, ``d_integral_I`` returns its derivatives in ``th``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import ComplexMatrixArg, ContractParams, ModelParams

MAX_DERIVATIVE_ORDER = 8

# Below this value of 2|th|/(lam b^2) the closed form loses digits to
# cancellation, so I is summed from its Taylor series at zero instead.
_SERIES_RADIUS = 1e-3
_SERIES_TERMS = 6

_GL_NODES = 96
_CHUNK = 2048


@dataclass(frozen=True)
class IGParams:
    """One factor: IG scale a, tail b, OU rate lam, horizon t."""

    a: float
    b: float
    lam: float
    t: float

    def __post_init__(self):
        for name in ("a", "b", "lam", "t"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"IGParams.{name} must be positive, got {v!r}")

    @property
    def horizon(self) -> float:
        """Subordinator time lam * t."""
        return self.lam * self.t


@dataclass(frozen=True)
class CFEvaluation:
    value: complex
    k1: complex
    k2: complex


def ig_exponent(a: float, b: float, z):
    """-a (sqrt(b^2 - 2iz) - b), written without the cancellation near z = 0."""
    z = np.asarray(z, dtype=complex)
    out = 2j * a * z / (np.sqrt(b * b - 2j * z) + b)
    return out[()] if out.ndim == 0 else out


def _double_factorial_odd(n: int) -> float:
    """(2n-3)!! with the convention (-1)!! = 1."""
    return float(math.prod(range(1, 2 * n - 2, 2)))


def _power_bracket(L: float, n: int) -> float:
    """int_0^L (1 - e^{-s})^n ds."""
    if L < 1.0:
        x, w = _gl(32)
        s = L * x
        return float(L * np.sum(w * (-np.expm1(-s)) ** n))
    total = L
    for k in range(1, n + 1):
        total += math.comb(n, k) * (-1) ** k * (-math.expm1(-k * L)) / k
    return total


def d_integral_I_at_zero(p: IGParams, n: int) -> complex:
    """n-th derivative of I at th = 0 (closed form)."""
    _check_order(n)
    coef = (1j ** n) * _double_factorial_odd(n) * p.a / (p.lam ** n * p.b ** (2 * n - 1))
    return complex(coef * _power_bracket(p.horizon, n))


def _check_order(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"derivative order must be a positive integer, got {n!r}")
    if n > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order {n} exceeds the maximum {MAX_DERIVATIVE_ORDER}")


def _closed_form_I(p: IGParams, tt: np.ndarray) -> np.ndarray:
    a, b, lam, L = p.a, p.b, p.lam, p.horizon
    one_m_e = -math.expm1(-L)
    s = np.sqrt(1j * lam)
    T1 = np.sqrt(-2.0 * tt - 1j * lam * b * b)
    T2 = np.sqrt(2.0 * tt * one_m_e + 1j * lam * b * b)
    q = (T1 - 1j * T2) / (T1 - 1j * s * b)
    G = L + np.log(q * q)
    t2_minus_sb = 2.0 * tt * one_m_e / (T2 + s * b)
    return -2.0 * a / s * (-t2_minus_sb + 0.5j * T1 * G) + L * a * b


def _series_I(p: IGParams, tt: np.ndarray) -> np.ndarray:
    out = np.zeros_like(tt)
    for n in range(_SERIES_TERMS, 0, -1):
        out = (out + d_integral_I_at_zero(p, n) / math.factorial(n)) * tt
    return out


def integral_I(p: IGParams, ttheta):
    """I(lam t, th) for scalar or array ``ttheta`` in the closed upper half-plane."""
    tt = np.asarray(ttheta, dtype=complex)
    scale = 2.0 / (p.lam * p.b * p.b)
    small = np.abs(tt) * scale < _SERIES_RADIUS
    out = np.empty_like(tt)
    if np.any(small):
        out[small] = _series_I(p, tt[small])
    big = ~small
    if np.any(big):
        out[big] = _closed_form_I(p, tt[big])
    return out[()] if out.ndim == 0 else out


@lru_cache(maxsize=8)
def _gl(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def _d_integral_I_nonzero(p: IGParams, n: int, tt: np.ndarray) -> np.ndarray:
    """Gauss-Legendre on sigma = lam t - s in [0, lam t].

    The integrand w^n (b^2 - 2i th w / lam)^{-(2n-1)/2} with w = 1 - e^{-sigma}
    varies on the scale lam b^2 / (2|th|) near sigma = 0, so nodes are graded
    geometrically towards that end.
    """
    a, b, lam, L = p.a, p.b, p.lam, p.horizon
    xg, wg = _gl(_GL_NODES)
    pref = a * (1j ** n) * _double_factorial_odd(n) / lam ** n
    out = np.empty(tt.shape, dtype=complex)
    flat_in, flat_out = tt.reshape(-1), out.reshape(-1)
    for lo in range(0, flat_in.size, _CHUNK):
        th = flat_in[lo:lo + _CHUNK, None]
        r = 2.0 * np.abs(th) * L / (lam * b * b)
        lr = np.log1p(r)
        tiny = r < 1e-12
        rs = np.where(tiny, 1.0, r)
        sigma = np.where(tiny, L * xg, L * np.expm1(xg * lr) / rs)
        jac = np.where(tiny, L, L * lr * np.exp(xg * lr) / rs) * wg
        w = -np.expm1(-sigma)
        z = np.sqrt(b * b - 2j * th * w / lam)
        flat_out[lo:lo + _CHUNK] = pref * np.sum(w ** n * z ** (-(2 * n - 1)) * jac, axis=1)
    return out


def d_integral_I(p: IGParams, n: int, ttheta):
    """n-th derivative of I in th, for scalar or array ``ttheta``."""
    _check_order(n)
    tt = np.asarray(ttheta, dtype=complex)
    zero = tt == 0
    out = np.empty_like(tt)
    if np.any(zero):
        out[zero] = d_integral_I_at_zero(p, n)
    if not np.all(zero):
        out[~zero] = _d_integral_I_nonzero(p, n, tt[~zero])
    return out[()] if out.ndim == 0 else out


def _decay(lam: float, t: float) -> float:
    """lam^{-1} (1 - e^{-lam t}): weight of an initial level in the integral."""
    return -math.expm1(-lam * t) / lam


def cf_integrated_cov(mp: ModelParams, t: float, theta: ComplexMatrixArg) -> CFEvaluation:
    """E exp(i tr(theta Sigma+_t))."""
    A = mp.loading
    k1 = 0j
    for l in range(2):
        p = IGParams(mp.aF[l], mp.bF[l], mp.lambdaF[l], t)
        th = theta.t11 if l == 0 else theta.t22
        k1 += 1j * th * _decay(p.lam, t) * mp.F0[l] + complex(integral_I(p, th))
    k2 = 0j
    for l in range(2):
        p = IGParams(mp.aV[l], mp.bV[l], mp.lambdaV[l], t)
        tau = theta.along_loading(A, l)
        k2 += 1j * tau * _decay(p.lam, t) * mp.V0[l] + complex(integral_I(p, tau))
    return CFEvaluation(complex(np.exp(k1 + k2)), complex(k1), complex(k2))


def _vplus_factors(mp: ModelParams, T: float):
    for f in mp.factors():
        yield f, IGParams(f.a, f.b, f.lam, T)


def log_cf_vplus(mp: ModelParams, T: float, u):
    """log E exp(i u v+_T), vectorized over ``u``."""
    u = np.asarray(u, dtype=complex)
    out = np.zeros_like(u)
    for f, p in _vplus_factors(mp, T):
        if f.weight == 0.0:
            continue
        out = out + 1j * u * f.weight * _decay(f.lam, T) * f.x0 + integral_I(p, f.weight * u)
    return out[()] if out.ndim == 0 else out


def cf_vplus(mp: ModelParams, T: float, u):
    return np.exp(log_cf_vplus(mp, T, u))


def d_log_cf_vplus(mp: ModelParams, T: float, n: int, x):
    """n-th derivative in x of log E exp(i x v+_T)."""
    _check_order(n)
    x = np.asarray(x, dtype=complex)
    out = np.zeros_like(x)
    for f, p in _vplus_factors(mp, T):
        if f.weight == 0.0:
            continue
        out = out + f.weight ** n * d_integral_I(p, n, f.weight * x)
        if n == 1:
            out = out + 1j * f.weight * _decay(f.lam, T) * f.x0
    return out[()] if out.ndim == 0 else out


def cf_logprices(mp: ModelParams, cp: ContractParams, u) -> complex:
    """Joint characteristic function of the log returns (Y1_T, Y2_T)."""
    u1, u2 = (complex(x) for x in u)
    drift = 1j * (u1 * (cp.r - cp.q[0]) + u2 * (cp.r - cp.q[1])) * cp.T
    arg = ComplexMatrixArg(
        t11=-0.5 * u1 * (1 - 1j * u1),
        t22=-0.5 * u2 * (1 - 1j * u2),
        t12=0.5j * u1 * u2,
        t21=0.5j * u1 * u2,
    )
    return complex(np.exp(drift) * cf_integrated_cov(mp, cp.T, arg).value)
