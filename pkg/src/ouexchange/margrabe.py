"""Conditional exchange option price given the total variance of log(S1/S2)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .expderiv import exp_derivatives
from .model import ContractParams

MIN_DERIVATIVE_VARIANCE = 1e-10
MAX_DERIVATIVE_ORDER = 4


@dataclass(frozen=True)
class MargrabeShorthand:
    M1: float
    M2: float
    M3: float


def shorthand(cp: ContractParams) -> MargrabeShorthand:
    """Discounted notionals and log-moneyness.

    The default convention discounts leg j by exp(-(r - q_j) T); the
    ``classical_discount`` flag switches to exp(-q_j T). In both cases
    M3 = log(M1 / M2).
    """
    (s1, s2), (q1, q2), T = cp.s0, cp.q, cp.T
    if cp.classical_discount:
        M1 = cp.c * math.exp(-q1 * T) * s1
        M2 = cp.m * math.exp(-q2 * T) * s2
        M3 = math.log(cp.c * s1 / (cp.m * s2)) - (q1 - q2) * T
    else:
        M1 = cp.c * math.exp(-(cp.r - q1) * T) * s1
        M2 = cp.m * math.exp(-(cp.r - q2) * T) * s2
        M3 = math.log(cp.c * s1 / (cp.m * s2)) + (q1 - q2) * T
    return MargrabeShorthand(M1, M2, M3)


def _d1_d2(M3: float, v: np.ndarray):
    with np.errstate(divide="ignore", invalid="ignore"):
        sv = np.sqrt(v)
        d1 = (M3 + 0.5 * v) / sv
        d1 = np.where(v == 0, math.copysign(np.inf, M3) if M3 != 0 else 0.0, d1)
        d1 = np.where(np.isinf(v), np.inf, d1)
        d2 = np.where(np.isinf(v), -np.inf, d1 - sv)
    return d1, d2


def _as_variance(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(np.isnan(v)) or np.any(v < 0):
        raise ValueError("total variance must be >= 0")
    return v


def margrabe_price(cp: ContractParams, v):
    """M1 N(d1) - M2 N(d2) with v the total (not annualized) variance.

    v = 0 returns max(M1 - M2, 0) and v = inf returns M1.
    """
    sh = shorthand(cp)
    v = _as_variance(v)
    d1, d2 = _d1_d2(sh.M3, v)
    out = sh.M1 * ndtr(d1) - sh.M2 * ndtr(d2)
    out = np.where(v == 0, max(sh.M1 - sh.M2, 0.0), out)
    out = np.maximum(out, 0.0)
    return out[()] if out.ndim == 0 else out


def _total_variance_derivatives(sh: MargrabeShorthand, w: np.ndarray, k: int) -> list:
    """[C'(w), ..., C^(k)(w)] in total variance w.

    Since M1 phi(d1) = M2 phi(d2), C'(w) = M1 phi(d1) / (2 sqrt w) = c0 exp(h)
    with h = -M3^2/(2w) - M3/2 - w/8 - log(w)/2, whose derivatives are explicit.
    """
    M3sq = sh.M3 * sh.M3
    h = -M3sq / (2 * w) - sh.M3 / 2 - w / 8 - 0.5 * np.log(w)
    dh = []
    for j in range(1, k):
        term = -0.5 * M3sq * (-1) ** j * math.factorial(j) * w ** (-j - 1)
        term = term - 0.5 * (-1) ** (j - 1) * math.factorial(j - 1) * w ** (-j)
        if j == 1:
            term = term - 0.125
        dh.append(term)
    c0 = sh.M1 / (2.0 * math.sqrt(2.0 * math.pi))
    return [c0 * g for g in exp_derivatives(np.exp(h), dh)]


def d_margrabe(cp: ContractParams, v, k: int):
    """k-th derivative of the price in annualized variance v (total variance v T)."""
    if k == 0:
        return margrabe_price(cp, np.asarray(v, dtype=float) * cp.T)
    if not 1 <= k <= MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order must be in 0..{MAX_DERIVATIVE_ORDER}, got {k!r}")
    v = np.asarray(v, dtype=float)
    if np.any(~(v > MIN_DERIVATIVE_VARIANCE)):
        raise ValueError(
            f"variance must exceed {MIN_DERIVATIVE_VARIANCE} for derivatives (price is not smooth at 0)")
    derivs = _total_variance_derivatives(shorthand(cp), v * cp.T, k)
    out = cp.T ** k * derivs[k - 1]
    return out[()] if out.ndim == 0 else out


def delta(cp: ContractParams, v, asset: int):
    """dC/dS0 of asset 1 or 2 at total variance v."""
    sh = shorthand(cp)
    v = _as_variance(v)
    d1, d2 = _d1_d2(sh.M3, v)
    if asset == 1:
        out = sh.M1 / cp.s0[0] * ndtr(d1)
    elif asset == 2:
        out = -sh.M2 / cp.s0[1] * ndtr(d2)
    else:
        raise ValueError(f"asset must be 1 or 2, got {asset!r}")
    return out[()] if np.ndim(out) == 0 else out
