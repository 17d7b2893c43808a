"""Domain types shared by every module: model and contract parameters,
the integrated covariance matrix and the rotation loading matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Iterator

import numpy as np

Pair = tuple[float, float]

VPLUS_NOISE = 1e-12


class ParameterError(ValueError):
    """Invalid parameter value. ``field`` names the offending attribute."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def normalize_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    t = math.fmod(float(theta), 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    elif t > math.pi:
        t -= 2.0 * math.pi
    return t


def _pair(name: str, value, *, positive: bool = False, nonneg: bool = False) -> Pair:
    try:
        a, b = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ParameterError(name, f"expected a pair of numbers, got {value!r}") from None
    for v in (a, b):
        if not math.isfinite(v):
            raise ParameterError(name, "entries must be finite")
        if positive and v <= 0:
            raise ParameterError(name, f"entries must be > 0, got {value!r}")
        if nonneg and v < 0:
            raise ParameterError(name, f"entries must be >= 0, got {value!r}")
    return (a, b)


def _positive(name: str, value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ParameterError(name, f"expected a number, got {value!r}") from None
    if not math.isfinite(v) or v <= 0:
        raise ParameterError(name, f"must be a finite number > 0, got {value!r}")
    return v


def loading_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def trace_weights(A: np.ndarray) -> Pair:
    """Weights (a_1l - a_2l)^2 with which common factor l enters v+."""
    A = np.asarray(A, dtype=float)
    w = (A[0] - A[1]) ** 2
    return (float(w[0]), float(w[1]))


@dataclass(frozen=True)
class Factor:
    """One IG-driven OU factor, as seen by the characteristic function."""

    kind: str  # "F" or "V"
    index: int
    a: float
    b: float
    lam: float
    x0: float
    weight: float  # loading on v+ (1 for F, theta_l for V)


@dataclass(frozen=True)
class ModelParams:
    """Idiosyncratic (F) and common (V) factor parameters plus loading angle.

    Defaults are the benchmark set used throughout the tests.
    """

    aF: Pair = (1.0, 1.0)
    bF: Pair = (5.0, 5.0)
    aV: Pair = (1.0, 1.0)
    bV: Pair = (5.0, 5.0)
    lambdaF: Pair = (1.0, 1.0)
    lambdaV: Pair = (1.0, 1.0)
    F0: Pair = (0.0, 0.0)
    V0: Pair = (0.0, 0.0)
    theta: float = math.pi / 6

    def __post_init__(self):
        for name in ("aF", "bF", "aV", "bV", "lambdaF", "lambdaV"):
            object.__setattr__(self, name, _pair(name, getattr(self, name), positive=True))
        for name in ("F0", "V0"):
            object.__setattr__(self, name, _pair(name, getattr(self, name), nonneg=True))
        try:
            th = float(self.theta)
        except (TypeError, ValueError):
            raise ParameterError("theta", f"expected a number, got {self.theta!r}") from None
        if not math.isfinite(th):
            raise ParameterError("theta", "must be finite")
        object.__setattr__(self, "theta", normalize_angle(th))

    @property
    def loading(self) -> np.ndarray:
        return loading_matrix(self.theta)

    @property
    def weights(self) -> Pair:
        return trace_weights(self.loading)

    def with_theta(self, theta: float) -> "ModelParams":
        return replace(self, theta=theta)

    def factors(self) -> Iterator[Factor]:
        """F factors first, then V factors."""
        for l in range(2):
            yield Factor("F", l, self.aF[l], self.bF[l], self.lambdaF[l], self.F0[l], 1.0)
        w = self.weights
        for l in range(2):
            yield Factor("V", l, self.aV[l], self.bV[l], self.lambdaV[l], self.V0[l], w[l])

    def to_dict(self) -> dict:
        return {f.name: (list(getattr(self, f.name)) if f.name != "theta" else self.theta)
                for f in fields(self)}


@dataclass(frozen=True)
class ContractParams:
    """Exchange option: receive c units of asset 1, deliver m units of asset 2."""

    s0: Pair = (100.0, 96.0)
    c: float = 1.0
    m: float = 1.0
    q: Pair = (0.0, 0.0)
    r: float = 0.04
    T: float = 1.0
    classical_discount: bool = False

    def __post_init__(self):
        object.__setattr__(self, "s0", _pair("s0", self.s0, positive=True))
        object.__setattr__(self, "q", _pair("q", self.q))
        for name in ("c", "m", "T"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))
        try:
            r = float(self.r)
        except (TypeError, ValueError):
            raise ParameterError("r", f"expected a number, got {self.r!r}") from None
        if not math.isfinite(r):
            raise ParameterError("r", "must be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "classical_discount", bool(self.classical_discount))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


@dataclass(frozen=True)
class IntegratedCovariance:
    """Distinct entries of the symmetric integrated covariance matrix."""

    s11: float
    s22: float
    s12: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s12, self.s22]])

    def vplus(self) -> float:
        return vplus(self)

    @classmethod
    def from_factors(cls, F: Pair, V: Pair, A: np.ndarray) -> "IntegratedCovariance":
        S = np.diag(F) + A @ np.diag(V) @ A.T
        return cls(float(S[0, 0]), float(S[1, 1]), float(S[0, 1]))


def vplus(sigma: IntegratedCovariance) -> float:
    """Total variance of the log price ratio, s11 + s22 - 2 s12."""
    v = sigma.s11 + sigma.s22 - 2.0 * sigma.s12
    if v < -VPLUS_NOISE:
        raise ValueError(f"negative total variance {v!r}: covariance is not positive semidefinite")
    return max(v, 0.0)


@dataclass(frozen=True)
class ComplexMatrixArg:
    """Matrix argument of the characteristic function of the integrated covariance."""

    t11: complex = 0j
    t22: complex = 0j
    t12: complex = 0j
    t21: complex = 0j

    def matrix(self) -> np.ndarray:
        return np.array([[self.t11, self.t12], [self.t21, self.t22]], dtype=complex)

    @classmethod
    def from_matrix(cls, m) -> "ComplexMatrixArg":
        m = np.asarray(m, dtype=complex)
        return cls(m[0, 0], m[1, 1], m[0, 1], m[1, 0])

    @classmethod
    def vplus_direction(cls, u: complex) -> "ComplexMatrixArg":
        """u * M with M = [[1, -1], [-1, 1]], so that tr(theta Sigma) = u v+."""
        return cls(u, u, -u, -u)

    def along_loading(self, A: np.ndarray, l: int) -> complex:
        """tr(theta A C_l A') for the unit selector C_l."""
        a1, a2 = A[0, l], A[1, l]
        return a1 * a1 * self.t11 + a2 * a2 * self.t22 + a1 * a2 * (self.t12 + self.t21)


BENCHMARK_THETAS: dict[str, float] = {
    "pi6": math.pi / 6,
    "pi3": math.pi / 3,
    "pi2": math.pi / 2,
    "pi": math.pi,
}
