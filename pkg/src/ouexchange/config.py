"""Run configuration: JSON file plus command-line overrides, strictly validated."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .mc import WEIGHT_SCHEMES, SimConfig
from .model import BENCHMARK_THETAS, ContractParams, ModelParams, ParameterError
from .pricers import KNOT_SPACINGS, METHODS


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted location of the bad field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def parse_angle(value: Any, path: str = "theta") -> float:
    """Radians, or one of the names pi6, pi3, pi2, pi (optionally signed)."""
    if isinstance(value, str):
        s = value.strip().lower()
        sign = -1.0 if s.startswith("-") else 1.0
        name = s.lstrip("+-")
        if name in BENCHMARK_THETAS:
            return sign * BENCHMARK_THETAS[name]
        try:
            value = float(s)
        except ValueError:
            raise ConfigError(path, f"not an angle: {value!r} (use radians or pi6, pi3, pi2, pi)") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(path, f"not an angle: {value!r}")
    return float(value)


def angle_label(theta: float) -> str:
    for name, val in BENCHMARK_THETAS.items():
        if math.isclose(theta, val, rel_tol=0, abs_tol=1e-12):
            return name
    return f"{theta:.10g}"


@dataclass(frozen=True)
class NumericConfig:
    interval: tuple[float, float] = (0.0, 5.0)
    fft_n: int = 4096
    spline_knots: int = 64
    spline_boundary: str = "clamped"
    spline_spacing: str = "graded"
    moment_route: str = "convolution"
    taylor_order: int = 2
    vstar_override: float | None = None

    def __post_init__(self):
        a, b = self.interval
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ConfigError("numeric.interval", f"need finite a < b, got {self.interval!r}")
        if self.fft_n < 2 or self.fft_n & (self.fft_n - 1):
            raise ConfigError("numeric.fft_n", f"must be a power of two, got {self.fft_n!r}")
        if self.spline_knots < 4:
            raise ConfigError("numeric.spline_knots", f"must be >= 4, got {self.spline_knots!r}")
        if self.spline_boundary not in ("clamped", "natural"):
            raise ConfigError("numeric.spline_boundary", f"must be clamped or natural, got {self.spline_boundary!r}")
        if self.spline_spacing not in KNOT_SPACINGS:
            raise ConfigError("numeric.spline_spacing", f"must be graded or uniform, got {self.spline_spacing!r}")
        if self.moment_route not in ("convolution", "pdf"):
            raise ConfigError("numeric.moment_route", f"must be convolution or pdf, got {self.moment_route!r}")
        if self.taylor_order not in (1, 2):
            raise ConfigError("numeric.taylor_order", f"must be 1 or 2, got {self.taylor_order!r}")
        if self.vstar_override is not None and not self.vstar_override > 0:
            raise ConfigError("numeric.vstar_override", f"must be positive, got {self.vstar_override!r}")


@dataclass(frozen=True)
class OutputConfig:
    format: str = "csv"
    path: str | None = None
    emit_figures: bool = False
    figures_dir: str = "figures"

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise ConfigError("output.format", f"must be csv or json, got {self.format!r}")


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    contract: ContractParams = field(default_factory=ContractParams)
    methods: tuple[str, ...] = METHODS
    theta_list: tuple[float, ...] = tuple(BENCHMARK_THETAS.values())
    numeric: NumericConfig = field(default_factory=NumericConfig)
    mc: SimConfig = field(default_factory=SimConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        model = self.model.to_dict()
        model.pop("theta")
        return {
            "model": model,
            "contract": self.contract.to_dict(),
            "methods": list(self.methods),
            "theta_list": list(self.theta_list),
            "numeric": _plain(self.numeric),
            "mc": self.mc.to_dict(),
            "output": _plain(self.output),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return _build(data)


def _plain(obj) -> dict:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


_MODEL_KEYS = ("aF", "bF", "aV", "bV", "lambdaF", "lambdaV", "F0", "V0")
_CONTRACT_KEYS = tuple(f.name for f in fields(ContractParams))
_SECTIONS = ("model", "contract", "methods", "theta_list", "numeric", "mc", "output")


def _section(data: dict, name: str, allowed) -> dict:
    sec = data.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ConfigError(name, f"expected an object, got {type(sec).__name__}")
    unknown = sorted(set(sec) - set(allowed))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}", f"unknown key (allowed: {', '.join(allowed)})")
    return sec


def _number(value, path: str, kind=float):
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a number, got {value!r}")
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {value!r}") from None
    if kind is int and out != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return out


def _build(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("", "configuration must be a JSON object")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(unknown[0], f"unknown key (allowed: {', '.join(_SECTIONS)})")

    model_in = _section(data, "model", _MODEL_KEYS)
    contract_in = _section(data, "contract", _CONTRACT_KEYS)
    try:
        model = ModelParams(**model_in)
    except ParameterError as e:
        raise ConfigError(f"model.{e.field}", str(e).split(": ", 1)[-1]) from None
    try:
        contract = ContractParams(**contract_in)
    except ParameterError as e:
        raise ConfigError(f"contract.{e.field}", str(e).split(": ", 1)[-1]) from None

    methods_in = data.get("methods", list(METHODS))
    if isinstance(methods_in, str):
        methods_in = [m for m in methods_in.split(",") if m]
    if not isinstance(methods_in, (list, tuple)) or not methods_in:
        raise ConfigError("methods", "expected a non-empty list of method tags")
    num_in = _section(data, "numeric", [f.name for f in fields(NumericConfig)])
    order = _number(num_in.get("taylor_order", 2), "numeric.taylor_order", int)
    methods = []
    for i, m in enumerate(methods_in):
        tag = f"taylor{order}" if m == "taylor" else m
        if tag not in METHODS:
            raise ConfigError(f"methods[{i}]", f"unknown method {m!r} (allowed: {', '.join(METHODS)})")
        if tag not in methods:
            methods.append(tag)

    thetas_in = data.get("theta_list", list(BENCHMARK_THETAS.values()))
    if isinstance(thetas_in, (str, int, float)):
        thetas_in = [thetas_in]
    if not isinstance(thetas_in, (list, tuple)) or not thetas_in:
        raise ConfigError("theta_list", "expected a non-empty list of angles")
    thetas = tuple(parse_angle(t, f"theta_list[{i}]") for i, t in enumerate(thetas_in))

    num = dict(num_in)
    if "interval" in num:
        iv = num["interval"]
        if isinstance(iv, str):
            iv = iv.split(",")
        if not isinstance(iv, (list, tuple)) or len(iv) != 2:
            raise ConfigError("numeric.interval", f"expected [a, b], got {iv!r}")
        num["interval"] = tuple(_number(x, "numeric.interval") for x in iv)
    for key in ("fft_n", "spline_knots", "taylor_order"):
        if key in num:
            num[key] = _number(num[key], f"numeric.{key}", int)
    if num.get("vstar_override") is not None:
        num["vstar_override"] = _number(num["vstar_override"], "numeric.vstar_override")
    numeric = NumericConfig(**num)

    mc_in = dict(_section(data, "mc", [f.name for f in fields(SimConfig)]))
    for key in ("npaths", "seed", "jobs", "emit_paths"):
        if mc_in.get(key) is not None:
            mc_in[key] = _number(mc_in[key], f"mc.{key}", int)
    if mc_in.get("delta") is not None:
        mc_in["delta"] = _number(mc_in["delta"], "mc.delta")
    if "weights" in mc_in and mc_in["weights"] not in WEIGHT_SCHEMES:
        raise ConfigError("mc.weights", f"must be one of {', '.join(WEIGHT_SCHEMES)}")
    try:
        mc = SimConfig(**mc_in)
    except ValueError as e:
        raise ConfigError("mc", str(e)) from None
    if mc.npaths < 100:
        raise ConfigError("mc.npaths", "must be >= 100 for a meaningful confidence interval")
    lam_min = min(model.lambdaF + model.lambdaV)
    if mc.delta is not None and not mc.delta < lam_min * contract.T:
        raise ConfigError("mc.delta", f"must be below min(lambda) T = {lam_min * contract.T}")

    out_in = _section(data, "output", [f.name for f in fields(OutputConfig)])
    if "emit_figures" in out_in and not isinstance(out_in["emit_figures"], bool):
        raise ConfigError("output.emit_figures", "expected true or false")
    output = OutputConfig(**out_in)

    return RunConfig(model, contract, tuple(methods), thetas, numeric, mc, output)


def merge(base: dict, overrides: dict) -> dict:
    """Recursive dict update; override values win."""
    out = dict(base)
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the JSON file at ``path``, then ``overrides``."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError("", f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError("", f"{path}: invalid JSON ({e})") from None
    if overrides:
        if not isinstance(data, dict):
            raise ConfigError("", "configuration must be a JSON object")
        data = merge(data, overrides)
    return _build(data)
