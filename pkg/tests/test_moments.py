import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ouexchange.moments import (ConvergenceError, center_moments, constrained_centered_moments,
                                constrained_cf, constrained_raw_moments, pdf_fft,
                                uncenter_moments, unconstrained_moments, window_raw_moments)
from ouexchange.model import ModelParams

from conftest import within_se

BENCH_ANGLES = [math.pi / 6, math.pi / 3, math.pi / 2, math.pi]


@pytest.fixture(scope="module")
def density(bench_model):
    return pdf_fft(bench_model, 1.0, (0.0, 5.0), 4096)


@pytest.mark.parametrize("theta", BENCH_ANGLES + [0.0, 2.2])
def test_benchmark_first_moments(theta):
    ms = unconstrained_moments(ModelParams(theta=theta), 1.0)
    assert math.isclose(ms.m11, 0.4 * math.exp(-1), rel_tol=1e-14)
    assert math.isclose(ms.m22, ms.m11, rel_tol=1e-14)
    assert abs(ms.m12) < 1e-15
    assert abs(ms.vstar - 0.294304) < 1e-6
    assert math.isclose(ms.vstar, ms.m11 + ms.m22 - 2 * ms.m12, rel_tol=1e-14)


def test_variance_nonnegativity():
    ms = unconstrained_moments(ModelParams(theta=0.7, V0=(0.2, 0.1), lambdaF=(0.5, 2.0)), 2.0)
    assert ms.m11sq >= ms.m11 ** 2 and ms.m22sq >= ms.m22 ** 2 and ms.m12sq >= ms.m12 ** 2
    assert ms.vplus_var_terms >= 0


def test_moments_vanish_as_horizon_shrinks():
    ms = unconstrained_moments(ModelParams(), 1e-9)
    for name in ("m11", "m22", "m11sq", "m1122", "vstar", "vplus_var_terms"):
        assert abs(getattr(ms, name)) < 1e-9


def test_moment_set_against_mc(bench_model, oracle_draws):
    ms = unconstrained_moments(bench_model, 1.0)
    s11, s22, s12 = oracle_draws.covariance_entries(bench_model).T
    samples = {"m11": s11, "m22": s22, "m12": s12, "m11sq": s11 ** 2, "m22sq": s22 ** 2,
               "m12sq": s12 ** 2, "m1122": s11 * s22, "m1112": s11 * s12, "m2212": s22 * s12}
    for name, x in samples.items():
        ok, se = within_se(x.mean(), x, getattr(ms, name))
        assert ok, (name, x.mean(), getattr(ms, name), se)
    v = s11 + s22 - 2 * s12
    assert within_se(((v - ms.vstar) ** 2).mean(), (v - ms.vstar) ** 2, ms.vplus_var_terms)[0]


def test_constrained_cf_examples(bench_model, oracle_draws):
    assert constrained_cf(bench_model, 1.0, 0.7, (1.0, 1.0)) == 0
    p = constrained_cf(bench_model, 1.0, 0.0, (0.0, 5.0))
    assert abs(p.imag) < 1e-10
    assert abs(p.real - 0.999) <= 0.001 + 1e-12  # upper edge is exactly 1
    v = oracle_draws.vplus(bench_model)
    inside = ((v >= 0) & (v < 5)).astype(float)
    assert within_se(inside.mean(), inside, p.real)[0] or abs(inside.mean() - p.real) < 1e-5
    wide = constrained_cf(bench_model, 1.0, 0.0, (-50.0, 50.0))
    assert abs(wide - 1) < 1e-4


def test_constrained_cf_matches_mc_off_zero(bench_model, oracle_draws):
    v = oracle_draws.vplus(bench_model)
    inside = (v >= 0.1) & (v < 0.4)
    for u in (1.0, 5.0):
        ref = constrained_cf(bench_model, 1.0, u, (0.1, 0.4))
        e = np.where(inside, np.exp(1j * u * v), 0)
        for part in (np.real, np.imag):
            assert within_se(part(e).mean(), part(e), part(ref))[0]


def test_raw_moment_examples(bench_model):
    raw = constrained_raw_moments(bench_model, 1.0, (0.0, 5.0), 3)
    ms = unconstrained_moments(bench_model, 1.0)
    assert abs(raw[0] - constrained_cf(bench_model, 1.0, 0.0, (0, 5)).real) < 1e-8
    assert abs(raw[1] - ms.vstar) <= 0.002
    assert math.isclose(raw[2], ms.vplus_second_moment_about(0.0), rel_tol=0.01)
    assert np.array_equal(constrained_raw_moments(bench_model, 1.0, (2.0, 2.0), 3), np.zeros(4))


def test_raw_moments_against_mc(bench_model, oracle_draws):
    v = oracle_draws.vplus(bench_model)
    raw = constrained_raw_moments(bench_model, 1.0, (0.2, 0.6), 3)
    for k in range(4):
        x = np.where((v >= 0.2) & (v < 0.6), v ** k, 0.0)
        assert within_se(x.mean(), x, raw[k])[0]


def test_order_limits(bench_model):
    constrained_raw_moments(bench_model, 1.0, (0.0, 5.0), 6)
    with pytest.raises(ValueError):
        constrained_raw_moments(bench_model, 1.0, (0.0, 5.0), 7)
    with pytest.raises(ValueError):
        constrained_raw_moments(bench_model, 1.0, (1.0, 0.5), 2)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.01, 1.0), st.floats(0.01, 1.5))
def test_window_additivity(a, d1, d2):
    mp = ModelParams()
    b, c = a + d1, a + d1 + d2
    whole = constrained_raw_moments(mp, 1.0, (a, c), 3)
    parts = window_raw_moments(mp, 1.0, [a, b, c], 3)
    assert np.allclose(whole, parts.sum(axis=0), rtol=0, atol=1e-8)


def test_monotone_mass(bench_model):
    edges = np.linspace(0.0, 3.0, 301)
    cells = window_raw_moments(bench_model, 1.0, edges, 0)[:, 0]
    assert np.all(cells >= -1e-10)
    assert np.all(np.diff(np.cumsum(cells)) >= -1e-10)


def test_nonzero_initial_levels_supported(oracle_draws):
    mp = ModelParams(V0=(0.1, 0.0))
    raw = constrained_raw_moments(mp, 1.0, (0.0, 5.0), 1)
    ms = unconstrained_moments(mp, 1.0)
    assert abs(raw[1] - ms.vstar) < 0.003


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=7), st.floats(-5, 5))
def test_centering_round_trip(raw, shift):
    raw = np.array(raw)
    back = uncenter_moments(center_moments(raw, shift), shift)
    scale = np.max(np.abs(raw)) * (1 + abs(shift)) ** raw.size
    assert np.allclose(back, raw, rtol=0, atol=1e-10 * max(scale, 1.0))


def test_centering_trivial_cases(bench_model):
    knots = np.linspace(0, 5, 64)
    cm = constrained_centered_moments(bench_model, 1.0, knots, 3)
    raw_cells = window_raw_moments(bench_model, 1.0, knots, 3)
    assert np.allclose(cm.centered[:, 0], raw_cells[:, 0], atol=1e-15)
    assert math.isclose(cm.centered[0, 1], raw_cells[0, 1], abs_tol=1e-15)
    assert np.all(cm.centered[:, 0] >= -1e-10)
    assert abs(cm.centered[:, 0].sum() - constrained_raw_moments(bench_model, 1.0, (0, 5), 0)[0]) < 1e-8


def test_two_routes_agree(bench_model, density):
    knots = np.linspace(0, 5, 64)
    conv = constrained_centered_moments(bench_model, 1.0, knots, 3)
    pdf = constrained_centered_moments(bench_model, 1.0, knots, 3, route="pdf", grid=density)
    assert np.abs(conv.centered - pdf.centered).max() < 1e-4
    assert np.abs(conv.raw - pdf.raw).max() < 1e-4


def test_density_grid(bench_model, density):
    assert density.x[0] == 0 and math.isclose(density.eta, 5 / 4096)
    assert np.all(density.pdf >= 0)
    assert density.raw_min >= -1e-6
    assert 0.95 <= density.mass() <= 1.001
    assert abs(density.window_mass - 0.999) <= 0.001 + 1e-12
    ms = unconstrained_moments(bench_model, 1.0)
    assert math.isclose(density.moment(1), ms.vstar, rel_tol=0.01)
    assert density.mode() < 0.5
    assert density.skewness() > 0


def test_density_ks_against_mc(bench_model, density, oracle_draws):
    v = np.sort(oracle_draws.vplus(bench_model))
    emp_hi = np.arange(1, v.size + 1) / v.size
    emp_lo = np.arange(v.size) / v.size
    F = density.cdf(v)
    assert max(np.abs(F - emp_hi).max(), np.abs(F - emp_lo).max()) < 0.01


def test_narrow_window_rejected(bench_model):
    with pytest.raises(ConvergenceError):
        pdf_fft(bench_model, 1.0, (0.0, 0.01), 1024)
    with pytest.raises(ValueError):
        pdf_fft(bench_model, 1.0, (0.0, 5.0), 1000)


def test_density_export(tmp_path, density):
    p = tmp_path / "d.csv"
    density.write_text(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,pdf" and len(lines) == 4097
