import math

import numpy as np
import pytest

from ouexchange.mc import SimConfig, simulate_factor_draws
from ouexchange.model import ContractParams, ModelParams

TABLE_THETAS = (math.pi / 6, math.pi / 3, math.pi / 2, math.pi)


@pytest.fixture(scope="session")
def bench_model():
    return ModelParams(theta=math.pi / 6)


@pytest.fixture(scope="session")
def bench_contract():
    return ContractParams()


@pytest.fixture(scope="session")
def oracle_draws(bench_model):
    """10^5 integrated-factor draws for moment/CF/distribution oracles.

    Cell-averaged weights keep the discretisation bias far below the MC error.
    """
    cfg = SimConfig(npaths=100_000, seed=7, weights="cell-average")
    return simulate_factor_draws(bench_model, 1.0, cfg)


def within_se(estimate, samples, target, k=3.0):
    """|mean(samples) - target| <= k * standard error."""
    se = np.std(samples, ddof=1) / math.sqrt(len(samples))
    return abs(estimate - target) <= k * se, se


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one acceptance line, print it, and fail the test if it did not pass."""
    def record(label: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
