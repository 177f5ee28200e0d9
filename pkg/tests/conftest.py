import numpy as np
import pytest

from gee_subsample import _kernels
from gee_subsample.panel import Panel


@pytest.fixture(params=_kernels.available_backends())
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    monkeypatch.setattr(_kernels, "BACKEND", request.param)
    return request.param


def make_panel(m=40, n=4, p=3, seed=0, family="gaussian", beta=None):
    """Small random panel with responses drawn from ``family``."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, n, p))
    X[:, :, 0] = 1.0
    beta = np.linspace(0.3, -0.3, p) if beta is None else np.asarray(beta)
    eta = X @ beta
    if family == "gaussian":
        y = eta + rng.standard_normal((m, n))
    elif family == "poisson":
        y = rng.poisson(np.exp(eta)).astype(float)
    else:
        y = (rng.random((m, n)) < 1 / (1 + np.exp(-eta))).astype(float)
    return Panel(tuple(str(i) for i in range(m)), X, y)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
