import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gee_subsample import _kernels

needs_cython = pytest.mark.skipif("cython" not in _kernels.available_backends(),
                                  reason="compiled extension not built")


def inputs(seed, m=25, n=4, p=3):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, n, p))
    y = rng.poisson(1.0, (m, n)).astype(float)
    A = rng.standard_normal((n, n))
    Rinv = A @ A.T + n * np.eye(n)
    return X, y, rng.normal(0, 0.3, p), Rinv, rng.uniform(0.5, 2, m)


def test_python_backend_always_available():
    assert "python" in _kernels.available_backends()
    assert _kernels.BACKEND in _kernels.available_backends()


@needs_cython
@pytest.mark.parametrize("family", [0, 1, 2])
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_backends_agree(family, seed):
    X, y, beta, Rinv, w = inputs(seed)
    if family == 2:
        y = (y > 0).astype(float)
    c = _kernels.standardize(X, y, beta, family, backend="cython")
    py = _kernels.standardize(X, y, beta, family, backend="python")
    assert c[3:] == py[3:]
    for a, b in zip(c[:3], py[:3]):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
    for want_info in (True, False):
        ca = _kernels.accumulate(X, *c[:2], Rinv, w, True, want_info, backend="cython")
        pa = _kernels.accumulate(X, *c[:2], Rinv, w, True, want_info, backend="python")
        np.testing.assert_allclose(ca[0], pa[0], rtol=1e-11, atol=1e-12)
        np.testing.assert_allclose(ca[2], pa[2], rtol=1e-11, atol=1e-12)
        if want_info:
            np.testing.assert_allclose(ca[1], pa[1], rtol=1e-11, atol=1e-12)
        else:
            assert ca[1] is None and pa[1] is None


@needs_cython
def test_status_codes_agree():
    X, y, _, _, _ = inputs(0)
    beta = np.array([800.0, 0, 0])
    assert _kernels.standardize(X, y, beta, 1, "cython")[3:] == \
        _kernels.standardize(X, y, beta, 1, "python")[3:]
    assert _kernels.standardize(X, y, beta, 1, "python")[3] == 1


@needs_cython
def test_alias_tables_identical():
    pi = np.random.default_rng(1).dirichlet(np.ones(500))
    pc, ac = _kernels.alias_table(pi, "cython")
    pp, ap = _kernels.alias_table(pi, "python")
    np.testing.assert_array_equal(ac, ap)
    np.testing.assert_allclose(pc, pp, rtol=0, atol=1e-15)


@pytest.mark.parametrize("value,expected", [("1", "python"), ("0", None)])
def test_env_var_selects_backend(value, expected):
    env = {**os.environ, "GEE_SUBSAMPLE_PURE_PYTHON": value}
    out = subprocess.run(
        [sys.executable, "-c", "import gee_subsample; print(gee_subsample.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    ).stdout.strip()
    default = "cython" if "cython" in _kernels.available_backends() else "python"
    assert out == (expected or default)
