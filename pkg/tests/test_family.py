import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gee_subsample.errors import ConfigError, DomainError, NumericRangeError
from gee_subsample.family import (
    BINOMIAL,
    GAUSSIAN,
    LOGIT_EPS,
    POISSON,
    get_family,
    mean,
    mean_deriv,
    variance,
)

# hand-computed values
ORACLE = [
    (GAUSSIAN, 1.3, 1.3, 1.0, 1.0),
    (POISSON, math.log(2.0), 2.0, 2.0, 2.0),
    (POISSON, 0.0, 1.0, 1.0, 1.0),
    (BINOMIAL, 0.0, 0.5, 0.25, 0.25),
    (BINOMIAL, math.log(3.0), 0.75, 0.1875, 0.1875),
]


@pytest.mark.parametrize("fam,eta,mu,dmu,var", ORACLE)
def test_oracle_values(fam, eta, mu, dmu, var):
    assert mean(fam, eta) == pytest.approx(mu, rel=1e-15)
    assert mean_deriv(fam, eta) == pytest.approx(dmu, rel=1e-15)
    assert variance(fam, mu) == pytest.approx(var, rel=1e-15)


def test_logit_saturates():
    assert mean(BINOMIAL, -800.0) == LOGIT_EPS
    assert mean(BINOMIAL, 800.0) == 1.0 - LOGIT_EPS
    assert variance(BINOMIAL, mean(BINOMIAL, 800.0)) > 0


def test_log_link_overflow():
    with pytest.raises(NumericRangeError):
        mean(POISSON, 710.0)
    assert np.isfinite(mean(POISSON, 709.0))


@pytest.mark.parametrize("fam,mu", [(BINOMIAL, 0.0), (BINOMIAL, 1.0), (BINOMIAL, 1.5),
                                    (POISSON, 0.0), (POISSON, -1.0)])
def test_variance_domain(fam, mu):
    with pytest.raises(DomainError):
        variance(fam, mu)


def test_lookup_and_aliases():
    assert get_family("logistic") is not None and get_family("logistic") == BINOMIAL
    assert get_family("poisson_log") == POISSON
    assert get_family(GAUSSIAN) is GAUSSIAN
    assert not GAUSSIAN.dispersion_fixed and POISSON.dispersion_fixed
    with pytest.raises(ConfigError):
        get_family("gamma")


def test_vectorised_shapes():
    eta = np.linspace(-2, 2, 12).reshape(3, 4)
    for fam in (GAUSSIAN, POISSON, BINOMIAL):
        assert mean(fam, eta).shape == (3, 4)
        assert mean_deriv(fam, eta).shape == (3, 4)


@given(st.floats(-30, 30), st.sampled_from([GAUSSIAN, POISSON, BINOMIAL]))
def test_canonical_link_identity(eta, fam):
    # canonical links: d mu / d eta equals the variance function
    mu = mean(fam, eta)
    assert mean_deriv(fam, eta) == pytest.approx(variance(fam, mu), rel=1e-12)


@given(st.floats(-20, 20), st.sampled_from([GAUSSIAN, POISSON, BINOMIAL]))
def test_derivative_matches_finite_difference(eta, fam):
    h = 1e-6
    fd = (mean(fam, eta + h) - mean(fam, eta - h)) / (2 * h)
    # central difference loses ~eps/h absolute accuracy
    assert mean_deriv(fam, eta) == pytest.approx(fd, rel=1e-5, abs=1e-9)
