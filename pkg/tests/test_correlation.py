import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gee_subsample.correlation import (
    CLAMP_MARGIN,
    CorrelationModel,
    CorrStructure,
    correlation_inverse,
    correlation_matrix,
    estimate_correlation,
    estimate_dispersion,
    get_structure,
    nearest_correlation,
    pearson_residuals,
)
from gee_subsample.errors import (
    ConfigError,
    DegenerateVarianceError,
    InsufficientDataError,
    SingularityError,
)
from gee_subsample.family import BINOMIAL, GAUSSIAN, POISSON
from gee_subsample.panel import Panel

RHO_GRID = [-0.9, -0.5, -0.2, 0.0, 0.1, 0.3, 0.5, 0.7, 0.95]

# residuals with hand-computed moments (m=2, n=3)
R2 = np.array([[1.0, -1.0, 2.0], [0.0, 1.0, 1.0]])


def test_dispersion_oracle():
    # sum r^2 = 1+1+4+0+1+1 = 8, M - p = 6 - 2
    assert estimate_dispersion(R2, 2) == 2.0
    with pytest.raises(InsufficientDataError):
        estimate_dispersion(R2, 6)


def test_exchangeable_oracle():
    r = np.array([[1.0, 2.0, 3.0], [1.0, 1.0, 1.0]])
    # pairs = (2+3+6) + (1+1+1) = 14; denominator 2*3 - 1 = 5; phi = 10
    assert estimate_correlation(r, "exchangeable", 10.0, 1)[0] == pytest.approx(0.28)


def test_ar1_oracle():
    # lag-1 products: (1*-1 + -1*2) + (0*1 + 1*1) = -2; denominator 2*2 - 1 = 3; phi 2
    assert estimate_correlation(R2, "ar1", 2.0, 1)[0] == pytest.approx(-1 / 3)


def test_unstructured_oracle():
    # r'r / (m - p) / phi with m - p = 1, phi = 10
    rho = estimate_correlation(R2, "unstructured", 10.0, 1)
    np.testing.assert_allclose(rho, [-0.1, 0.2, -0.1])


def test_independent_has_no_parameters():
    assert estimate_correlation(R2, "ind", 1.0, 1).size == 0


def test_clamping_to_open_range():
    r = np.array([[1.0, 1.0], [1.0, 1.0], [-1.0, -1.0]])
    # raw exchangeable estimate: 3 / (3 - 0) / 0.5 = 2 -> clamped below 1
    rho = estimate_correlation(r, "exch", 0.5, 0)[0]
    assert rho == pytest.approx(1 - CLAMP_MARGIN)
    assert rho < 1
    rho = estimate_correlation(-r * [1, -1], "ar1", 0.5, 0)[0]
    assert rho == pytest.approx(-(1 - CLAMP_MARGIN))


def test_insufficient_pairs():
    r = np.ones((1, 2))
    with pytest.raises(InsufficientDataError):
        estimate_correlation(r, "exchangeable", 1.0, 1)
    with pytest.raises(InsufficientDataError):
        estimate_correlation(r, "ar1", 1.0, 1)
    with pytest.raises(InsufficientDataError):
        estimate_correlation(r, "unstructured", 1.0, 1)


@pytest.mark.parametrize("n", range(2, 9))
@pytest.mark.parametrize("rho", RHO_GRID)
def test_closed_form_inverses_match_dense(n, rho):
    for s in ("exchangeable", "ar1"):
        if s == "exchangeable" and rho <= -1 / (n - 1):
            continue
        model = CorrelationModel(s, [rho], 1.0, n)
        R = correlation_matrix(model)
        np.testing.assert_allclose(correlation_inverse(model), np.linalg.inv(R), atol=1e-10, rtol=0)


def test_ar1_matrix_oracle():
    R = CorrelationModel("ar1", [0.5], 1.0, 3).matrix()
    np.testing.assert_array_equal(R, [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])


def test_unstructured_inverse_and_layout():
    model = CorrelationModel("un", [0.1, 0.2, 0.3], 1.0, 3)
    R = model.matrix()
    assert R[0, 1] == 0.1 and R[0, 2] == 0.2 and R[1, 2] == 0.3
    np.testing.assert_allclose(model.inverse() @ R, np.eye(3), atol=1e-12)


def test_singular_structures():
    with pytest.raises(SingularityError):
        correlation_inverse(CorrelationModel("exch", [-0.5], 1.0, 3))
    with pytest.raises(SingularityError):
        correlation_inverse(CorrelationModel("exch", [1.0], 1.0, 3))
    with pytest.raises(SingularityError):
        correlation_inverse(CorrelationModel("ar1", [1.0], 1.0, 3))
    with pytest.raises(SingularityError):
        correlation_inverse(CorrelationModel("un", [0.9, 0.9, -0.9], 1.0, 3))


def test_model_validation_and_names():
    with pytest.raises(ValueError):
        CorrelationModel("ar1", [0.1, 0.2], 1.0, 3)
    with pytest.raises(ValueError):
        CorrelationModel("ind", [], 0.0, 3)
    assert get_structure("exch") is CorrStructure.EXCHANGEABLE
    with pytest.raises(ConfigError):
        get_structure("toeplitz")


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-1, 1)))
def test_nearest_correlation_is_valid(A):
    C, _ = nearest_correlation(A + A.T)
    np.testing.assert_allclose(np.diag(C), 1.0)
    np.testing.assert_allclose(C, C.T)
    assert np.linalg.eigvalsh(C)[0] > 0


def test_nearest_correlation_leaves_valid_matrix():
    C = np.array([[1, 0.3], [0.3, 1]])
    out, projected = nearest_correlation(C.copy())
    assert not projected
    np.testing.assert_array_equal(out, C)


def test_pearson_residuals_oracle():
    X = np.array([[[1.0], [1.0]]])
    y = np.array([[1.0, 0.0]])
    P = Panel(("a",), X, y)
    beta = np.array([np.log(3.0)])  # mu = 0.75, sd = sqrt(0.1875)
    r = pearson_residuals(P, beta, BINOMIAL)
    sd = np.sqrt(0.1875)
    np.testing.assert_allclose(r, [[0.25 / sd, -0.75 / sd]], rtol=1e-14)
    np.testing.assert_allclose(pearson_residuals(P, np.array([0.0]), GAUSSIAN), [[1.0, 0.0]])


def test_degenerate_variance_names_cell():
    X = np.array([[[0.0]], [[-800.0]]])
    y = np.zeros((2, 1))
    P = Panel(("a", "b"), X, y)
    with pytest.raises(DegenerateVarianceError, match="subject 1, observation 0"):
        pearson_residuals(P, np.array([1.0]), POISSON)
