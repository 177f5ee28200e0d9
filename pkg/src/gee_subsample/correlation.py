"""Working correlation structures and their moment estimators.

The estimators follow the Liang-Zeger moment construction with the ``- p``
bias correction in each denominator. Passing ``p=0`` gives the uncorrected
versions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateVarianceError,
    InsufficientDataError,
    NumericRangeError,
    SingularityError,
)
from . import _kernels
from .family import FamilySpec, get_family

# Distance kept from the open boundaries of the rho parameter space.
CLAMP_MARGIN = 1e-6
# Eigenvalue floor for projecting an indefinite unstructured estimate.
EIG_FLOOR = 1e-6


class CorrStructure(str, enum.Enum):
    INDEPENDENT = "independent"
    EXCHANGEABLE = "exchangeable"
    AR1 = "ar1"
    UNSTRUCTURED = "unstructured"


_ALIASES = {
    "ind": CorrStructure.INDEPENDENT,
    "indep": CorrStructure.INDEPENDENT,
    "identity": CorrStructure.INDEPENDENT,
    "exch": CorrStructure.EXCHANGEABLE,
    "un": CorrStructure.UNSTRUCTURED,
    "unstr": CorrStructure.UNSTRUCTURED,
}

SHORT_NAMES = {
    CorrStructure.INDEPENDENT: "ind",
    CorrStructure.EXCHANGEABLE: "exch",
    CorrStructure.AR1: "ar1",
    CorrStructure.UNSTRUCTURED: "un",
}


def get_structure(name: str | CorrStructure) -> CorrStructure:
    if isinstance(name, CorrStructure):
        return name
    key = str(name).lower()
    if key in _ALIASES:
        return _ALIASES[key]
    try:
        return CorrStructure(key)
    except ValueError:
        raise ConfigError(f"unknown correlation structure {name!r}") from None


def n_params(structure: CorrStructure, n: int) -> int:
    if structure is CorrStructure.INDEPENDENT:
        return 0
    if structure is CorrStructure.UNSTRUCTURED:
        return n * (n - 1) // 2
    return 1


@dataclass(frozen=True, eq=False)
class CorrelationModel:
    structure: CorrStructure
    rho: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phi: float = 1.0
    n: int = 1

    def __post_init__(self):
        structure = get_structure(self.structure)
        rho = np.atleast_1d(np.asarray(self.rho, dtype=np.float64)).ravel()
        if rho.size != n_params(structure, self.n):
            raise ValueError(
                f"{structure.value} with n={self.n} needs "
                f"{n_params(structure, self.n)} parameters, got {rho.size}"
            )
        if not self.phi > 0:
            raise ValueError(f"phi must be positive, got {self.phi}")
        object.__setattr__(self, "structure", structure)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def independence(cls, n: int, phi: float = 1.0) -> "CorrelationModel":
        return cls(CorrStructure.INDEPENDENT, np.zeros(0), phi, n)

    def matrix(self) -> np.ndarray:
        return correlation_matrix(self)

    def inverse(self) -> np.ndarray:
        return correlation_inverse(self)


def standardize(panel, beta, family: FamilySpec) -> tuple[np.ndarray, np.ndarray]:
    """Row scales ``g'(eta)/sqrt(nu(mu))`` and Pearson residuals, both ``(m, n)``.

    Multiplying row ``j`` of ``X_i`` by the scale gives ``A_i^{-1/2} D_i``.
    """
    return _standardize(panel, beta, family)[:2]


def _standardize(panel, beta, family):
    family = get_family(family)
    scale, resid, sd, status, bad = _kernels.standardize(panel.X, panel.y, beta, family.code)
    if status:
        i, j = divmod(bad, panel.n)
        if status == 1:
            raise NumericRangeError(
                f"log-link mean overflows at subject {i}, observation {j}"
            )
        raise DegenerateVarianceError(f"zero variance at subject {i}, observation {j}")
    return scale, resid, sd


def pearson_residuals(panel, beta, family: FamilySpec) -> np.ndarray:
    """Pearson residuals ``(y - mu) / sqrt(nu(mu))`` as an ``(m, n)`` matrix."""
    return standardize(panel, beta, family)[1]


def estimate_dispersion(residuals: np.ndarray, p: int) -> float:
    """Moment estimate ``sum(r^2) / (M - p)`` of the dispersion."""
    r = np.asarray(residuals, dtype=np.float64)
    M = r.size
    if M <= p:
        raise InsufficientDataError(f"{M} observations cannot support p={p}")
    return float(np.sum(r * r) / (M - p))


def _clamp(value: float, lower: float, upper: float) -> tuple[float, bool]:
    lo = lower * (1.0 - CLAMP_MARGIN)
    hi = upper * (1.0 - CLAMP_MARGIN)
    if value < lo:
        return lo, True
    if value > hi:
        return hi, True
    return value, False


def nearest_correlation(C: np.ndarray) -> tuple[np.ndarray, bool]:
    """Unit-diagonal, positive-definite version of a symmetric matrix.

    Returns the matrix and whether a projection was needed.
    """
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    w, V = np.linalg.eigh(C)
    if w[0] >= EIG_FLOOR:
        return C, False
    w = np.maximum(w, EIG_FLOOR)
    C = (V * w) @ V.T
    d = 1.0 / np.sqrt(np.diag(C))
    C = C * d[:, None] * d[None, :]
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    return C, True


def _estimate_correlation(residuals, structure, phi, p) -> tuple[np.ndarray, bool]:
    structure = get_structure(structure)
    r = np.asarray(residuals, dtype=np.float64)
    m, n = r.shape
    if structure is CorrStructure.INDEPENDENT:
        return np.zeros(0), False
    if not phi > 0:
        raise ValueError(f"phi must be positive, got {phi}")

    if structure is CorrStructure.EXCHANGEABLE:
        denom = m * n * (n - 1) / 2 - p
        if denom <= 0:
            raise InsufficientDataError("too few within-subject pairs for exchangeable rho")
        rowsum = r.sum(axis=1)
        pairs = 0.5 * (rowsum @ rowsum - np.sum(r * r))
        rho, clamped = _clamp(pairs / denom / phi, -1.0 / (n - 1), 1.0)
        return np.array([rho]), clamped

    if structure is CorrStructure.AR1:
        denom = m * (n - 1) - p
        if denom <= 0:
            raise InsufficientDataError("too few adjacent pairs for AR(1) rho")
        lag1 = np.sum(r[:, :-1] * r[:, 1:])
        rho, clamped = _clamp(lag1 / denom / phi, -1.0, 1.0)
        return np.array([rho]), clamped

    denom = m - p
    if denom <= 0:
        raise InsufficientDataError(f"{m} subjects cannot support p={p}")
    C = (r.T @ r) / denom / phi
    C, clamped = nearest_correlation(C)
    return C[np.triu_indices(n, 1)], clamped


def estimate_correlation(residuals, structure, phi: float, p: int) -> np.ndarray:
    """Moment estimate of the working-correlation parameters.

    Exchangeable and AR(1) estimates are clamped into their open parameter
    ranges; an indefinite unstructured estimate is projected onto the
    nearest correlation matrix. Unstructured parameters are the strict upper
    triangle in row-major order.
    """
    return _estimate_correlation(residuals, structure, phi, p)[0]


def correlation_matrix(model: CorrelationModel) -> np.ndarray:
    n = model.n
    s = model.structure
    if s is CorrStructure.INDEPENDENT:
        return np.eye(n)
    if s is CorrStructure.EXCHANGEABLE:
        rho = model.rho[0]
        R = np.full((n, n), rho)
        np.fill_diagonal(R, 1.0)
        return R
    if s is CorrStructure.AR1:
        lags = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        return model.rho[0] ** lags
    R = np.eye(n)
    iu = np.triu_indices(n, 1)
    R[iu] = model.rho
    R[(iu[1], iu[0])] = model.rho
    return R


def correlation_inverse(model: CorrelationModel) -> np.ndarray:
    """Inverse working correlation, in closed form where one exists."""
    n = model.n
    s = model.structure
    if s is CorrStructure.INDEPENDENT:
        return np.eye(n)

    if s is CorrStructure.EXCHANGEABLE:
        rho = float(model.rho[0])
        if n == 1:
            return np.ones((1, 1))
        if rho >= 1.0 or rho <= -1.0 / (n - 1):
            raise SingularityError(f"exchangeable rho={rho} is singular for n={n}")
        c = rho / (1.0 + (n - 1) * rho)
        Rinv = np.full((n, n), -c)
        Rinv[np.diag_indices(n)] += 1.0
        return Rinv / (1.0 - rho)

    if s is CorrStructure.AR1:
        rho = float(model.rho[0])
        if not -1.0 < rho < 1.0:
            raise SingularityError(f"AR(1) rho={rho} outside (-1, 1)")
        if n == 1:
            return np.ones((1, 1))
        scale = 1.0 / (1.0 - rho * rho)
        Rinv = np.zeros((n, n))
        idx = np.arange(n)
        Rinv[idx, idx] = (1.0 + rho * rho) * scale
        Rinv[0, 0] = Rinv[-1, -1] = scale
        Rinv[idx[:-1], idx[1:]] = -rho * scale
        Rinv[idx[1:], idx[:-1]] = -rho * scale
        return Rinv

    R = correlation_matrix(model)
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise SingularityError("unstructured correlation is not positive-definite") from None
    Linv = np.linalg.solve(L, np.eye(n))
    Rinv = Linv.T @ Linv
    return 0.5 * (Rinv + Rinv.T)
