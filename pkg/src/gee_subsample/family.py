"""Canonical-link GLM families: Gaussian/identity, Poisson/log, binomial/logit.

All functions accept scalars or arrays and are vectorised over ``eta``/``mu``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, NumericRangeError

# Logistic means are kept inside [LOGIT_EPS, 1 - LOGIT_EPS] so the variance
# function never hits zero for extreme linear predictors.
LOGIT_EPS = 2.0**-52
# exp overflows float64 beyond this.
_LOG_MAX = np.log(np.finfo(np.float64).max)


class FamilyKind(str, enum.Enum):
    GAUSSIAN = "gaussian_identity"
    POISSON = "poisson_log"
    BINOMIAL = "binomial_logit"


_ALIASES = {
    "gaussian": FamilyKind.GAUSSIAN,
    "normal": FamilyKind.GAUSSIAN,
    "poisson": FamilyKind.POISSON,
    "binomial": FamilyKind.BINOMIAL,
    "logistic": FamilyKind.BINOMIAL,
}


_CODES = {FamilyKind.GAUSSIAN: 0, FamilyKind.POISSON: 1, FamilyKind.BINOMIAL: 2}


@dataclass(frozen=True)
class FamilySpec:
    kind: FamilyKind

    @property
    def dispersion_fixed(self) -> bool:
        """Poisson and binomial fix phi = 1; Gaussian estimates it."""
        return self.kind is not FamilyKind.GAUSSIAN

    @property
    def code(self) -> int:
        """Integer tag understood by the compiled kernels."""
        return _CODES[self.kind]

    @property
    def name(self) -> str:
        return {
            FamilyKind.GAUSSIAN: "gaussian",
            FamilyKind.POISSON: "poisson",
            FamilyKind.BINOMIAL: "binomial",
        }[self.kind]

    def mean(self, eta):
        eta = np.asarray(eta, dtype=np.float64)
        if self.kind is FamilyKind.GAUSSIAN:
            return eta.copy() if eta.ndim else eta[()]
        if self.kind is FamilyKind.POISSON:
            if np.any(eta > _LOG_MAX):
                raise NumericRangeError(
                    f"log-link mean overflows: max eta = {float(np.max(eta)):.6g}"
                )
            return np.exp(eta)
        with np.errstate(over="ignore"):
            mu = 1.0 / (1.0 + np.exp(-eta))
        return np.clip(mu, LOGIT_EPS, 1.0 - LOGIT_EPS)

    def mean_deriv(self, eta):
        """Derivative of the inverse link with respect to eta."""
        eta = np.asarray(eta, dtype=np.float64)
        if self.kind is FamilyKind.GAUSSIAN:
            out = np.ones_like(eta)
            return out if out.ndim else out[()]
        mu = self.mean(eta)
        if self.kind is FamilyKind.POISSON:
            return mu
        return mu * (1.0 - mu)

    def variance(self, mu):
        """Variance function nu(mu); the dispersion is applied by callers."""
        mu = np.asarray(mu, dtype=np.float64)
        if self.kind is FamilyKind.GAUSSIAN:
            out = np.ones_like(mu)
            return out if out.ndim else out[()]
        if self.kind is FamilyKind.POISSON:
            if np.any(mu <= 0):
                raise DomainError("Poisson variance needs mu > 0")
            return mu.copy() if mu.ndim else mu[()]
        if np.any((mu <= 0) | (mu >= 1)):
            raise DomainError("binomial variance needs 0 < mu < 1")
        return mu * (1.0 - mu)


GAUSSIAN = FamilySpec(FamilyKind.GAUSSIAN)
POISSON = FamilySpec(FamilyKind.POISSON)
BINOMIAL = FamilySpec(FamilyKind.BINOMIAL)


def get_family(name: str | FamilySpec) -> FamilySpec:
    """Resolve ``"gaussian" | "poisson" | "binomial"`` (or a full kind name)."""
    if isinstance(name, FamilySpec):
        return name
    key = str(name).lower()
    if key in _ALIASES:
        return FamilySpec(_ALIASES[key])
    try:
        return FamilySpec(FamilyKind(key))
    except ValueError:
        raise ConfigError(f"unknown family {name!r}") from None


def mean(family: FamilySpec, eta):
    return family.mean(eta)


def mean_deriv(family: FamilySpec, eta):
    return family.mean_deriv(eta)


def variance(family: FamilySpec, mu):
    return family.variance(mu)
