"""Synthetic longitudinal panels: linear, count and binary responses.

Covariate rows are ``N(0, Sigma)`` with ``Sigma_kj = 0.5^|k-j|``. Within-
subject dependence comes from a latent ``N(0, R_T)`` vector, where ``R_T`` is
the identity or AR(1) with parameter 0.5:

* linear: ``y = X beta + eps``, ``eps`` the latent vector itself, or a
  multivariate t3 built from it with one chi-square divisor per subject;
* count and binary: Gaussian copula. The latent vector is mapped to
  uniforms and pushed through the Poisson or Bernoulli quantile function,
  so marginal means are exact and dependence is attenuated on the response
  scale.

Every subject draws from its own substream keyed by ``(seed, subject)``, so
a panel does not depend on how subjects are batched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import ConfigError
from .panel import Panel

LINEAR_BETA = (0.5, 0.5, 1.0, 1.0, 2.0, 2.0, 10.0, 10.0)
GLM_BETA = (-0.5, -0.5, -1.0, 1.0, 0.5, 0.5)
COVARIATE_CORR = 0.5
AR1_ALPHA = 0.5
MAX_POISSON_MEAN = 1e8


class SimCase(str, enum.Enum):
    LINEAR = "linear"
    COUNT = "count"
    BINARY = "binary"


_CASE_NUMBERS = {1: SimCase.LINEAR, 2: SimCase.COUNT, 3: SimCase.BINARY}
FAMILY_OF_CASE = {SimCase.LINEAR: "gaussian", SimCase.COUNT: "poisson", SimCase.BINARY: "binomial"}


def get_case(case) -> SimCase:
    if isinstance(case, SimCase):
        return case
    try:
        return _CASE_NUMBERS[int(case)]
    except (ValueError, KeyError, TypeError):
        pass
    try:
        return SimCase(str(case).lower())
    except ValueError:
        raise ConfigError(f"unknown simulation case {case!r}") from None


@dataclass(frozen=True)
class SimConfig:
    case: SimCase = SimCase.LINEAR
    m: int = 10000
    n: int = 5
    error_dist: str = "mvnormal"
    true_corr: str = "ar1_05"
    beta0: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "case", get_case(self.case))
        dist = {"normal": "mvnormal", "t3": "mvt3"}.get(self.error_dist, self.error_dist)
        if dist not in ("mvnormal", "mvt3"):
            raise ConfigError(f"unknown error distribution {self.error_dist!r}")
        if dist == "mvt3" and self.case is not SimCase.LINEAR:
            raise ConfigError("t3 errors only apply to the linear case")
        corr = {"ind": "independent", "ar1": "ar1_05"}.get(self.true_corr, self.true_corr)
        if corr not in ("independent", "ar1_05"):
            raise ConfigError(f"unknown true correlation {self.true_corr!r}")
        if self.m < 1 or self.n < 1:
            raise ConfigError("m and n must be positive")
        beta = self.beta0
        if beta is None:
            beta = LINEAR_BETA if self.case is SimCase.LINEAR else GLM_BETA
        object.__setattr__(self, "error_dist", dist)
        object.__setattr__(self, "true_corr", corr)
        object.__setattr__(self, "beta0", tuple(float(b) for b in beta))

    @property
    def p(self) -> int:
        return len(self.beta0)

    @property
    def family(self) -> str:
        return FAMILY_OF_CASE[self.case]


def covariate_cov(p: int) -> np.ndarray:
    k = np.arange(p)
    return COVARIATE_CORR ** np.abs(np.subtract.outer(k, k))


def true_correlation(name: str, n: int) -> np.ndarray:
    if name == "independent":
        return np.eye(n)
    k = np.arange(n)
    return AR1_ALPHA ** np.abs(np.subtract.outer(k, k))


def subject_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))


def _draw(m, n, p, seed, latent_chol=None, chi2_df=None):
    """Covariates plus optional latent vectors, subject by subject.

    Each subject draws its covariates first, so covariates depend only on
    ``(seed, i)`` regardless of what else is drawn.
    """
    Lx = np.linalg.cholesky(covariate_cov(p))
    X = np.empty((m, n, p))
    Z = np.empty((m, n)) if latent_chol is not None else None
    W = np.empty(m) if chi2_df else None
    for i in range(m):
        rng = subject_rng(seed, i)
        X[i] = rng.standard_normal((n, p)) @ Lx.T
        if Z is not None:
            Z[i] = latent_chol @ rng.standard_normal(n)
        if W is not None:
            W[i] = rng.chisquare(chi2_df)
    return X, Z, W


def gen_covariates(m: int, n: int, p: int, seed: int = 0) -> np.ndarray:
    """``(m, n, p)`` array of independent ``N(0, Sigma)`` covariate rows."""
    if p < 1:
        raise ConfigError("p must be at least 1")
    return _draw(m, n, p, seed)[0]


def _ids(m):
    return tuple(str(i + 1) for i in range(m))


def gen_case1(cfg: SimConfig) -> Panel:
    if cfg.case is not SimCase.LINEAR:
        raise ConfigError("gen_case1 needs a linear configuration")
    L = np.linalg.cholesky(true_correlation(cfg.true_corr, cfg.n))
    df = 3 if cfg.error_dist == "mvt3" else None
    X, Z, W = _draw(cfg.m, cfg.n, cfg.p, cfg.seed, L, df)
    eps = Z if W is None else Z / np.sqrt(W / df)[:, None]
    return Panel(_ids(cfg.m), X, X @ np.asarray(cfg.beta0) + eps)


def _copula_panel(cfg: SimConfig):
    L = np.linalg.cholesky(true_correlation(cfg.true_corr, cfg.n))
    X, Z, _ = _draw(cfg.m, cfg.n, cfg.p, cfg.seed, L)
    return X, X @ np.asarray(cfg.beta0), Z


def _poisson_isf_log(logq: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Smallest k with ``log P(Y > k) <= logq``, by integer bisection.

    Used where ``stats.poisson.isf`` gives up (tail mass below ~1e-17).
    """
    lo = np.zeros_like(mu)
    hi = np.ceil(mu) + 1.0
    while True:
        short = stats.poisson.logsf(hi, mu) > logq
        if not short.any():
            break
        hi = np.where(short, 2.0 * hi, hi)
    while np.any(hi - lo > 1):
        mid = np.floor(0.5 * (lo + hi))
        ok = stats.poisson.logsf(mid, mu) <= logq
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    # lo itself qualifies only when it is 0
    return np.where(stats.poisson.logsf(lo, mu) <= logq, lo, hi)


def poisson_from_latent(z: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Poisson(mu) quantile of Phi(z), using the upper tail for z > 0."""
    z, mu = np.broadcast_arrays(np.asarray(z, dtype=np.float64), np.asarray(mu, dtype=np.float64))
    lower = stats.poisson.ppf(stats.norm.cdf(np.minimum(z, 0.0)), mu)
    zu = np.maximum(z, 0.0)
    upper = stats.poisson.isf(stats.norm.sf(zu), mu)
    bad = (z > 0) & ~np.isfinite(upper)
    if bad.any():
        upper = upper.copy()
        upper[bad] = _poisson_isf_log(stats.norm.logsf(zu[bad]), mu[bad])
    return np.where(z <= 0, lower, upper)


def gen_case2(cfg: SimConfig) -> Panel:
    if cfg.case is not SimCase.COUNT:
        raise ConfigError("gen_case2 needs a count configuration")
    X, eta, Z = _copula_panel(cfg)
    mu = np.exp(np.minimum(eta, 700.0))
    if np.any(mu > MAX_POISSON_MEAN):
        raise ConfigError(
            f"Poisson mean {mu.max():.3g} exceeds {MAX_POISSON_MEAN:g}; use a smaller beta0"
        )
    return Panel(_ids(cfg.m), X, poisson_from_latent(Z, mu))


def gen_case3(cfg: SimConfig) -> Panel:
    if cfg.case is not SimCase.BINARY:
        raise ConfigError("gen_case3 needs a binary configuration")
    X, eta, Z = _copula_panel(cfg)
    # 1{Phi(z) < mu}  <=>  z < Phi^{-1}(mu)
    y = (Z < special.ndtri(special.expit(eta))).astype(np.float64)
    return Panel(_ids(cfg.m), X, y)


def simulate(cfg: SimConfig) -> Panel:
    return {SimCase.LINEAR: gen_case1, SimCase.COUNT: gen_case2, SimCase.BINARY: gen_case3}[
        cfg.case
    ](cfg)
