"""Generalized estimating equations: score, information, Fisher scoring and
the robust sandwich covariance.

Conventions
-----------
With ``W_i = phi A_i^{1/2} R A_i^{1/2}`` the dispersion is a common factor of
every term, so the score, the information and the sandwich below are all
computed with ``phi = 1``. The root of the score and the sandwich are
unaffected; ``phi`` only enters through the moment estimator of ``rho``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy import linalg

from . import _kernels
from .correlation import (
    CorrelationModel,
    CorrStructure,
    _estimate_correlation,
    estimate_dispersion,
    get_structure,
    standardize,
)
from .errors import DivergenceError, NumericalError, SingularityError
from .family import get_family

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitConfig:
    max_outer_iter: int = 50
    tol: float = 1e-6
    init: np.ndarray | None = None
    ridge: float = 0.0
    max_halvings: int = 10
    sandwich: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_outer_iter < 1:
            raise ValueError("max_outer_iter must be at least 1")


@dataclass
class Diagnostics:
    rho_clamps: int = 0
    phi_substitutions: int = 0
    ridge_fallbacks: int = 0
    step_halvings: int = 0
    init_iterations: int = 0
    score_norm_init: float = float("nan")
    score_norm_final: float = float("nan")

    def as_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class FitResult:
    beta: np.ndarray
    iterations: int
    converged: bool
    corr: CorrelationModel
    sandwich: np.ndarray | None = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    plan: Any = None

    @property
    def phi(self) -> float:
        return self.corr.phi

    @property
    def rho(self) -> np.ndarray:
        return self.corr.rho

    @property
    def structure(self) -> CorrStructure:
        return self.corr.structure

    def to_dict(self) -> dict[str, Any]:
        out = {
            "beta": self.beta.tolist(),
            "phi": self.phi,
            "rho": self.rho.tolist(),
            "structure": self.structure.value,
            "converged": self.converged,
            "iterations": self.iterations,
            "sandwich": None if self.sandwich is None else self.sandwich.tolist(),
            "diagnostics": self.diagnostics.as_dict(),
        }
        if self.plan is not None:
            out["plan"] = self.plan.summary()
        return out


def _weights(panel, weights) -> np.ndarray:
    if weights is None:
        return np.ones(panel.m)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (panel.m,):
        raise ValueError(f"weights must have shape ({panel.m},), got {w.shape}")
    if not (np.all(np.isfinite(w)) and np.all(w > 0)):
        raise ValueError("weights must be finite and strictly positive")
    return w


def _accumulate(panel, beta, family, Rinv, w, want_vectors=False):
    scale, resid = standardize(panel, beta, family)
    return _kernels.accumulate(panel.X, scale, resid, Rinv, w, want_vectors)


def score(panel, beta, family, corr: CorrelationModel, weights=None) -> np.ndarray:
    """Weighted GEE score ``sum_i w_i D_i' A_i^{-1/2} R^{-1} A_i^{-1/2} S_i``."""
    family = get_family(family)
    return _accumulate(panel, beta, family, corr.inverse(), _weights(panel, weights))[0]


def information(panel, beta, family, corr: CorrelationModel, weights=None) -> np.ndarray:
    """Weighted information ``sum_i w_i D_i' A_i^{-1/2} R^{-1} A_i^{-1/2} D_i``."""
    family = get_family(family)
    return _accumulate(panel, beta, family, corr.inverse(), _weights(panel, weights))[1]


def estimate_corr_model(panel, beta, family, structure, diag: Diagnostics | None = None):
    """Moment estimates of phi and rho at ``beta``, as a :class:`CorrelationModel`."""
    resid = standardize(panel, beta, get_family(family))[1]
    return _corr_from_residuals(resid, get_structure(structure), panel.p, diag)


def _corr_from_residuals(resid, structure, p, diag):
    phi = estimate_dispersion(resid, p)
    if phi <= 0:
        warnings.warn("zero dispersion estimate (perfect fit); using phi = 1", stacklevel=3)
        phi = 1.0
        if diag is not None:
            diag.phi_substitutions += 1
    rho, clamped = _estimate_correlation(resid, structure, phi, p)
    if clamped and diag is not None:
        diag.rho_clamps += 1
    return CorrelationModel(structure, rho, phi, resid.shape[1])


# Cholesky pivots below this fraction of the largest diagonal entry are
# treated as a rank-deficient factorization.
PIVOT_RTOL = 1e-12


def _cholesky(H, ridge=0.0):
    p = H.shape[0]
    A = H + ridge * np.eye(p) if ridge else H
    try:
        c = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return None
    if np.min(np.diag(c[0])) ** 2 <= PIVOT_RTOL * np.max(np.diag(A)):
        return None
    return c


def _solve(H, U, config: FitConfig, diag: Diagnostics):
    c = _cholesky(H, config.ridge)
    if c is None:
        p = H.shape[0]
        tr = np.trace(H)
        if not (np.isfinite(tr) and tr > 0):
            raise SingularityError("information matrix is zero or non-finite: singular design")
        diag.ridge_fallbacks += 1
        c = _cholesky(H, config.ridge + 1e-8 * tr / p)
        if c is None:
            raise SingularityError("information matrix is singular even with ridge fallback")
    return linalg.cho_solve(c, U, check_finite=False)


def _try_point(panel, beta, family, Rinv, w):
    """Standardized values, sums and score norm at ``beta``; norm is inf on failure."""
    try:
        state = standardize(panel, beta, family)
        sums = _kernels.accumulate(panel.X, *state, Rinv, w)
    except NumericalError:
        return None, None, np.inf
    val = float(np.linalg.norm(sums[0]))
    return state, sums, (val if np.isfinite(val) else np.inf)


def _fisher_scoring(panel, family, structure, w, beta, config, diag):
    p = panel.p
    beta = np.array(beta, dtype=np.float64)
    state = standardize(panel, beta, family)
    cached = None  # (Rinv, score, info) evaluated at the current beta
    converged = False
    k = 0
    for k in range(1, config.max_outer_iter + 1):
        scale, resid = state
        corr = _corr_from_residuals(resid, structure, p, diag)
        Rinv = corr.inverse()
        if cached is not None and np.array_equal(cached[0], Rinv):
            U, H = cached[1], cached[2]
        else:
            U, H, _ = _kernels.accumulate(panel.X, scale, resid, Rinv, w)
        norm0 = float(np.linalg.norm(U))
        if k == 1 and np.isnan(diag.score_norm_init):
            diag.score_norm_init = norm0
        delta = _solve(H, U, config, diag)
        if not np.all(np.isfinite(delta)):
            raise DivergenceError(f"non-finite Fisher step at iteration {k}", iteration=k)

        # step-halving guard, skipped once the step is below tolerance; the
        # accepted candidate's standardized values seed the next iteration
        candidate = sums = None
        if np.max(np.abs(delta)) >= config.tol:
            for h in range(config.max_halvings + 1):
                candidate, sums, norm1 = _try_point(panel, beta + delta, family, Rinv, w)
                if norm1 <= norm0 or h == config.max_halvings:
                    break
                delta = 0.5 * delta
                diag.step_halvings += 1

        beta = beta + delta
        if not np.all(np.isfinite(beta)):
            raise DivergenceError(f"non-finite estimate at iteration {k}", iteration=k)
        if np.max(np.abs(delta)) < config.tol:
            converged = True
            break
        if candidate is not None:
            # sums stay valid next iteration if the working correlation does not move
            state, cached = candidate, (Rinv, sums[0], sums[1])
        else:
            state, cached = standardize(panel, beta, family), None
    return beta, k, converged


def fit(panel, family, structure="independent", weights=None, config: FitConfig | None = None) -> FitResult:
    """Fit a marginal model by (weighted) GEE with modified Fisher scoring.

    Each outer iteration re-estimates ``phi`` and ``rho`` from the current
    Pearson residuals, then takes one Fisher step solving
    ``information @ step = score``; a step that increases the score norm is
    halved up to ``config.max_halvings`` times. Iteration stops when the
    largest coefficient change is below ``config.tol``.

    Without ``config.init`` the working-structure fit starts from the
    independence-equation estimate, itself started at zero.

    The returned sandwich is ``B^{-1} M B^{-1}`` with
    ``B = sum w_i D'W^{-1}D`` and ``M = sum w_i^2 D'W^{-1}SS'W^{-1}D``,
    evaluated at the final estimate. For unit weights this is the usual
    robust covariance; for inverse-probability weights ``1/(r pi_i)`` it is
    the plug-in estimate of the subsample estimator's covariance.
    """
    family = get_family(family)
    structure = get_structure(structure)
    config = config or FitConfig()
    w = _weights(panel, weights)
    diag = Diagnostics()

    if config.init is not None:
        beta0 = np.asarray(config.init, dtype=np.float64)
        if beta0.shape != (panel.p,):
            raise ValueError(f"init must have shape ({panel.p},)")
    else:
        beta0 = np.zeros(panel.p)
        if structure is not CorrStructure.INDEPENDENT:
            beta0, diag.init_iterations, _ = _fisher_scoring(
                panel, family, CorrStructure.INDEPENDENT, w, beta0, config, diag
            )

    beta, iterations, converged = _fisher_scoring(
        panel, family, structure, w, beta0, config, diag
    )
    if not converged:
        log.warning("GEE did not converge in %d iterations", iterations)

    scale, resid = standardize(panel, beta, family)
    corr = _corr_from_residuals(resid, structure, panel.p, diag)
    U, H, vectors = _kernels.accumulate(
        panel.X, scale, resid, corr.inverse(), w, want_vectors=config.sandwich
    )
    diag.score_norm_final = float(np.linalg.norm(U))
    V = _sandwich_from_parts(H, vectors, w * w) if config.sandwich else None
    return FitResult(beta, iterations, converged, corr, V, diag)


def _sandwich_from_parts(bread, vectors, meat_weights):
    c = _cholesky(bread)
    if c is None:
        raise SingularityError("information matrix is singular; sandwich undefined")
    meat = (vectors * meat_weights[:, None]).T @ vectors
    Binv = linalg.cho_solve(c, np.eye(bread.shape[0]), check_finite=False)
    V = Binv @ meat @ Binv
    return 0.5 * (V + V.T)


def sandwich(panel, beta_hat, family, corr: CorrelationModel, pi, r: int) -> np.ndarray:
    """Asymptotic covariance of the subsample estimator around the full-data fit.

    ``V = Phi0^{-1} Phi Phi0^{-1}`` with
    ``Phi0 = N^{-1} sum_i D_i'W_i^{-1}D_i`` and
    ``Phi = (r N^2)^{-1} sum_i D_i'W_i^{-1}S_iS_i'W_i^{-1}D_i / pi_i``,
    summed over all subjects of ``panel``. The normalisation ``N`` cancels,
    so it is evaluated directly in the cancelled form.
    """
    family = get_family(family)
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (panel.m,) or np.any(pi <= 0):
        raise ValueError("pi must be a strictly positive vector with one entry per subject")
    if r < 1:
        raise ValueError("r must be at least 1")
    _, H, vectors = _accumulate(
        panel, beta_hat, family, corr.inverse(), np.ones(panel.m), want_vectors=True
    )
    return _sandwich_from_parts(H, vectors, 1.0 / (r * pi))


def with_init(config: FitConfig | None, init) -> FitConfig:
    return replace(config or FitConfig(), init=np.asarray(init, dtype=np.float64))


def normalization(m: int, n: int) -> float:
    """``N = m / sqrt(n)``, the scaling of ``Phi0`` and ``Phi``."""
    return m / np.sqrt(n)
