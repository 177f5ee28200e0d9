"""Optimal subsampling for GEE on large panels.

Pipeline (:func:`subsample_fit`):

1. fit an independence GEE on a simple random pilot sample of ``r0``
   subjects, giving ``beta0``;
2. at ``beta0``, estimate the working correlation on the full panel and
   compute per-subject sampling probabilities;
3. draw ``r`` subjects with replacement and solve the inverse-probability
   weighted GEE on them, starting from ``beta0``.

Probabilities are proportional to ``||D_i' W_i^{-1} S_i||`` (``mV``) or to
``||Phi0^{-1} D_i' W_i^{-1} S_i||`` (``mVc``), with residual magnitudes
floored at ``delta`` so no subject gets probability zero.
"""

from __future__ import annotations

import enum
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .correlation import CorrelationModel, _standardize, get_structure
from .errors import (
    ConfigError,
    DegenerateScoresError,
    NumericalError,
    PilotError,
    SingularityError,
)
from .family import get_family
from .gee import FitConfig, FitResult, _corr_from_residuals, fit, information, with_init

DEFAULT_DELTA = 1e-4


class SamplingMethod(str, enum.Enum):
    UNIFORM = "uniform"
    MV = "mV"
    MVC = "mVc"


def get_method(name: str | SamplingMethod) -> SamplingMethod:
    if isinstance(name, SamplingMethod):
        return name
    for method in SamplingMethod:
        if str(name).lower() == method.value.lower():
            return method
    raise ConfigError(f"unknown sampling method {name!r}")


class SmallSubsampleWarning(UserWarning):
    """Subsample size is not large relative to n**2."""


@dataclass(frozen=True, eq=False)
class SamplingPlan:
    method: SamplingMethod
    pi: np.ndarray
    delta: float = DEFAULT_DELTA
    r0: int = 0
    r: int = 1
    seed: int | None = None
    indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    pilot_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    mvc_fallback: bool = False
    literal_floor: bool = False

    @property
    def weights(self) -> np.ndarray:
        """Inverse-probability weights ``1 / (r pi_i)`` of the drawn subjects."""
        return 1.0 / (self.r * self.pi[self.indices])

    def summary(self) -> dict:
        w = self.weights
        return {
            "method": self.method.value,
            "delta": self.delta,
            "literal_floor": self.literal_floor,
            "r0": self.r0,
            "r": self.r,
            "seed": self.seed,
            "m": int(self.pi.size),
            # 1 / sum(pi^2): equals m for uniform probabilities
            "pi_effective_m": float(1.0 / np.sum(self.pi**2)),
            "kish_ess": float(w.sum() ** 2 / np.sum(w * w)) if w.size else 0.0,
            "distinct_subjects": int(np.unique(self.indices).size),
            "mvc_fallback": self.mvc_fallback,
        }


@contextmanager
def _stage(label: str):
    try:
        yield
    except NumericalError as exc:
        msg = exc.args[0] if exc.args else ""
        exc.args = (f"{label}: {msg}",) + exc.args[1:]
        exc.stage = label
        raise


def _pilot(panel, r0, family, rng, config=None):
    if not 1 <= r0 <= panel.m:
        raise ConfigError(f"pilot size r0={r0} must be in [1, m={panel.m}]")
    if r0 * panel.n <= panel.p:
        raise ConfigError(f"pilot of {r0} subjects has too few observations for p={panel.p}")
    idx = np.sort(rng.choice(panel.m, size=r0, replace=False))
    try:
        result = fit(panel.take(idx), family, "independent", config=config)
    except NumericalError as exc:
        raise PilotError(f"pilot fit failed ({exc}); try a larger r0") from exc
    if not result.converged:
        raise PilotError(
            f"pilot fit on r0={r0} subjects did not converge; try a larger r0"
        )
    return result, idx


def pilot_fit(panel, r0: int, family, seed=None, config: FitConfig | None = None) -> FitResult:
    """Independence GEE on ``r0`` subjects drawn uniformly without replacement."""
    rng = np.random.default_rng(seed)
    return _pilot(panel, r0, get_family(family), rng, config)[0]


def floor_residuals(S: np.ndarray, delta: float, literal: bool = False) -> np.ndarray:
    """Replace residuals by ``sign(S) * max(|S|, delta)``.

    ``literal=True`` gives ``max(S, delta)`` instead, which also maps every
    negative residual to ``delta``; kept for comparison only.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if literal:
        return np.maximum(S, delta)
    out = np.abs(S)
    np.maximum(out, delta, out=out)
    return np.where(S < 0, -out, out)


def _floored_vectors(panel, scale, resid, sd, Rinv, delta, literal):
    S = floor_residuals(resid * sd, delta, literal)
    S /= sd
    return _kernels.accumulate(
        panel.X, scale, S, Rinv, np.ones(panel.m), want_vectors=True, want_info=False
    )[2]


def score_vectors(panel, beta0, family, corr: CorrelationModel, delta: float = DEFAULT_DELTA,
                  literal: bool = False) -> np.ndarray:
    """Per-subject vectors ``D_i' A_i^{-1/2} R^{-1} A_i^{-1/2} S~_i`` as an ``(m, p)`` array.

    The dispersion factor is common to all rows and omitted; it cancels in
    the normalised probabilities.
    """
    scale, resid, sd = _standardize(panel, np.asarray(beta0, dtype=np.float64), get_family(family))
    return _floored_vectors(panel, scale, resid, sd, corr.inverse(), delta, literal)


def _normalise(norms: np.ndarray) -> np.ndarray:
    total = norms.sum()
    if not (np.isfinite(total) and total > 0):
        raise DegenerateScoresError("all score norms are zero or non-finite")
    return norms / total


def probabilities_mV(scores: np.ndarray) -> np.ndarray:
    return _normalise(np.linalg.norm(scores, axis=1))


def probabilities_mVc(scores: np.ndarray, phi0: np.ndarray) -> np.ndarray:
    phi0 = np.asarray(phi0, dtype=np.float64)
    if not np.all(np.isfinite(phi0)):
        raise SingularityError("Phi0 has non-finite entries")
    if np.linalg.cond(phi0) > 1e14:
        raise SingularityError("Phi0 is singular")
    # p is small, so one explicit inverse and a gemm beat a triangular solve
    transformed = np.asarray(scores, dtype=np.float64) @ np.linalg.inv(phi0).T
    return _normalise(np.linalg.norm(transformed, axis=1))


def draw_with_replacement(pi, r: int, seed=None) -> np.ndarray:
    """``r`` i.i.d. indices from ``pi`` using a Vose alias table."""
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 1 or pi.size == 0 or np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
        raise ValueError("pi must be a non-empty probability vector")
    if r < 1:
        raise ValueError(f"r must be at least 1, got {r}")
    m = pi.size
    prob, alias = _kernels.alias_table(pi)
    rng = np.random.default_rng(seed)
    u = rng.random(r)
    coin = rng.random(r)
    col = np.minimum((u * m).astype(np.intp), m - 1)
    return np.where(coin < prob[col], col, alias[col])


def sampling_probabilities(panel, method, beta0, family, structure, delta=DEFAULT_DELTA,
                           pilot_panel=None, literal=False) -> tuple[np.ndarray, bool]:
    """Probabilities for ``method`` at ``beta0``; second value flags an mVc -> mV fallback."""
    method = get_method(method)
    if method is SamplingMethod.UNIFORM:
        return np.full(panel.m, 1.0 / panel.m), False
    family = get_family(family)
    # one pass over the full panel serves both the correlation estimate and the scores
    scale, resid, sd = _standardize(panel, np.asarray(beta0, dtype=np.float64), family)
    corr = _corr_from_residuals(resid, get_structure(structure), panel.p, None)
    scores = _floored_vectors(panel, scale, resid, sd, corr.inverse(), delta, literal)
    if method is SamplingMethod.MV:
        return probabilities_mV(scores), False
    phi0 = information(pilot_panel if pilot_panel is not None else panel, beta0, family, corr)
    try:
        return probabilities_mVc(scores, phi0), False
    except SingularityError:
        warnings.warn("Phi0 is singular; falling back to mV probabilities", RuntimeWarning)
        return probabilities_mV(scores), True


def subsample_fit(panel, method, r0: int, r: int, family, structure="independent",
                  delta: float = DEFAULT_DELTA, seed=None, config: FitConfig | None = None,
                  literal_floor: bool = False) -> FitResult:
    """Run the three-step subsampling estimator and return the subsample fit.

    The pilot sample only supplies ``beta0`` (and, for mVc, the shape of
    ``Phi0``); it is not pooled into the final estimate. The returned
    result carries the :class:`SamplingPlan` in ``plan`` and the plug-in
    sandwich covariance of the subsample estimator in ``sandwich``.
    """
    method = get_method(method)
    family = get_family(family)
    structure = get_structure(structure)
    if r < 1:
        raise ConfigError(f"r must be at least 1, got {r}")
    if r <= panel.n**2:
        warnings.warn(
            f"r={r} is not large relative to n^2={panel.n ** 2}; "
            "the normal approximation may be poor",
            SmallSubsampleWarning,
        )
    pilot_ss, draw_ss = np.random.SeedSequence(seed).spawn(2)

    with _stage("step 1 (pilot)"):
        pilot, pilot_idx = _pilot(panel, r0, family, np.random.default_rng(pilot_ss), config)
    beta0 = pilot.beta

    with _stage("step 2 (probabilities)"):
        pi, fallback = sampling_probabilities(
            panel, method, beta0, family, structure, delta,
            pilot_panel=panel.take(pilot_idx), literal=literal_floor,
        )

    idx = draw_with_replacement(pi, r, np.random.default_rng(draw_ss))
    plan = SamplingPlan(method, pi, delta, r0, r, seed, idx, pilot_idx, fallback, literal_floor)
    with _stage("step 3 (subsample fit)"):
        result = fit(panel.take(idx), family, structure, plan.weights, with_init(config, beta0))
    return FitResult(result.beta, result.iterations, result.converged, result.corr,
                     result.sandwich, result.diagnostics, plan)
