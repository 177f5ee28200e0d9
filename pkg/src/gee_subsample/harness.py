"""Monte Carlo benchmark and train/test holdout harness.

A benchmark repeats, for each replication, the whole pipeline on a freshly
simulated panel: a full-data fit per working structure (the baseline), then
a subsample fit for every ``(structure, r, method)`` cell. Each cell reports
the empirical MSE ``mean ||beta_r - beta_ref||^2`` with its Monte Carlo
standard error.

Seeding is hierarchical. Replication ``k`` generates its panel from
``SeedSequence(seed, spawn_key=(k,))``. The subsample seed depends only on
``(seed, k, r)``, so all methods and structures at a given ``r`` share the
same pilot and uniform draws (common random numbers), which sharpens
between-method comparisons.

Timing is opt-in (``timing=True``): wall-clock seconds around
:func:`subsample_fit` only, i.e. pilot fit, probabilities and the
subsample fit. Data generation and I/O are outside the timed region. With
timing off the time columns are ``nan``, which keeps output byte-stable.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import _kernels
from .correlation import CorrStructure, get_structure
from .errors import ConfigError, NumericalError
from .family import get_family
from .gee import fit
from .panel import Panel
from .simulate import FAMILY_OF_CASE, SimCase, SimConfig, get_case, simulate
from .subsampling import DEFAULT_DELTA, SamplingMethod, get_method, subsample_fit

FAILED_FRACTION = 0.05
FULL_DATA = "full_data"
_HOLDOUT_KEY = 0x5EED

PRESETS: dict[str, dict[str, Any]] = {
    "desk": {"m": 2000, "replications": 100},
    "paper": {"m": 10000, "replications": 200},
}

TIMING_NOTE = (
    "mean_time_s is wall-clock time of the pilot fit, probability computation "
    "and subsample fit; data generation and I/O are excluded"
)


@dataclass(frozen=True)
class BenchmarkConfig:
    case: SimCase = SimCase.LINEAR
    m: int = 10000
    n: int = 5
    r_grid: tuple[int, ...] = (300, 600, 900, 1200)
    r0: int = 200
    replications: int = 200
    methods: tuple[SamplingMethod, ...] = tuple(SamplingMethod)
    structures: tuple[CorrStructure, ...] = tuple(CorrStructure)
    seed: int = 0
    error_dist: str = "mvnormal"
    true_corr: str = "ar1_05"
    delta: float = DEFAULT_DELTA
    family: str | None = None  # holdout only; simulations use the case's family
    timing: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "case", get_case(self.case))
        object.__setattr__(self, "r_grid", tuple(int(r) for r in self.r_grid))
        object.__setattr__(self, "methods", tuple(get_method(x) for x in self.methods))
        object.__setattr__(
            self, "structures", tuple(get_structure(s) for s in self.structures)
        )
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not self.r_grid or list(self.r_grid) != sorted(set(self.r_grid)):
            raise ConfigError(f"r_grid must be non-empty and strictly ascending, got {self.r_grid}")
        if self.r_grid[0] < 1 or self.r0 < 1:
            raise ConfigError("r values and r0 must be positive")
        if not self.methods or not self.structures:
            raise ConfigError("at least one method and one structure are required")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.timing and self.workers != 1:
            # timed runs are sequential so fits do not compete for cores
            object.__setattr__(self, "workers", 1)
        # validates error_dist / true_corr for the case
        self.sim_config(0)

    @classmethod
    def preset(cls, name: str, **overrides) -> "BenchmarkConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return cls(**{**PRESETS[name], **overrides})

    def sim_config(self, rep: int) -> SimConfig:
        return SimConfig(
            self.case, self.m, self.n, self.error_dist, self.true_corr,
            seed=_derive(self.seed, rep),
        )

    @property
    def fit_family(self) -> str:
        return self.family or FAMILY_OF_CASE[self.case]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["case"] = self.case.value
        d["r_grid"] = list(self.r_grid)
        d["methods"] = [x.value for x in self.methods]
        d["structures"] = [s.value for s in self.structures]
        return d


def _derive(seed: int, *key: int) -> int:
    """Independent 63-bit seed for the stream ``(seed, *key)``."""
    state = np.random.SeedSequence(seed, spawn_key=key).generate_state(2, np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


@dataclass
class CellResult:
    method: str
    structure: str
    r: int
    sq_errors: np.ndarray  # per replication, nan where the fit failed
    dist_full: np.ndarray  # ||beta_r - beta_g|| per replication
    times: np.ndarray
    pe: np.ndarray | None = None  # holdout prediction error per replication

    @property
    def fail_count(self) -> int:
        return int(np.isnan(self.sq_errors).sum())

    @property
    def failed(self) -> bool:
        return self.fail_count > FAILED_FRACTION * self.sq_errors.size

    @property
    def mse(self) -> float:
        return _mean(self.sq_errors)

    @property
    def mse_mc_se(self) -> float:
        return _se(self.sq_errors)

    @property
    def mean_time_s(self) -> float:
        return _mean(self.times)

    @property
    def median_dist_full(self) -> float:
        ok = self.dist_full[np.isfinite(self.dist_full)]
        return float(np.median(ok)) if ok.size else math.nan

    def summary(self) -> dict[str, Any]:
        out = {
            "method": self.method,
            "structure": self.structure,
            "r": self.r,
            "mse": self.mse,
            "mse_mc_se": self.mse_mc_se,
            "mean_time_s": self.mean_time_s,
            "fail_count": self.fail_count,
            "failed": self.failed,
            "median_dist_full": self.median_dist_full,
        }
        if self.pe is not None:
            out["pe"] = _mean(self.pe)
            out["pe_mc_se"] = _se(self.pe)
        return out


def _mean(x: np.ndarray) -> float:
    ok = x[np.isfinite(x)]
    return float(ok.mean()) if ok.size else math.nan


def _se(x: np.ndarray) -> float:
    ok = x[np.isfinite(x)]
    return float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else math.nan


@dataclass
class BenchmarkReport:
    config: BenchmarkConfig
    mode: str  # "simulation" or "holdout"
    cells: list[CellResult]
    baselines: list[CellResult]
    reference: str  # what the MSE is measured against
    info: dict[str, Any] = field(default_factory=dict)

    def cell(self, method, structure, r: int) -> CellResult:
        method, structure = get_method(method).value, get_structure(structure).value
        for c in self.cells:
            if (c.method, c.structure, c.r) == (method, structure, r):
                return c
        raise KeyError((method, structure, r))

    def baseline(self, structure) -> CellResult:
        structure = get_structure(structure).value
        for c in self.baselines:
            if c.structure == structure:
                return c
        raise KeyError(structure)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "reference": self.reference,
            "timing_note": TIMING_NOTE,
            "kernel_backend": _kernels.BACKEND,
            "config": self.config.to_dict(),
            "info": self.info,
            "cells": [c.summary() for c in self.cells],
            "baselines": [c.summary() for c in self.baselines],
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(self.to_dict()), fh, indent=2, sort_keys=False)
            fh.write("\n")


def _jsonable(obj):
    # JSON has no nan; write null instead
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _timed(enabled, func, *args, **kwargs):
    t0 = time.perf_counter() if enabled else 0.0
    out = func(*args, **kwargs)
    return out, (time.perf_counter() - t0 if enabled else math.nan)


def _predict_mse(panel: Panel, beta, family) -> float:
    mu = family.mean(panel.X @ beta)
    return float(np.mean((panel.y - mu) ** 2))


def _run_cells(cfg: BenchmarkConfig, panel: Panel, beta_ref, rep: int, test: Panel | None):
    """One replication on ``panel``. Returns (baseline rows, cell rows).

    Each row is ``(sq_error, dist_to_full, time, pe)``, with nan for failures.
    ``beta_ref=None`` means "measure against the full-data fit".
    """
    family = get_family(cfg.fit_family)
    nan_row = (math.nan, math.nan, math.nan, math.nan)
    base_rows, full_beta = [], {}
    for st in cfg.structures:
        try:
            res, t = _timed(cfg.timing, fit, panel, family, st)
        except NumericalError:
            res = None
        if res is None or not res.converged:
            base_rows.append(nan_row)
            full_beta[st] = None
            continue
        full_beta[st] = res.beta
        ref = res.beta if beta_ref is None else beta_ref
        pe = _predict_mse(test, res.beta, family) if test is not None else math.nan
        base_rows.append((float(np.sum((res.beta - ref) ** 2)), 0.0, t, pe))

    cell_rows = []
    for st in cfg.structures:
        ref = full_beta[st] if beta_ref is None else beta_ref
        for r in cfg.r_grid:
            seed = _derive(cfg.seed, rep, 1, r)
            for method in cfg.methods:
                if ref is None:
                    cell_rows.append(nan_row)
                    continue
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        res, t = _timed(
                            cfg.timing, subsample_fit, panel, method, cfg.r0, r, family,
                            st, cfg.delta, seed,
                        )
                except NumericalError:
                    res = None
                if res is None or not res.converged:
                    cell_rows.append(nan_row)
                    continue
                gb = full_beta[st]
                dist = float(np.linalg.norm(res.beta - gb)) if gb is not None else math.nan
                pe = _predict_mse(test, res.beta, family) if test is not None else math.nan
                cell_rows.append((float(np.sum((res.beta - ref) ** 2)), dist, t, pe))
    return base_rows, cell_rows


def _simulation_rep(args):
    cfg, rep = args
    panel = simulate(cfg.sim_config(rep))
    return _run_cells(cfg, panel, np.asarray(cfg.sim_config(rep).beta0), rep, None)


def _holdout_rep(args):
    cfg, rep, train, test = args
    return _run_cells(cfg, train, None, rep, test)


def _map(func, jobs, workers):
    if workers == 1:
        return [func(j) for j in jobs]
    # executor.map yields in submission order, so the merge is deterministic
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs))


def _assemble(cfg: BenchmarkConfig, results, with_pe: bool, full_r: int):
    def col(rows, k):
        return np.array([row[k] for row in rows], dtype=np.float64)

    labels = [
        (m.value, s.value, r)
        for s in cfg.structures for r in cfg.r_grid for m in cfg.methods
    ]
    cells = []
    for j, (method, st, r) in enumerate(labels):
        rows = [res[1][j] for res in results]
        cells.append(CellResult(method, st, r, col(rows, 0), col(rows, 1), col(rows, 2),
                                col(rows, 3) if with_pe else None))
    baselines = []
    for j, st in enumerate(cfg.structures):
        rows = [res[0][j] for res in results]
        baselines.append(CellResult(FULL_DATA, st.value, full_r, col(rows, 0), col(rows, 1),
                                    col(rows, 2), col(rows, 3) if with_pe else None))
    return cells, baselines


def run_benchmark(cfg: BenchmarkConfig) -> BenchmarkReport:
    """Simulation benchmark; MSE is measured against the true ``beta0``."""
    jobs = [(cfg, rep) for rep in range(cfg.replications)]
    results = _map(_simulation_rep, jobs, cfg.workers)
    cells, baselines = _assemble(cfg, results, with_pe=False, full_r=cfg.m)
    return BenchmarkReport(cfg, "simulation", cells, baselines, "true beta0")


def split_panel(panel: Panel, train_fraction: float, seed: int) -> tuple[Panel, Panel]:
    """Seeded split by subject; both parts keep the original subject order."""
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")
    m_train = int(round(train_fraction * panel.m))
    if not 1 <= m_train < panel.m:
        raise ConfigError(f"train_fraction={train_fraction} leaves an empty part for m={panel.m}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_HOLDOUT_KEY,)))
    perm = rng.permutation(panel.m)
    return panel.take(np.sort(perm[:m_train])), panel.take(np.sort(perm[m_train:]))


def run_holdout(panel: Panel, train_fraction: float, cfg: BenchmarkConfig) -> BenchmarkReport:
    """Fit on a training split and score prediction error on the held-out subjects.

    MSE is measured against the full-training-data fit of the same working
    structure, since the true coefficients are unknown. ``cfg.m`` and the
    simulation fields are ignored; ``cfg.family`` picks the model (defaulting
    to the case's family).
    """
    train, test = split_panel(panel, train_fraction, cfg.seed)
    if cfg.r0 > train.m:
        raise ConfigError(f"r0={cfg.r0} exceeds the {train.m} training subjects")
    jobs = [(cfg, rep, train, test) for rep in range(cfg.replications)]
    results = _map(_holdout_rep, jobs, cfg.workers)
    cells, baselines = _assemble(cfg, results, with_pe=True, full_r=train.m)
    info = {"m_train": train.m, "m_test": test.m, "train_fraction": train_fraction}
    return BenchmarkReport(cfg, "holdout", cells, baselines, "full training-data fit", info)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


PLOT_COLUMNS = ("method", "structure", "r", "mse", "mse_mc_se", "mean_time_s", "fail_count")


def emit_plot_data(report: BenchmarkReport, path) -> None:
    """Tidy CSV, one row per cell plus one ``full_data`` row per structure.

    Holdout reports carry two extra columns, ``pe`` and ``pe_mc_se``.
    """
    if os.path.isdir(path):
        raise IsADirectoryError(f"{path} is a directory")
    columns = PLOT_COLUMNS + (("pe", "pe_mc_se") if report.mode == "holdout" else ())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for c in report.cells + report.baselines:
            s = c.summary()
            writer.writerow([s[k] if k in ("method", "structure") else _fmt(s[k]) for k in columns])
