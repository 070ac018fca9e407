from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from pyebh.analyze.knockoff_filter import LassoDiverged
from pyebh.analyze.methods import ALL_METHODS, METHOD_NAMES, apply_methods, check_methods
from pyebh.core.calibrators import parse_calibrator
from pyebh.core.knockoffs import DegenerateColumn, InfeasibleD, RankDeficient, build_knockoffs, standardize
from pyebh.core.numerics import NotPSD, SingularMatrix
from pyebh.core.paired_inference import DegenerateFit
from pyebh.random.random_design import gen_design, gen_truth
from pyebh.random.rng import CounterRNG

logger = logging.getLogger(__name__)

SPARSE_DIMENSIONS = ((200, 40, 8), (500, 50, 10), (1000, 100, 20))
EXTENDED_DIMENSIONS = ((200, 40, 20), (500, 50, 25), (1000, 100, 50))
DEFAULT_GAMMAS = (2.0, 4.0, 6.0, 8.0, 10.0)

# failures that exclude a single replication instead of aborting the run
REPLICATION_ERRORS = (
    DegenerateFit,
    LassoDiverged,
    InfeasibleD,
    RankDeficient,
    DegenerateColumn,
    NotPSD,
    SingularMatrix,
)


class NoData(ValueError):
    pass


@dataclass(frozen=True)
class SimSetting:
    """One cell of the simulation grid: dimensions, signal, noise, level and methods."""

    n: int
    m: int
    k: int
    rho: float = 0.5
    gamma: float = 2.0
    sigma: float = 1.0
    alpha: float = 0.05
    lam: float = 0.5
    methods: Tuple[str, ...] = ALL_METHODS
    reps: int = 500
    master_seed: int = 0
    calibrator: str = "bounded_poly"
    random_signs: bool = False
    sigma_known: bool = False
    knockoff_d: Optional[Tuple[float, ...]] = None
    grid_size: int = 100
    grid_ratio: float = 1e-3

    def __post_init__(self) -> None:
        if not 0 <= self.k <= self.m:
            raise ValueError(f"need 0 <= k <= m, got k={self.k}, m={self.m}")
        if self.n <= 2 * self.m:
            raise ValueError(f"need n > 2m for knockoff-based inference, got n={self.n}, m={self.m}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if not self.gamma >= 0.0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.reps < 1:
            raise ValueError(f"reps must be positive, got {self.reps}")
        check_methods(self.methods)
        if self.knockoff_d is not None and len(self.knockoff_d) != self.m:
            raise ValueError(f"knockoff_d needs {self.m} entries, got {len(self.knockoff_d)}")
        parse_calibrator(self.calibrator)

    def describe(self) -> Dict[str, float]:
        return {"n": self.n, "m": self.m, "k": self.k, "rho": self.rho, "alpha": self.alpha, "gamma": self.gamma}


@dataclass(frozen=True)
class ReplicationOutcome:
    """Counts per method: (false rejections V, rejections R, true positives TP)."""

    rep_index: int
    counts: Dict[str, Tuple[int, int, int]] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def completed(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class MethodSummary:
    method: str
    fdr_hat: float
    power_hat: float
    se_fdr: float
    se_power: float
    reps_completed: int


@dataclass(frozen=True)
class SimResult:
    setting: SimSetting
    summaries: Dict[str, MethodSummary]
    reps_failed: int = 0
    failures: Tuple[str, ...] = ()

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for code, summary in self.summaries.items():
            row = dict(self.setting.describe())
            row.update(
                method=code,
                procedure=METHOD_NAMES[code],
                fdr_hat=summary.fdr_hat,
                power_hat=summary.power_hat,
                se_fdr=summary.se_fdr,
                se_power=summary.se_power,
                reps_completed=summary.reps_completed,
                reps_failed=self.reps_failed,
            )
            rows.append(row)
        return pd.DataFrame(rows)


def simulate_data(setting: SimSetting, rep_index: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Raw design, coefficients, support and noise for one replication.

    The stream is consumed in the same way for every gamma, so replications with equal
    index share their design and noise across signal strengths.
    """
    rng = CounterRNG.for_replication(setting.master_seed, rep_index)
    X = gen_design(setting.n, setting.m, setting.rho, rng)
    beta, support = gen_truth(setting.m, setting.k, setting.gamma, rng, random_signs=setting.random_signs)
    noise = setting.sigma * rng.standard_normal(setting.n)
    return X, beta, support, noise


def count_outcome(rejected: Iterable[int], support: Sequence[int]) -> Tuple[int, int, int]:
    """(V, R, TP) of a rejection set against the true support."""
    rejected = set(int(j) for j in rejected)
    true_positives = len(rejected & set(int(j) for j in support))
    return len(rejected) - true_positives, len(rejected), true_positives


def run_replication(setting: SimSetting, rep_index: int) -> ReplicationOutcome:
    """Generate one data set and apply every selected method to it."""
    X, beta, _support, noise = simulate_data(setting, rep_index)
    calibrator = parse_calibrator(setting.calibrator)
    try:
        design = standardize(X)
        D = None if setting.knockoff_d is None else np.asarray(setting.knockoff_d)
        model = build_knockoffs(design, D)
        Y = design.X @ beta + noise
        reports = apply_methods(
            model,
            Y,
            setting.alpha,
            methods=setting.methods,
            lam=setting.lam,
            calibrator=calibrator,
            sigma=setting.sigma if setting.sigma_known else None,
            grid_size=setting.grid_size,
            grid_ratio=setting.grid_ratio,
        )
        truth = np.flatnonzero(beta)
        counts = {code: count_outcome(report.rejected, truth) for code, report in reports.items()}
    except REPLICATION_ERRORS as e:
        logger.warning("replication %d excluded: %s: %s", rep_index, type(e).__name__, e)
        return ReplicationOutcome(rep_index, error=f"{type(e).__name__}: {e}")
    return ReplicationOutcome(rep_index, counts)


def _rate_se(rate: float, reps: int) -> float:
    return math.sqrt(max(rate * (1.0 - rate), 0.0) / reps)


def aggregate(outcomes: Sequence[ReplicationOutcome], setting: SimSetting) -> SimResult:
    """Empirical FDR (mean of V / max(R, 1)) and power (mean of TP / k) per method."""
    completed = [outcome for outcome in outcomes if outcome.completed]
    failures = tuple(outcome.error for outcome in outcomes if outcome.error is not None)
    if not completed:
        raise NoData(f"none of {len(outcomes)} replications completed")
    reps = len(completed)
    summaries = {}
    for code in setting.methods:
        counts = np.array([outcome.counts[code] for outcome in completed], dtype=float)
        fdp = counts[:, 0] / np.maximum(counts[:, 1], 1.0)
        fdr_hat = float(fdp.mean())
        if setting.k > 0:
            power_hat = float(np.mean(counts[:, 2] / setting.k))
            se_power = _rate_se(power_hat, reps)
        else:
            power_hat = se_power = math.nan
        summaries[code] = MethodSummary(
            method=code,
            fdr_hat=fdr_hat,
            power_hat=power_hat,
            se_fdr=_rate_se(fdr_hat, reps),
            se_power=se_power,
            reps_completed=reps,
        )
    return SimResult(setting=setting, summaries=summaries, reps_failed=len(failures), failures=failures)


def run_simulation(setting: SimSetting, threads: int = 1) -> SimResult:
    """All replications of one setting; the result does not depend on threads."""
    logger.info("simulating %s with %d replications", setting.describe(), setting.reps)
    jobs = (delayed(run_replication)(setting, i) for i in range(setting.reps))
    outcomes = Parallel(n_jobs=threads, prefer="threads")(jobs)
    result = aggregate(outcomes, setting)
    if result.reps_failed:
        logger.warning("%d of %d replications failed", result.reps_failed, setting.reps)
    return result


def run_grid(setting: SimSetting, gammas: Sequence[float] = DEFAULT_GAMMAS, threads: int = 1) -> pd.DataFrame:
    """Long-format table over signal strengths, with common random numbers across gammas."""
    frames: List[pd.DataFrame] = []
    for gamma in gammas:
        result = run_simulation(dataclasses.replace(setting, gamma=float(gamma)), threads=threads)
        frames.append(result.to_frame())
    return pd.concat(frames, ignore_index=True)


def sparse_settings(alpha: float = 0.05, rho: float = 0.5, **overrides: object) -> List[SimSetting]:
    """The sparse grid: (n, m, k) in {(200, 40, 8), (500, 50, 10), (1000, 100, 20)}."""
    return [
        SimSetting(n=n, m=m, k=k, rho=rho, alpha=alpha, **overrides)  # type: ignore
        for n, m, k in SPARSE_DIMENSIONS
    ]


def extended_settings(alpha: float = 0.05, **overrides: object) -> List[SimSetting]:
    """Both grids (sparse and half-null) at low and high column correlation."""
    settings = []
    for rho in (0.1, 0.9):
        for n, m, k in SPARSE_DIMENSIONS + EXTENDED_DIMENSIONS:
            settings.append(SimSetting(n=n, m=m, k=k, rho=rho, alpha=alpha, **overrides))  # type: ignore
    return settings
