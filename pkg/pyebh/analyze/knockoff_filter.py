from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from pyebh.analyze.procedures import DecisionReport, check_alpha
from pyebh.core.knockoffs import KnockoffModel

logger = logging.getLogger(__name__)

GRID_SIZE = 100
GRID_RATIO = 1e-3
KKT_TOL = 1e-7
NONZERO_TOL = 1e-9
MAX_SWEEPS = 1000


class LassoDiverged(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LassoPath:
    """Lasso solutions of 1/2 ||Y - Z b||^2 + lam ||b||_1 over a decreasing penalty grid.

    `entry_penalty[k]` is the largest grid penalty at which coefficient k is nonzero, 0 if never.
    """

    penalty_grid: np.ndarray
    coefficients: np.ndarray
    entry_penalty: np.ndarray

    @property
    def m(self) -> int:
        return int(self.entry_penalty.size // 2)

    @property
    def L(self) -> np.ndarray:
        return self.entry_penalty[: self.m]

    @property
    def L_tilde(self) -> np.ndarray:
        return self.entry_penalty[self.m :]


@dataclass(frozen=True, eq=False)
class KnockoffStats:
    V: np.ndarray
    L: np.ndarray
    L_tilde: np.ndarray


def penalty_grid(lam_max: float, grid_size: int = GRID_SIZE, grid_ratio: float = GRID_RATIO) -> np.ndarray:
    """Log-spaced grid from lam_max down to lam_max * grid_ratio."""
    if grid_size < 2:
        raise ValueError(f"grid needs at least 2 points, got {grid_size}")
    if not 0.0 < grid_ratio < 1.0:
        raise ValueError(f"grid ratio must lie in (0, 1), got {grid_ratio}")
    if lam_max <= 0.0:
        lam_max = 1.0
    return lam_max * grid_ratio ** (np.arange(grid_size) / (grid_size - 1))


def _sweep(G: np.ndarray, r: np.ndarray, b: np.ndarray, lam: float, coords: Sequence[int]) -> float:
    """One pass of coordinate descent; r = c - G b is kept current. Returns the largest change."""
    largest = 0.0
    for j in coords:
        gjj = G[j, j]
        if gjj <= 0.0:
            continue
        rho = r[j] + gjj * b[j]
        new = math.copysign(max(abs(rho) - lam, 0.0), rho) / gjj
        delta = new - b[j]
        if delta != 0.0:
            b[j] = new
            r -= delta * G[:, j]
            largest = max(largest, abs(delta))
    return largest


def kkt_violation(G: np.ndarray, c: np.ndarray, b: np.ndarray, lam: float) -> float:
    """Largest violation of the lasso subgradient conditions at b."""
    r = c - G @ b
    active = b != 0.0
    on_active = np.abs(r[active] - lam * np.sign(b[active]))
    off_active = np.maximum(np.abs(r[~active]) - lam, 0.0)
    return float(max(on_active.max(initial=0.0), off_active.max(initial=0.0)))


def fit_lasso_path(
    Z: np.ndarray,
    Y: np.ndarray,
    grid_size: int = GRID_SIZE,
    grid_ratio: float = GRID_RATIO,
    tol: float = KKT_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> LassoPath:
    """Warm-started coordinate descent along the penalty grid, on the Gram matrix of Z.

    Each grid point alternates full sweeps with sweeps over the active set until the
    subgradient conditions hold to tol.
    """
    Z = np.asarray(Z, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    G = Z.T @ Z
    c = Z.T @ Y
    p = c.size
    grid = penalty_grid(float(np.max(np.abs(c))) if p else 0.0, grid_size, grid_ratio)

    b = np.zeros(p)
    r = c.copy()
    coefficients = np.zeros((grid.size, p))
    everything = range(p)
    for i, lam in enumerate(grid):
        for sweep in range(max_sweeps):
            _sweep(G, r, b, lam, everything)
            active = np.flatnonzero(b)
            for _ in range(max_sweeps):
                if _sweep(G, r, b, lam, active) <= tol * 1e-2:
                    break
            # r drifts from c - G b by rounding over many rank-one updates
            r = c - G @ b
            violation = kkt_violation(G, c, b, lam)
            if violation <= tol:
                break
        else:
            raise LassoDiverged(
                f"lasso did not converge at penalty {lam:.6g} (grid point {i}) after {max_sweeps} sweeps"
            )
        logger.debug("lasso grid point %d: lam=%.4g sweeps=%d active=%d", i, lam, sweep + 1, np.count_nonzero(b))
        coefficients[i] = b

    nonzero = np.abs(coefficients) > NONZERO_TOL
    entered = nonzero.any(axis=0)
    first = np.argmax(nonzero, axis=0)
    entry_penalty = np.where(entered, grid[first], 0.0)
    return LassoPath(penalty_grid=grid, coefficients=coefficients, entry_penalty=entry_penalty)


def lasso_path(
    model: KnockoffModel, Y: np.ndarray, grid_size: int = GRID_SIZE, grid_ratio: float = GRID_RATIO
) -> LassoPath:
    """Lasso path on the augmented design [X Xtilde]."""
    return fit_lasso_path(model.augmented, Y, grid_size=grid_size, grid_ratio=grid_ratio)


def knockoff_stats(path: LassoPath) -> KnockoffStats:
    """V_j = max(L_j, Ltilde_j) (2 1(L_j > Ltilde_j) - 1); ties give the negative value."""
    L, L_tilde = path.L, path.L_tilde
    V = np.maximum(L, L_tilde) * np.where(L > L_tilde, 1.0, -1.0)
    V = np.where((L == 0.0) & (L_tilde == 0.0), 0.0, V)
    return KnockoffStats(V=V, L=L.copy(), L_tilde=L_tilde.copy())


def knockoff_threshold(V: np.ndarray, alpha: float) -> float:
    """Smallest nonzero |V_j| = t with (1 + #{V <= -t}) / max(#{V >= t}, 1) <= alpha; +inf if none."""
    V = np.asarray(V, dtype=float)
    candidates = np.unique(np.abs(V[V != 0.0]))
    for t in candidates:
        ratio = (1.0 + np.sum(V <= -t)) / max(int(np.sum(V >= t)), 1)
        if ratio <= alpha:
            return float(t)
    return math.inf


def knockoff_select(stats: KnockoffStats, alpha: float) -> DecisionReport:
    """Knockoff+ selection {j : V_j >= T}."""
    alpha = check_alpha(alpha)
    threshold = knockoff_threshold(stats.V, alpha)
    rejected = np.flatnonzero(stats.V >= threshold) if math.isfinite(threshold) else np.array([], dtype=int)
    return DecisionReport(
        procedure="knockoff",
        alpha=alpha,
        m=int(stats.V.size),
        rejected=rejected,
        extra={"L": stats.L, "L_tilde": stats.L_tilde, "V": stats.V, "threshold": threshold},
    )


def knockoff_filter(
    model: KnockoffModel,
    Y: np.ndarray,
    alpha: float,
    grid_size: int = GRID_SIZE,
    grid_ratio: float = GRID_RATIO,
) -> DecisionReport:
    return knockoff_select(knockoff_stats(lasso_path(model, Y, grid_size, grid_ratio)), alpha)
