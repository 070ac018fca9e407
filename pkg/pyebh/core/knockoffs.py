from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd
import scipy.linalg

from pyebh.core.numerics import NotPSD, min_eigenvalue, psd_sqrt, spd_inverse, sym_eigen, symmetrize

logger = logging.getLogger(__name__)

NORM_TOL = 1e-12
RANK_TOL = 1e-10
SHRINK = 1e-3
GRAM_TOL = 1e-8
COMPLETION_TOL = 1e-6


class DegenerateColumn(ValueError):
    pass


class RankDeficient(ValueError):
    pass


class InsufficientRows(ValueError):
    pass


class InfeasibleD(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Design:
    """A fixed n x m design matrix, optionally standardized to unit column norms."""

    X: np.ndarray
    standardized: bool = False

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"design must be a matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("design has non-finite entries")
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def m(self) -> int:
        return int(self.X.shape[1])

    @property
    def gram(self) -> np.ndarray:
        return symmetrize(self.X.T @ self.X)


@dataclass(frozen=True, eq=False)
class KnockoffModel:
    """A design together with its fixed-X knockoff copy.

    Sigma is the Gram matrix of the original design and D the diagonal (stored as a vector)
    of Sigma - Xtilde^T X.
    """

    design: Design
    Xtilde: np.ndarray
    Sigma: np.ndarray
    D: np.ndarray
    s_rule: str = "equicorrelated"
    _cache: Dict[str, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    @property
    def X(self) -> np.ndarray:
        return self.design.X

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def m(self) -> int:
        return self.design.m

    @property
    def augmented(self) -> np.ndarray:
        """[X Xtilde], the n x 2m matrix the knockoff filter fits on."""
        if "augmented" not in self._cache:
            self._cache["augmented"] = np.hstack([self.X, self.Xtilde])
        return self._cache["augmented"]

    @property
    def sum_precision(self) -> np.ndarray:
        """(2 Sigma - D)^{-1}."""
        if "sum_precision" not in self._cache:
            self._cache["sum_precision"] = spd_inverse(2.0 * self.Sigma - np.diag(self.D))
        return self._cache["sum_precision"]

    def check_model(self, tol: float = GRAM_TOL) -> None:
        """Raise InfeasibleD if any defining Gram identity fails by more than tol."""
        if np.any(self.D <= 0):
            raise InfeasibleD(f"D has non-positive entries at {np.flatnonzero(self.D <= 0).tolist()}")
        for name, residual in gram_residuals(self).items():
            if residual > tol:
                raise InfeasibleD(f"knockoff identity '{name}' violated: residual {residual:.3e} > {tol:g}")


def gram_residuals(model: KnockoffModel) -> Dict[str, float]:
    """Max-abs residuals of the identities that make Xtilde a valid knockoff of X."""
    X, Xt, Sigma, D = model.X, model.Xtilde, model.Sigma, model.D
    return {
        "knockoff_gram": float(np.max(np.abs(Xt.T @ Xt - Sigma))),
        "cross_gram": float(np.max(np.abs(X.T @ Xt - (Sigma - np.diag(D))))),
        "independence": float(np.max(np.abs((X + Xt).T @ (X - Xt)))),
        "swap_symmetry": float(np.max(np.abs(X.T @ Xt - Xt.T @ X))),
    }


def standardize(X_raw: np.ndarray, center: bool = False) -> Design:
    """Scale every column of X_raw to unit Euclidean norm.

    Parameters
    ----------
    X_raw: n x m matrix.

    center: Subtract column means first (removes an intercept).
    """
    X = np.array(X_raw, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"design must be a matrix, got shape {X.shape}")
    if center:
        X = X - X.mean(axis=0)
    norms = np.linalg.norm(X, axis=0)
    degenerate = np.flatnonzero(norms <= NORM_TOL)
    if degenerate.size:
        raise DegenerateColumn(f"columns {degenerate.tolist()} have (near) zero norm")
    Z = X / norms

    corr = Z.T @ Z
    upper = np.triu(np.abs(corr), 1)
    if upper.size and np.max(upper) >= 1.0 - NORM_TOL:
        i, j = np.unravel_index(np.argmax(upper), upper.shape)
        raise RankDeficient(f"columns {i} and {j} are collinear (|corr| = {upper[i, j]:.15f})")
    lam = min_eigenvalue(symmetrize(corr))
    if lam <= RANK_TOL:
        raise RankDeficient(f"design is rank deficient: smallest Gram eigenvalue {lam:.3e}")
    return Design(Z, standardized=True)


def choose_D(Sigma: np.ndarray) -> np.ndarray:
    """Equicorrelated choice D = s I with s = (1 - 1e-3) min(1, 2 lambda_min(Sigma))."""
    lam = min_eigenvalue(Sigma)
    if lam <= RANK_TOL:
        raise RankDeficient(f"Gram matrix is rank deficient: smallest eigenvalue {lam:.3e}")
    s = (1.0 - SHRINK) * min(1.0, 2.0 * lam)
    logger.debug("equicorrelated knockoffs: lambda_min=%.6g, s=%.6g", lam, s)
    return np.full(Sigma.shape[0], s)


def validate_D(Sigma: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Check 0 < D and 2 Sigma - D positive definite; returns D as a float vector."""
    D = np.asarray(D, dtype=float).ravel()
    m = Sigma.shape[0]
    if D.shape != (m,):
        raise InfeasibleD(f"D must have {m} entries, got {D.size}")
    if not np.all(np.isfinite(D)) or np.any(D <= 0):
        raise InfeasibleD(f"D must be finite and positive, got minimum {np.min(D):.3e}")
    lam = min_eigenvalue(symmetrize(2.0 * Sigma - np.diag(D)))
    if lam <= 0:
        raise InfeasibleD(f"2*Sigma - D is not positive definite (lambda_min = {lam:.3e})")
    return D


def _inverse_sqrt(G: np.ndarray) -> Optional[np.ndarray]:
    """G^{-1/2} for a well conditioned symmetric G, else None."""
    eigenvalues, V = sym_eigen(symmetrize(G))
    if eigenvalues[-1] <= NORM_TOL or eigenvalues[0] <= COMPLETION_TOL * eigenvalues[-1]:
        return None
    return symmetrize((V / np.sqrt(eigenvalues)) @ V.T)


def _equivariant_completion(X: np.ndarray, basis: np.ndarray) -> Optional[np.ndarray]:
    """Orthonormalized residuals of columnwise maps of X; permuting X's columns permutes the result.

    Candidates are tried in turn since products with binary columns can fall back into span(X, 1).
    """
    rows = X.sum(axis=1)
    for F in (X * X, X * rows[:, None], X * (rows * rows)[:, None]):
        W = F - basis @ (basis.T @ F)
        W = W - basis @ (basis.T @ W)
        root = _inverse_sqrt(W.T @ W)
        if root is None:
            continue
        U = W @ root
        # second pass restores U^T U = I to machine precision
        refine = _inverse_sqrt(U.T @ U)
        if refine is not None:
            return U @ refine
    return None


def _complement_basis(X: np.ndarray, rng: Optional[np.random.Generator]) -> np.ndarray:
    """m orthonormal columns orthogonal to col(X).

    Without rng the basis is equivariant under column permutations of X when possible, and
    otherwise the trailing columns of the full QR factorization of X.
    """
    n, m = X.shape
    Q, _ = scipy.linalg.qr(X, mode="full")
    complement = Q[:, m:]
    if rng is not None:
        rotation, _ = np.linalg.qr(rng.standard_normal((n - m, m)))
        return complement @ rotation
    U = _equivariant_completion(X, Q[:, :m])
    if U is None:
        logger.debug("no well conditioned equivariant completion, using the QR basis")
        return complement[:, :m]
    return U


def build_knockoffs(
    design: Design,
    D: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> KnockoffModel:
    """Construct Xtilde = X Sigma^{-1}(Sigma - D) + U (2D - D Sigma^{-1} D)^{1/2}.

    Parameters
    ----------
    design: The (standardized) design.

    D: Per-coordinate diagonal. Defaults to the equicorrelated choice.

    rng: If given, U is a random orthonormal completion instead of the deterministic one.
    """
    n, m = design.n, design.m
    if n < 2 * m:
        raise InsufficientRows(
            f"fixed-X knockoffs need n >= 2m, got n={n}, m={m}; the row-augmentation construction is not supported"
        )
    Sigma = design.gram
    s_rule = "equicorrelated" if D is None else "user_supplied"
    D = choose_D(Sigma) if D is None else validate_D(Sigma, D)

    Sigma_inv = spd_inverse(Sigma)
    try:
        C = psd_sqrt(symmetrize(2.0 * np.diag(D) - D[:, None] * Sigma_inv * D[None, :]))
    except NotPSD as e:
        raise InfeasibleD(f"2D - D Sigma^-1 D is not positive semidefinite: {e}") from e

    X = design.X
    U = _complement_basis(X, rng)
    Xtilde = X - (X @ Sigma_inv) * D[None, :] + U @ C

    model = KnockoffModel(design=design, Xtilde=Xtilde, Sigma=Sigma, D=D, s_rule=s_rule)
    logger.debug("knockoff residuals: %s", gram_residuals(model))
    model.check_model()
    return model


def save_bundle(model: KnockoffModel, directory: str) -> None:
    """Write X.csv, Xtilde.csv and D.csv to directory."""
    os.makedirs(directory, exist_ok=True)
    columns = [f"x{j}" for j in range(model.m)]
    pd.DataFrame(model.X, columns=columns).to_csv(os.path.join(directory, "X.csv"), index=False, float_format="%.17g")
    pd.DataFrame(model.Xtilde, columns=columns).to_csv(
        os.path.join(directory, "Xtilde.csv"), index=False, float_format="%.17g"
    )
    pd.DataFrame({"j": np.arange(model.m), "D": model.D}).to_csv(
        os.path.join(directory, "D.csv"), index=False, float_format="%.17g"
    )
    logger.info("wrote knockoff bundle to %s", directory)


def load_bundle(directory: str, check: bool = True) -> KnockoffModel:
    """Read a bundle written by save_bundle; with check, the Gram identities must hold."""
    X = pd.read_csv(os.path.join(directory, "X.csv")).to_numpy(dtype=float)
    Xtilde = pd.read_csv(os.path.join(directory, "Xtilde.csv")).to_numpy(dtype=float)
    D = pd.read_csv(os.path.join(directory, "D.csv"))["D"].to_numpy(dtype=float)
    norms = np.linalg.norm(X, axis=0)
    design = Design(X, standardized=bool(np.all(np.abs(norms - 1.0) <= RANK_TOL)))
    model = KnockoffModel(design=design, Xtilde=Xtilde, Sigma=design.gram, D=D, s_rule="user_supplied")
    if check:
        model.check_model()
    return model
