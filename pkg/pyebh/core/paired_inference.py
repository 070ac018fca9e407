from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from pyebh.core.knockoffs import InfeasibleD, KnockoffModel
from pyebh.core.numerics import SingularMatrix, cholesky_solve, two_sided_t_pvalue

logger = logging.getLogger(__name__)

FIT_TOL = 1e-10


class InsufficientDF(ValueError):
    pass


class DegenerateFit(ArithmeticError):
    pass


class DegenerateFitWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PairedEvidence:
    """Two independent sets of t-statistics and p-values for the same m coefficients.

    The first set comes from the estimator built on X + Xtilde, the second from X - Xtilde.
    """

    P1: np.ndarray
    P2: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    beta1_hat: np.ndarray
    beta2_hat: np.ndarray
    sigma_hat: float
    nu: int

    @property
    def m(self) -> int:
        return int(self.P1.size)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"j": np.arange(self.m), "T1": self.T1, "P1": self.P1, "T2": self.T2, "P2": self.P2}
        )

    def to_csv(self, path: str) -> None:
        """CSV with a two-line '#' header carrying sigma_hat and nu."""
        with open(path, "w") as f:
            f.write(f"# sigma_hat={self.sigma_hat!r}\n# nu={self.nu}\n")
            self.to_frame().to_csv(f, index=False, float_format="%.17g")


def sigma_hat(model: KnockoffModel, Y: np.ndarray) -> Tuple[float, int]:
    """Residual standard error of the OLS fit of Y on the original X, with nu = n - 2m.

    A residual within FIT_TOL * |Y| of zero is an exact fit: sigma_hat is reported as 0 with a warning.
    """
    Y = _check_response(model, Y)
    nu = model.n - 2 * model.m
    if nu <= 0:
        raise InsufficientDF(f"need n > 2m for nu = n - 2m > 0, got n={model.n}, m={model.m}")
    try:
        beta_ols = cholesky_solve(model.Sigma, model.X.T @ Y)
    except SingularMatrix as e:
        raise InfeasibleD(f"Gram matrix is singular: {e}") from e
    residual = Y - model.X @ beta_ols
    rss = float(residual @ residual)
    if rss <= FIT_TOL**2 * float(Y @ Y):
        logger.warning("residual norm %.3e is rounding noise; reporting sigma_hat = 0", math.sqrt(rss))
        warnings.warn("response lies in the column space of X; sigma_hat = 0", DegenerateFitWarning)
        return 0.0, nu
    return math.sqrt(rss / nu), nu


def twin_estimators(model: KnockoffModel, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """beta1 = (2 Sigma - D)^{-1} (X + Xtilde)^T Y and beta2 = D^{-1} (X - Xtilde)^T Y."""
    Y = _check_response(model, Y)
    try:
        beta1 = model.sum_precision @ ((model.X + model.Xtilde).T @ Y)
    except SingularMatrix as e:
        raise InfeasibleD(f"2*Sigma - D is singular: {e}") from e
    beta2 = ((model.X - model.Xtilde).T @ Y) / model.D
    return beta1, beta2


def unbiasedness_residuals(model: KnockoffModel) -> Dict[str, float]:
    """Max-abs deviation from the identity of the two estimator maps applied to X."""
    eye = np.eye(model.m)
    first = model.sum_precision @ ((model.X + model.Xtilde).T @ model.X)
    second = ((model.X - model.Xtilde).T @ model.X) / model.D[:, None]
    return {
        "sum_estimator": float(np.max(np.abs(first - eye))),
        "difference_estimator": float(np.max(np.abs(second - eye))),
    }


def paired_pvalues(model: KnockoffModel, Y: np.ndarray, sigma: Optional[float] = None) -> PairedEvidence:
    """Paired t-statistics and two-sided p-values.

    Parameters
    ----------
    model: The knockoff model built on the design.

    Y: Response vector of length n.

    sigma: Known noise level. When given it replaces the estimated sigma_hat; nu is unchanged.
    """
    sigma_est, nu = sigma_hat(model, Y)
    if sigma is not None:
        if not sigma > 0:
            raise DegenerateFit(f"known sigma must be positive, got {sigma}")
        sigma_est = float(sigma)
    if sigma_est == 0.0:
        raise DegenerateFit("sigma_hat = 0: the response is fit exactly and p-values are undefined")

    beta1, beta2 = twin_estimators(model, Y)
    scale = sigma_est * math.sqrt(2.0)
    T1 = beta1 / (scale * np.sqrt(np.diag(model.sum_precision)))
    T2 = beta2 * np.sqrt(model.D) / scale
    return PairedEvidence(
        P1=two_sided_t_pvalue(T1, nu),
        P2=two_sided_t_pvalue(T2, nu),
        T1=T1,
        T2=T2,
        beta1_hat=beta1,
        beta2_hat=beta2,
        sigma_hat=sigma_est,
        nu=nu,
    )


def _check_response(model: KnockoffModel, Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y, dtype=float).ravel()
    if Y.size != model.n:
        raise ValueError(f"response has length {Y.size}, expected n={model.n}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("response has non-finite entries")
    return Y
