from typing import Tuple

import numpy as np

from pyebh.core.knockoffs import Design, standardize
from pyebh.random.random_design import gen_design


def get_orthogonal_design(n: int = 20, m: int = 4) -> Design:
    X = np.eye(n)[:, :m]
    return Design(X, standardized=True)


def get_orthogonal_augmented(n: int = 16, m: int = 4) -> np.ndarray:
    """An n x 2m matrix with orthonormal columns, for lasso paths with closed-form entry points."""
    return np.eye(n)[:, : 2 * m]


def get_random_design(n: int = 60, m: int = 10, rho: float = 0.5, seed: int = 0) -> Design:
    return standardize(gen_design(n, m, rho, seed))


def get_correlated_gram(rho: float) -> np.ndarray:
    return np.array([[1.0, rho], [rho, 1.0]])


def get_handcrafted_lasso_instance() -> Tuple[np.ndarray, np.ndarray]:
    """8 x 4 augmented design (two variables and two knockoff-like copies) with a response."""
    Z = np.array(
        [
            [1.0, 0.5, 0.9, 0.2],
            [0.0, 1.0, 0.1, 0.8],
            [1.0, -0.5, 0.7, -0.6],
            [0.5, 0.5, 0.2, 0.4],
            [-1.0, 0.0, -0.8, 0.3],
            [0.0, -1.0, 0.3, -0.9],
            [0.5, 0.0, 0.6, -0.1],
            [-0.5, 1.5, -0.2, 1.1],
        ]
    )
    Z = Z / np.linalg.norm(Z, axis=0)
    Y = np.array([2.0, 0.3, 1.1, 0.9, -1.7, -0.4, 0.8, 0.2])
    return Z, Y


def get_toy_pvalues() -> Tuple[np.ndarray, np.ndarray]:
    """Paired first- and second-stage p-values for four hypotheses."""
    P1 = np.array([0.001, 0.03, 0.6, 0.2])
    P2 = np.array([0.01, 0.02, 0.6, 0.9])
    return P1, P2
