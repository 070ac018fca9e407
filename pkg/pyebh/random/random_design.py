from __future__ import annotations

import math
from typing import Tuple

import numpy as np

from pyebh.random.rng import Seed, as_rng


def gen_design(n: int, m: int, rho: float, seed: Seed) -> np.ndarray:
    """
    Sample an n x m matrix with i.i.d. N(0, Omega) rows, Omega_ij = rho^|i-j|.

    Parameters
    ----------
    n: Number of rows

    m: Number of columns

    rho: AR(1) correlation between neighbouring columns, in [0, 1)

    seed: An integer seed, a sequence of integers, or a CounterRNG to draw from
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    Z = as_rng(seed).standard_normal((n, m))
    X = np.empty((n, m))
    X[:, 0] = Z[:, 0]
    innovation = math.sqrt(1.0 - rho * rho)
    for t in range(1, m):
        X[:, t] = rho * X[:, t - 1] + innovation * Z[:, t]
    return X


def gen_truth(
    m: int, k: int, gamma: float, seed: Seed, random_signs: bool = False
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample a coefficient vector with exactly k nonzero entries of magnitude gamma.

    The support is uniform without replacement; entries are +gamma unless random_signs.
    The signs are drawn either way so that the random stream advances identically.

    Returns the coefficients and the sorted support.
    """
    if not 0 <= k <= m:
        raise ValueError(f"need 0 <= k <= m, got k={k}, m={m}")
    rng = as_rng(seed)
    support = np.sort(rng.choice(m, k))
    signs = rng.signs(k)
    beta = np.zeros(m)
    beta[support] = gamma * (signs if random_signs else 1.0)
    return beta, support
