import math
import sys

import numpy as np
import pytest

from pyebh.analyze.knockoff_filter import (
    KnockoffStats,
    LassoPath,
    fit_lasso_path,
    kkt_violation,
    knockoff_filter,
    knockoff_select,
    knockoff_stats,
    knockoff_threshold,
    lasso_path,
    penalty_grid,
)
from pyebh.core.knockoffs import build_knockoffs
from pyebh.examples.simple_designs import get_handcrafted_lasso_instance, get_orthogonal_augmented, get_random_design
from pyebh.random.random_design import gen_truth
from pyebh.random.rng import CounterRNG


def stats_from(L: list, L_tilde: list) -> KnockoffStats:
    entry = np.array(L + L_tilde, dtype=float)
    path = LassoPath(penalty_grid=np.array([1.0, 0.5]), coefficients=np.zeros((2, entry.size)), entry_penalty=entry)
    return knockoff_stats(path)


def brute_force_threshold(V: np.ndarray, alpha: float) -> float:
    best = math.inf
    for t in np.abs(V[V != 0]):
        if (1 + np.sum(V <= -t)) / max(np.sum(V >= t), 1) <= alpha:
            best = min(best, t)
    return best


class TestLassoPath:
    @staticmethod
    def test_grid() -> None:
        grid = penalty_grid(2.0, grid_size=5, grid_ratio=1e-2)
        assert grid[0] == 2.0
        assert grid[-1] == pytest.approx(0.02)
        assert np.all(np.diff(grid) < 0)
        with pytest.raises(ValueError):
            penalty_grid(1.0, grid_size=1)

    @staticmethod
    def test_zero_response() -> None:
        Z, _ = get_handcrafted_lasso_instance()
        path = fit_lasso_path(Z, np.zeros(8))
        assert np.all(path.coefficients == 0)
        assert np.all(path.entry_penalty == 0)

    @staticmethod
    def test_orthogonal_design_soft_thresholds() -> None:
        Z = get_orthogonal_augmented(n=16, m=4)
        Y = np.array([5.0, -3.0, 0.5, 4.2, 2.0, -1.1, 0.03, 6.0] + [0.7] * 8)
        path = fit_lasso_path(Z, Y)
        c = np.abs(Z.T @ Y)
        for k in range(8):
            entered = path.penalty_grid[c[k] - path.penalty_grid > 1e-9]
            assert path.entry_penalty[k] == (entered[0] if entered.size else 0.0)
        # coefficients are the soft-thresholded inner products
        lam = path.penalty_grid[40]
        expected = np.sign(Z.T @ Y) * np.maximum(c - lam, 0.0)
        assert np.allclose(path.coefficients[40], expected, atol=1e-9)
        assert path.L.size == path.L_tilde.size == 4

    @staticmethod
    def test_kkt_along_path() -> None:
        Z, Y = get_handcrafted_lasso_instance()
        path = fit_lasso_path(Z, Y)
        G, c = Z.T @ Z, Z.T @ Y
        for lam, b in zip(path.penalty_grid, path.coefficients):
            assert kkt_violation(G, c, b, lam) <= 1e-6
        assert np.all(path.coefficients[0] == 0)
        assert np.count_nonzero(path.coefficients[-1]) > 0

    @staticmethod
    def test_swapping_columns_flips_statistics() -> None:
        model = build_knockoffs(get_random_design(60, 8, 0.5, seed=2))
        beta, _ = gen_truth(8, 3, 4.0, seed=3)
        Y = model.X @ beta + CounterRNG([3, 1]).standard_normal(60)
        m = 8
        for j in (0, 3, 5):
            swapped = model.augmented.copy()
            swapped[:, [j, m + j]] = swapped[:, [m + j, j]]
            original = knockoff_stats(lasso_path(model, Y))
            flipped = knockoff_stats(fit_lasso_path(swapped, Y))
            assert flipped.L[j] == original.L_tilde[j]
            assert flipped.L_tilde[j] == original.L[j]
            if original.L[j] != original.L_tilde[j]:
                assert flipped.V[j] == -original.V[j]


class TestKnockoffStats:
    @staticmethod
    def test_formula() -> None:
        assert stats_from([0.4], [0.1]).V.tolist() == [0.4]
        assert stats_from([0.1], [0.4]).V.tolist() == [-0.4]

    @staticmethod
    def test_ties_are_negative() -> None:
        assert stats_from([0.3], [0.3]).V.tolist() == [-0.3]
        assert stats_from([0.0], [0.0]).V.tolist() == [0.0]


class TestKnockoffSelect:
    @staticmethod
    def test_example() -> None:
        V = np.array([3.0, 2.0, 1.0, -1.0])
        assert knockoff_threshold(V, 0.5) == 2.0
        report = knockoff_select(KnockoffStats(V=V, L=np.abs(V), L_tilde=np.zeros(4)), 0.5)
        assert report.rejected.tolist() == [0, 1]
        assert report.extra["threshold"] == 2.0
        assert report.adjusted is None

    @staticmethod
    def test_singleton_never_selected() -> None:
        assert knockoff_threshold(np.array([5.0]), 0.4) == math.inf

    @staticmethod
    def test_all_negative() -> None:
        V = np.array([-1.0, -2.0, 0.0])
        report = knockoff_select(KnockoffStats(V=V, L=np.zeros(3), L_tilde=-V), 0.2)
        assert report.n_rejected == 0
        assert report.extra["threshold"] == math.inf

    @staticmethod
    def test_brute_force() -> None:
        rng = np.random.default_rng(0)
        for _ in range(2000):
            m = int(rng.integers(1, 11))
            V = rng.integers(-4, 9, size=m).astype(float) / 2
            alpha = float(rng.choice([0.1, 0.2, 0.3, 0.5]))
            assert knockoff_threshold(V, alpha) == brute_force_threshold(V, alpha)


class TestKnockoffFilter:
    @staticmethod
    def test_strong_signals_found() -> None:
        model = build_knockoffs(get_random_design(200, 20, 0.3, seed=5))
        beta, support = gen_truth(20, 8, 15.0, seed=6)
        Y = model.X @ beta + CounterRNG([6, 1]).standard_normal(200)
        report = knockoff_filter(model, Y, 0.2)
        assert report.procedure == "knockoff"
        assert set(support.tolist()) <= set(report.rejected.tolist())

    @staticmethod
    @pytest.mark.slow
    def test_fdr_control() -> None:
        alpha = 0.2
        fdp = []
        for rep in range(200):
            model = build_knockoffs(get_random_design(100, 20, 0.5, seed=rep))
            beta, support = gen_truth(20, 4, 5.0, seed=[rep, 1])
            Y = model.X @ beta + CounterRNG([rep, 2]).standard_normal(100)
            rejected = knockoff_filter(model, Y, alpha, grid_size=50).rejected
            false = np.setdiff1d(rejected, support).size
            fdp.append(false / max(rejected.size, 1))
        fdp = np.array(fdp)
        assert fdp.mean() <= alpha + 3 * fdp.std(ddof=1) / np.sqrt(fdp.size)


if __name__ == "__main__":
    pytest.main(sys.argv)
