import sys

import numpy as np
import pytest

from pyebh.core.knockoffs import (
    DegenerateColumn,
    Design,
    InfeasibleD,
    InsufficientRows,
    RankDeficient,
    build_knockoffs,
    choose_D,
    gram_residuals,
    load_bundle,
    save_bundle,
    standardize,
    validate_D,
)
from pyebh.examples.simple_designs import get_correlated_gram, get_orthogonal_design, get_random_design
from pyebh.random.random_design import gen_design


class TestStandardize:
    @staticmethod
    def test_unit_norms() -> None:
        design = standardize(gen_design(30, 5, 0.5, 1))
        assert design.standardized
        assert np.allclose(np.linalg.norm(design.X, axis=0), 1.0)
        assert (design.n, design.m) == (30, 5)

    @staticmethod
    def test_centering() -> None:
        X = gen_design(30, 5, 0.5, 1) + 3.0
        design = standardize(X, center=True)
        assert np.allclose(design.X.mean(axis=0), 0.0)

    @staticmethod
    def test_zero_column() -> None:
        X = gen_design(20, 3, 0.0, 2)
        X[:, 1] = 0.0
        with pytest.raises(DegenerateColumn):
            standardize(X)

    @staticmethod
    def test_constant_column_when_centering() -> None:
        X = gen_design(20, 3, 0.0, 2)
        X[:, 2] = 5.0
        standardize(X)
        with pytest.raises(DegenerateColumn):
            standardize(X, center=True)

    @staticmethod
    def test_collinear_columns() -> None:
        X = gen_design(20, 3, 0.0, 3)
        X[:, 2] = -2.0 * X[:, 0]
        with pytest.raises(RankDeficient):
            standardize(X)

    @staticmethod
    def test_linear_dependence() -> None:
        X = gen_design(20, 4, 0.0, 4)
        X[:, 3] = X[:, 0] + X[:, 1] - X[:, 2]
        with pytest.raises(RankDeficient):
            standardize(X)


class TestChooseD:
    @staticmethod
    def test_identity_gram() -> None:
        assert np.allclose(choose_D(np.eye(3)), 0.999)

    @staticmethod
    @pytest.mark.parametrize("rho", [0.2, 0.5, 0.9])
    def test_correlated_gram(rho: float) -> None:
        D = choose_D(get_correlated_gram(rho))
        assert np.allclose(D, 0.999 * min(1.0, 2 * (1 - rho)))

    @staticmethod
    def test_validate_rejects_infeasible() -> None:
        Sigma = np.eye(2)
        assert np.allclose(validate_D(Sigma, [1.5, 0.5]), [1.5, 0.5])
        with pytest.raises(InfeasibleD):
            validate_D(Sigma, [2.5, 0.5])
        with pytest.raises(InfeasibleD):
            validate_D(Sigma, [0.0, 0.5])
        with pytest.raises(InfeasibleD):
            validate_D(Sigma, [0.5])

    @staticmethod
    def test_column_sign_flips() -> None:
        X = get_random_design(50, 8, 0.5, seed=2).X
        signs = np.array([1, -1, -1, 1, -1, 1, 1, -1], dtype=float)
        flipped = X * signs
        assert np.allclose(choose_D(flipped.T @ flipped), choose_D(X.T @ X), rtol=1e-12, atol=0)


class TestBuildKnockoffs:
    @staticmethod
    @pytest.mark.parametrize("n,m,rho", [(20, 4, 0.0), (60, 10, 0.5), (90, 30, 0.9)])
    def test_gram_identities(n: int, m: int, rho: float) -> None:
        model = build_knockoffs(get_random_design(n, m, rho, seed=7))
        for name, residual in gram_residuals(model).items():
            assert residual < 1e-9, name
        assert model.s_rule == "equicorrelated"
        assert model.augmented.shape == (n, 2 * m)

    @staticmethod
    @pytest.mark.slow
    def test_gram_identities_on_random_designs() -> None:
        rng = np.random.default_rng(2024)
        for i in range(200):
            m = int(rng.integers(2, 41))
            n = int(rng.integers(2 * m, 201))
            rho = float(rng.uniform(0.0, 0.9))
            model = build_knockoffs(standardize(gen_design(n, m, rho, i)))
            residuals = gram_residuals(model)
            for name in ("knockoff_gram", "cross_gram", "independence"):
                assert residuals[name] <= 1e-8, (n, m, rho, name)

    @staticmethod
    @pytest.mark.parametrize("seed", [0, 3])
    def test_column_permutation(seed: int) -> None:
        raw = gen_design(60, 10, 0.5, seed)
        perm = np.array([3, 7, 0, 9, 1, 5, 8, 2, 6, 4])
        model = build_knockoffs(standardize(raw))
        permuted = build_knockoffs(standardize(raw[:, perm]))
        assert np.allclose(permuted.D, model.D[perm], rtol=0, atol=1e-12)
        assert np.allclose(permuted.Xtilde, model.Xtilde[:, perm], rtol=0, atol=1e-9)

    @staticmethod
    def test_orthogonal_design() -> None:
        model = build_knockoffs(get_orthogonal_design())
        assert np.allclose(model.Sigma, np.eye(4))
        assert np.allclose(model.X.T @ model.Xtilde, 0.001 * np.eye(4))

    @staticmethod
    def test_knockoffs_orthogonal_to_each_other_when_d_is_one() -> None:
        design = get_orthogonal_design()
        model = build_knockoffs(design, D=np.ones(4))
        assert model.s_rule == "user_supplied"
        assert np.allclose(model.X.T @ model.Xtilde, 0.0)
        assert np.allclose(model.Xtilde.T @ model.Xtilde, np.eye(4))

    @staticmethod
    def test_random_completion() -> None:
        design = get_random_design(40, 6, 0.5, seed=1)
        fixed = build_knockoffs(design)
        rotated = build_knockoffs(design, rng=np.random.default_rng(0))
        assert not np.allclose(fixed.Xtilde, rotated.Xtilde)
        assert max(gram_residuals(rotated).values()) < 1e-9

    @staticmethod
    def test_deterministic() -> None:
        design = get_random_design(40, 6, 0.5, seed=1)
        assert np.array_equal(build_knockoffs(design).Xtilde, build_knockoffs(design).Xtilde)

    @staticmethod
    def test_insufficient_rows() -> None:
        with pytest.raises(InsufficientRows):
            build_knockoffs(Design(np.eye(7)[:, :4], standardized=True))

    @staticmethod
    def test_rejects_infeasible_d() -> None:
        with pytest.raises(InfeasibleD):
            build_knockoffs(get_orthogonal_design(), D=np.full(4, 2.5))


class TestBundle:
    @staticmethod
    def test_save_and_load(tmp_path) -> None:  # type: ignore
        model = build_knockoffs(get_random_design(30, 5, 0.5, seed=3))
        save_bundle(model, str(tmp_path))
        assert {p.name for p in tmp_path.iterdir()} == {"X.csv", "Xtilde.csv", "D.csv"}
        loaded = load_bundle(str(tmp_path))
        assert np.array_equal(loaded.X, model.X)
        assert np.array_equal(loaded.Xtilde, model.Xtilde)
        assert np.array_equal(loaded.D, model.D)
        assert loaded.design.standardized

    @staticmethod
    def test_corrupted_bundle(tmp_path) -> None:  # type: ignore
        model = build_knockoffs(get_random_design(30, 5, 0.5, seed=3))
        save_bundle(model, str(tmp_path))
        Xtilde = np.loadtxt(tmp_path / "Xtilde.csv", delimiter=",", skiprows=1)
        Xtilde[0, 0] += 0.1
        header = ",".join(f"x{j}" for j in range(5))
        np.savetxt(tmp_path / "Xtilde.csv", Xtilde, delimiter=",", header=header, comments="", fmt="%.17g")
        with pytest.raises(InfeasibleD):
            load_bundle(str(tmp_path))
        unchecked = load_bundle(str(tmp_path), check=False)
        assert max(gram_residuals(unchecked).values()) > 1e-3

    @staticmethod
    def test_missing_bundle(tmp_path) -> None:  # type: ignore
        with pytest.raises(FileNotFoundError):
            load_bundle(str(tmp_path / "nothing"))


if __name__ == "__main__":
    pytest.main(sys.argv)
