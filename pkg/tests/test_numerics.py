import sys

import numpy as np
import pytest
import scipy.special
import scipy.stats

from pyebh.core.numerics import (
    InvalidMatrix,
    NotPSD,
    QuadratureFailure,
    SingularMatrix,
    betainc_reg,
    cholesky_solve,
    min_eigenvalue,
    psd_sqrt,
    quad,
    spd_inverse,
    sym_eigen,
    t_sf,
    two_sided_t_pvalue,
)


def random_symmetric(m: int, seed: int) -> np.ndarray:
    A = np.random.default_rng(seed).standard_normal((m, m))
    return A + A.T


class TestSymEigen:
    @staticmethod
    @pytest.mark.parametrize("m,seed", [(1, 0), (2, 1), (5, 2), (8, 3), (13, 4)])
    def test_matches_lapack(m: int, seed: int) -> None:
        A = random_symmetric(m, seed)
        eigenvalues, V = sym_eigen(A)
        assert np.allclose(eigenvalues, np.linalg.eigvalsh(A), atol=1e-10)
        assert np.all(np.diff(eigenvalues) >= 0)
        assert np.allclose(V.T @ V, np.eye(m), atol=1e-10)
        assert np.allclose(V @ np.diag(eigenvalues) @ V.T, A, atol=1e-10)

    @staticmethod
    def test_diagonal_input() -> None:
        eigenvalues, V = sym_eigen(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(eigenvalues, [1.0, 2.0, 3.0])
        assert np.allclose(np.abs(V), np.eye(3)[:, [1, 2, 0]])

    @staticmethod
    def test_zero_matrix() -> None:
        eigenvalues, V = sym_eigen(np.zeros((3, 3)))
        assert np.all(eigenvalues == 0)
        assert np.allclose(V, np.eye(3))

    @staticmethod
    def test_rejects_asymmetric() -> None:
        with pytest.raises(InvalidMatrix):
            sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))

    @staticmethod
    def test_rejects_non_square_and_nan() -> None:
        with pytest.raises(InvalidMatrix):
            sym_eigen(np.ones((2, 3)))
        with pytest.raises(InvalidMatrix):
            sym_eigen(np.array([[1.0, np.nan], [np.nan, 1.0]]))

    @staticmethod
    def test_min_eigenvalue() -> None:
        rho = 0.3
        assert min_eigenvalue(np.array([[1.0, rho], [rho, 1.0]])) == pytest.approx(1 - rho)


class TestPsdSqrt:
    @staticmethod
    def test_square_root() -> None:
        B = np.random.default_rng(0).standard_normal((6, 4))
        A = B @ B.T  # rank 4
        root = psd_sqrt(A)
        assert np.allclose(root, root.T)
        assert np.allclose(root @ root, A, atol=1e-9)

    @staticmethod
    def test_clamps_rounding_noise() -> None:
        A = np.diag([1.0, -1e-13])
        root = psd_sqrt(A)
        assert np.allclose(root, np.diag([1.0, 0.0]))

    @staticmethod
    def test_rejects_negative_definite() -> None:
        with pytest.raises(NotPSD):
            psd_sqrt(np.diag([1.0, -1e-3]))


class TestCholesky:
    @staticmethod
    def test_solve_and_inverse() -> None:
        A = np.array([[4.0, 1.0], [1.0, 3.0]])
        b = np.array([1.0, 2.0])
        assert np.allclose(A @ cholesky_solve(A, b), b)
        assert np.allclose(spd_inverse(A), np.linalg.inv(A))

    @staticmethod
    def test_singular() -> None:
        with pytest.raises(SingularMatrix):
            spd_inverse(np.array([[1.0, 1.0], [1.0, 1.0]]))


class TestStudentT:
    @staticmethod
    @pytest.mark.parametrize("a,b,x", [(0.5, 0.5, 0.3), (2.0, 3.0, 0.7), (30.0, 0.5, 0.95), (5.0, 5.0, 0.01)])
    def test_betainc_matches_scipy(a: float, b: float, x: float) -> None:
        assert betainc_reg(a, b, x) == pytest.approx(scipy.special.betainc(a, b, x), rel=1e-12, abs=1e-300)

    @staticmethod
    def test_betainc_end_points() -> None:
        assert betainc_reg(2.0, 3.0, 0.0) == 0.0
        assert betainc_reg(2.0, 3.0, 1.0) == 1.0

    @staticmethod
    @pytest.mark.parametrize("nu", [1, 3, 10, 57, 400])
    def test_t_sf_matches_scipy(nu: int) -> None:
        x = np.array([-8.0, -1.5, -0.1, 0.0, 0.2, 1.0, 2.5, 6.0, 20.0])
        expected = scipy.stats.t.sf(x, nu)
        assert np.allclose(t_sf(x, nu), expected, rtol=1e-10, atol=0)

    @staticmethod
    def test_t_sf_scalar_and_limits() -> None:
        assert t_sf(0.0, 5) == 0.5
        assert t_sf(np.inf, 5) == 0.0
        assert t_sf(-np.inf, 5) == 1.0
        assert isinstance(t_sf(1.0, 5), float)

    @staticmethod
    def test_t_sf_bad_df() -> None:
        with pytest.raises(ValueError):
            t_sf(1.0, 0)

    @staticmethod
    def test_two_sided_pvalue() -> None:
        T = np.array([-2.0, 0.0, 3.0])
        p = two_sided_t_pvalue(T, 12)
        assert np.allclose(p, 2 * scipy.stats.t.sf(np.abs(T), 12), rtol=1e-10)
        assert p[1] == 1.0


class TestQuad:
    @staticmethod
    def test_polynomial() -> None:
        assert quad(lambda t: 3 * t**2) == pytest.approx(1.0, abs=1e-13)

    @staticmethod
    def test_integrable_singularity() -> None:
        assert quad(lambda t: t**-0.5, tol=1e-8) == pytest.approx(2.0, abs=1e-7)

    @staticmethod
    def test_step_function_with_breakpoint() -> None:
        def step(t: np.ndarray) -> np.ndarray:
            return np.where(t <= 0.25, 4.0, 0.0)

        assert quad(step, breakpoints=(0.25,)) == pytest.approx(1.0, abs=1e-12)

    @staticmethod
    def test_interval() -> None:
        assert quad(np.exp, a=0.0, b=2.0) == pytest.approx(np.exp(2.0) - 1.0, rel=1e-12)

    @staticmethod
    def test_non_finite_integrand() -> None:
        with pytest.raises(QuadratureFailure):
            quad(lambda t: np.full_like(t, np.nan))

    @staticmethod
    def test_budget_exhausted() -> None:
        with pytest.raises(QuadratureFailure):
            quad(lambda t: np.sin(1.0 / t) / t, tol=1e-14, max_subdivisions=5)


if __name__ == "__main__":
    pytest.main(sys.argv)
