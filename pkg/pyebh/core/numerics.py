from __future__ import annotations

import heapq
import logging
import math
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

SYMMETRY_TOL = 1e-12
PSD_CLAMP = 1e-10

_JACOBI_TOL = 1e-14
_JACOBI_MAX_SWEEPS = 60
_BETACF_EPS = 1e-16
_BETACF_FPMIN = 1e-300
_BETACF_MAXIT = 10000
_QUAD_MAX_SUBDIVISIONS = 2000


class InvalidMatrix(ValueError):
    pass


class NotPSD(np.linalg.LinAlgError):
    pass


class SingularMatrix(np.linalg.LinAlgError):
    pass


class QuadratureFailure(ArithmeticError):
    pass


def as_symmetric(A: np.ndarray) -> np.ndarray:
    """Validate that A is a finite, square, symmetric matrix and return it as a float array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix("matrix has non-finite entries")
    gap = np.abs(A - A.T)
    if np.any(gap > SYMMETRY_TOL * np.maximum(1.0, np.abs(A))):
        i, j = np.unravel_index(np.argmax(gap), gap.shape)
        raise InvalidMatrix(f"matrix is not symmetric: |A[{i},{j}] - A[{j},{i}]| = {gap[i, j]:.3e}")
    return A


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def _round_robin(m: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: m - 1 (or m) rounds of disjoint index pairs covering every pair once."""
    players = list(range(m)) + ([-1] if m % 2 else [])
    k = len(players)
    rounds = []
    for _ in range(k - 1):
        pairs = [(players[i], players[k - 1 - i]) for i in range(k // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a >= 0 and b >= 0]
        if pairs:
            rounds.append((np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def sym_eigen(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, grouped into rounds of disjoint pairs
    so that a whole round is applied as one block rotation.

    Parameters
    ----------
    A: A finite symmetric matrix.

    Returns
    -------
    The eigenvalues in ascending order and a matrix whose columns are the
    corresponding orthonormal eigenvectors.
    """
    A = as_symmetric(A).copy()
    m = A.shape[0]
    V = np.eye(m)
    scale = float(np.linalg.norm(A))
    if m == 1 or scale == 0.0:
        return np.diag(A).copy(), V

    rounds = _round_robin(m)
    for sweep in range(_JACOBI_MAX_SWEEPS):
        off = math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))
        if off <= _JACOBI_TOL * scale:
            logger.debug("jacobi converged after %d sweeps (off=%.3e)", sweep, off)
            break
        for p, q in rounds:
            apq = A[p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                theta = np.where(active, (A[q, q] - A[p, p]) / (2.0 * apq), 0.0)
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            t = np.where(active, sign / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            rows_p, rows_q = A[p, :], A[q, :]
            A[p, :] = c[:, None] * rows_p - s[:, None] * rows_q
            A[q, :] = s[:, None] * rows_p + c[:, None] * rows_q
            cols_p, cols_q = A[:, p], A[:, q]
            A[:, p] = cols_p * c - cols_q * s
            A[:, q] = cols_p * s + cols_q * c
            A[p, q] = 0.0
            A[q, p] = 0.0
            vecs_p, vecs_q = V[:, p], V[:, q]
            V[:, p] = vecs_p * c - vecs_q * s
            V[:, q] = vecs_p * s + vecs_q * c
    else:
        logger.warning("jacobi stopped after %d sweeps without reaching tolerance", _JACOBI_MAX_SWEEPS)

    eigenvalues = np.diag(A).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return eigenvalues[order], V[:, order]


def min_eigenvalue(A: np.ndarray) -> float:
    return float(sym_eigen(A)[0][0])


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root B with B @ B = A.

    Eigenvalues in [-1e-10 * ||A||, 0) are treated as rounding noise and clamped to zero.
    """
    eigenvalues, V = sym_eigen(A)
    norm = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    if eigenvalues.size and eigenvalues[0] < -PSD_CLAMP * norm:
        raise NotPSD(f"matrix has eigenvalue {eigenvalues[0]:.3e} below the clamp band -{PSD_CLAMP:g}*{norm:.3e}")
    root = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return symmetrize((V * root) @ V.T)


def cholesky_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A X = B for symmetric positive definite A."""
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except np.linalg.LinAlgError as e:
        raise SingularMatrix(f"matrix is not positive definite: {e}") from e
    return scipy.linalg.cho_solve(factor, B)


def spd_inverse(A: np.ndarray) -> np.ndarray:
    return symmetrize(cholesky_solve(A, np.eye(A.shape[0])))


# Regularized incomplete beta and the Student-t tail


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_FPMIN:
        d = _BETACF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_FPMIN:
            d = _BETACF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETACF_FPMIN:
            c = _BETACF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_FPMIN:
            d = _BETACF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETACF_FPMIN:
            c = _BETACF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}")


def betainc_reg(a: float, b: float, x: float, y: float = None) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Parameters
    ----------
    a, b: Positive shape parameters.

    x: Upper integration limit in [0, 1].

    y: 1 - x, when the caller can compute it without cancellation.
    """
    if y is None:
        y = 1.0 - x
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log(y) - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, y) / b


def _t_sf_scalar(x: float, nu: float) -> float:
    if math.isnan(x):
        return math.nan
    if x == 0.0:
        return 0.5
    if math.isinf(x):
        return 0.0 if x > 0 else 1.0
    x2 = x * x
    z = nu / (nu + x2)
    tail = 0.5 * betainc_reg(0.5 * nu, 0.5, z, x2 / (nu + x2))
    return tail if x > 0 else 1.0 - tail


def t_sf(x: ArrayLike, nu: float) -> Union[float, np.ndarray]:
    """Upper tail Pr(T_nu > x) of Student's t distribution with nu degrees of freedom."""
    if not nu > 0:
        raise ValueError(f"degrees of freedom must be positive, got {nu}")
    if np.ndim(x) == 0:
        return _t_sf_scalar(float(x), float(nu))
    values = np.asarray(x, dtype=float)
    flat = [_t_sf_scalar(v, float(nu)) for v in values.ravel()]
    return np.array(flat, dtype=float).reshape(values.shape)


def two_sided_t_pvalue(statistics: np.ndarray, nu: float) -> np.ndarray:
    """2 * Pr(T_nu > |T|), clipped to [0, 1]."""
    tail = np.asarray(t_sf(np.abs(np.asarray(statistics, dtype=float)), nu), dtype=float)
    return np.clip(2.0 * tail, 0.0, 1.0)


def t_pdf(x: ArrayLike, nu: float) -> Union[float, np.ndarray]:
    log_norm = math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - 0.5 * math.log(nu * math.pi)
    return np.exp(log_norm - 0.5 * (nu + 1.0) * np.log1p(np.asarray(x, dtype=float) ** 2 / nu))


# Adaptive Gauss-Kronrod quadrature

_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
    ]
)
_WGK_CENTER = 0.209482141084727828012999174891714
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
    ]
)
_WG_CENTER = 0.417959183673469387755102040816327

_NODES = np.concatenate([-_XGK, [0.0], _XGK[::-1]])
_KRONROD_WEIGHTS = np.concatenate([_WGK, [_WGK_CENTER], _WGK[::-1]])
_gauss_half = np.zeros(7)
_gauss_half[1::2] = _WG
_GAUSS_WEIGHTS = np.concatenate([_gauss_half, [_WG_CENTER], _gauss_half[::-1]])


def _gauss_kronrod(g: Callable[[np.ndarray], ArrayLike], a: float, b: float) -> Tuple[float, float]:
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = center + half * _NODES
    values = np.broadcast_to(np.asarray(g(nodes), dtype=float), nodes.shape)
    if not np.all(np.isfinite(values)):
        raise QuadratureFailure(f"integrand is not finite on [{a:.3e}, {b:.3e}]")
    kronrod = half * float(np.dot(_KRONROD_WEIGHTS, values))
    gauss = half * float(np.dot(_GAUSS_WEIGHTS, values))
    return kronrod, abs(kronrod - gauss)


def quad(
    g: Callable[[np.ndarray], ArrayLike],
    tol: float = 1e-10,
    a: float = 0.0,
    b: float = 1.0,
    breakpoints: Sequence[float] = (),
    max_subdivisions: int = _QUAD_MAX_SUBDIVISIONS,
) -> float:
    """Adaptive 7/15-point Gauss-Kronrod integral of g over [a, b].

    The integrand is never evaluated at the end points, so integrable singularities at a
    are handled by repeated bisection of the worst interval. Breakpoints (e.g. jumps of a
    step function) start the subdivision.

    Raises QuadratureFailure when the summed error estimate stays above tol after
    max_subdivisions bisections.
    """
    cuts = [a] + sorted(x for x in breakpoints if a < x < b) + [b]
    heap: List[Tuple[float, float, float, float]] = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        estimate, error = _gauss_kronrod(g, lo, hi)
        heapq.heappush(heap, (-error, lo, hi, estimate))

    for _ in range(max_subdivisions):
        total_error = math.fsum(-item[0] for item in heap)
        if total_error <= tol:
            return math.fsum(item[3] for item in heap)
        neg_error, lo, hi, _estimate = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            heapq.heappush(heap, (neg_error, lo, hi, _estimate))
            break
        for left, right in ((lo, mid), (mid, hi)):
            estimate, error = _gauss_kronrod(g, left, right)
            heapq.heappush(heap, (-error, left, right, estimate))

    total_error = math.fsum(-item[0] for item in heap)
    if total_error <= tol:
        return math.fsum(item[3] for item in heap)
    raise QuadratureFailure(f"quadrature error estimate {total_error:.3e} above tolerance {tol:.1e}")
