"""p-to-e calibrators.

A calibrator is a nonincreasing function g on [0, 1] with integral at most one, so that g(P)
is an e-value whenever P is a valid p-value.
"""
from __future__ import annotations

import logging
import math
import re
import warnings
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Type, Union

import numpy as np

from pyebh.core.numerics import quad

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

_UNBOUNDED_FLOOR = 1e-12


class DomainError(ValueError):
    pass


class ZeroEvidence(ValueError):
    pass


class CalibratorSpecError(ValueError):
    pass


class EvidenceWarning(UserWarning):
    pass


class Calibrator:
    """Base class for calibrators.

    Subclasses implement `_evaluate` on a float array already checked to lie in [0, 1].
    """

    name = "calibrator"
    #: sup of g, infinite for unbounded calibrators
    bound = math.inf
    #: points where g jumps, passed on to quadrature
    breakpoints: Tuple[float, ...] = ()
    #: lower limit of numerical integration; the mass below it is `tail_mass(floor)`
    quadrature_floor = 0.0

    def _evaluate(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def resolve(self, alpha: float) -> Calibrator:
        """Bind any parameter that depends on the target level alpha."""
        return self

    def tail_mass(self, h: float) -> float:
        """Integral of g over [0, h]."""
        return 0.0

    def params(self) -> Dict[str, float]:
        return {}

    @property
    def spec(self) -> str:
        params = self.params()
        if not params:
            return self.name
        return f"{self.name}(" + ", ".join(f"{k}={v!r}" for k, v in params.items()) + ")"

    def __call__(self, t: ArrayLike) -> Union[float, np.ndarray]:
        values = np.asarray(t, dtype=float)
        bad = ~((values >= 0.0) & (values <= 1.0))
        if np.any(bad):
            raise DomainError(f"calibrator argument outside [0, 1]: {values[bad].ravel()[0]!r}")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            result = self._evaluate(values)
        if np.ndim(t) == 0:
            return float(result)
        return result

    def __repr__(self) -> str:
        return f"{type(self).__name__}<{self.spec}>"

    def __eq__(self, other: object) -> bool:
        return type(self) is type(other) and self.params() == other.params()  # type: ignore

    def __hash__(self) -> int:
        return hash((type(self).__name__, tuple(sorted(self.params().items()))))


class AllOrNothing(Calibrator):
    """g_r(t) = alpha^{-r} 1(t <= alpha^r).

    With r = 1/2 this turns e-weighted BH into the Bonferroni-BH screening rule.
    """

    name = "all_or_nothing"

    def __init__(self, r: float = 0.5, alpha: Optional[float] = None) -> None:
        if not 0.0 < r < 1.0:
            raise CalibratorSpecError(f"all_or_nothing needs r in (0, 1), got {r}")
        if alpha is not None and not 0.0 < alpha < 1.0:
            raise CalibratorSpecError(f"all_or_nothing needs alpha in (0, 1), got {alpha}")
        self.r = float(r)
        self.alpha = alpha

    def resolve(self, alpha: float) -> AllOrNothing:
        return AllOrNothing(self.r, alpha)

    @property
    def threshold(self) -> float:
        if self.alpha is None:
            raise CalibratorSpecError("all_or_nothing calibrator used before alpha was resolved")
        return float(self.alpha**self.r)

    @property
    def bound(self) -> float:  # type: ignore
        return 1.0 / self.threshold

    @property
    def breakpoints(self) -> Tuple[float, ...]:  # type: ignore
        return (self.threshold,)

    def _evaluate(self, t: np.ndarray) -> np.ndarray:
        threshold = self.threshold
        return np.where(t <= threshold, 1.0 / threshold, 0.0)

    def params(self) -> Dict[str, float]:
        params = {"r": self.r}
        if self.alpha is not None:
            params["alpha"] = self.alpha
        return params


class BoundedPoly(Calibrator):
    """g(t) = C (1 - t^a) with a = 1/(C - 1); g(0) = C and the integral is exactly one.

    C defaults to 1/alpha at resolution time.
    """

    name = "bounded_poly"

    def __init__(self, C: Optional[float] = None) -> None:
        if C is not None and not C > 1.0:
            raise CalibratorSpecError(f"bounded_poly needs C > 1, got {C}")
        self.C = None if C is None else float(C)

    def resolve(self, alpha: float) -> BoundedPoly:
        if self.C is not None:
            return self
        if not 0.0 < alpha < 1.0:
            raise CalibratorSpecError(f"cannot set C = 1/alpha for alpha = {alpha}")
        return BoundedPoly(1.0 / alpha)

    @property
    def exponent(self) -> float:
        if self.C is None:
            raise CalibratorSpecError("bounded_poly calibrator used before C was resolved")
        return 1.0 / (self.C - 1.0)

    @property
    def bound(self) -> float:  # type: ignore
        if self.C is None:
            raise CalibratorSpecError("bounded_poly calibrator used before C was resolved")
        return self.C

    def _evaluate(self, t: np.ndarray) -> np.ndarray:
        return self.bound * (1.0 - t**self.exponent)

    def params(self) -> Dict[str, float]:
        return {} if self.C is None else {"C": self.C}


class Power(Calibrator):
    """g(t) = kappa t^(kappa - 1), kappa in (0, 1)."""

    name = "power"
    quadrature_floor = _UNBOUNDED_FLOOR

    def __init__(self, kappa: float = 0.5) -> None:
        if not 0.0 < kappa < 1.0:
            raise CalibratorSpecError(f"power needs kappa in (0, 1), got {kappa}")
        self.kappa = float(kappa)

    def _evaluate(self, t: np.ndarray) -> np.ndarray:
        return self.kappa * t ** (self.kappa - 1.0)

    def tail_mass(self, h: float) -> float:
        return h**self.kappa

    def params(self) -> Dict[str, float]:
        return {"kappa": self.kappa}


class PowerMixture(Calibrator):
    """The power calibrators averaged over kappa in (0, 1).

    Closed form (1 - t + t ln t) / (t (ln t)^2), which is 1/2 at t = 1 and infinite at 0.
    """

    name = "power_mixture"
    quadrature_floor = _UNBOUNDED_FLOOR

    def _evaluate(self, t: np.ndarray) -> np.ndarray:
        L = np.log(t)
        closed = (1.0 - t + t * L) / (t * L * L)
        # near t = 1 the closed form cancels; integrate exp(kappa L) term by term instead
        series = 0.5 - L / 6.0 + L * L / 24.0 - L**3 / 120.0
        values = np.where(np.abs(L) < 1e-3, series, closed)
        return np.where(t == 0.0, math.inf, values)

    def tail_mass(self, h: float) -> float:
        return (1.0 - h) / -math.log(h)


class InverseSqrt(Calibrator):
    """g(t) = t^{-1/2} - 1."""

    name = "inverse_sqrt"
    quadrature_floor = _UNBOUNDED_FLOOR

    def _evaluate(self, t: np.ndarray) -> np.ndarray:
        return 1.0 / np.sqrt(t) - 1.0

    def tail_mass(self, h: float) -> float:
        return 2.0 * math.sqrt(h) - h


class Constant(Calibrator):
    """g(t) = c. A valid calibrator only for c <= 1."""

    name = "constant"

    def __init__(self, c: float = 1.0) -> None:
        if not (math.isfinite(c) and c >= 0.0):
            raise CalibratorSpecError(f"constant needs a finite c >= 0, got {c}")
        self.c = float(c)
        self.bound = self.c  # type: ignore

    def _evaluate(self, t: np.ndarray) -> np.ndarray:
        return np.full(t.shape, self.c)

    def params(self) -> Dict[str, float]:
        return {"c": self.c}


CALIBRATORS: Dict[str, Type[Calibrator]] = {
    cls.name: cls for cls in (AllOrNothing, BoundedPoly, Power, PowerMixture, InverseSqrt, Constant)
}

_SPEC_PATTERN = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_calibrator(spec: str) -> Calibrator:
    """Build a calibrator from a string such as 'bounded_poly', 'bounded_poly(C=20)' or 'power(kappa=0.3)'."""
    match = _SPEC_PATTERN.match(spec)
    if not match:
        raise CalibratorSpecError(f"cannot parse calibrator '{spec}'")
    name, arg_string = match.group(1), match.group(2)
    if name not in CALIBRATORS:
        raise CalibratorSpecError(f"unknown calibrator '{name}', expected one of {sorted(CALIBRATORS)}")
    kwargs: Dict[str, float] = {}
    if arg_string and arg_string.strip():
        for item in arg_string.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise CalibratorSpecError(f"calibrator argument '{item.strip()}' is not of the form key=value")
            try:
                kwargs[key.strip()] = float(value)
            except ValueError:
                raise CalibratorSpecError(f"calibrator argument '{item.strip()}' is not numeric") from None
    try:
        return CALIBRATORS[name](**kwargs)  # type: ignore
    except TypeError as e:
        raise CalibratorSpecError(f"bad arguments for calibrator '{name}': {e}") from e


def default_calibrator(alpha: float) -> Calibrator:
    """bounded_poly with C = 1/alpha."""
    return BoundedPoly().resolve(alpha)


def evaluate(cal: Calibrator, t: float) -> float:
    return float(cal(t))


def calibrate_vector(cal: Calibrator, P1: ArrayLike) -> np.ndarray:
    """Elementwise e-values S_j = g(P_j)."""
    P1 = np.asarray(P1, dtype=float).ravel()
    bad = np.flatnonzero(~((P1 >= 0.0) & (P1 <= 1.0)))
    if bad.size:
        raise DomainError(f"p-value at index {bad[0]} is outside [0, 1]: {P1[bad[0]]!r}")
    return np.asarray(cal(P1), dtype=float)


def normalize_weights(S1: ArrayLike) -> np.ndarray:
    """Weights W_j = m S_j / sum(S), so that the weights sum to m.

    Infinite e-values share the total weight m equally and every finite one gets weight zero.
    """
    S1 = np.asarray(S1, dtype=float).ravel()
    m = S1.size
    if m == 0:
        raise ZeroEvidence("no e-values to normalize")
    if np.any(np.isnan(S1)) or np.any(S1 < 0):
        raise DomainError("e-values must be nonnegative")
    infinite = np.isinf(S1)
    if infinite.any():
        warnings.warn(
            f"{int(infinite.sum())} infinite e-value(s); they share all of the weight", EvidenceWarning
        )
        logger.warning("infinite e-values at %s take all the weight", np.flatnonzero(infinite).tolist())
        return np.where(infinite, m / infinite.sum(), 0.0)
    total = float(S1.sum())
    if total <= 0.0:
        raise ZeroEvidence("all e-values are zero")
    return m * S1 / total


@dataclass(frozen=True)
class CalibratorCertificate:
    spec: str
    integral: float
    bound: float
    value_at_zero: float
    monotone: bool
    nonnegative: bool
    tol: float

    @property
    def admissible(self) -> bool:
        """Valid calibrator: nonnegative, nonincreasing and integral at most one."""
        return self.monotone and self.nonnegative and self.integral <= 1.0 + self.tol

    @property
    def bounded_admissible(self) -> bool:
        return (
            self.admissible
            and math.isfinite(self.bound)
            and self.value_at_zero == self.bound
            and abs(self.integral - 1.0) <= self.tol
        )

    @property
    def passed(self) -> bool:
        return self.admissible


def _monotonicity_grid() -> np.ndarray:
    return np.unique(np.concatenate([[0.0], np.geomspace(1e-12, 1.0, 5000), np.linspace(0.0, 1.0, 5001)]))


def certify(cal: Calibrator, alpha: float, tol: float = 1e-9) -> CalibratorCertificate:
    """Numerically check that cal (resolved at alpha) is a valid calibrator."""
    cal = cal.resolve(alpha)
    floor = cal.quadrature_floor
    integral = quad(cal, tol=tol / 10.0, a=floor, b=1.0, breakpoints=cal.breakpoints) + cal.tail_mass(floor)

    grid = _monotonicity_grid()
    values = np.asarray(cal(grid), dtype=float)
    finite = values[np.isfinite(values)]
    scale = max(1.0, float(np.max(np.abs(finite)))) if finite.size else 1.0
    diffs = np.diff(values)
    monotone = bool(np.all((diffs <= 1e-12 * scale) | np.isnan(diffs)))
    certificate = CalibratorCertificate(
        spec=cal.spec,
        integral=integral,
        bound=float(cal.bound),
        value_at_zero=float(cal(0.0)),
        monotone=monotone,
        nonnegative=bool(np.all(values >= 0.0)),
        tol=tol,
    )
    logger.info("certified %s: integral=%.12f passed=%s", cal.spec, integral, certificate.passed)
    return certificate
