from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from pyebh.core.calibrators import (
    Calibrator,
    DomainError,
    EvidenceWarning,
    ZeroEvidence,
    calibrate_vector,
    normalize_weights,
)
from pyebh.core.paired_inference import PairedEvidence

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-9

Evidence = Union[PairedEvidence, Tuple[Sequence[float], Sequence[float]]]


class EmptyInput(ValueError):
    pass


class BadTuning(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DecisionReport:
    """Outcome of a multiple testing procedure.

    `rejected` holds 0-based hypothesis indices in increasing order. `adjusted` holds the
    values the step-up rule compared against its thresholds (+inf means never rejectable);
    it is None for the knockoff filter, which stores its statistics in `extra` instead.
    """

    procedure: str
    alpha: float
    m: int
    rejected: np.ndarray
    adjusted: Optional[np.ndarray] = None
    pi0_hat: Optional[float] = None
    delta0_hat: Optional[float] = None
    lam: Optional[float] = None
    fallback_flags: Tuple[str, ...] = ()
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_rejected(self) -> int:
        return int(self.rejected.size)

    def rejected_mask(self) -> np.ndarray:
        mask = np.zeros(self.m, dtype=bool)
        mask[self.rejected] = True
        return mask

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"j": np.arange(self.m), "rejected": self.rejected_mask()})
        if self.adjusted is not None:
            frame.insert(1, "adjusted", self.adjusted)
        for key, value in self.extra.items():
            if isinstance(value, np.ndarray) and value.shape == (self.m,):
                frame[key] = value
        return frame

    def summary(self) -> Dict[str, Any]:
        summary: Dict[str, Any] = {
            "procedure": self.procedure,
            "alpha": self.alpha,
            "lambda": self.lam,
            "pi0_hat": self.pi0_hat,
            "delta0_hat": self.delta0_hat,
            "n_rejected": self.n_rejected,
            "fallback_flags": list(self.fallback_flags),
        }
        for key, value in self.extra.items():
            if isinstance(value, (int, float, str)):
                summary[key] = None if isinstance(value, float) and math.isinf(value) else value
        return summary

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    def to_json(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.summary(), f, indent=2, sort_keys=True)


def check_alpha(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise BadTuning(f"alpha must lie in (0, 1), got {alpha}")
    return float(alpha)


def check_lambda(lam: float, lower: float = 0.0) -> float:
    if not lower < lam < 1.0:
        raise BadTuning(f"lambda must lie in ({lower:g}, 1), got {lam}")
    return float(lam)


def _as_values(p: Sequence[float], what: str = "p-values") -> np.ndarray:
    values = np.asarray(p, dtype=float).ravel()
    if values.size == 0:
        raise EmptyInput(f"no {what} given")
    if np.any(np.isnan(values)) or np.any(values < 0):
        raise DomainError(f"{what} must be nonnegative and not NaN")
    return values


def _unpack(ev: Evidence) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(ev, PairedEvidence):
        P1, P2 = ev.P1, ev.P2
    else:
        P1, P2 = ev
    P1, P2 = _as_values(P1, "first-stage p-values"), _as_values(P2, "second-stage p-values")
    if P1.shape != P2.shape:
        raise ValueError(f"paired p-values differ in length: {P1.size} vs {P2.size}")
    return P1, P2


def _safe_ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    """numerator / denominator with x/0 = +inf and x/inf = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = numerator / denominator
    ratio = np.where(np.isinf(denominator), 0.0, ratio)
    return np.where(denominator == 0.0, math.inf, ratio)


def step_up(values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Indices rejected by the step-up rule.

    Finds the largest j with the j-th smallest value at most thresholds[j - 1] and rejects the
    hypotheses holding the j smallest values. Ties are ordered by original index.
    """
    order = np.argsort(values, kind="stable")
    passed = np.flatnonzero(values[order] <= thresholds)
    if passed.size == 0:
        return np.array([], dtype=int)
    return np.sort(order[: passed[-1] + 1])


def bh_thresholds(m: int, alpha: float) -> np.ndarray:
    return alpha * np.arange(1, m + 1) / m


def bh(p: Sequence[float], alpha: float, procedure: str = "bh", **report: Any) -> DecisionReport:
    """Benjamini-Hochberg step-up at level alpha. Entries may be +inf."""
    alpha = check_alpha(alpha)
    values = _as_values(p)
    rejected = step_up(values, bh_thresholds(values.size, alpha))
    return DecisionReport(
        procedure=procedure, alpha=alpha, m=values.size, rejected=rejected, adjusted=values, **report
    )


def storey_pi0(p: Sequence[float], lam: float = 0.5) -> float:
    """(1 + #{p_j > lam}) / (m (1 - lam)); not truncated at one."""
    lam = check_lambda(lam)
    values = _as_values(p)
    return (1.0 + float(np.sum(values > lam))) / (values.size * (1.0 - lam))


def adaptive_bh(p: Sequence[float], alpha: float, lam: float = 0.5) -> DecisionReport:
    """BH applied to pi0_hat * p."""
    pi0 = storey_pi0(p, lam)
    return bh(pi0 * _as_values(p), alpha, procedure="adaptive_bh", pi0_hat=pi0, lam=lam)


def ep_bh(p: Sequence[float], e: Sequence[float], alpha: float, procedure: str = "ep_bh") -> DecisionReport:
    """BH on p_j / e_j, with zero e-values never rejectable."""
    values, evidence = _as_values(p), _as_values(e, "e-values")
    if values.shape != evidence.shape:
        raise ValueError(f"p-values and e-values differ in length: {values.size} vs {evidence.size}")
    return bh(_safe_ratio(values, evidence), alpha, procedure=procedure, extra={"e_values": evidence})


def ep_storey(
    p: Sequence[float],
    e: Sequence[float],
    alpha: float,
    lam: float = 0.5,
    pi0: Optional[float] = None,
    procedure: str = "ep_storey",
) -> DecisionReport:
    """Adaptive ep-BH: BH on pi0_hat p_j / (1(p_j <= lam) e_j)."""
    values, evidence = _as_values(p), _as_values(e, "e-values")
    lam = check_lambda(lam)
    pi0 = storey_pi0(values, lam) if pi0 is None else float(pi0)
    denominator = np.where(values <= lam, evidence, 0.0)
    adjusted = _safe_ratio(pi0 * values, denominator)
    return bh(adjusted, alpha, procedure=procedure, pi0_hat=pi0, lam=lam, extra={"e_values": evidence})


def _check_weights(w: Sequence[float], m: int) -> np.ndarray:
    weights = _as_values(w, "weights")
    if weights.size != m:
        raise ValueError(f"expected {m} weights, got {weights.size}")
    if abs(float(weights.sum()) - m) > WEIGHT_SUM_TOL * max(1, m):
        raise BadTuning(f"weights must sum to m={m}, got {weights.sum():.12g}")
    return weights


def weighted_bh(p: Sequence[float], w: Sequence[float], alpha: float) -> DecisionReport:
    """BH on p_j / w_j for weights summing to m."""
    values = _as_values(p)
    weights = _check_weights(w, values.size)
    return bh(_safe_ratio(values, weights), alpha, procedure="weighted_bh", extra={"weights": weights})


def weighted_null_proportion(p: np.ndarray, w: np.ndarray, lam: float) -> float:
    """(max_j w_j + sum_j w_j 1(p_j > lam)) / (m (1 - lam))."""
    return (float(np.max(w)) + float(np.sum(w * (p > lam)))) / (p.size * (1.0 - lam))


def adaptive_weighted_bh(
    p: Sequence[float],
    w: Sequence[float],
    alpha: float,
    lam: float = 0.5,
    cap: bool = True,
    procedure: str = "adaptive_weighted_bh",
    fallback_flags: Tuple[str, ...] = (),
    extra: Optional[Dict[str, Any]] = None,
) -> DecisionReport:
    """Weighted BH on delta0_hat p_j / w_j.

    With cap=True the j-th threshold is min(delta0_hat lam, j alpha / m), otherwise j alpha / m.
    """
    alpha = check_alpha(alpha)
    lam = check_lambda(lam)
    values = _as_values(p)
    weights = _check_weights(w, values.size)
    delta0 = weighted_null_proportion(values, weights, lam)
    adjusted = _safe_ratio(delta0 * values, weights)
    thresholds = bh_thresholds(values.size, alpha)
    if cap:
        thresholds = np.minimum(thresholds, delta0 * lam)
    return DecisionReport(
        procedure=procedure,
        alpha=alpha,
        m=values.size,
        rejected=step_up(adjusted, thresholds),
        adjusted=adjusted,
        delta0_hat=delta0,
        lam=lam,
        fallback_flags=fallback_flags,
        extra={"weights": weights, **(extra or {})},
    )


def bon_bh(ev: Evidence, alpha: float) -> DecisionReport:
    """Screen on P1 at sqrt(alpha), then BH at sqrt(alpha) on the P2 of the survivors."""
    alpha = check_alpha(alpha)
    P1, P2 = _unpack(ev)
    level = math.sqrt(alpha)
    screened = np.where(P1 > level, 1.0, P2)
    report = bh(screened, level, procedure="bon_bh")
    return _relevel(report, alpha)


def adaptive_bon_bh(ev: Evidence, alpha: float, lam: float = 0.5, pi0: Optional[float] = None) -> DecisionReport:
    """Bon-BH with the screened P2 scaled by Storey's pi0_hat computed from all of P2.

    Parameters
    ----------
    lam: Tuning parameter in (sqrt(alpha), 1).

    pi0: Override for the estimated null proportion.
    """
    alpha = check_alpha(alpha)
    level = math.sqrt(alpha)
    lam = check_lambda(lam, lower=level)
    P1, P2 = _unpack(ev)
    pi0 = storey_pi0(P2, lam) if pi0 is None else float(pi0)
    screened = np.where(P1 <= level, pi0 * P2, 1.0)
    report = bh(screened, level, procedure="adaptive_bon_bh", pi0_hat=pi0, lam=lam)
    return _relevel(report, alpha)


def _relevel(report: DecisionReport, alpha: float) -> DecisionReport:
    """Report the user's target level rather than the internal sqrt(alpha)."""
    return DecisionReport(
        procedure=report.procedure,
        alpha=alpha,
        m=report.m,
        rejected=report.rejected,
        adjusted=report.adjusted,
        pi0_hat=report.pi0_hat,
        lam=report.lam,
        extra={"bh_level": report.alpha},
    )


def method1(ev: Evidence, cal: Calibrator, alpha: float) -> DecisionReport:
    """ep-BH on P2 with e-values g(P1)."""
    alpha = check_alpha(alpha)
    P1, P2 = _unpack(ev)
    S1 = calibrate_vector(cal.resolve(alpha), P1)
    report = ep_bh(P2, S1, alpha, procedure="method1")
    report.extra["calibrator"] = cal.resolve(alpha).spec
    return report


def method2(
    ev: Evidence, cal: Calibrator, alpha: float, lam: float = 0.5, pi0: Optional[float] = None
) -> DecisionReport:
    """Storey-adaptive ep-BH on P2 with e-values g(P1)."""
    alpha = check_alpha(alpha)
    P1, P2 = _unpack(ev)
    S1 = calibrate_vector(cal.resolve(alpha), P1)
    report = ep_storey(P2, S1, alpha, lam=lam, pi0=pi0, procedure="method2")
    report.extra["calibrator"] = cal.resolve(alpha).spec
    return report


def method3(ev: Evidence, cal: Calibrator, alpha: float, lam: float = 0.5) -> DecisionReport:
    """Adaptive weighted BH on P2 with weights normalized from g(P1) and capped thresholds.

    Falls back to uniform weights, with a flag and a warning, when every e-value is zero.
    """
    alpha = check_alpha(alpha)
    P1, P2 = _unpack(ev)
    S1 = calibrate_vector(cal.resolve(alpha), P1)
    flags = []
    if np.isinf(S1).any():
        flags.append("infinite_evidence")
    try:
        W1 = normalize_weights(S1)
    except ZeroEvidence:
        warnings.warn("all e-values are zero; falling back to uniform weights", EvidenceWarning)
        logger.warning("zero evidence for all %d hypotheses, using uniform weights", S1.size)
        flags.append("uniform_weights")
        W1 = np.ones_like(S1)
    return adaptive_weighted_bh(
        P2,
        W1,
        alpha,
        lam=lam,
        cap=True,
        procedure="method3",
        fallback_flags=tuple(flags),
        extra={"e_values": S1, "calibrator": cal.resolve(alpha).spec},
    )


def adaptive_equivalence_holds(ev: Evidence, cal: Calibrator, alpha: float, lam: float = 0.5) -> bool:
    """Whether method2 and adaptive Bon-BH agree on this instance.

    The two only coincide when the P2 values that adaptive Bon-BH rejects are all at most lam;
    disagreements are logged.
    """
    first = method2(ev, cal, alpha, lam=lam)
    second = adaptive_bon_bh(ev, alpha, lam=lam)
    same = np.array_equal(first.rejected, second.rejected)
    if not same:
        logger.warning(
            "method2 and adaptive_bon_bh disagree: %s vs %s", first.rejected.tolist(), second.rejected.tolist()
        )
    return same
