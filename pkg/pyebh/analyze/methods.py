from __future__ import annotations

from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from pyebh.analyze.knockoff_filter import GRID_RATIO, GRID_SIZE, knockoff_filter
from pyebh.analyze.procedures import DecisionReport, adaptive_bon_bh, bon_bh, method1, method2, method3
from pyebh.core.calibrators import Calibrator, default_calibrator
from pyebh.core.knockoffs import KnockoffModel
from pyebh.core.paired_inference import PairedEvidence, paired_pvalues

METHOD_NAMES: Dict[str, str] = {
    "M0": "knockoff",
    "M1": "bon_bh",
    "M2": "adaptive_bon_bh",
    "M3": "method1",
    "M4": "method2",
    "M5": "method3",
}
ALL_METHODS: Tuple[str, ...] = tuple(METHOD_NAMES)


def check_methods(methods: Sequence[str]) -> Tuple[str, ...]:
    unknown = [code for code in methods if code not in METHOD_NAMES]
    if unknown:
        raise ValueError(f"unknown methods {unknown}, expected a subset of {list(METHOD_NAMES)}")
    return tuple(methods)


def apply_methods(
    model: KnockoffModel,
    Y: np.ndarray,
    alpha: float,
    methods: Sequence[str] = ALL_METHODS,
    lam: float = 0.5,
    calibrator: Optional[Calibrator] = None,
    sigma: Optional[float] = None,
    grid_size: int = GRID_SIZE,
    grid_ratio: float = GRID_RATIO,
) -> Dict[str, DecisionReport]:
    """Run the knockoff filter (M0) and the paired p-value procedures (M1 to M5) on one response.

    Parameters
    ----------
    calibrator: Used by M3 to M5; defaults to bounded_poly with C = 1/alpha.

    sigma: Known noise level passed on to the paired p-values.
    """
    cal = default_calibrator(alpha) if calibrator is None else calibrator
    runners: Dict[str, Callable[[PairedEvidence], DecisionReport]] = {
        "M1": lambda ev: bon_bh(ev, alpha),
        "M2": lambda ev: adaptive_bon_bh(ev, alpha, lam=lam),
        "M3": lambda ev: method1(ev, cal, alpha),
        "M4": lambda ev: method2(ev, cal, alpha, lam=lam),
        "M5": lambda ev: method3(ev, cal, alpha, lam=lam),
    }
    reports: Dict[str, DecisionReport] = {}
    evidence: Optional[PairedEvidence] = None
    for code in check_methods(methods):
        if code == "M0":
            reports[code] = knockoff_filter(model, Y, alpha, grid_size, grid_ratio)
            continue
        if evidence is None:
            evidence = paired_pvalues(model, Y, sigma=sigma)
        reports[code] = runners[code](evidence)
    return reports
