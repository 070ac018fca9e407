"""Regression data sets with binary covariates, such as drug resistance against mutation indicators."""
from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from pyebh.analyze.knockoff_filter import GRID_RATIO, GRID_SIZE
from pyebh.analyze.methods import ALL_METHODS, apply_methods
from pyebh.analyze.procedures import DecisionReport
from pyebh.core.calibrators import Calibrator
from pyebh.core.knockoffs import DegenerateColumn, RankDeficient, build_knockoffs, standardize

logger = logging.getLogger(__name__)

MIN_COUNT = 3

_POSITION = re.compile(r"^\s*P?(\d+)")


class SchemaError(ValueError):
    pass


class LabelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """A response with binary covariates for one drug. Rows are samples, columns mutations."""

    response: np.ndarray
    covariates: np.ndarray
    covariate_labels: Tuple[str, ...]
    drug_id: str
    sample_ids: Tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return int(self.covariates.shape[0])

    @property
    def p(self) -> int:
        return int(self.covariates.shape[1])


@dataclass(frozen=True)
class PanelComparison:
    selected_positions: FrozenSet[int]
    in_panel: int
    novel: int


def _read_table(path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    table = pd.read_csv(path, index_col=0)
    table.index = table.index.astype(str)
    return table


def load_dataset(resistance_csv: str, mutation_csv: str, drug: str, log_transform: bool = False) -> Dataset:
    """Join a resistance table and a mutation table on sample id (first column of each).

    Samples with a missing response for the drug are dropped. With log_transform the
    response is taken to be a raw fold change and replaced by its natural log.
    """
    resistance = _read_table(resistance_csv)
    mutations = _read_table(mutation_csv)
    if drug not in resistance.columns:
        raise SchemaError(f"{resistance_csv} has no column '{drug}' (columns: {list(resistance.columns)})")
    if mutations.shape[1] == 0:
        raise SchemaError(f"{mutation_csv} has no mutation columns")

    missing = [sample for sample in resistance.index if sample not in mutations.index]
    if missing:
        raise SchemaError(f"samples {missing[:5]} of {resistance_csv} are missing from {mutation_csv}")

    response = pd.to_numeric(resistance[drug], errors="coerce")
    keep = response.notna()
    if (~keep).any():
        logger.info("dropping %d samples without a %s response", int((~keep).sum()), drug)
    response = response[keep]
    covariates = mutations.loc[response.index]

    numeric = covariates.apply(pd.to_numeric, errors="coerce")
    bad = ~(numeric.isin([0, 1]))
    if bad.to_numpy().any():
        rows, cols = np.nonzero(bad.to_numpy())
        sample, label = covariates.index[rows[0]], covariates.columns[cols[0]]
        raise SchemaError(
            f"non-binary covariate {covariates.iloc[rows[0], cols[0]]!r} at sample '{sample}', column '{label}'"
        )

    values = response.to_numpy(dtype=float)
    if log_transform:
        if np.any(values <= 0):
            raise SchemaError(f"fold changes for {drug} must be positive to take logs")
        values = np.log(values)
    return Dataset(
        response=values,
        covariates=numeric.to_numpy(dtype=np.int8),
        covariate_labels=tuple(str(c) for c in covariates.columns),
        drug_id=drug,
        sample_ids=tuple(response.index),
    )


def _select_columns(ds: Dataset, keep: Sequence[int]) -> Dataset:
    keep = list(keep)
    return Dataset(
        response=ds.response,
        covariates=ds.covariates[:, keep],
        covariate_labels=tuple(ds.covariate_labels[j] for j in keep),
        drug_id=ds.drug_id,
        sample_ids=ds.sample_ids,
    )


def preprocess(ds: Dataset, min_count: int = MIN_COUNT) -> Dataset:
    """Drop rare, constant and exactly duplicated covariate columns, then check the rank.

    Among identical columns the first one is kept.
    """
    counts = ds.covariates.sum(axis=0)
    frequent = [j for j in range(ds.p) if min_count <= counts[j] < ds.n]
    dropped = ds.p - len(frequent)
    if dropped:
        logger.info("dropping %d columns seen in fewer than %d samples (or in all)", dropped, min_count)

    seen: Dict[bytes, str] = {}
    keep = []
    for j in frequent:
        key = np.ascontiguousarray(ds.covariates[:, j]).tobytes()
        if key in seen:
            logger.info("dropping column %s, a duplicate of %s", ds.covariate_labels[j], seen[key])
            continue
        seen[key] = ds.covariate_labels[j]
        keep.append(j)
    result = _select_columns(ds, keep)
    check_rank(result)
    return result


def check_rank(ds: Dataset) -> None:
    """Raise RankDeficient naming the columns that are linear combinations of earlier ones."""
    try:
        standardize(ds.covariates, center=True)
    except (RankDeficient, DegenerateColumn):
        pass
    else:
        return
    centered = ds.covariates - ds.covariates.mean(axis=0)
    offending = []
    basis: List[int] = []
    for j in range(ds.p):
        candidate = basis + [j]
        if np.linalg.matrix_rank(centered[:, candidate]) < len(candidate):
            offending.append(ds.covariate_labels[j])
        else:
            basis = candidate
    raise RankDeficient(f"covariates are linearly dependent after centering; dependent columns: {offending}")


def analyze_dataset(
    ds: Dataset,
    alpha: float,
    methods: Sequence[str] = ALL_METHODS,
    lam: float = 0.5,
    calibrator: Optional[Calibrator] = None,
    grid_size: int = GRID_SIZE,
    grid_ratio: float = GRID_RATIO,
) -> Dict[str, DecisionReport]:
    """Run M0 to M5 on a preprocessed data set."""
    design = standardize(ds.covariates, center=True)
    model = build_knockoffs(design)
    Y = ds.response - ds.response.mean()
    logger.info("analyzing %s: n=%d, m=%d, alpha=%g", ds.drug_id, ds.n, ds.p, alpha)
    return apply_methods(
        model, Y, alpha, methods=methods, lam=lam, calibrator=calibrator, grid_size=grid_size, grid_ratio=grid_ratio
    )


def parse_position(label: str) -> int:
    """Leading integer of a mutation label: '90M' -> 90, 'P46I' -> 46."""
    match = _POSITION.match(str(label))
    if not match:
        raise LabelError(f"cannot read a position from mutation label '{label}'")
    return int(match.group(1))


def load_panel(path: str) -> FrozenSet[int]:
    """Positions listed one per row, with an optional non-numeric header row."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    rows = pd.read_csv(path, header=None, dtype=str, comment="#").iloc[:, 0].str.strip()
    if len(rows) and not rows.iloc[0].isdigit():
        rows = rows.iloc[1:]
    positions = set()
    for value in rows:
        if not value.isdigit():
            raise LabelError(f"panel entry '{value}' in {path} is not an integer position")
        positions.add(int(value))
    return frozenset(positions)


def compare_panel(report: DecisionReport, labels: Sequence[str], panel_positions: Iterable[int]) -> PanelComparison:
    """Map selected mutations to distinct positions and split them by panel membership."""
    panel = set(panel_positions)
    selected = frozenset(parse_position(labels[j]) for j in report.rejected)
    in_panel = len(selected & panel)
    return PanelComparison(selected_positions=selected, in_panel=in_panel, novel=len(selected) - in_panel)


def panel_table(
    reports: Mapping[str, DecisionReport], labels: Sequence[str], panel_positions: Iterable[int], drug: str
) -> pd.DataFrame:
    """One row per method: number of selected mutations, and positions in and out of the panel."""
    panel = frozenset(panel_positions)
    rows = []
    for code, report in reports.items():
        comparison = compare_panel(report, labels, panel)
        rows.append(
            {
                "drug": drug,
                "method": code,
                "alpha": report.alpha,
                "n_selected": report.n_rejected,
                "in_panel": comparison.in_panel,
                "novel": comparison.novel,
            }
        )
    return pd.DataFrame(rows, columns=["drug", "method", "alpha", "n_selected", "in_panel", "novel"])
