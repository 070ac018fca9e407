"""A small synthetic stand-in for drug resistance data: mutation indicators, log fold changes and a panel."""
from __future__ import annotations

import os
from typing import Dict, Sequence

import numpy as np
import pandas as pd

from pyebh.random.rng import CounterRNG

MUTATIONS = ("10F", "30N", "33F", "46I", "46L", "48V", "50V", "54V", "63P", "71V", "82A", "84V", "88S", "90M")
PANEL = (10, 30, 33, 46, 48, 50, 54, 82, 84, 88, 90)
# columns with a real effect on resistance
EFFECTS = {"46I": 1.2, "54V": 1.0, "82A": 1.5, "84V": 1.3, "90M": 1.1, "63P": 0.6}
# rare column (two carriers) and an exact duplicate, both removed by preprocessing
RARE = "47A"
DUPLICATE_OF = ("P46I", "46I")


def write_synthetic_dataset(
    directory: str, n: int = 160, drugs: Sequence[str] = ("APV", "ATV"), seed: int = 0
) -> Dict[str, str]:
    """Write resistance.csv, mutations.csv and panel.csv to directory and return their paths."""
    rng = CounterRNG([seed, 0])
    os.makedirs(directory, exist_ok=True)
    samples = [f"s{i:04d}" for i in range(n)]

    frequency = 0.15 + 0.3 * rng.uniform(len(MUTATIONS))
    indicators = (rng.uniform(n * len(MUTATIONS)).reshape(n, len(MUTATIONS)) < frequency).astype(int)
    mutations = pd.DataFrame(indicators, index=samples, columns=list(MUTATIONS))
    rare = np.zeros(n, dtype=int)
    rare[:2] = 1
    mutations[RARE] = rare
    mutations[DUPLICATE_OF[0]] = mutations[DUPLICATE_OF[1]]
    mutations.index.name = "sample"

    resistance = pd.DataFrame(index=samples)
    resistance.index.name = "sample"
    for d, drug in enumerate(drugs):
        signal = sum(effect * mutations[label].to_numpy() for label, effect in EFFECTS.items())
        noise = 0.5 * rng.standard_normal(n)
        fold = np.exp(signal * (1.0 + 0.2 * d) + noise)
        column = pd.Series(fold, index=samples)
        column.iloc[d] = np.nan  # one sample per drug without a measurement
        resistance[drug] = column

    paths = {
        "resistance": os.path.join(directory, "resistance.csv"),
        "mutations": os.path.join(directory, "mutations.csv"),
        "panel": os.path.join(directory, "panel.csv"),
    }
    resistance.to_csv(paths["resistance"], float_format="%.10g")
    mutations.to_csv(paths["mutations"])
    pd.DataFrame({"position": list(PANEL)}).to_csv(paths["panel"], index=False)
    return paths
