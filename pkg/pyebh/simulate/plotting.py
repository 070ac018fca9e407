from __future__ import annotations

import logging

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

# fixed salt and no date so repeated runs write identical files
SVG_SALT = "pyebh"

SETTING_COLUMNS = ["n", "m", "k", "rho", "alpha"]


def plot_grid(table: pd.DataFrame, path: str) -> None:
    """Write an SVG with one row per (n, m, k, rho, alpha) setting: FDR on the left, power on the right.

    `table` is the long-format output of run_grid.
    """
    settings = table[SETTING_COLUMNS].drop_duplicates().reset_index(drop=True)
    fig, axes = plt.subplots(len(settings), 2, figsize=(10, 3.2 * len(settings)), squeeze=False)
    for row, setting in settings.iterrows():
        mask = (table[SETTING_COLUMNS] == setting.values).all(axis=1)
        cell = table[mask]
        fdr_ax, power_ax = axes[row]
        for method, lines in cell.groupby("method", sort=True):
            lines = lines.sort_values("gamma")
            fdr_ax.plot(lines["gamma"], lines["fdr_hat"], marker="o", label=method)
            power_ax.plot(lines["gamma"], lines["power_hat"], marker="o", label=method)
        fdr_ax.axhline(setting["alpha"], color="red", linestyle="--", linewidth=1)
        title = f"n={setting['n']:g}, m={setting['m']:g}, k={setting['k']:g}, rho={setting['rho']:g}"
        fdr_ax.set_title(title)
        power_ax.set_title(title)
        fdr_ax.set_ylabel("Empirical FDR")
        power_ax.set_ylabel("Empirical power")
        power_ax.set_ylim(0.0, 1.0)
        for ax in (fdr_ax, power_ax):
            ax.set_xlabel("gamma")
    axes[0][1].legend(loc="lower right")
    fig.tight_layout()
    with plt.rc_context({"svg.hashsalt": SVG_SALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("wrote %s", path)
