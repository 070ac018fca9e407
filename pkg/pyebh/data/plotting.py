from __future__ import annotations

import logging

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

# fixed salt and no date so repeated runs write identical files
SVG_SALT = "pyebh"

PANEL_COLOR = "tab:blue"
NOVEL_COLOR = "tab:orange"


def plot_panel(table: pd.DataFrame, path: str) -> None:
    """Stacked bars of selected positions per method, one subplot per drug.

    Positions in the validation panel are drawn in blue and novel ones in orange.
    `table` has the columns of panel_table.
    """
    drugs = list(dict.fromkeys(table["drug"]))
    fig, axes = plt.subplots(1, len(drugs), figsize=(4 * len(drugs), 3.5), squeeze=False)
    for ax, drug in zip(axes[0], drugs):
        rows = table[table["drug"] == drug]
        x = np.arange(len(rows))
        ax.bar(x, rows["in_panel"], color=PANEL_COLOR, label="in panel")
        ax.bar(x, rows["novel"], bottom=rows["in_panel"], color=NOVEL_COLOR, label="novel")
        ax.set_xticks(x)
        ax.set_xticklabels(rows["method"])
        ax.set_title(drug)
        ax.set_ylabel("Selected positions")
    axes[0][0].legend(loc="upper left")
    fig.tight_layout()
    with plt.rc_context({"svg.hashsalt": SVG_SALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("wrote %s", path)
