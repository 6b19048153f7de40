"""
Matplotlib panels for the optional PDF report.

A `PlotPanel` only describes a panel (which CSV, which columns, log scale);
the same description drives both `render_panel` here and the plain-text
plot scripts written by `src.report.plot_script`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd


# ───────────────────────────── PANEL DESCRIPTION ─────────────────────────────

@dataclass(frozen=True)
class PlotPanel:
    """
    Parameters
    ----------
    kind
        "line" (x against one or more y columns) or "heatmap" (z over x, y).
    csv
        File name of the table, relative to the output directory.
    x, ys, y, z
        Column names; `ys` for line panels, `y` and `z` for heatmaps.
    scale_x
        Divide x by this before plotting (π for φ axes).
    """
    kind: str
    csv: str
    title: str
    x: str
    ys: tuple[str, ...] = ()
    y: str | None = None
    z: str | None = None
    log: bool = False
    scale_x: float = 1.0
    scale_y: float = 1.0
    xlabel: str = ""
    ylabel: str = ""
    where: dict = field(default_factory=dict)

    def select(self, table: pd.DataFrame) -> pd.DataFrame:
        """Rows matching `where` (column -> value, compared with isclose)."""
        mask = np.ones(len(table), dtype=bool)
        for column, value in self.where.items():
            mask &= np.isclose(table[column].to_numpy(dtype=float), value)
        return table[mask]


# ───────────────────────────── RENDERING ─────────────────────────────

def line_chart(table: pd.DataFrame, panel: PlotPanel):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    data = panel.select(table)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    x = data[panel.x].to_numpy(dtype=float) / panel.scale_x
    for column in panel.ys:
        ax.plot(x, data[column].to_numpy(dtype=float), marker=".", label=column)
    if panel.log:
        ax.set_yscale("log")
    ax.set_xlabel(panel.xlabel or panel.x)
    ax.set_ylabel(panel.ylabel or ", ".join(panel.ys))
    ax.set_title(panel.title)
    ax.grid(alpha=0.3)
    if len(panel.ys) > 1:
        ax.legend()
    fig.tight_layout()
    return fig


def heatmap_chart(table: pd.DataFrame, panel: PlotPanel):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import LogNorm

    data = panel.select(table)
    grid = data.pivot_table(index=panel.y, columns=panel.x, values=panel.z, aggfunc="first")
    xs = grid.columns.to_numpy(dtype=float) / panel.scale_x
    ys = grid.index.to_numpy(dtype=float) / panel.scale_y
    values = grid.to_numpy(dtype=float)
    norm = None
    if panel.log:
        positive = values[np.isfinite(values) & (values > 0)]
        if positive.size:
            norm = LogNorm(vmin=positive.min(), vmax=positive.max())
        values = np.where(values > 0, values, np.nan)

    fig, ax = plt.subplots(figsize=(7, 5))
    mesh = ax.pcolormesh(xs, ys, values, shading="nearest", norm=norm, cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=panel.z)
    ax.set_xlabel(panel.xlabel or panel.x)
    ax.set_ylabel(panel.ylabel or panel.y)
    ax.set_title(panel.title)
    fig.tight_layout()
    return fig


def render_panel(table: pd.DataFrame, panel: PlotPanel):
    if panel.kind == "heatmap":
        return heatmap_chart(table, panel)
    return line_chart(table, panel)
