"""
Plain-text plot scripts that redraw each panel from the written CSVs.

The script is standalone (pandas + matplotlib) and is run next to the CSVs:

    python plot_fig4.py
"""

from __future__ import annotations

from typing import Sequence

from src.visualize.charts import PlotPanel

_PREAMBLE = '''\
import numpy as np
import pandas as pd
import matplotlib.pyplot as plt
from matplotlib.colors import LogNorm


def load(name, where):
    table = pd.read_csv(name, comment="#")
    for column, value in where.items():
        table = table[np.isclose(table[column].astype(float), value)]
    return table
'''


def _line_block(panel: PlotPanel, png: str) -> str:
    plots = "\n".join(
        f"ax.plot(t[{panel.x!r}] / {panel.scale_x!r}, t[{column!r}], marker='.', label={column!r})"
        for column in panel.ys
    )
    return f'''
t = load({panel.csv!r}, {dict(panel.where)!r})
fig, ax = plt.subplots(figsize=(7, 4.5))
{plots}
{"ax.set_yscale('log')" if panel.log else ""}
ax.set_xlabel({(panel.xlabel or panel.x)!r})
ax.set_ylabel({(panel.ylabel or ", ".join(panel.ys))!r})
ax.set_title({panel.title!r})
ax.legend()
fig.tight_layout()
fig.savefig({png!r}, dpi=150)
'''


def _heatmap_block(panel: PlotPanel, png: str) -> str:
    return f'''
t = load({panel.csv!r}, {dict(panel.where)!r})
grid = t.pivot_table(index={panel.y!r}, columns={panel.x!r}, values={panel.z!r}, aggfunc="first")
z = grid.to_numpy(dtype=float)
{"z = np.where(z > 0, z, np.nan)" if panel.log else ""}
fig, ax = plt.subplots(figsize=(7, 5))
mesh = ax.pcolormesh(grid.columns.to_numpy(dtype=float) / {panel.scale_x!r},
                     grid.index.to_numpy(dtype=float) / {panel.scale_y!r}, z, shading="nearest",
                     {"norm=LogNorm(np.nanmin(z), np.nanmax(z))" if panel.log else "norm=None"})
fig.colorbar(mesh, ax=ax, label={panel.z!r})
ax.set_xlabel({(panel.xlabel or panel.x)!r})
ax.set_ylabel({(panel.ylabel or panel.y)!r})
ax.set_title({panel.title!r})
fig.tight_layout()
fig.savefig({png!r}, dpi=150)
'''


def render_plot_script(name: str, panels: Sequence[PlotPanel], header: Sequence[str] = ()) -> str:
    """Script text drawing every panel into `<name>_<k>.png`."""
    parts = [line if line.startswith("#") else f"# {line}" for line in header]
    parts.append(_PREAMBLE)
    for k, panel in enumerate(panels, start=1):
        png = f"{name}_{k}.png"
        block = _heatmap_block(panel, png) if panel.kind == "heatmap" else _line_block(panel, png)
        parts.append(f"# ── panel {k}: {panel.title}")
        parts.append(block)
    parts.append("plt.show()\n")
    return "\n".join(parts)
