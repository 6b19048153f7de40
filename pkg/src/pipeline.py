"""
Run pipelines behind the CLI subcommands and the figure reproductions.

Each `run_*` function computes a `RunOutput` (tables, plot panels, summary
lines, flagged-row count); `write_outputs` turns it into files.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from cli.config import RunConfig, emit_config
from src.analysis.sweep import EXTENDED_COLUMNS, SWEEP_COLUMNS, flagged_rows, sweep
from src.report.exporter import build_header, export_report_pdf, write_csv, write_script, write_text
from src.report.plot_script import render_plot_script
from src.solver.liouvillian import solve_model
from src.transform.metrics import fit_isolation, format_fit
from src.transform.observables import (
    ModeSelector, bundle_purity, classify_emission, default_tau_grid,
    g2_zero, gn2_tau, mean_occupation, photon_distribution, spin_magnetization,
)
from src.transform.spectrum import (
    DeltaRule, branch_table, branches_phi_half, resonance_nonspinning, resonant_detunings,
)
from src.utils.errors import ConfigError, FitError, UndefinedStatisticsError, UsageError
from src.utils.logger import get_logger
from src.visualize.charts import PlotPanel, render_panel

log = get_logger(__name__)

PI = math.pi
FIGURES = ("fig1", "fig2", "fig3", "fig4")


# ───────────────────────────── RESULT TYPES ─────────────────────────────

@dataclass
class TableOutput:
    name: str
    table: pd.DataFrame
    columns: list[str] | None = None


@dataclass
class RunOutput:
    command: str
    tables: list[TableOutput] = field(default_factory=list)
    panels: list[PlotPanel] = field(default_factory=list)
    summary: list[str] = field(default_factory=list)
    flagged: int = 0

    def add_sweep(self, name: str, table: pd.DataFrame, columns=SWEEP_COLUMNS) -> None:
        self.tables.append(TableOutput(name, table, list(columns)))
        self.flagged += flagged_rows(table)


def _grid(quick: bool, full, small) -> np.ndarray:
    return np.asarray(small if quick else full, dtype=float)


def _sweep(cfg: RunConfig, axes, rule=None, base=None):
    return sweep(base or cfg.base_params(), axes, derived_delta=rule, workers=cfg.run.workers,
                 check_convergence=cfg.run.check_convergence,
                 convergence_rtol=cfg.run.convergence_rtol, allow_large=cfg.run.allow_large)


def _fmt(value: float) -> str:
    return "undefined" if value is None or math.isnan(value) else f"{value:.6g}"


# ───────────────────────────── SPECTRUM ─────────────────────────────

def _spectrum_lines(cfg: RunConfig) -> list[str]:
    p = cfg.params
    lines = [f"phi/pi = {p.phi / PI:.6g}, delta_f/g = {p.delta_f:.6g}, fizeau_factor = {p.fizeau_factor:g}"]
    if math.isclose(math.remainder(p.phi - PI / 2, 2 * PI), 0.0, abs_tol=1e-12):
        b = branches_phi_half(p.g, p.fizeau_shift, p.phi)
        lines.append(f"closed form: delta_1± = {b.delta_1_plus:.6g}, {b.delta_1_minus:.6g}; "
                     f"delta_2± = {b.delta_2_plus:.6g}, {b.delta_2_minus:.6g}")
    if p.delta_f == 0.0:
        ns = resonance_nonspinning(p.g, p.phi, base=p)
        lines.append(f"nonspinning: ±g sqrt(1-cos phi) = ±{ns.minus_cos[0]:.6g}, "
                     f"±g sqrt(1+cos phi) = ±{ns.plus_cos[0]:.6g}, bright = {ns.bright}")
    roots = ", ".join(f"{r:.6g}" for r in resonant_detunings(p))
    lines.append(f"single-excitation resonances (numeric): {roots}")
    return lines


def run_spectrum(cfg: RunConfig, delta_f_grid=None, name: str = "spectrum") -> RunOutput:
    p = cfg.params
    axes = dict(cfg.sweep_axes())
    if delta_f_grid is None:
        delta_f_grid = axes.get("delta_f", np.linspace(0.0, 1.0, 21))
    out = RunOutput(name, summary=_spectrum_lines(cfg))
    table = branch_table(p.g, delta_f_grid, fizeau_factor=p.fizeau_factor, phi=p.phi)
    out.tables.append(TableOutput(f"{name}_branches.csv", table))
    roots = [c for c in table.columns if c.startswith("root_")]
    out.panels += [
        PlotPanel("line", f"{name}_branches.csv", "closed-form branches (phi = pi/2)", x="delta_f",
                  ys=("delta_1_plus", "delta_1_minus", "delta_2_plus", "delta_2_minus"),
                  xlabel="Delta_F / g", ylabel="delta / g"),
        PlotPanel("line", f"{name}_branches.csv", "single-excitation resonances", x="delta_f",
                  ys=tuple(roots), xlabel="Delta_F / g", ylabel="delta / g"),
    ]
    return out


# ───────────────────────────── STEADY STATE ─────────────────────────────

def _distribution_table(rho) -> tuple[pd.DataFrame, list[str]]:
    columns, notes = {}, []
    for mode in (ModeSelector.CW, ModeSelector.CCW):
        dist = photon_distribution(rho, mode)
        columns.setdefault("q", np.arange(dist.p.size))
        columns[f"p_{mode.value}"] = dist.p
        columns[f"p_tilde_{mode.value}"] = dist.p_tilde if dist.defined else np.full(dist.p.size, np.nan)
        if dist.defined:
            notes.append(f"{mode.value}: sum_(q>2) p_tilde(q) = {bundle_purity(dist, 2):.3e}, "
                         f"p_tilde(1) = {dist.p_tilde[1]:.6g}")
        else:
            notes.append(f"{mode.value}: p_tilde(q) undefined (dark mode)")
    return pd.DataFrame(columns), notes


def _g2_or_nan(rho, mode, n) -> float:
    try:
        return g2_zero(rho, mode, n)
    except UndefinedStatisticsError:
        return math.nan


def run_steady(cfg: RunConfig) -> RunOutput:
    p = cfg.params
    _, result = solve_model(p, allow_large=cfg.run.allow_large)
    rho = result.rho
    out = RunOutput("steady")
    record = {"delta": p.delta, "phi": p.phi, "delta_f": p.delta_f}
    for mode in (ModeSelector.CW, ModeSelector.CCW):
        record[f"n_{mode.value}"] = mean_occupation(rho, mode)
        record[f"g2_{mode.value}"] = _g2_or_nan(rho, mode, 1)
        record[f"g2n2_{mode.value}"] = _g2_or_nan(rho, mode, 2)
    record["sz_1"], record["sz_2"] = spin_magnetization(rho, 1), spin_magnetization(rho, 2)
    record["converged"] = result.converged
    table = pd.DataFrame([record], columns=EXTENDED_COLUMNS)
    dist, notes = _distribution_table(rho)
    out.tables += [TableOutput("steady.csv", table, EXTENDED_COLUMNS), TableOutput("steady_photons.csv", dist)]
    out.summary = [
        f"delta/g = {p.delta:.6g}, phi/pi = {p.phi / PI:.6g}, delta_f/g = {p.delta_f:.6g}, N = {p.n_trunc}",
        f"residual = {result.residual:.3e}",
    ]
    for mode in ("cw", "ccw"):
        out.summary.append(f"{mode}: n = {_fmt(record[f'n_{mode}'])}, g1(0) = {_fmt(record[f'g2_{mode}'])}, "
                           f"g2(0) = {_fmt(record[f'g2n2_{mode}'])}")
    out.summary.append(f"sz_1 = {record['sz_1']:.6g}, sz_2 = {record['sz_2']:.6g}")
    out.summary += notes
    out.panels.append(PlotPanel("line", "steady_photons.csv", "photon-weighted distribution", x="q",
                                ys=("p_tilde_cw", "p_tilde_ccw"), log=True, ylabel="p_tilde(q)"))
    return out


# ───────────────────────────── g_n^(2)(τ) ─────────────────────────────

def correlation_table(cfg: RunConfig, p=None) -> tuple[pd.DataFrame, str]:
    """Mirrored g_1^(2)(τ), g_2^(2)(τ) for the configured mode and the emission class."""
    p = p or cfg.params
    mode = ModeSelector.parse(cfg.g2tau.mode)
    L, result = solve_model(p, allow_large=cfg.run.allow_large)
    grid = default_tau_grid(cfg.g2tau.n_points, cfg.g2tau.tau_max)
    first = gn2_tau(L, result.rho, mode, 1, grid)
    tau, g1 = first.mirrored()
    try:
        second = gn2_tau(L, result.rho, mode, 2, grid)
    except UndefinedStatisticsError as exc:
        log.warning("g_2^(2)(tau) skipped: %s", exc)
        return pd.DataFrame({"tau": tau, "g1_tau": g1, "g2_tau": np.nan}), "undefined"
    _, g2 = second.mirrored()
    label = classify_emission(first, second)
    return pd.DataFrame({"tau": tau, "g1_tau": g1, "g2_tau": g2}), label.value


def run_g2tau(cfg: RunConfig) -> RunOutput:
    p = cfg.params
    table, label = correlation_table(cfg, p)
    zero = table.loc[table["tau"] == 0.0].iloc[0]
    out = RunOutput("g2tau", tables=[TableOutput("g2tau.csv", table)])
    out.summary = [
        f"mode = {cfg.g2tau.mode}, delta/g = {p.delta:.6g}, phi/pi = {p.phi / PI:.6g}, delta_f/g = {p.delta_f:.6g}",
        f"g1(0) = {_fmt(zero['g1_tau'])}, g2(0) = {_fmt(zero['g2_tau'])}, min g1 at tau*kappa = "
        f"{table.loc[table['g1_tau'].idxmin(), 'tau']:.4g}",
        f"emission: {label}",
    ]
    out.panels.append(PlotPanel("line", "g2tau.csv", "generalized correlations", x="tau",
                                ys=("g1_tau", "g2_tau"), log=True, xlabel="kappa tau"))
    return out


# ───────────────────────────── SWEEP / FIT ─────────────────────────────

def run_sweep(cfg: RunConfig) -> RunOutput:
    if not cfg.sweep:
        raise ConfigError("sweep needs a [sweep] section with at least one axis")
    table = _sweep(cfg, cfg.sweep_axes(), cfg.delta_rule)
    out = RunOutput("sweep")
    out.add_sweep("sweep.csv", table)
    out.summary = [f"{len(table)} points, {out.flagged} flagged"]
    names = [name for name, _ in cfg.sweep]
    if len(names) == 1:
        out.panels += [
            PlotPanel("line", "sweep.csv", "g^(2)(0) per direction", x=names[0], ys=("g2_cw", "g2_ccw"), log=True),
            PlotPanel("line", "sweep.csv", "mean occupation per direction", x=names[0], ys=("n_cw", "n_ccw")),
        ]
    elif len(names) == 2:
        out.panels += [
            PlotPanel("heatmap", "sweep.csv", f"{z} over {names[1]}, {names[0]}", x=names[1], y=names[0], z=z,
                      log=z.startswith("g2"))
            for z in ("g2_cw", "n_cw", "n_ccw")
        ]
    return out


def fit_lines(table: pd.DataFrame, fit_range: tuple[float, float]) -> list[str]:
    """Power-law fits of I_c and I_n, one pair per φ in the table."""
    lines = []
    for phi, group in table.groupby("phi", sort=True):
        for column in ("I_c_dB", "I_n_dB"):
            label = f"phi/pi={phi / PI:.4g} {column[:3]}"
            try:
                lines.append(format_fit(label, fit_isolation(group, column, fit_range)))
            except FitError as exc:
                lines.append(f"{label}: fit undefined ({exc})")
    return lines


def run_fit(cfg: RunConfig) -> RunOutput:
    axes = cfg.sweep_axes() or [("delta_f", cfg.fit.delta_f_grid())]
    if "delta_f" not in dict(axes):
        raise ConfigError("fit needs a delta_f axis in [sweep]")
    table = _sweep(cfg, axes, cfg.delta_rule)
    out = RunOutput("fit")
    out.add_sweep("fit_isolations.csv", table)
    out.summary = fit_lines(table, (cfg.fit.lo, cfg.fit.hi))
    out.panels += [
        PlotPanel("line", "fit_isolations.csv", "isolation ratios", x="delta_f", ys=("I_c_dB", "I_n_dB"),
                  xlabel="Delta_F / g", ylabel="dB"),
    ]
    return out


# ───────────────────────────── FIGURE REPRODUCTION ─────────────────────────────

def reproduce_fig1(cfg: RunConfig, quick: bool = False) -> RunOutput:
    base = dataclasses.replace(cfg, inputs={**cfg.inputs, "phi": PI / 2, "delta_f": 0.0, "delta": 0.0})
    return run_spectrum(base, _grid(quick, np.linspace(0.0, 1.0, 41), np.linspace(0.0, 1.0, 5)), name="fig1")


def reproduce_fig2(cfg: RunConfig, quick: bool = False) -> RunOutput:
    out = RunOutput("fig2")
    base = cfg.base_params().replace(delta_f=0.0)
    deltas = _grid(quick, np.linspace(-2.0, 2.0, 41), np.linspace(-2.0, 2.0, 5))
    phis = _grid(quick, np.linspace(0.0, PI, 21), np.linspace(0.0, PI, 3))
    plane = _sweep(cfg, [("phi", phis), ("delta", deltas)], base=base)
    out.add_sweep("fig2_plane.csv", plane, EXTENDED_COLUMNS)

    scan_phis = _grid(quick, np.linspace(0.0, PI, 41), np.linspace(0.0, PI, 5))
    scan = _sweep(cfg, [("phi", scan_phis)], DeltaRule.parse("nonspin:plus+"), base=base)
    out.add_sweep("fig2_phi_scan.csv", scan, EXTENDED_COLUMNS)

    for tag, (delta, phi) in {"a": (math.sqrt(2.0), 0.0), "b": (0.0, PI)}.items():
        p = base.replace(delta=delta, phi=phi)
        table, label = correlation_table(cfg, p)
        out.tables.append(TableOutput(f"fig2_g2tau_{tag}.csv", table))
        _, result = solve_model(p, allow_large=cfg.run.allow_large)
        dist, notes = _distribution_table(result.rho)
        out.tables.append(TableOutput(f"fig2_photons_{tag}.csv", dist))
        g1 = table.loc[table["tau"] == 0.0, "g1_tau"].iloc[0]
        g2 = table.loc[table["tau"] == 0.0, "g2_tau"].iloc[0]
        out.summary.append(f"[delta/g={delta:.4g}, phi/pi={phi / PI:.4g}] g1(0) = {_fmt(g1)}, "
                           f"g2(0) = {_fmt(g2)}, emission: {label}")
        out.summary += [f"  {note}" for note in notes]
        out.panels += [
            PlotPanel("line", f"fig2_g2tau_{tag}.csv", f"g_n^(2)(tau) at delta/g={delta:.3g}, phi/pi={phi / PI:.3g}",
                      x="tau", ys=("g1_tau", "g2_tau"), log=True, xlabel="kappa tau"),
            PlotPanel("line", f"fig2_photons_{tag}.csv", f"p_tilde(q) at delta/g={delta:.3g}, phi/pi={phi / PI:.3g}",
                      x="q", ys=("p_tilde_cw",), log=True),
        ]
    out.panels[:0] = [
        PlotPanel("heatmap", "fig2_plane.csv", "g^(2)(0) over (delta, phi)", x="delta", y="phi", z="g2_cw",
                  log=True, scale_y=PI, xlabel="delta / g", ylabel="phi / pi"),
        PlotPanel("heatmap", "fig2_plane.csv", "n over (delta, phi)", x="delta", y="phi", z="n_cw",
                  scale_y=PI, xlabel="delta / g", ylabel="phi / pi"),
        PlotPanel("line", "fig2_phi_scan.csv", "magnetization along delta = g sqrt(1 + cos phi)", x="phi",
                  ys=("sz_1", "sz_2"), scale_x=PI, xlabel="phi / pi"),
        PlotPanel("line", "fig2_phi_scan.csv", "g^(2)(0) along delta = g sqrt(1 + cos phi)", x="phi",
                  ys=("g2_cw", "g2n2_cw"), log=True, scale_x=PI, xlabel="phi / pi"),
        PlotPanel("line", "fig2_phi_scan.csv", "n along delta = g sqrt(1 + cos phi)", x="phi",
                  ys=("n_cw",), scale_x=PI, xlabel="phi / pi"),
    ]
    return out


def reproduce_fig3(cfg: RunConfig, quick: bool = False) -> RunOutput:
    out = RunOutput("fig3")
    base = cfg.base_params().replace(delta_f=0.5)
    deltas = _grid(quick, np.linspace(-2.0, 2.0, 41), np.linspace(-2.0, 2.0, 5))
    phis = _grid(quick, np.linspace(0.0, PI, 21), np.linspace(0.0, PI, 3))
    plane = _sweep(cfg, [("phi", phis), ("delta", deltas)], base=base)
    out.add_sweep("fig3_plane.csv", plane)
    out.panels += [
        PlotPanel("heatmap", "fig3_plane.csv", f"{z} over (delta, phi), Delta_F/g = 0.5", x="delta", y="phi", z=z,
                  scale_y=PI, xlabel="delta / g", ylabel="phi / pi")
        for z in ("n_cw", "n_ccw")
    ]
    scan_phis = _grid(quick, np.linspace(0.0, PI, 41), np.linspace(0.0, PI, 5))
    for branch, tag in (("branch:1+", "1p"), ("branch:2+", "2p")):
        table = _sweep(cfg, [("phi", scan_phis)], DeltaRule.parse(branch), base=base)
        name = f"fig3_phi_scan_{tag}.csv"
        out.add_sweep(name, table)
        out.panels += [
            PlotPanel("line", name, f"g^(2)(0) at {branch}", x="phi", ys=("g2_cw", "g2_ccw"), log=True,
                      scale_x=PI, xlabel="phi / pi"),
            PlotPanel("line", name, f"n at {branch}", x="phi", ys=("n_cw", "n_ccw"), scale_x=PI, xlabel="phi / pi"),
            PlotPanel("line", name, f"isolation at {branch}", x="phi", ys=("I_c_dB", "I_n_dB"), scale_x=PI,
                      xlabel="phi / pi", ylabel="dB"),
        ]
        half = table.loc[np.isclose(table["phi"], PI / 2)]
        for _, row in half.iterrows():
            out.summary.append(f"{branch} phi/pi=0.5: I_c = {_fmt(row['I_c_dB'])} dB, I_n = {_fmt(row['I_n_dB'])} dB")
    return out


def reproduce_fig4(cfg: RunConfig, quick: bool = False) -> RunOutput:
    out = RunOutput("fig4")
    rule = DeltaRule.parse("branch:2+")
    base = cfg.base_params().replace(phi=PI / 2)
    delta_fs = _grid(quick, np.linspace(0.0, 0.9, 19), np.linspace(0.0, 0.9, 4))
    correlations = _sweep(cfg, [("delta_f", delta_fs)], rule, base=base)
    out.add_sweep("fig4_correlations.csv", correlations)

    fit_grid = cfg.fit.delta_f_grid()
    if quick:
        fit_grid = np.concatenate([[0.0], np.geomspace(cfg.fit.lo, cfg.fit.hi, 5)])
    phis = np.array([0.2, 0.4, 0.5]) * PI
    isolations = _sweep(cfg, [("phi", phis), ("delta_f", fit_grid)], rule, base=base)
    out.add_sweep("fig4_isolations.csv", isolations)
    out.summary = fit_lines(isolations, (cfg.fit.lo, cfg.fit.hi))
    out.tables.append(TableOutput("fig4_fits.txt", pd.DataFrame({"fit": out.summary})))

    out.panels += [
        PlotPanel("line", "fig4_correlations.csv", "g^(2)(0) at delta_2+, phi = pi/2", x="delta_f",
                  ys=("g2_cw", "g2_ccw"), log=True, xlabel="Delta_F / g"),
        PlotPanel("line", "fig4_correlations.csv", "n at delta_2+, phi = pi/2", x="delta_f",
                  ys=("n_cw", "n_ccw"), xlabel="Delta_F / g"),
    ]
    for phi in phis:
        out.panels.append(PlotPanel("line", "fig4_isolations.csv", f"isolation at phi/pi = {phi / PI:.2g}",
                                    x="delta_f", ys=("I_c_dB", "I_n_dB"), xlabel="Delta_F / g", ylabel="dB",
                                    where={"phi": float(phi)}))
    return out


def reproduce(cfg: RunConfig, figure: str, quick: bool = False) -> RunOutput:
    runners = {"fig1": reproduce_fig1, "fig2": reproduce_fig2, "fig3": reproduce_fig3, "fig4": reproduce_fig4}
    if figure not in runners:
        raise UsageError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    return runners[figure](cfg, quick=quick)


# ───────────────────────────── OUTPUT ─────────────────────────────

def write_outputs(out: RunOutput, cfg: RunConfig, output_dir: str | None = None, pdf: bool = False) -> list[str]:
    """Write every table, the summary, the plot script and (optionally) the PDF report."""
    output_dir = output_dir or cfg.run.output
    header = build_header(out.command, emit_config(cfg, environment=False))
    paths = []
    for item in out.tables:
        if item.name.endswith(".txt"):
            paths.append(write_text(output_dir, item.name, list(item.table.iloc[:, 0]), header))
        else:
            paths.append(write_csv(item.table, output_dir, item.name, header, item.columns))
    if out.summary and not any(t.name == f"{out.command}_fits.txt" for t in out.tables):
        paths.append(write_text(output_dir, f"{out.command}_summary.txt", out.summary, header))
    if out.panels:
        script = render_plot_script(out.command, out.panels, header)
        paths.append(write_script(output_dir, f"plot_{out.command}.py", script))
    if pdf and out.panels:
        tables = {t.name: t.table for t in out.tables}
        figures = [(panel.title, render_panel(tables[panel.csv], panel), "") for panel in out.panels]
        figures[-1] = (figures[-1][0], figures[-1][1], "\n".join(out.summary))
        paths.append(export_report_pdf(figures, os.path.join(output_dir, f"{out.command}.pdf"),
                                       title=f"WGM cavity QED: {out.command}"))
    return paths
