"""
Grid sweeps over the model parameters.

Each grid point is solved independently (steady state + observables), with an
optional truncation check at N+1. Points run on the process pool in
`src.utils.parallel` and come back in lexicographic grid order, first axis
slowest.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from src.model.hamiltonian import SystemParams, check_capacity
from src.model.tensor_algebra import SpaceLayout
from src.solver.liouvillian import solve_model
from src.transform.metrics import isolation_ratios
from src.transform.observables import ModeSelector, g2_zero, mean_occupation, spin_magnetization
from src.utils.errors import SolverError, UndefinedStatisticsError, UsageError
from src.utils.logger import get_logger
from src.utils.parallel import map_ordered

log = get_logger(__name__)

SWEEP_COLUMNS = ["delta", "phi", "delta_f", "n_cw", "n_ccw", "g2_cw", "g2_ccw",
                 "I_c_dB", "I_n_dB", "converged"]
EXTENDED_COLUMNS = ["delta", "phi", "delta_f", "n_cw", "n_ccw", "g2_cw", "g2_ccw",
                    "g2n2_cw", "g2n2_ccw", "sz_1", "sz_2", "converged"]
TABLE_COLUMNS = SWEEP_COLUMNS[:-1] + ["g2n2_cw", "g2n2_ccw", "sz_1", "sz_2", "converged"]

CONVERGENCE_RTOL = 1e-3
_CHECKED = ("n_cw", "n_ccw", "g2_cw", "g2_ccw")
_SWEEPABLE = {f.name for f in dataclasses.fields(SystemParams)} - {"n_trunc", "lock_delta_c", "delta_c", "fizeau_mode"}


# ───────────────────────────── SINGLE POINT ─────────────────────────────

def _or_nan(fn: Callable[[], float]) -> float:
    try:
        return fn()
    except UndefinedStatisticsError:
        return math.nan


def _observe(p: SystemParams, allow_large: bool) -> dict:
    _, result = solve_model(p, allow_large=allow_large)
    rho = result.rho
    record = {
        "n_cw": mean_occupation(rho, ModeSelector.CW),
        "n_ccw": mean_occupation(rho, ModeSelector.CCW),
        "g2_cw": _or_nan(lambda: g2_zero(rho, ModeSelector.CW, 1)),
        "g2_ccw": _or_nan(lambda: g2_zero(rho, ModeSelector.CCW, 1)),
        "g2n2_cw": _or_nan(lambda: g2_zero(rho, ModeSelector.CW, 2)),
        "g2n2_ccw": _or_nan(lambda: g2_zero(rho, ModeSelector.CCW, 2)),
        "sz_1": spin_magnetization(rho, 1),
        "sz_2": spin_magnetization(rho, 2),
    }
    try:
        record["I_c_dB"], record["I_n_dB"] = isolation_ratios(
            record["n_cw"], record["n_ccw"], record["g2_cw"], record["g2_ccw"])
    except UndefinedStatisticsError:
        record["I_c_dB"] = record["I_n_dB"] = math.nan
    return record


def _agree(a: float, b: float, rtol: float) -> bool:
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return math.isclose(a, b, rel_tol=rtol, abs_tol=1e-12)


def evaluate_point(p: SystemParams, check_convergence: bool = True,
                   convergence_rtol: float = CONVERGENCE_RTOL, allow_large: bool = False) -> dict:
    """
    Steady-state observables at one parameter point.

    With `check_convergence` the point is re-solved at n_trunc + 1 and
    `converged` is False when any of n_cw, n_ccw, g2_cw, g2_ccw moves by
    more than `convergence_rtol`.
    """
    record = {"delta": p.delta, "phi": p.phi, "delta_f": p.delta_f}
    record.update(_observe(p, allow_large))
    converged = True
    if check_convergence:
        finer = _observe(p.replace(n_trunc=p.n_trunc + 1), allow_large)
        drifted = [k for k in _CHECKED if not _agree(record[k], finer[k], convergence_rtol)]
        if drifted:
            converged = False
            log.warning("truncation N=%d not converged at delta=%.6g phi=%.6g delta_f=%.6g (%s)",
                        p.n_trunc, p.delta, p.phi, p.delta_f, ", ".join(drifted))
    record["converged"] = converged
    return {k: record[k] for k in TABLE_COLUMNS}


def _failed_record(p: SystemParams, exc: Exception) -> dict:
    log.warning("point delta=%.6g phi=%.6g delta_f=%.6g failed: %s", p.delta, p.phi, p.delta_f, exc)
    record = {k: math.nan for k in TABLE_COLUMNS}
    record.update(delta=p.delta, phi=p.phi, delta_f=p.delta_f, converged=False)
    return record


def _run_point(task: tuple) -> dict:
    p, check, rtol, allow_large = task
    try:
        return evaluate_point(p, check_convergence=check, convergence_rtol=rtol, allow_large=allow_large)
    except SolverError as exc:
        return _failed_record(p, exc)


# ───────────────────────────── GRID ─────────────────────────────

def grid_points(base: SystemParams, axes: Sequence[tuple[str, Sequence[float]]],
                derived_delta: Callable[[SystemParams], float] | None = None) -> list[SystemParams]:
    """Parameter points of the product grid, first axis slowest."""
    if not axes:
        raise UsageError("sweep needs at least one axis")
    names = [name for name, _ in axes]
    if len(set(names)) != len(names):
        raise UsageError(f"repeated sweep axis in {names}")
    grids = []
    for name, grid in axes:
        if name not in _SWEEPABLE:
            raise UsageError(f"cannot sweep {name!r}; choose from {sorted(_SWEEPABLE)}")
        values = np.asarray(grid, dtype=float).ravel()
        if values.size == 0 or not np.all(np.isfinite(values)):
            raise UsageError(f"grid for {name!r} must be nonempty and finite")
        if np.unique(values).size != values.size:
            raise UsageError(f"grid for {name!r} has duplicate values")
        grids.append(values)
    if derived_delta is not None and "delta" in names:
        raise UsageError("delta cannot be both a sweep axis and a derived rule")

    points = []
    for combo in itertools.product(*grids):
        p = base.replace(**{name: float(v) for name, v in zip(names, combo)})
        if derived_delta is not None:
            p = p.replace(delta=float(derived_delta(p)))
        points.append(p)
    return points


def sweep(base: SystemParams, axes: Sequence[tuple[str, Sequence[float]]],
          derived_delta: Callable[[SystemParams], float] | None = None,
          workers: int | None = None, check_convergence: bool = True,
          convergence_rtol: float = CONVERGENCE_RTOL, allow_large: bool = False) -> pd.DataFrame:
    """
    Evaluate every point of the product grid.

    Parameters
    ----------
    axes
        (parameter name, grid) pairs; any float field of SystemParams.
    derived_delta
        Rule δ = f(p) applied after the axis values are set, e.g. a
        `src.transform.spectrum.DeltaRule`.

    Solver failures become rows with NaN observables and converged=False;
    capacity errors abort before any work starts.
    """
    points = grid_points(base, axes, derived_delta)
    n_check = base.n_trunc + (1 if check_convergence else 0)
    check_capacity(SpaceLayout.cavity(n_check), allow_large=allow_large)

    log.info("sweep over %s: %d points", " x ".join(name for name, _ in axes), len(points))
    tasks = [(p, check_convergence, convergence_rtol, allow_large) for p in points]
    records = map_ordered(_run_point, tasks, workers)
    table = pd.DataFrame.from_records(records, columns=TABLE_COLUMNS)
    table["converged"] = table["converged"].astype(bool)
    flagged = flagged_rows(table)
    if flagged:
        log.warning("%d of %d sweep rows flagged", flagged, len(table))
    return table


def flagged_rows(table: pd.DataFrame) -> int:
    return int((~table["converged"].astype(bool)).sum())


# ───────────────────────────── MIRROR ─────────────────────────────

_SWAPS = [("n_cw", "n_ccw"), ("g2_cw", "g2_ccw"), ("g2n2_cw", "g2n2_ccw")]


def mirror_table(table: pd.DataFrame) -> pd.DataFrame:
    """
    Relabel CW <-> CCW: the table a sweep with `fizeau_mode="ccw"` gives.

    Swapping the modes maps φ to -φ, and the steady state at -φ is the complex
    conjugate of the one at φ, so φ is kept. Directional columns trade places
    and both isolation ratios flip sign.
    """
    mirrored = table.copy()
    for left, right in _SWAPS:
        if left in table and right in table:
            mirrored[left], mirrored[right] = table[right].to_numpy(), table[left].to_numpy()
    for column in ("I_c_dB", "I_n_dB"):
        if column in table:
            mirrored[column] = -table[column]
    return mirrored
