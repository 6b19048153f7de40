"""
Direction-resolved nonreciprocity metrics and power-law scaling fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.stats import linregress

from src.transform.observables import UNDERFLOW_FLOOR
from src.utils.errors import (
    FitDomainError, FitError, FitSignError, UnconvergedRowsError, UndefinedStatisticsError, UsageError,
)
from src.utils.logger import get_logger

log = get_logger(__name__)

MIN_FIT_POINTS = 5
DEFAULT_FIT_RANGE = (0.1, 0.9)
ORIENTATIONS = ("cw", "ccw")


# ───────────────────────────── ISOLATION RATIOS ─────────────────────────────

def isolation_ratios(n_cw: float, n_ccw: float, g2_cw: float, g2_ccw: float,
                     orientation: str = "cw") -> tuple[float, float]:
    """
    Correlation and brightness isolation in dB.

    With the default orientation "cw"

        I_c = 10 log10(g2_ccw / g2_cw)
        I_n = 10 log10(n_cw / n_ccw)

    so a bright, antibunched CW mode gives positive values for both.
    "ccw" flips both ratios (I_c CW over CCW, I_n CCW over CW).

    Raises
    ------
    UndefinedStatisticsError
        Any input is non-finite or below the underflow floor.
    UsageError
        Unknown orientation.
    """
    if orientation not in ORIENTATIONS:
        raise UsageError(f"orientation must be one of {', '.join(ORIENTATIONS)}, got {orientation!r}")
    values = {"n_cw": n_cw, "n_ccw": n_ccw, "g2_cw": g2_cw, "g2_ccw": g2_ccw}
    for name, value in values.items():
        if not math.isfinite(value) or value < UNDERFLOW_FLOOR:
            raise UndefinedStatisticsError(f"isolation undefined: {name} = {value:.3e}")
    i_c, i_n = 10.0 * math.log10(g2_ccw / g2_cw), 10.0 * math.log10(n_cw / n_ccw)
    if orientation == "ccw":
        return -i_c, -i_n
    return i_c, i_n


# ───────────────────────────── POWER-LAW FITS ─────────────────────────────

@dataclass(frozen=True)
class PowerLawFit:
    """
    y = A · x^alpha fitted in log-log space.

    Parameters
    ----------
    amplitude
        A in dB, carrying the sign of the data.
    alpha
        Scaling exponent.
    fit_range
        (min x, max x) actually used.
    residual
        RMS of the log10 residuals.
    """
    amplitude: float
    alpha: float
    fit_range: tuple[float, float]
    residual: float
    n_points: int

    def predict(self, x) -> np.ndarray:
        return self.amplitude * np.power(np.asarray(x, dtype=float), self.alpha)

    def format(self) -> str:
        lo, hi = self.fit_range
        return (f"A_dB={self.amplitude:.6g}, alpha={self.alpha:.6g}, "
                f"rms={self.residual:.3e}, range=[{lo:.6g}, {hi:.6g}]")


def powerlaw_fit(x: Sequence[float], y: Sequence[float],
                 converged: Sequence[bool] | None = None) -> PowerLawFit:
    """
    Ordinary least squares on (log10 x, log10 |y|).

    Raises
    ------
    FitError         fewer than five points or mismatched lengths
    FitDomainError   any x <= 0 or non-finite input
    FitSignError     y not strictly one sign
    UnconvergedRowsError   a `converged` flag is False
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1-D arrays of equal length")
    if x.size < MIN_FIT_POINTS:
        raise FitError(f"power-law fit needs at least {MIN_FIT_POINTS} points, got {x.size}")
    if converged is not None and not np.all(np.asarray(converged, dtype=bool)):
        raise UnconvergedRowsError("refusing to fit rows flagged as unconverged")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitDomainError("fit inputs contain non-finite values")
    if np.any(x <= 0):
        raise FitDomainError("power-law fit needs x > 0 (exclude delta_f = 0)")
    if np.all(y > 0):
        sign = 1.0
    elif np.all(y < 0):
        sign = -1.0
    else:
        raise FitSignError("isolation values change sign; power-law fit undefined")

    order = np.lexsort((y, x))
    x, y = x[order], y[order]
    lx, ly = np.log10(x), np.log10(np.abs(y))
    result = linregress(lx, ly)
    residuals = ly - (result.intercept + result.slope * lx)
    fit = PowerLawFit(
        amplitude=sign * 10.0 ** result.intercept,
        alpha=float(result.slope),
        fit_range=(float(x[0]), float(x[-1])),
        residual=float(np.sqrt(np.mean(residuals ** 2))),
        n_points=int(x.size),
    )
    log.debug("power-law fit %s", fit.format())
    return fit


def fit_isolation(table: pd.DataFrame, column: str,
                  fit_range: tuple[float, float] = DEFAULT_FIT_RANGE, g: float = 1.0) -> PowerLawFit:
    """
    Fit one isolation column of a sweep table against Δ_F/g.

    Rows outside `fit_range`, unconverged rows and undefined (NaN) rows are
    dropped before fitting.
    """
    if column not in table.columns:
        raise FitError(f"table has no column {column!r}")
    lo, hi = fit_range
    x = table["delta_f"] / g
    window = table[(x >= lo) & (x <= hi)]
    usable = window[window["converged"].astype(bool) & window[column].notna()]
    dropped = len(window) - len(usable)
    if dropped:
        log.warning("fit of %s drops %d unconverged or undefined rows", column, dropped)
    return powerlaw_fit(usable["delta_f"] / g, usable[column], usable["converged"])


def format_fit(label: str, fit: PowerLawFit) -> str:
    return f"{label}: {fit.format()}"
