"""
Quantities read off steady states: occupations, magnetizations, equal-time and
two-time generalized correlations g_n^(2), photon-number distributions and
bundle-emission classification.

Correlation delays are measured in units of 1/κ throughout this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from src.model.tensor_algebra import (
    ATOM_1, ATOM_2, CCW, CW,
    DensityMatrix, Operator, SpaceLayout,
    embedded_lowering, embedded_pauli, partial_trace,
)
from src.solver.liouvillian import Superoperator, propagate_series
from src.utils.errors import UndefinedStatisticsError, UsageError

UNDERFLOW_FLOOR = 1e-14
IMAG_TOL = 1e-10
# absolute round-off of moments taken from a unit-trace state
MOMENT_ATOL = 1e-12

# classification thresholds
INTERIOR_TAU_MAX = 10.0
SINGLE_PHOTON_MAX_G2 = 0.5
COHERENT_TOL = 0.05


# ───────────────────────────── SELECTORS ─────────────────────────────

class ModeSelector(str, Enum):
    """Which cavity mode ô is read. SYMMETRIC reads CW (both agree when Δ_F = 0)."""
    CW = "cw"
    CCW = "ccw"
    SYMMETRIC = "symmetric"

    @property
    def slot(self) -> int:
        return CCW if self is ModeSelector.CCW else CW

    @classmethod
    def parse(cls, value: "str | ModeSelector") -> "ModeSelector":
        try:
            return cls(value.lower() if isinstance(value, str) else value)
        except ValueError:
            raise UsageError(f"unknown mode {value!r}; expected cw, ccw or symmetric") from None


class EmissionClass(str, Enum):
    SINGLE_PHOTON = "single_photon"
    TWO_PHOTON_BUNDLE = "two_photon_bundle"
    COHERENT = "coherent"
    OTHER = "other"


# ───────────────────────────── OPERATOR CACHE ─────────────────────────────

@lru_cache(maxsize=256)
def lowering_power(layout: SpaceLayout, slot: int, n: int) -> Operator:
    return embedded_lowering(layout, slot).power(n)


@lru_cache(maxsize=256)
def normal_ordered(layout: SpaceLayout, slot: int, n: int) -> Operator:
    """(a†)^n a^n on the full space."""
    a_n = lowering_power(layout, slot, n)
    return a_n.dag() @ a_n


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > IMAG_TOL * max(1.0, abs(value.real)):
        raise UsageError(f"{what} has imaginary part {value.imag:.3e}; state is not Hermitian")
    return float(value.real)


def _check_order(n: int) -> int:
    if n not in (1, 2):
        raise UsageError(f"bundle order must be 1 or 2, got {n}")
    return n


# ───────────────────────────── EQUAL-TIME OBSERVABLES ─────────────────────────────

def normal_moment(rho: DensityMatrix, mode: ModeSelector, n: int) -> float:
    """⟨(a†)^n a^n⟩ for the selected mode."""
    mode = ModeSelector.parse(mode)
    return _real(normal_ordered(rho.layout, mode.slot, n).expect(rho), f"<a†^{n} a^{n}>")


def mean_occupation(rho: DensityMatrix, mode: ModeSelector) -> float:
    return normal_moment(rho, mode, 1)


def g2_zero(rho: DensityMatrix, mode: ModeSelector, n: int = 1) -> float:
    """
    Equal-time generalized correlation

        g_n^(2)(0) = ⟨(a†)^{2n} a^{2n}⟩ / ⟨(a†)^n a^n⟩²

    Raises UndefinedStatisticsError when the denominator moment is below the
    underflow floor (dark mode). A numerator left slightly negative by
    round-off in the steady state counts as zero.
    """
    _check_order(n)
    denominator = normal_moment(rho, mode, n)
    if denominator < UNDERFLOW_FLOOR:
        raise UndefinedStatisticsError(
            f"g_{n}^(2) undefined for mode {ModeSelector.parse(mode).value}: "
            f"<a†^{n} a^{n}> = {denominator:.3e} below floor"
        )
    return max(normal_moment(rho, mode, 2 * n), 0.0) / denominator ** 2


def spin_magnetization(rho: DensityMatrix, atom: int) -> float:
    """⟨σ_i^z⟩ for atom 1 or 2."""
    if atom not in (1, 2):
        raise UsageError(f"atom must be 1 or 2, got {atom}")
    slot = ATOM_1 if atom == 1 else ATOM_2
    return _real(embedded_pauli(rho.layout, "z", slot).expect(rho), "<sigma_z>")


@dataclass(frozen=True)
class PhotonDistribution:
    """p(q) of one mode and the photon-weighted p̃(q) = q p(q) / n_o (None for a dark mode)."""
    p: np.ndarray
    p_tilde: np.ndarray | None
    mean: float

    @property
    def defined(self) -> bool:
        return self.p_tilde is not None


def photon_distribution(rho: DensityMatrix, mode: ModeSelector) -> PhotonDistribution:
    mode = ModeSelector.parse(mode)
    reduced = partial_trace(rho, mode.slot)
    p = np.clip(np.real(np.diag(reduced.data)), 0.0, None)
    q = np.arange(p.size)
    mean = float(q @ p)
    p_tilde = q * p / mean if mean > UNDERFLOW_FLOOR else None
    return PhotonDistribution(p=p, p_tilde=p_tilde, mean=mean)


def bundle_purity(dist: PhotonDistribution, n: int = 2) -> float:
    """Share of emitted photons arriving in states with more than n photons, Σ_{q>n} p̃(q)."""
    if not dist.defined:
        raise UndefinedStatisticsError("p̃(q) undefined for a dark mode")
    return float(np.sum(dist.p_tilde[n + 1:]))


def photon_lifetime_seconds(kappa_khz: float) -> float:
    """1/κ for κ quoted as (2π)·x kHz."""
    return 1.0 / (2.0 * math.pi * kappa_khz * 1e3)


# ───────────────────────────── TWO-TIME CORRELATIONS ─────────────────────────────

def default_tau_grid(n_points: int = 200, tau_max: float = 20.0) -> np.ndarray:
    """
    Hybrid grid on [0, tau_max] (units of 1/κ): τ = 0, log-spaced points on
    [1e-3, 1), then linear points on [1, tau_max].
    """
    if n_points < 3:
        raise UsageError("tau grid needs at least 3 points")
    if tau_max <= 1.0:
        return np.linspace(0.0, tau_max, n_points)
    n_log = n_points // 2
    n_lin = n_points - 1 - n_log
    return np.concatenate([
        [0.0],
        np.geomspace(1e-3, 1.0, n_log, endpoint=False),
        np.linspace(1.0, tau_max, n_lin),
    ])


@dataclass(frozen=True)
class CorrelationSeries:
    n: int
    tau_grid: np.ndarray
    values: np.ndarray
    zero_time_value: float

    def __post_init__(self):
        tau = np.asarray(self.tau_grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if tau.shape != values.shape or tau.ndim != 1 or tau.size == 0:
            raise UsageError("tau grid and values must be matching 1-D arrays")
        if not np.all(np.isfinite(values)):
            raise UndefinedStatisticsError(f"g_{self.n}^(2)(τ) contains non-finite values")
        scale = max(1.0, float(np.max(np.abs(values))))
        if np.min(values) < -1e-9 * scale:
            raise UsageError(f"g_{self.n}^(2)(τ) has negative values (min {np.min(values):.3e})")
        values = np.clip(values, 0.0, None)
        if tau[0] == 0.0 and abs(values[0] - self.zero_time_value) > 1e-8 * max(1.0, abs(self.zero_time_value)):
            raise UsageError(
                f"g_{self.n}^(2)(0) from propagation ({values[0]:.10g}) disagrees with "
                f"the equal-time value ({self.zero_time_value:.10g})"
            )
        object.__setattr__(self, "tau_grid", tau)
        object.__setattr__(self, "values", values)

    def mirrored(self) -> tuple[np.ndarray, np.ndarray]:
        """Series over [-τ_max, τ_max]; stationary intensity correlations are even in τ."""
        tau, values = self.tau_grid, self.values
        if tau[0] == 0.0:
            return np.concatenate([-tau[:0:-1], tau]), np.concatenate([values[:0:-1], values])
        return np.concatenate([-tau[::-1], tau]), np.concatenate([values[::-1], values])


def gn2_tau(L: Superoperator, rho_ss: DensityMatrix, mode: ModeSelector, n: int,
            tau_grid: np.ndarray | None = None) -> CorrelationSeries:
    """
    g_n^(2)(τ) by quantum regression.

    ρ'(0) = a^n ρ_ss (a†)^n evolves under L; the series is
    Tr[(a†)^n a^n ρ'(τ)] / ⟨(a†)^n a^n⟩². The grid is in units of 1/κ.
    Traces are floored at zero; at τ = 0 a trace within MOMENT_ATOL of the
    equal-time moment takes the equal-time value.
    """
    _check_order(n)
    mode = ModeSelector.parse(mode)
    tau_grid = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    layout = rho_ss.layout
    denominator = normal_moment(rho_ss, mode, n)
    if denominator < UNDERFLOW_FLOOR:
        raise UndefinedStatisticsError(f"g_{n}^(2)(τ) undefined: <a†^{n} a^{n}> = {denominator:.3e}")

    a_n = lowering_power(layout, mode.slot, n).to_dense()
    rho_prime = a_n @ rho_ss.data @ a_n.conj().T
    measure = normal_ordered(layout, mode.slot, n).to_dense()
    kappa = L.cavity_decay if L.cavity_decay else 1.0
    traces = np.clip(np.real(propagate_series(L, rho_prime, tau_grid / kappa, measure=measure)), 0.0, None)
    zero_time_value = g2_zero(rho_ss, mode, n)
    values = traces / denominator ** 2
    if tau_grid[0] == 0.0:
        numerator = max(normal_moment(rho_ss, mode, 2 * n), 0.0)
        if abs(traces[0] - numerator) <= MOMENT_ATOL:
            values[0] = zero_time_value
    return CorrelationSeries(n=n, tau_grid=tau_grid, values=values, zero_time_value=zero_time_value)


def classify_emission(series1: CorrelationSeries, series2: CorrelationSeries) -> EmissionClass:
    """
    Label the emission from g_1^(2)(τ) and g_2^(2)(τ) on a shared grid.

    The interior excludes τ = 0 and stops at τ = 10/κ.
    """
    if series1.tau_grid.shape != series2.tau_grid.shape or not np.allclose(series1.tau_grid, series2.tau_grid):
        raise UsageError("correlation series are on different τ grids")
    interior = (series1.tau_grid > 0) & (series1.tau_grid <= INTERIOR_TAU_MAX)
    if not interior.any():
        raise UsageError("τ grid has no interior points in (0, 10/κ]")
    g1_0, g2_0 = series1.zero_time_value, series2.zero_time_value
    g1_int, g2_int = series1.values[interior], series2.values[interior]

    if g1_0 > g1_int.max() and g2_0 < g2_int.min():
        return EmissionClass.TWO_PHOTON_BUNDLE
    if g1_0 < SINGLE_PHOTON_MAX_G2 and g1_0 < g1_int.min():
        return EmissionClass.SINGLE_PHOTON
    if abs(g1_0 - 1.0) < COHERENT_TOL:
        return EmissionClass.COHERENT
    return EmissionClass.OTHER
