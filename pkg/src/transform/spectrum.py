"""
Dressed-state analysis of the single-excitation manifold and resonance locators.

Energy reference
----------------
`single_excitation_matrix` is H restricted to span{|e1>, |e2>, |1_cw>, |1_ccw>}
measured from the two-atom ground state |g g 0 0> (energy -δ), so the atomic
diagonal is +δ and the photon diagonal is Δc (+ fizeau_factor·Δ_F on the
shifted mode).
The transverse pump is at zero frequency in this frame, therefore a
single-photon resonance sits where the manifold has a zero eigenvalue.
With the lock Δc = 2δ this is the linear pencil det(δ·diag(1,1,2,2) + C) = 0,
solved exactly by `resonant_detunings`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import pandas as pd
import scipy.linalg as la
from scipy.signal import find_peaks

from src.model.hamiltonian import SystemParams
from src.solver.liouvillian import solve_model
from src.transform.observables import ModeSelector, mean_occupation
from src.utils.errors import ConfigError, NoPeakError, UsageError
from src.utils.logger import get_logger
from src.utils.parallel import map_ordered

log = get_logger(__name__)

HALF_PI = 0.5 * math.pi
BRANCH_LABELS = ("1+", "1-", "2+", "2-")


# ───────────────────────────── CLOSED FORMS ─────────────────────────────

@dataclass(frozen=True)
class BranchSet:
    delta_1_plus: float
    delta_1_minus: float
    delta_2_plus: float
    delta_2_minus: float

    def get(self, label: str) -> float:
        """Branch by label '1+', '1-', '2+' or '2-'."""
        try:
            return {
                "1+": self.delta_1_plus, "1-": self.delta_1_minus,
                "2+": self.delta_2_plus, "2-": self.delta_2_minus,
            }[label]
        except KeyError:
            raise UsageError(f"unknown branch {label!r}; expected 1+, 1-, 2+ or 2-") from None


def branches_phi_half(g: float, delta_f: float, phi: float | None = None) -> BranchSet:
    """
    Vacuum-Rabi branches at φ = π/2:
    δ_{1,±} = ±g and δ_{2,±} = (-Δ_F ± sqrt(Δ_F² + 16 g²)) / 4.

    `delta_f` is the offset of the shifted mode. These are the exact
    single-excitation roots of the model when called with
    `SystemParams.fizeau_shift` (fizeau_factor·Δ_F).

    Passing `phi` guards against using the formula away from π/2.
    """
    if not g > 0:
        raise UsageError(f"g must be > 0, got {g}")
    if phi is not None and not math.isclose(math.remainder(phi - HALF_PI, 2 * math.pi), 0.0, abs_tol=1e-12):
        raise UsageError(f"closed-form branches hold only at phi = pi/2, got phi/pi = {phi / math.pi:.4g}")
    root = math.sqrt(delta_f ** 2 + 16.0 * g ** 2)
    return BranchSet(
        delta_1_plus=g,
        delta_1_minus=-g,
        delta_2_plus=(-delta_f + root) / 4.0,
        delta_2_minus=(-delta_f - root) / 4.0,
    )


@dataclass(frozen=True)
class NonspinningResonances:
    """
    Both Δ_F = 0 resonance families. `bright` names the family ("plus_cos",
    "minus_cos" or "degenerate") with the larger steady-state occupation,
    None when labeling was not requested.
    """
    minus_cos: tuple[float, float]
    plus_cos: tuple[float, float]
    bright: str | None = None

    @property
    def bright_family(self) -> tuple[float, float] | None:
        if self.bright == "plus_cos":
            return self.plus_cos
        if self.bright == "minus_cos":
            return self.minus_cos
        return None


def resonance_nonspinning(g: float, phi: float, base: SystemParams | None = None,
                          label: bool = True) -> NonspinningResonances:
    """±g sqrt(1 - cos φ) and ±g sqrt(1 + cos φ), optionally labeled by measured brightness."""
    if not g > 0:
        raise UsageError(f"g must be > 0, got {g}")
    c = math.cos(phi)
    r_minus = g * math.sqrt(max(0.0, 1.0 - c))
    r_plus = g * math.sqrt(max(0.0, 1.0 + c))
    bright = _brightest_family(g, phi, base or SystemParams(g=g)) if label else None
    return NonspinningResonances(minus_cos=(r_minus, -r_minus), plus_cos=(r_plus, -r_plus), bright=bright)


@lru_cache(maxsize=512)
def _brightest_family(g: float, phi: float, base: SystemParams) -> str:
    c = math.cos(phi)
    candidates = {
        "minus_cos": g * math.sqrt(max(0.0, 1.0 - c)),
        "plus_cos": g * math.sqrt(max(0.0, 1.0 + c)),
    }
    occupation = {}
    for name, delta in candidates.items():
        _, result = solve_model(base.replace(g=g, phi=phi, delta=delta, delta_f=0.0))
        occupation[name] = mean_occupation(result.rho, ModeSelector.SYMMETRIC)
    hi, lo = max(occupation.values()), min(occupation.values())
    log.debug("nonspinning resonances phi/pi=%.4g occupations %s", phi / math.pi, occupation)
    if hi - lo <= 1e-9 * max(hi, 1e-300):
        return "degenerate"
    return max(occupation, key=occupation.get)


# ───────────────────────────── SINGLE-EXCITATION MANIFOLD ─────────────────────────────

def single_excitation_matrix(p: SystemParams) -> np.ndarray:
    """H on (|e1>, |e2>, |1_cw>, |1_ccw>) relative to |g g 0 0>; Ω is ignored."""
    phase = complex(math.cos(p.phi), math.sin(p.phi))
    M = np.zeros((4, 4), dtype=complex)
    M[0, 0] = M[1, 1] = p.delta
    M[2, 2], M[3, 3] = p.mode_detunings
    M[2, 0] = p.g
    M[3, 0] = p.g
    M[2, 1] = p.g * phase
    M[3, 1] = p.g * phase.conjugate()
    M[0, 2], M[0, 3] = np.conj(M[2, 0]), np.conj(M[3, 0])
    M[1, 2], M[1, 3] = np.conj(M[2, 1]), np.conj(M[3, 1])
    return M


def resonant_detunings(p: SystemParams) -> np.ndarray:
    """
    All δ at which the single-excitation manifold has a zero-energy dressed
    state, ascending. The rest of `p` (g, φ, Δ_F, Δc when unlocked) is held fixed.
    """
    C = single_excitation_matrix(p.replace(delta=0.0, delta_c=None if p.lock_delta_c else p.delta_c))
    if p.lock_delta_c:
        # det(δ·W + C) = 0 with W = diag(1, 1, 2, 2) → Hermitian problem on W^{-1/2} C W^{-1/2}
        w = np.array([1.0, 1.0, 2.0, 2.0])
        scaled = C / np.sqrt(np.outer(w, w))
        return np.sort(-la.eigvalsh(scaled))
    # Δc fixed: det = det(P) det(δ - B† P⁻¹ B) with P the photon diagonal
    photon = np.diag(C)[2:].real
    if np.any(photon == 0.0):
        raise UsageError("a photon level sits at zero energy; the resonance condition is degenerate")
    B = C[2:, :2]
    return np.sort(la.eigvalsh(B.conj().T @ np.diag(1.0 / photon) @ B))


def branch_table(g: float, delta_f_grid: Sequence[float], fizeau_factor: float = 2.0,
                 phi: float = HALF_PI) -> pd.DataFrame:
    """
    Closed-form φ=π/2 branches (at the mode offset fizeau_factor·Δ_F) next to
    the numeric manifold roots, one row per Δ_F.
    """
    records = []
    for delta_f in delta_f_grid:
        closed = branches_phi_half(g, fizeau_factor * float(delta_f))
        roots = resonant_detunings(SystemParams(g=g, phi=phi, delta_f=float(delta_f), fizeau_factor=fizeau_factor))
        record = {
            "delta_f": float(delta_f),
            "delta_1_plus": closed.delta_1_plus,
            "delta_1_minus": closed.delta_1_minus,
            "delta_2_plus": closed.delta_2_plus,
            "delta_2_minus": closed.delta_2_minus,
        }
        record.update({f"root_{k + 1}": float(r) for k, r in enumerate(roots)})
        records.append(record)
    return pd.DataFrame(records)


# ───────────────────────────── NUMERIC LOCATOR ─────────────────────────────

def total_occupation(p: SystemParams) -> float:
    """n_cw + n_ccw of the steady state at p."""
    _, result = solve_model(p)
    return (mean_occupation(result.rho, ModeSelector.CW)
            + mean_occupation(result.rho, ModeSelector.CCW))


def _vertex(x: np.ndarray, y: np.ndarray, i: int) -> float:
    a, b, _ = np.polyfit(x[i - 1:i + 2], y[i - 1:i + 2], 2)
    if a >= 0:
        return float(x[i])
    return float(-b / (2.0 * a))


def locate_resonances_numeric(p: SystemParams, delta_scan: Sequence[float], workers: int | None = None,
                              min_prominence: float = 1e-3) -> list[float]:
    """
    Peaks of the steady-state n_cw + n_ccw over a δ scan, each refined by a
    parabola through the three nearest samples. `min_prominence` is relative
    to the largest occupation on the scan.
    """
    x = np.asarray(delta_scan, dtype=float)
    if x.size < 3 or np.any(np.diff(x) <= 0):
        raise UsageError("delta scan needs at least 3 strictly ascending points")
    y = np.asarray(map_ordered(total_occupation, [p.replace(delta=float(d)) for d in x], workers))
    peaks, _ = find_peaks(y, prominence=min_prominence * float(y.max()))
    if peaks.size == 0:
        raise NoPeakError(f"no resonance found on delta scan [{x[0]:.4g}, {x[-1]:.4g}]")
    return sorted(_vertex(x, y, int(i)) for i in peaks)


# ───────────────────────────── DELTA RULES ─────────────────────────────

_NONSPIN = {
    "plus+": (1.0, +1.0), "plus-": (1.0, -1.0),
    "minus+": (-1.0, +1.0), "minus-": (-1.0, -1.0),
}


@dataclass(frozen=True)
class DeltaRule:
    """
    δ derived from the other parameters at each grid point.

    `branch:<1+|1-|2+|2->` closed-form φ=π/2 branches at the mode offset
    fizeau_factor·Δ_F,
    `nonspin:<plus±|minus±>` ±g sqrt(1 ± cos φ),
    `manifold:<k>` k-th ascending root of `resonant_detunings`.
    """
    kind: str
    label: str

    @classmethod
    def parse(cls, text: str) -> "DeltaRule":
        kind, _, label = text.strip().partition(":")
        kind, label = kind.strip().lower(), label.strip()
        rule = cls(kind, label)
        if kind == "branch":
            if label not in BRANCH_LABELS:
                raise ConfigError(f"unknown branch {label!r}; expected one of {', '.join(BRANCH_LABELS)}")
        elif kind == "nonspin":
            if label not in _NONSPIN:
                raise ConfigError(f"unknown nonspin family {label!r}; expected one of {sorted(_NONSPIN)}")
        elif kind == "manifold":
            if not label.isdigit() or not 1 <= int(label) <= 4:
                raise ConfigError(f"manifold root index must be 1..4, got {label!r}")
        else:
            raise ConfigError(f"unknown delta rule {text!r}")
        return rule

    def __str__(self) -> str:
        return f"{self.kind}:{self.label}"

    def __call__(self, p: SystemParams) -> float:
        if self.kind == "branch":
            return branches_phi_half(p.g, p.fizeau_shift).get(self.label)
        if self.kind == "nonspin":
            sign_cos, sign = _NONSPIN[self.label]
            return sign * p.g * math.sqrt(max(0.0, 1.0 + sign_cos * math.cos(p.phi)))
        roots = resonant_detunings(p)
        k = int(self.label)
        if k > roots.size:
            raise UsageError(f"manifold:{k} requested but only {roots.size} resonances exist")
        return float(roots[k - 1])
