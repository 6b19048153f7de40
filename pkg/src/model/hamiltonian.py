"""
System parameters, Hamiltonian and dissipation channels of two atoms coupled
to the CW and CCW modes of a spinning whispering-gallery resonator.

Internal units: every rate is measured in units of the atom-mode coupling g
(the CLI converts (2π)·kHz inputs through `SystemParams.from_physical`).

    H = (Δc + f·Δ_F) a_cw† a_cw + Δc a_ccw† a_ccw
        + Σ_i (δ/2 σ_i^z + Ω σ_i^x)
        + g (a_cw† + a_ccw†) σ_1^- + g (e^{iφ} a_cw† + e^{-iφ} a_ccw†) σ_2^- + h.c.

with f = `fizeau_factor` (2 by default). `fizeau_mode = "ccw"` moves the
shift onto the CCW mode, the mirror image of the rotating resonator.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from config.settings import MAX_LIOUVILLE_ROWS, PLATFORM_KHZ
from src.model.tensor_algebra import (
    ATOM_1, ATOM_2, CCW, CW,
    Operator, SpaceLayout,
    embedded_lowering, embedded_pauli,
)
from src.utils.errors import CapacityError, UsageError

TWO_PI = 2.0 * math.pi
FIZEAU_MODES = ("cw", "ccw")


# ───────────────────────────── PARAMETERS ─────────────────────────────

@dataclass(frozen=True)
class SystemParams:
    """
    Physical rates and angles of the model plus truncation control.

    Parameters
    ----------
    g, kappa, gamma, omega
        Coupling, cavity decay, atomic decay, transverse pump Rabi rate.
    delta
        Atom-pump detuning δ.
    delta_c
        Cavity-pump detuning Δc. With `lock_delta_c` (default) it is forced
        to 2δ and may be left as None.
    delta_f
        Fizeau splitting Δ_F; the CW mode is shifted by `fizeau_factor`·Δ_F.
    fizeau_mode
        "cw" (default) or "ccw": which mode carries the Fizeau shift.
    phi
        Relative atomic phase in radians.
    n_trunc
        Photon truncation N per mode (local dimension N+1).
    """
    g: float = 1.0
    kappa: float = PLATFORM_KHZ["kappa"] / PLATFORM_KHZ["g"]
    gamma: float = PLATFORM_KHZ["gamma"] / PLATFORM_KHZ["g"]
    omega: float = PLATFORM_KHZ["omega"] / PLATFORM_KHZ["g"]
    delta: float = 0.0
    delta_c: float | None = None
    delta_f: float = 0.0
    phi: float = 0.0
    n_trunc: int = 4
    lock_delta_c: bool = True
    fizeau_factor: float = 2.0
    fizeau_mode: str = "cw"

    def __post_init__(self):
        if not self.g > 0:
            raise UsageError(f"g must be > 0, got {self.g}")
        for name in ("kappa", "gamma", "omega"):
            if getattr(self, name) < 0:
                raise UsageError(f"{name} must be >= 0, got {getattr(self, name)}")
        if int(self.n_trunc) != self.n_trunc or self.n_trunc < 1:
            raise UsageError(f"n_trunc must be an integer >= 1, got {self.n_trunc}")
        for name in ("g", "kappa", "gamma", "omega", "delta", "delta_f", "phi", "fizeau_factor"):
            if not math.isfinite(getattr(self, name)):
                raise UsageError(f"{name} must be finite")
        if self.fizeau_mode not in FIZEAU_MODES:
            raise UsageError(f"fizeau_mode must be cw or ccw, got {self.fizeau_mode!r}")
        object.__setattr__(self, "n_trunc", int(self.n_trunc))

        locked = 2.0 * self.delta
        if self.lock_delta_c:
            if self.delta_c is not None and self.delta_c != locked:
                raise UsageError(f"delta_c={self.delta_c} conflicts with the lock delta_c = 2*delta = {locked}")
            object.__setattr__(self, "delta_c", locked)
        elif self.delta_c is None:
            object.__setattr__(self, "delta_c", locked)

    # ---- derived ------------------------------------------------------
    @property
    def layout(self) -> SpaceLayout:
        return SpaceLayout.cavity(self.n_trunc)

    @property
    def fizeau_shift(self) -> float:
        """Frequency offset of the shifted mode, fizeau_factor·Δ_F."""
        return self.fizeau_factor * self.delta_f

    @property
    def mode_detunings(self) -> tuple[float, float]:
        """(CW, CCW) cavity detunings including the Fizeau shift."""
        if self.fizeau_mode == "ccw":
            return self.delta_c, self.delta_c + self.fizeau_shift
        return self.delta_c + self.fizeau_shift, self.delta_c

    def replace(self, **changes) -> "SystemParams":
        """dataclasses.replace that keeps the Δc = 2δ lock consistent."""
        if changes.get("lock_delta_c", self.lock_delta_c) and "delta_c" not in changes:
            changes["delta_c"] = None
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_physical(cls, g_khz: float, kappa_khz: float, gamma_khz: float, omega_khz: float,
                      delta_khz: float = 0.0, delta_f_khz: float = 0.0, delta_c_khz: float | None = None,
                      **rest) -> "SystemParams":
        """
        Build dimensionless parameters from (2π)·x kHz inputs.

        Each x is turned into the angular frequency ω = 2π·x·10³ s⁻¹ and
        divided by ω_g.
        """
        if not g_khz > 0:
            raise UsageError(f"g must be > 0 kHz, got {g_khz}")
        omega_g = to_angular(g_khz)

        def scale(khz: float) -> float:
            return to_angular(khz) / omega_g

        if rest.get("lock_delta_c", True):
            delta_c_khz = None
        return cls(
            g=1.0,
            kappa=scale(kappa_khz),
            gamma=scale(gamma_khz),
            omega=scale(omega_khz),
            delta=scale(delta_khz),
            delta_f=scale(delta_f_khz),
            delta_c=None if delta_c_khz is None else scale(delta_c_khz),
            **rest,
        )


def to_angular(khz: float) -> float:
    """(2π)·x kHz → angular frequency in s⁻¹."""
    return TWO_PI * khz * 1e3


# ───────────────────────────── CAPACITY ─────────────────────────────

def check_capacity(layout: SpaceLayout, allow_large: bool = False, cap: int | None = None) -> None:
    cap = MAX_LIOUVILLE_ROWS if cap is None else cap
    rows = layout.liouville_rows
    if rows > cap and not allow_large:
        raise CapacityError(
            f"Liouville space of {rows} rows (D={layout.dim}) exceeds the cap of {cap}; "
            "lower n_trunc or pass --allow-large"
        )


# ───────────────────────────── REALIZATION ─────────────────────────────

class Channel(NamedTuple):
    """Collapse operator with its rate kept separate (not folded into sqrt(rate)·op)."""
    operator: Operator
    rate: float
    label: str


@dataclass(frozen=True)
class ModelRealization:
    params: SystemParams
    hamiltonian: Operator
    collapse_ops: tuple[Channel, ...] = field(default_factory=tuple)

    @property
    def layout(self) -> SpaceLayout:
        return self.hamiltonian.layout


def build_hamiltonian(p: SystemParams, allow_large: bool = False) -> Operator:
    layout = p.layout
    check_capacity(layout, allow_large=allow_large)

    a_cw = embedded_lowering(layout, CW)
    a_ccw = embedded_lowering(layout, CCW)
    ad_cw, ad_ccw = a_cw.dag(), a_ccw.dag()
    sm_1 = embedded_lowering(layout, ATOM_1)
    sm_2 = embedded_lowering(layout, ATOM_2)

    detuning_cw, detuning_ccw = p.mode_detunings
    cavity = detuning_cw * (ad_cw @ a_cw) + detuning_ccw * (ad_ccw @ a_ccw)

    atoms = None
    for slot in (ATOM_1, ATOM_2):
        term = (0.5 * p.delta) * embedded_pauli(layout, "z", slot) + p.omega * embedded_pauli(layout, "x", slot)
        atoms = term if atoms is None else atoms + term

    phase = complex(math.cos(p.phi), math.sin(p.phi))
    coupling = (p.g * ((ad_cw + ad_ccw) @ sm_1)
                + p.g * ((phase * ad_cw + phase.conjugate() * ad_ccw) @ sm_2))

    return cavity + atoms + coupling + coupling.dag()


def collapse_operators(p: SystemParams) -> list[Channel]:
    """The four Lindblad channels, rates attached and not pre-multiplied."""
    layout = p.layout
    return [
        Channel(embedded_lowering(layout, CW), p.kappa, "cavity_cw"),
        Channel(embedded_lowering(layout, CCW), p.kappa, "cavity_ccw"),
        Channel(embedded_lowering(layout, ATOM_1), p.gamma, "atom_1"),
        Channel(embedded_lowering(layout, ATOM_2), p.gamma, "atom_2"),
    ]


def realize(p: SystemParams, allow_large: bool = False) -> ModelRealization:
    return ModelRealization(
        params=p,
        hamiltonian=build_hamiltonian(p, allow_large=allow_large),
        collapse_ops=tuple(collapse_operators(p)),
    )
