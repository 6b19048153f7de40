"""
Run configuration: a flat, sectioned key = value text.

    [params]
    units = dimensionless        ; or kHz, meaning (2π)·x kHz
    phi = 0.5pi
    delta = branch:2+            ; number or δ rule, re-evaluated per grid point
    delta_f = 0.5

    [sweep]                      ; axes in order, first axis slowest
    phi = linspace(0, 1pi, 21)

    [g2tau]
    mode = symmetric

    [fit]
    range = 0.1, 0.9

    [run]
    workers = auto

`emit_config` writes every resolved value back, so parse_config(emit_config(c)) == c.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field

import numpy as np

from config.settings import OUTPUT_DIR, PLATFORM_KHZ
from src.model.hamiltonian import FIZEAU_MODES, SystemParams
from src.transform.observables import ModeSelector
from src.transform.spectrum import DeltaRule
from src.utils.errors import ConfigError, WGMError

UNITS = ("dimensionless", "khz")
RATE_KEYS = ("g", "kappa", "gamma", "omega", "delta", "delta_c", "delta_f")
MODEL_KEYS = ("phi", "n_trunc", "lock_delta_c", "fizeau_factor", "fizeau_mode")
PARAM_KEYS = ("units",) + RATE_KEYS + MODEL_KEYS
SWEEP_KEYS = ("delta", "phi", "delta_f", "omega", "kappa", "gamma", "g", "fizeau_factor")

_DEFAULTS = SystemParams()
_GRID = re.compile(r"^(linspace|geomspace)\s*\((.*)\)$", re.IGNORECASE)
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}
_COMMENT = re.compile(r"(?:^|\s)[;#].*$")


# ───────────────────────────── SCALARS ─────────────────────────────

def parse_scalar(text: str, line: int | None = None, units: str = "dimensionless") -> float:
    """
    Float with an optional `pi` multiplier (`0.66pi`, `-pi`) or `kHz` suffix.

    A `kHz` suffix is only accepted when the config declares kHz units.
    """
    raw = text.strip()
    value = raw.lower().replace(" ", "")
    if value.endswith("khz"):
        if units != "khz":
            raise ConfigError(f"value {raw!r} is in kHz but units = dimensionless", line)
        value = value[:-3]
    factor = 1.0
    if value.endswith("pi"):
        factor, value = math.pi, value[:-2]
        value = {"": "1", "-": "-1", "+": "1"}.get(value, value.rstrip("*"))
    try:
        number = float(value) * factor
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as a number", line) from None
    if not math.isfinite(number):
        raise ConfigError(f"value {raw!r} is not finite", line)
    return number


def parse_int(text: str, line: int | None = None) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"cannot read {text.strip()!r} as an integer", line) from None


def parse_bool(text: str, line: int | None = None) -> bool:
    value = text.strip().lower()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise ConfigError(f"cannot read {text.strip()!r} as a boolean", line)


# ───────────────────────────── GRIDS ─────────────────────────────

@dataclass(frozen=True)
class GridSpec:
    """`linspace(a, b, n)`, `geomspace(a, b, n)` or an explicit list."""
    kind: str
    args: tuple[float, ...]

    def values(self) -> np.ndarray:
        if self.kind == "linspace":
            return np.linspace(self.args[0], self.args[1], int(self.args[2]))
        if self.kind == "geomspace":
            return np.geomspace(self.args[0], self.args[1], int(self.args[2]))
        return np.asarray(self.args, dtype=float)

    def __str__(self) -> str:
        if self.kind == "list":
            return ", ".join(repr(float(v)) for v in self.args)
        a, b, n = self.args
        return f"{self.kind}({float(a)!r}, {float(b)!r}, {int(n)})"


def parse_grid(text: str, line: int | None = None, units: str = "dimensionless") -> GridSpec:
    raw = text.strip()
    match = _GRID.match(raw)
    if match:
        kind = match.group(1).lower()
        parts = [s for s in match.group(2).split(",")]
        if len(parts) != 3:
            raise ConfigError(f"{kind} takes (start, stop, count), got {raw!r}", line)
        a, b = (parse_scalar(s, line, units) for s in parts[:2])
        n = parse_int(parts[2], line)
        if n < 1:
            raise ConfigError(f"grid count must be >= 1, got {n}", line)
        if kind == "geomspace" and (a <= 0 or b <= 0):
            raise ConfigError("geomspace bounds must be positive", line)
        return GridSpec(kind, (a, b, float(n)))
    values = tuple(parse_scalar(s, line, units) for s in raw.split(",") if s.strip())
    if not values:
        raise ConfigError("empty grid", line)
    return GridSpec("list", values)


# ───────────────────────────── SECTIONS ─────────────────────────────

@dataclass
class G2TauConfig:
    mode: str = ModeSelector.SYMMETRIC.value
    n_points: int = 200
    tau_max: float = 20.0


@dataclass
class FitConfig:
    lo: float = 0.1
    hi: float = 0.9
    points: int = 9

    def delta_f_grid(self) -> np.ndarray:
        """Δ_F/g = 0 baseline followed by log-spaced points across the fit window."""
        return np.concatenate([[0.0], np.geomspace(self.lo, self.hi, self.points)])


@dataclass
class RunSection:
    output: str = OUTPUT_DIR
    workers: int | None = None
    check_convergence: bool = True
    convergence_rtol: float = 1e-3
    allow_large: bool = False


def _default_inputs(units: str) -> dict:
    if units == "khz":
        rates = {k: PLATFORM_KHZ[k] for k in ("g", "kappa", "gamma", "omega")}
    else:
        rates = {k: getattr(_DEFAULTS, k) for k in ("g", "kappa", "gamma", "omega")}
    return {
        **rates,
        "delta": 0.0,
        "delta_c": None,
        "delta_f": 0.0,
        "phi": 0.0,
        "n_trunc": _DEFAULTS.n_trunc,
        "lock_delta_c": _DEFAULTS.lock_delta_c,
        "fizeau_factor": _DEFAULTS.fizeau_factor,
        "fizeau_mode": _DEFAULTS.fizeau_mode,
    }


@dataclass
class RunConfig:
    """
    Parsed run configuration.

    `inputs` keeps the parameters in the declared units (δ may be a rule
    string); `params` / `base_params()` resolve them into units of g.
    """
    units: str = "dimensionless"
    inputs: dict = field(default_factory=lambda: _default_inputs("dimensionless"))
    sweep: list[tuple[str, GridSpec]] = field(default_factory=list)
    g2tau: G2TauConfig = field(default_factory=G2TauConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    run: RunSection = field(default_factory=RunSection)

    # ---- resolution ---------------------------------------------------
    @property
    def delta_rule(self) -> DeltaRule | None:
        delta = self.inputs["delta"]
        return DeltaRule.parse(delta) if isinstance(delta, str) else None

    def _scale(self) -> float:
        return 1.0 / self.inputs["g"] if self.units == "khz" else 1.0

    def base_params(self) -> SystemParams:
        """Parameters in units of g; a δ rule is left unresolved (δ = 0)."""
        values = dict(self.inputs)
        if isinstance(values["delta"], str):
            values["delta"] = 0.0
        rest = {k: values[k] for k in MODEL_KEYS}
        if self.units == "khz":
            return SystemParams.from_physical(
                g_khz=values["g"], kappa_khz=values["kappa"], gamma_khz=values["gamma"],
                omega_khz=values["omega"], delta_khz=values["delta"], delta_f_khz=values["delta_f"],
                delta_c_khz=values["delta_c"], **rest,
            )
        return SystemParams(
            g=values["g"], kappa=values["kappa"], gamma=values["gamma"], omega=values["omega"],
            delta=values["delta"], delta_c=values["delta_c"], delta_f=values["delta_f"], **rest,
        )

    @property
    def params(self) -> SystemParams:
        """Parameters at the configured point, δ rule applied."""
        base = self.base_params()
        rule = self.delta_rule
        return base if rule is None else base.replace(delta=rule(base))

    def sweep_axes(self) -> list[tuple[str, np.ndarray]]:
        """Sweep grids converted into units of g (φ stays in radians)."""
        axes = []
        for name, grid in self.sweep:
            values = grid.values()
            if name in RATE_KEYS:
                values = values * self._scale()
            axes.append((name, values))
        return axes

    def with_n_trunc(self, n_trunc: int) -> "RunConfig":
        return dataclasses.replace(self, inputs={**self.inputs, "n_trunc": int(n_trunc)})


# ───────────────────────────── PARSER ─────────────────────────────

def _split(lineno: int, line: str) -> tuple[str, str]:
    if "=" not in line:
        raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
    key, _, value = line.partition("=")
    key, value = key.strip().lower(), value.strip()
    if not key or not value:
        raise ConfigError(f"empty key or value in {line!r}", lineno)
    return key, value


def _strip_comment(line: str) -> str:
    """Drop a `;` or `#` comment that starts the line or follows whitespace."""
    return _COMMENT.sub("", line).strip()


def parse_config(text: str) -> RunConfig:
    """
    Parse run configuration text; every problem raises ConfigError with its line.

    Missing keys take their defaults, which `emit_config` then writes out
    explicitly.
    """
    entries: dict[str, list[tuple[int, str, str]]] = {s: [] for s in ("params", "sweep", "g2tau", "fit", "run")}
    section = "params"
    seen: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip().lower()
            if section not in entries:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        key, value = _split(lineno, line)
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        seen.add((section, key))
        entries[section].append((lineno, key, value))

    cfg = RunConfig()
    units_entry = next((e for e in entries["params"] if e[1] == "units"), None)
    if units_entry is not None:
        lineno, _, value = units_entry
        cfg.units = value.strip().lower()
        if cfg.units not in UNITS:
            raise ConfigError(f"units must be dimensionless or kHz, got {value!r}", lineno)
    cfg.inputs = _default_inputs(cfg.units)

    _parse_params(cfg, entries["params"])
    _parse_sweep(cfg, entries["sweep"])
    _parse_g2tau(cfg, entries["g2tau"])
    _parse_fit(cfg, entries["fit"])
    _parse_run(cfg, entries["run"])

    try:
        cfg.base_params()
        if cfg.delta_rule is not None and not cfg.sweep:
            _ = cfg.params
    except WGMError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"inconsistent [params]: {exc}") from exc
    return cfg


def _parse_params(cfg: RunConfig, entries: list) -> None:
    for lineno, key, value in entries:
        if key == "units":
            continue
        if key not in PARAM_KEYS:
            raise ConfigError(f"unknown key {key!r} in [params]", lineno)
        if key == "delta" and value.split(":")[0].strip().lower() in ("branch", "nonspin", "manifold"):
            cfg.inputs["delta"] = str(DeltaRule.parse(_with_line(value, lineno)))
        elif key == "n_trunc":
            cfg.inputs[key] = parse_int(value, lineno)
        elif key == "lock_delta_c":
            cfg.inputs[key] = parse_bool(value, lineno)
        elif key == "fizeau_mode":
            if value.lower() not in FIZEAU_MODES:
                raise ConfigError(f"fizeau_mode must be cw or ccw, got {value!r}", lineno)
            cfg.inputs[key] = value.lower()
        elif key in ("phi", "fizeau_factor"):
            cfg.inputs[key] = parse_scalar(value, lineno)
        else:
            cfg.inputs[key] = parse_scalar(value, lineno, cfg.units)
    if cfg.inputs["lock_delta_c"] and cfg.inputs["delta_c"] is not None:
        lineno = next(e[0] for e in entries if e[1] == "delta_c")
        raise ConfigError("delta_c is fixed to 2*delta while lock_delta_c is on", lineno)


def _with_line(value: str, lineno: int) -> str:
    try:
        DeltaRule.parse(value)
    except ConfigError as exc:
        raise ConfigError(str(exc), lineno) from None
    return value


def _parse_sweep(cfg: RunConfig, entries: list) -> None:
    for lineno, key, value in entries:
        if key not in SWEEP_KEYS:
            raise ConfigError(f"cannot sweep {key!r}; choose from {', '.join(SWEEP_KEYS)}", lineno)
        if key == "delta" and cfg.delta_rule is not None:
            raise ConfigError("delta is both a sweep axis and a rule in [params]", lineno)
        units = cfg.units if key in RATE_KEYS else "dimensionless"
        grid = parse_grid(value, lineno, units)
        if np.unique(grid.values()).size != grid.values().size:
            raise ConfigError(f"grid for {key!r} has duplicate values", lineno)
        cfg.sweep.append((key, grid))


def _parse_g2tau(cfg: RunConfig, entries: list) -> None:
    for lineno, key, value in entries:
        if key == "mode":
            try:
                cfg.g2tau.mode = ModeSelector.parse(value).value
            except WGMError as exc:
                raise ConfigError(str(exc), lineno) from None
        elif key == "n_points":
            cfg.g2tau.n_points = parse_int(value, lineno)
            if cfg.g2tau.n_points < 3:
                raise ConfigError("n_points must be >= 3", lineno)
        elif key == "tau_max":
            cfg.g2tau.tau_max = parse_scalar(value, lineno)
            if cfg.g2tau.tau_max <= 0:
                raise ConfigError("tau_max must be > 0", lineno)
        else:
            raise ConfigError(f"unknown key {key!r} in [g2tau]", lineno)


def _parse_fit(cfg: RunConfig, entries: list) -> None:
    for lineno, key, value in entries:
        if key == "range":
            bounds = [parse_scalar(s, lineno) for s in value.split(",")]
            if len(bounds) != 2 or not 0 < bounds[0] < bounds[1]:
                raise ConfigError(f"fit range must be 'lo, hi' with 0 < lo < hi, got {value!r}", lineno)
            cfg.fit.lo, cfg.fit.hi = bounds
        elif key == "points":
            cfg.fit.points = parse_int(value, lineno)
            if cfg.fit.points < 5:
                raise ConfigError("a power-law fit needs at least 5 points", lineno)
        else:
            raise ConfigError(f"unknown key {key!r} in [fit]", lineno)


def _parse_run(cfg: RunConfig, entries: list) -> None:
    for lineno, key, value in entries:
        if key == "output":
            cfg.run.output = value
        elif key == "workers":
            if value.lower() == "auto":
                cfg.run.workers = None
            else:
                cfg.run.workers = parse_int(value, lineno)
                if cfg.run.workers < 1:
                    raise ConfigError("workers must be >= 1 or auto", lineno)
        elif key == "check_convergence":
            cfg.run.check_convergence = parse_bool(value, lineno)
        elif key == "convergence_rtol":
            cfg.run.convergence_rtol = parse_scalar(value, lineno)
            if cfg.run.convergence_rtol <= 0:
                raise ConfigError("convergence_rtol must be > 0", lineno)
        elif key == "allow_large":
            cfg.run.allow_large = parse_bool(value, lineno)
        else:
            raise ConfigError(f"unknown key {key!r} in [run]", lineno)


# ───────────────────────────── EMITTER ─────────────────────────────

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(cfg: RunConfig, environment: bool = True) -> str:
    """
    Every resolved setting as config text, defaults included.

    `environment=False` leaves out the [run] keys that cannot change results
    (output, workers, allow_large); output headers use that form.
    """
    lines = ["[params]", f"units = {'kHz' if cfg.units == 'khz' else 'dimensionless'}"]
    for key in PARAM_KEYS[1:]:
        value = cfg.inputs.get(key)
        if value is None:
            continue
        lines.append(f"{key} = {_fmt(value)}")
    if cfg.sweep:
        lines += ["", "[sweep]"] + [f"{name} = {grid}" for name, grid in cfg.sweep]
    lines += [
        "", "[g2tau]",
        f"mode = {cfg.g2tau.mode}",
        f"n_points = {cfg.g2tau.n_points}",
        f"tau_max = {_fmt(float(cfg.g2tau.tau_max))}",
        "", "[fit]",
        f"range = {_fmt(float(cfg.fit.lo))}, {_fmt(float(cfg.fit.hi))}",
        f"points = {cfg.fit.points}",
        "", "[run]",
    ]
    if environment:
        lines += [f"output = {cfg.run.output}",
                  f"workers = {'auto' if cfg.run.workers is None else cfg.run.workers}"]
    lines += [
        f"check_convergence = {_fmt(cfg.run.check_convergence)}",
        f"convergence_rtol = {_fmt(float(cfg.run.convergence_rtol))}",
    ]
    if environment:
        lines.append(f"allow_large = {_fmt(cfg.run.allow_large)}")
    return "\n".join(lines) + "\n"
