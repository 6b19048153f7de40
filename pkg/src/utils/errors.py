"""
Exception hierarchy and the CLI exit codes attached to it.
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CAPACITY = 4


class WGMError(Exception):
    """Root of every error raised by the simulator."""
    exit_code = EXIT_SOLVER


# ───────────────────────────── CONFIG / USAGE ─────────────────────────────

class ConfigError(WGMError):
    """Bad run configuration; `line` is 1-based when known."""
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class UsageError(WGMError, ValueError):
    exit_code = EXIT_CONFIG


class DimensionError(UsageError):
    pass


class CapacityError(WGMError, MemoryError):
    exit_code = EXIT_CAPACITY


# ───────────────────────────── SOLVERS ─────────────────────────────

class SolverError(WGMError, RuntimeError):
    exit_code = EXIT_SOLVER


class SingularSystemError(SolverError):
    pass


class NonConvergenceError(SolverError):
    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


class StiffnessError(SolverError):
    pass


class NoPeakError(SolverError):
    pass


# ───────────────────────────── STATISTICS / FITS ─────────────────────────────

class UndefinedStatisticsError(WGMError, ValueError):
    """Ratio denominator below the underflow floor."""
    exit_code = EXIT_SOLVER


class FitError(WGMError, ValueError):
    exit_code = EXIT_SOLVER


class FitSignError(FitError):
    pass


class FitDomainError(FitError):
    pass


class UnconvergedRowsError(FitError):
    pass
