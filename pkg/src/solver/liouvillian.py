"""
Lindblad generator as a sparse superoperator, steady-state solve and
time propagation of arbitrary operators (for regression correlators).

Superoperators act on column-stacked density matrices (see
`src.model.tensor_algebra.vectorize`):

    L = -i (I⊗H - Hᵀ⊗I) + Σ_k r_k [ ō_k⊗o_k - ½ (I⊗o_k†o_k + (o_k†o_k)ᵀ⊗I) ]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import splu

from src.model.hamiltonian import Channel, ModelRealization, SystemParams, check_capacity, realize
from src.model.tensor_algebra import (
    DensityMatrix, Operator, SpaceLayout,
    trace_functional, unvectorize, vectorize,
)
from src.utils.errors import (
    NonConvergenceError, SingularSystemError, StiffnessError, UsageError,
)
from src.utils.logger import get_logger

log = get_logger(__name__)

DENSE_ORACLE_MAX_DIM = 64
RTOL = 1e-8
ATOL = 1e-12


# ───────────────────────────── TYPES ─────────────────────────────

@dataclass(frozen=True, eq=False)
class Superoperator:
    """Sparse D²×D² generator. `cavity_decay` (κ) fixes the unit of correlation delays."""
    layout: SpaceLayout
    matrix: sp.csr_matrix
    cavity_decay: float | None = None
    dissipative: bool = True

    def apply(self, x) -> np.ndarray:
        return unvectorize(self.matrix @ vectorize(x), self.layout.dim)


@dataclass(frozen=True)
class SteadyStateResult:
    rho: DensityMatrix
    residual: float
    truncation_used: int | None
    converged: bool
    hermitian_correction: float = 0.0


# ───────────────────────────── ASSEMBLY ─────────────────────────────

def assemble(hamiltonian: Operator, channels: Iterable[Channel | tuple],
             cavity_decay: float | None = None, allow_large: bool = False) -> Superoperator:
    """Liouvillian from a Hamiltonian and (operator, rate[, label]) channels."""
    layout = hamiltonian.layout
    check_capacity(layout, allow_large=allow_large)
    D = layout.dim
    eye = sp.identity(D, dtype=complex, format="csr")
    H = hamiltonian.to_sparse()

    L = -1j * (sp.kron(eye, H, format="csr") - sp.kron(H.T, eye, format="csr"))
    dissipative = False
    for channel in channels:
        op, rate = channel[0], float(channel[1])
        if rate < 0:
            raise UsageError(f"negative decay rate {rate}")
        if rate == 0.0:
            continue
        dissipative = True
        o = op.to_sparse()
        odo = (o.conj().T @ o).tocsr()
        L = L + rate * (sp.kron(o.conj(), o, format="csr")
                        - 0.5 * (sp.kron(eye, odo, format="csr") + sp.kron(odo.T, eye, format="csr")))
    L = L.tocsr()
    L.eliminate_zeros()
    return Superoperator(layout, L, cavity_decay=cavity_decay, dissipative=dissipative)


def build_liouvillian(m: ModelRealization, allow_large: bool = False) -> Superoperator:
    return assemble(m.hamiltonian, m.collapse_ops, cavity_decay=m.params.kappa, allow_large=allow_large)


# ───────────────────────────── STEADY STATE ─────────────────────────────

def _finish(L: Superoperator, x: np.ndarray, residual_tol: float | None) -> SteadyStateResult:
    D = L.layout.dim
    rho = unvectorize(x, D)
    herm = 0.5 * (rho + rho.conj().T)
    correction = float(np.max(np.abs(rho - herm)))
    herm = herm / np.trace(herm).real
    residual = float(np.linalg.norm(L.matrix @ vectorize(herm)))
    tol = 1e-10 * D if residual_tol is None else residual_tol
    log.debug("steady state D=%d residual=%.3e hermitian correction=%.3e", D, residual, correction)
    if residual > tol:
        raise NonConvergenceError(f"steady-state residual {residual:.3e} exceeds {tol:.3e}", residual=residual)
    state = DensityMatrix(L.layout, herm)
    try:
        state.validate()
    except UsageError as exc:
        raise NonConvergenceError(f"steady state is not a valid density matrix: {exc}", residual=residual) from exc
    return SteadyStateResult(
        rho=state,
        residual=residual,
        truncation_used=L.layout.n_trunc,
        converged=True,
        hermitian_correction=correction,
    )


def steady_state(L: Superoperator, residual_tol: float | None = None) -> SteadyStateResult:
    """
    Unique ρ with L vec(ρ) = 0 and Tr ρ = 1.

    The ρ_00 row of L is replaced by the trace functional and the resulting
    system is solved by sparse LU factorization.
    """
    if not L.dissipative:
        raise SingularSystemError("all decay rates are zero; the steady state is not unique")
    D = L.layout.dim
    n = D * D
    keep = np.ones(n)
    keep[0] = 0.0
    trace_row = sp.csr_matrix(
        (np.ones(D, dtype=complex), (np.zeros(D, dtype=int), np.arange(D) * (D + 1))),
        shape=(n, n),
    )
    A = (sp.diags(keep) @ L.matrix + trace_row).tocsc()
    b = np.zeros(n, dtype=complex)
    b[0] = 1.0
    try:
        x = splu(A, permc_spec="COLAMD").solve(b)
    except RuntimeError as exc:
        raise SingularSystemError(f"steady-state system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("steady-state solve produced non-finite entries")
    return _finish(L, x, residual_tol)


def solve_model(p: SystemParams, allow_large: bool = False) -> tuple[Superoperator, SteadyStateResult]:
    """realize → build_liouvillian → steady_state."""
    L = build_liouvillian(realize(p, allow_large=allow_large), allow_large=allow_large)
    return L, steady_state(L)


# ───────────────────────────── PROPAGATION ─────────────────────────────

def _integrate(L: Superoperator, y0: np.ndarray, times: np.ndarray):
    matrix = L.matrix

    def rhs(_t, y):
        return matrix @ y

    sol = solve_ivp(rhs, (0.0, float(times[-1])), y0, method="RK45",
                    t_eval=times, rtol=RTOL, atol=ATOL)
    if sol.status < 0:
        raise StiffnessError(
            f"integration failed at t={sol.t[-1] if sol.t.size else 0.0:.4g}: {sol.message}; "
            "lower n_trunc or use the dense exponential path"
        )
    return sol.y


def propagate(L: Superoperator, X: Operator | np.ndarray, tau: float) -> Operator:
    """unvectorize(e^{Lτ} vec(X)); X need not be a normalized state."""
    if tau < 0:
        raise UsageError(f"tau must be >= 0, got {tau}")
    X = X if isinstance(X, Operator) else Operator(L.layout, np.asarray(X))
    if tau == 0:
        return X
    y = _integrate(L, vectorize(X), np.array([float(tau)]))
    return Operator(L.layout, unvectorize(y[:, -1], L.layout.dim))


def propagate_series(L: Superoperator, X: Operator | np.ndarray, times: Sequence[float],
                     measure: np.ndarray | None = None) -> np.ndarray:
    """
    Propagate X along an ascending, non-negative time grid in one pass.

    Returns the stacked matrices (len(times), D, D), or Tr[M X(t)] per time
    when a measurement matrix M is given.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise UsageError("time grid must be a non-empty 1-D sequence")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise UsageError("time grid must be non-negative and strictly ascending")
    x0 = X.to_dense() if isinstance(X, Operator) else np.asarray(X, dtype=complex)
    y0 = vectorize(x0)
    if times[-1] == 0.0:
        ys = y0[:, None]
    else:
        ys = _integrate(L, y0, times)
        # solve_ivp reports the initial value exactly at t=0
        if times[0] == 0.0:
            ys[:, 0] = y0
    if measure is not None:
        # Tr[M X] = vec(Mᵀ) · vec(X)
        return vectorize(np.asarray(measure).T) @ ys
    D = L.layout.dim
    return np.stack([unvectorize(ys[:, k], D) for k in range(ys.shape[1])])


# ───────────────────────────── DENSE ORACLE ─────────────────────────────

def _dense(L: Superoperator) -> np.ndarray:
    if L.layout.dim > DENSE_ORACLE_MAX_DIM:
        raise UsageError(f"dense path limited to D <= {DENSE_ORACLE_MAX_DIM}, got D={L.layout.dim}")
    return L.matrix.toarray()


def steady_state_dense(L: Superoperator) -> SteadyStateResult:
    """Brute-force steady state: null space of the dense Liouvillian via full SVD."""
    M = _dense(L)
    kernel = la.null_space(M, rcond=1e-10)
    if kernel.shape[1] != 1:
        raise SingularSystemError(f"Liouvillian kernel has dimension {kernel.shape[1]}")
    x = kernel[:, 0]
    return _finish(L, x / (trace_functional(L.layout.dim) @ x), residual_tol=None)


def propagate_dense(L: Superoperator, X: Operator | np.ndarray, tau: float) -> Operator:
    """e^{Lτ} by scaling and squaring on the dense matrix."""
    M = _dense(L)
    X = X if isinstance(X, Operator) else Operator(L.layout, np.asarray(X))
    y = la.expm(M * float(tau)) @ vectorize(X)
    return Operator(L.layout, unvectorize(y, L.layout.dim))


def kernel_diagnostics(L: Superoperator) -> tuple[float, float] | None:
    """Two smallest singular values of L (dense path only); None when L is too large."""
    if L.layout.dim > DENSE_ORACLE_MAX_DIM:
        log.debug("kernel diagnostics skipped for D=%d", L.layout.dim)
        return None
    s = la.svdvals(_dense(L))
    smallest, second = float(s[-1]), float(s[-2])
    log.debug("Liouvillian singular values: smallest=%.3e second=%.3e", smallest, second)
    return smallest, second
