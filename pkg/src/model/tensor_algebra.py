"""
Operator algebra over the composite space of two qubits and two truncated
bosonic modes.

Conventions (fixed, everything downstream relies on them)
-----------
* Slot order: 0 = atom 1, 1 = atom 2, 2 = CW mode, 3 = CCW mode.
* Qubit basis order is (|e>, |g>), so sigma_z |e> = +|e>.
* Vectorization stacks columns: vec(A rho B) = (B^T kron A) vec(rho).
* Operators with fewer than 10 % nonzero entries are stored as CSR,
  everything else as a dense ndarray.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from src.utils.errors import DimensionError, UsageError

ATOM_1, ATOM_2, CW, CCW = 0, 1, 2, 3
SLOT_NAMES = ("atom_1", "atom_2", "cw", "ccw")
SPARSE_DENSITY = 0.10

_ATOM_LEVELS = {"e": 0, "g": 1}


# ───────────────────────────── LAYOUT ─────────────────────────────

@dataclass(frozen=True)
class SpaceLayout:
    """Ordered local dimensions of a tensor-product space."""
    subsystem_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.subsystem_dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"invalid subsystem dimensions {self.subsystem_dims!r}")
        object.__setattr__(self, "subsystem_dims", dims)

    @classmethod
    def cavity(cls, n_trunc: int) -> "SpaceLayout":
        """Layout [2, 2, N+1, N+1] for (atom 1, atom 2, CW, CCW)."""
        if n_trunc < 0:
            raise DimensionError(f"photon truncation must be >= 0, got {n_trunc}")
        return cls((2, 2, n_trunc + 1, n_trunc + 1))

    @classmethod
    def local(cls, dim: int) -> "SpaceLayout":
        return cls((dim,))

    @property
    def dim(self) -> int:
        return int(np.prod(self.subsystem_dims))

    @property
    def n_trunc(self) -> int | None:
        if len(self.subsystem_dims) != 4:
            return None
        return self.subsystem_dims[CW] - 1

    @property
    def liouville_rows(self) -> int:
        return self.dim ** 2

    def check_slot(self, slot: int) -> int:
        if not 0 <= slot < len(self.subsystem_dims):
            raise UsageError(f"slot {slot} out of range for layout {self.subsystem_dims}")
        return slot


# ───────────────────────────── STORAGE ─────────────────────────────

def _store(matrix) -> np.ndarray | sp.csr_matrix:
    """Pick sparse or dense storage by fill ratio."""
    n_entries = matrix.shape[0] * matrix.shape[1]
    if sp.issparse(matrix):
        matrix = matrix.tocsr()
        matrix.eliminate_zeros()
        if n_entries and matrix.nnz / n_entries >= SPARSE_DENSITY:
            return np.asarray(matrix.toarray(), dtype=complex)
        return matrix.astype(complex)
    dense = np.array(matrix, dtype=complex)
    if n_entries and np.count_nonzero(dense) / n_entries < SPARSE_DENSITY:
        return sp.csr_matrix(dense)
    return dense


def _as_sparse(matrix) -> sp.csr_matrix:
    return matrix if sp.issparse(matrix) else sp.csr_matrix(matrix)


# ───────────────────────────── OPERATOR ─────────────────────────────

@dataclass(frozen=True, eq=False)
class Operator:
    """Complex matrix over a layout. Values are never mutated after construction."""
    layout: SpaceLayout
    data: np.ndarray | sp.csr_matrix

    def __post_init__(self):
        D = self.layout.dim
        if self.data.shape != (D, D):
            raise DimensionError(f"matrix shape {self.data.shape} does not match layout dimension {D}")
        data = _store(self.data)
        if isinstance(data, np.ndarray):
            data.setflags(write=False)
        object.__setattr__(self, "data", data)

    # ---- structure ----------------------------------------------------
    @property
    def issparse(self) -> bool:
        return sp.issparse(self.data)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def to_dense(self) -> np.ndarray:
        return self.data.toarray() if self.issparse else np.array(self.data)

    def to_sparse(self) -> sp.csr_matrix:
        return _as_sparse(self.data).astype(complex)

    # ---- algebra ------------------------------------------------------
    def dag(self) -> "Operator":
        return Operator(self.layout, self.data.conj().T)

    def _check_same(self, other: "Operator") -> None:
        if self.layout != other.layout:
            raise DimensionError(f"layout mismatch {self.layout.subsystem_dims} vs {other.layout.subsystem_dims}")

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_same(other)
        return Operator(self.layout, self.data @ other.data)

    def __add__(self, other: "Operator") -> "Operator":
        self._check_same(other)
        if self.issparse and other.issparse:
            return Operator(self.layout, self.data + other.data)
        return Operator(self.layout, self.to_dense() + other.to_dense())

    def __sub__(self, other: "Operator") -> "Operator":
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> "Operator":
        if isinstance(scalar, Operator):
            raise TypeError("use @ for operator products")
        return Operator(self.layout, self.data * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return (-1.0) * self

    def power(self, k: int) -> "Operator":
        if k < 0:
            raise UsageError("negative operator power")
        result = identity_like(self.layout)
        for _ in range(k):
            result = result @ self
        return result

    def trace(self) -> complex:
        return complex(self.data.diagonal().sum())

    def expect(self, rho: "DensityMatrix") -> complex:
        """Tr[op rho]."""
        if rho.layout != self.layout:
            raise DimensionError("operator and state live on different layouts")
        # Tr[A rho] = sum_ij A_ij rho_ji
        if self.issparse:
            coo = self.data.tocoo()
            return complex(np.sum(coo.data * rho.data[coo.col, coo.row]))
        return complex(np.sum(self.data * rho.data.T))

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        scale = max(_max_abs(self.data), 1.0)
        return _max_abs(self.data - self.data.conj().T) <= rtol * scale


def _max_abs(matrix) -> float:
    if sp.issparse(matrix):
        return float(abs(matrix).max()) if matrix.nnz else 0.0
    return float(np.max(np.abs(matrix))) if matrix.size else 0.0


def identity_like(layout: SpaceLayout) -> Operator:
    return Operator(layout, sp.identity(layout.dim, dtype=complex, format="csr"))


# ───────────────────────────── DENSITY MATRIX ─────────────────────────────

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite state (checked by `validate`)."""
    layout: SpaceLayout
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        D = self.layout.dim
        if data.shape != (D, D):
            raise DimensionError(f"state shape {data.shape} does not match layout dimension {D}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_pure(cls, layout: SpaceLayout, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(layout, np.outer(psi, psi.conj()))

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def validate(self, herm_tol: float = 1e-10, trace_tol: float = 1e-10,
                 eig_floor: float = -1e-8) -> "DensityMatrix":
        herm = self.hermiticity_error()
        if herm > herm_tol:
            raise UsageError(f"state not Hermitian (max deviation {herm:.3e})")
        tr = self.trace()
        if abs(tr - 1.0) > trace_tol:
            raise UsageError(f"state trace {tr.real:.12g} differs from 1")
        lam = self.min_eigenvalue()
        if lam < eig_floor:
            raise UsageError(f"state not positive (min eigenvalue {lam:.3e})")
        return self


# ───────────────────────────── LOCAL OPERATORS ─────────────────────────────

def annihilation(local_dim: int) -> Operator:
    """Fock lowering operator, <q-1|a|q> = sqrt(q)."""
    if local_dim < 2:
        raise DimensionError(f"annihilation operator needs local_dim >= 2, got {local_dim}")
    diag = np.sqrt(np.arange(1, local_dim, dtype=float))
    return Operator(SpaceLayout.local(local_dim), sp.diags(diag, offsets=1, format="csr"))


def number(local_dim: int) -> Operator:
    return Operator(SpaceLayout.local(local_dim),
                    sp.diags(np.arange(local_dim, dtype=float), format="csr"))


def identity(local_dim: int) -> Operator:
    return identity_like(SpaceLayout.local(local_dim))


_PAULI = {
    "x":     np.array([[0, 1], [1, 0]], dtype=complex),
    "y":     np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z":     np.array([[1, 0], [0, -1]], dtype=complex),
    "plus":  np.array([[0, 1], [0, 0]], dtype=complex),
    "minus": np.array([[0, 0], [1, 0]], dtype=complex),
}


def pauli(which: str) -> Operator:
    """Pauli or ladder matrix in the (|e>, |g>) basis; plus = |e><g|."""
    try:
        matrix = _PAULI[which]
    except KeyError:
        raise UsageError(f"unknown Pauli operator {which!r}; expected one of {sorted(_PAULI)}") from None
    return Operator(SpaceLayout.local(2), matrix)


# ───────────────────────────── EMBEDDING / PRODUCTS ─────────────────────────────

def embed(local_op: Operator, slot: int, layout: SpaceLayout) -> Operator:
    """I ⊗ ... ⊗ local_op ⊗ ... ⊗ I with local_op in `slot`."""
    layout.check_slot(slot)
    local_dim = layout.subsystem_dims[slot]
    if local_op.dim != local_dim:
        raise DimensionError(f"local operator has dimension {local_op.dim}, slot {slot} expects {local_dim}")
    factors = [
        local_op.to_sparse() if i == slot else sp.identity(d, dtype=complex, format="csr")
        for i, d in enumerate(layout.subsystem_dims)
    ]
    return Operator(layout, reduce(lambda a, b: sp.kron(a, b, format="csr"), factors))


def tensor(*local_ops: Operator) -> Operator:
    """Kronecker product of single-slot operators, in argument order."""
    if not local_ops:
        raise UsageError("tensor() needs at least one operator")
    layout = SpaceLayout(tuple(op.dim for op in local_ops))
    data = reduce(lambda a, b: sp.kron(a, b, format="csr"), (op.to_sparse() for op in local_ops))
    return Operator(layout, data)


@lru_cache(maxsize=256)
def embedded_lowering(layout: SpaceLayout, slot: int) -> Operator:
    """Lowering operator of `slot` on the full space: a for modes, sigma^- for atoms."""
    layout.check_slot(slot)
    local = pauli("minus") if slot in (ATOM_1, ATOM_2) else annihilation(layout.subsystem_dims[slot])
    return embed(local, slot, layout)


@lru_cache(maxsize=256)
def embedded_pauli(layout: SpaceLayout, which: str, slot: int) -> Operator:
    return embed(pauli(which), slot, layout)


# ───────────────────────────── PARTIAL TRACE ─────────────────────────────

def partial_trace(rho: DensityMatrix, keep_slot: int) -> DensityMatrix:
    """Reduced state of one subsystem; every other slot is traced out."""
    layout = rho.layout
    layout.check_slot(keep_slot)
    dims = layout.subsystem_dims
    n = len(dims)
    tensor_rho = rho.data.reshape(dims + dims)
    # bra/ket letters shared on traced slots, distinct on the kept one
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = list(letters[:n])
    bra = list(letters[:n])
    bra[keep_slot] = letters[n]
    subscripts = "".join(ket) + "".join(bra) + "->" + ket[keep_slot] + bra[keep_slot]
    reduced = np.einsum(subscripts, tensor_rho)
    return DensityMatrix(SpaceLayout.local(dims[keep_slot]), reduced)


# ───────────────────────────── VECTORIZATION ─────────────────────────────

def _matrix_of(x) -> np.ndarray:
    if isinstance(x, (Operator, DensityMatrix)):
        return x.to_dense() if isinstance(x, Operator) else np.asarray(x.data)
    if sp.issparse(x):
        return x.toarray()
    return np.asarray(x)


def vectorize(rho) -> np.ndarray:
    """Column-stacked vector of length D², vec index of (r, c) is c*D + r."""
    matrix = _matrix_of(rho)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"cannot vectorize array of shape {matrix.shape}")
    return np.asarray(matrix, dtype=complex).reshape(-1, order="F")


def unvectorize(vec: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of `vectorize`."""
    vec = np.asarray(vec)
    if vec.ndim != 1:
        raise DimensionError(f"expected a flat vector, got shape {vec.shape}")
    D = int(round(np.sqrt(vec.size))) if dim is None else int(dim)
    if D * D != vec.size:
        raise DimensionError(f"vector of length {vec.size} is not a vectorized {D}x{D} matrix")
    return vec.reshape((D, D), order="F")


def trace_functional(dim: int) -> np.ndarray:
    """Row vector t with t @ vec(X) = Tr X."""
    return vectorize(np.eye(dim))


# ───────────────────────────── BASIS HELPERS ─────────────────────────────

def basis_index(layout: SpaceLayout, occupation: Sequence) -> int:
    """
    Flat index of a product basis state.

    Atom slots accept 'e'/'g' (or raw level indices), mode slots photon numbers,
    e.g. basis_index(layout, ('g', 'g', 1, 0)).
    """
    if len(occupation) != len(layout.subsystem_dims):
        raise DimensionError(f"occupation {occupation!r} does not match layout {layout.subsystem_dims}")
    levels = [_ATOM_LEVELS[x] if isinstance(x, str) else int(x) for x in occupation]
    for level, d in zip(levels, layout.subsystem_dims):
        if not 0 <= level < d:
            raise DimensionError(f"level {level} outside local dimension {d}")
    return int(np.ravel_multi_index(levels, layout.subsystem_dims))


def basis_state(layout: SpaceLayout, occupation: Sequence) -> np.ndarray:
    psi = np.zeros(layout.dim, dtype=complex)
    psi[basis_index(layout, occupation)] = 1.0
    return psi


def mode_swap_permutation(layout: SpaceLayout) -> sp.csr_matrix:
    """Permutation P exchanging the CW and CCW slots: (P psi)[.., m, n] = psi[.., n, m]."""
    dims = layout.subsystem_dims
    if len(dims) != 4 or dims[CW] != dims[CCW]:
        raise DimensionError(f"mode swap needs a cavity layout, got {dims}")
    D = layout.dim
    perm = np.arange(D).reshape(dims).transpose(0, 1, 3, 2).ravel()
    return sp.csr_matrix((np.ones(D), (np.arange(D), perm)), shape=(D, D))


def coherent_state(alpha: complex, local_dim: int) -> DensityMatrix:
    """Truncated, renormalized coherent state |alpha><alpha| on one mode."""
    q = np.arange(local_dim)
    log_fact = np.cumsum(np.log(np.maximum(q, 1)))
    amps = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * log_fact) * np.power(complex(alpha), q)
    return DensityMatrix.from_pure(SpaceLayout.local(local_dim), amps)
