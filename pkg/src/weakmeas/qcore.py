"""Finite-dimensional states, Hermitian observables, projectors and spin
operators.

Everything here is immutable once built: arrays are stored read-only and
all operations return new objects.  Basis ordering for spin matrices is
``m = +j, j-1, ..., -j`` and ``hbar = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .config import DEFAULTS
from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidAxis,
    InvalidSpin,
    NotHermitian,
    ZeroVector,
)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """A unit-norm ket over a finite basis.

    Build through :func:`make_state`; the constructor assumes the
    amplitudes are already normalized.
    """

    amplitudes: np.ndarray

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)

    def __len__(self) -> int:
        return self.dimension

    def __repr__(self) -> str:
        return f"StateVector({np.array2string(self.amplitudes, precision=6)})"


def make_state(amplitudes: Iterable[complex]) -> StateVector:
    """Normalize ``amplitudes`` to a unit vector.

    Raises
    ------
    ZeroVector
        If every amplitude is zero.
    """
    vec = np.asarray(list(amplitudes) if not isinstance(amplitudes, np.ndarray)
                     else amplitudes, dtype=complex).ravel()
    if vec.size == 0:
        raise ZeroVector("a state needs at least one amplitude")
    norm = np.linalg.norm(vec)
    if not np.isfinite(norm) or norm == 0.0:
        raise ZeroVector("cannot normalize the zero vector")
    return StateVector(_frozen(vec / norm))


def basis_state(index: int, dimension: int) -> StateVector:
    if not 0 <= index < dimension:
        raise IndexOutOfRange(f"basis index {index} outside dimension {dimension}")
    vec = np.zeros(dimension, dtype=complex)
    vec[index] = 1.0
    return StateVector(_frozen(vec))


def inner(bra: StateVector, ket: StateVector) -> complex:
    """Return <bra|ket>, conjugating the first argument."""
    if bra.dimension != ket.dimension:
        raise DimensionMismatch(
            f"inner product of dimensions {bra.dimension} and {ket.dimension}"
        )
    return complex(np.vdot(bra.amplitudes, ket.amplitudes))


def _group_eigenvalues(values: np.ndarray, rtol: float) -> tuple[tuple[int, ...], ...]:
    groups: list[list[int]] = [[0]]
    for k in range(1, len(values)):
        prev = values[groups[-1][-1]]
        scale = max(1.0, abs(prev), abs(values[k]))
        if abs(values[k] - prev) < rtol * scale:
            groups[-1].append(k)
        else:
            groups.append([k])
    return tuple(tuple(g) for g in groups)


class Observable:
    """Hermitian matrix together with its spectral decomposition.

    Attributes
    ----------
    matrix : ndarray
        The (symmetrized) Hermitian matrix.
    eigenvalues : ndarray
        Real eigenvalues in ascending order.
    eigvecs : ndarray
        Orthonormal eigenvectors as columns, matching ``eigenvalues``.
    eigengroups : tuple of tuple of int
        Partition of eigenvalue indices into degenerate groups.
    group_values : ndarray
        One representative eigenvalue per group (the group mean).
    group_projectors : tuple of ndarray
        Orthogonal projector onto each eigenspace.
    """

    __slots__ = (
        "matrix",
        "eigenvalues",
        "eigvecs",
        "eigengroups",
        "group_values",
        "group_projectors",
    )

    def __init__(self, matrix, *, tol=DEFAULTS):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise DimensionMismatch(f"observable matrix must be square, got {m.shape}")
        skew = np.max(np.abs(m - m.conj().T))
        if skew > tol.hermitian:
            raise NotHermitian(f"max |M - M^H| = {skew:.3e} exceeds {tol.hermitian:.1e}")
        m = 0.5 * (m + m.conj().T)
        # LAPACK heevd returns an orthonormal basis even inside degenerate blocks
        values, vecs = np.linalg.eigh(m)
        groups = _group_eigenvalues(values, tol.degeneracy)
        group_values = np.array([values[list(g)].mean() for g in groups])
        projectors = []
        for g in groups:
            v = vecs[:, list(g)]
            projectors.append(_frozen(v @ v.conj().T))

        set_ = object.__setattr__
        set_(self, "matrix", _frozen(m))
        values = np.array(values, dtype=float)
        values.setflags(write=False)
        set_(self, "eigenvalues", values)
        set_(self, "eigvecs", _frozen(vecs))
        set_(self, "eigengroups", groups)
        group_values.setflags(write=False)
        set_(self, "group_values", group_values)
        set_(self, "group_projectors", tuple(projectors))

    def __setattr__(self, name, value):
        raise AttributeError("Observable is immutable")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvectors(self) -> tuple[StateVector, ...]:
        return tuple(StateVector(_frozen(self.eigvecs[:, k])) for k in range(self.dimension))

    def expectation(self, psi: StateVector) -> float:
        _check_dim(self, psi)
        return float(np.real(np.vdot(psi.amplitudes, self.matrix @ psi.amplitudes)))

    def group_weights(self, psi: StateVector) -> np.ndarray:
        """Born weight ``||P_g psi||^2`` of ``psi`` in each eigenspace."""
        _check_dim(self, psi)
        coeffs = self.eigvecs.conj().T @ psi.amplitudes
        probs = np.abs(coeffs) ** 2
        return np.array([probs[list(g)].sum() for g in self.eigengroups])

    def commutes_with(self, other: Observable, atol: float = 1e-10) -> bool:
        comm = self.matrix @ other.matrix - other.matrix @ self.matrix
        return bool(np.max(np.abs(comm)) <= atol)

    def __add__(self, other: Observable) -> Observable:
        return Observable(self.matrix + _matrix_of(other, self))

    def __sub__(self, other: Observable) -> Observable:
        return Observable(self.matrix - _matrix_of(other, self))

    def __neg__(self) -> Observable:
        return Observable(-self.matrix)

    def __mul__(self, scalar: float) -> Observable:
        if isinstance(scalar, Observable):
            return NotImplemented
        return Observable(float(scalar) * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other: Observable) -> Observable:
        """Operator product; only Hermitian when the factors commute."""
        return Observable(self.matrix @ _matrix_of(other, self))

    def __repr__(self) -> str:
        return f"Observable(dim={self.dimension}, spectrum={np.round(self.group_values, 10)})"


def _matrix_of(other, like: Observable) -> np.ndarray:
    if not isinstance(other, Observable):
        raise TypeError(f"expected an Observable, got {type(other).__name__}")
    if other.dimension != like.dimension:
        raise DimensionMismatch(f"dimensions {like.dimension} and {other.dimension}")
    return other.matrix


def _check_dim(obs: Observable, psi: StateVector) -> None:
    if obs.dimension != psi.dimension:
        raise DimensionMismatch(
            f"observable of dimension {obs.dimension} with state of dimension {psi.dimension}"
        )


def make_observable(matrix) -> Observable:
    return Observable(matrix)


def identity(dimension: int) -> Observable:
    return Observable(np.eye(dimension))


def zero_operator(dimension: int) -> Observable:
    return Observable(np.zeros((dimension, dimension)))


def projector(basis_indices: Iterable[int], dimension: int) -> Observable:
    """Projector onto the span of the given computational basis states."""
    idx = sorted(set(int(i) for i in basis_indices))
    for i in idx:
        if not 0 <= i < dimension:
            raise IndexOutOfRange(f"basis index {i} outside dimension {dimension}")
    diag = np.zeros(dimension)
    diag[idx] = 1.0
    return Observable(np.diag(diag))


def state_projector(psi: StateVector) -> Observable:
    """Rank-one projector ``|psi><psi|``."""
    return Observable(np.outer(psi.amplitudes, psi.amplitudes.conj()))


# -- spin ------------------------------------------------------------------

def _two_j(j) -> int:
    try:
        twice = 2 * float(j)
    except (TypeError, ValueError) as exc:
        raise InvalidSpin(f"spin {j!r} is not a number") from exc
    n = int(round(twice))
    if n < 0 or abs(twice - n) > 1e-12:
        raise InvalidSpin(f"spin {j!r}: 2j must be a nonnegative integer")
    return n


def _unit_axis(axis: Sequence[float]) -> np.ndarray:
    n = np.asarray(axis, dtype=float).ravel()
    if n.shape != (3,):
        raise InvalidAxis(f"axis must be a 3-vector, got shape {n.shape}")
    if abs(np.linalg.norm(n) - 1.0) > DEFAULTS.axis_norm:
        raise InvalidAxis(f"axis {tuple(n)} is not a unit vector")
    return n


def spin_matrices(j) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(S_x, S_y, S_z)`` for spin ``j`` in the descending-m basis."""
    two_j = _two_j(j)
    jj = two_j / 2.0
    m = jj - np.arange(two_j + 1)
    # <m+1|S+|m> sits one row above the diagonal in descending-m order
    raising = np.diag(np.sqrt(jj * (jj + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    lowering = raising.conj().T
    sx = 0.5 * (raising + lowering)
    sy = -0.5j * (raising - lowering)
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


def spin_operator(j, axis: Sequence[float]) -> Observable:
    """Spin component ``n . S`` along the unit vector ``axis``."""
    n = _unit_axis(axis)
    sx, sy, sz = spin_matrices(j)
    return Observable(n[0] * sx + n[1] * sy + n[2] * sz)


def spin_coherent_state(j, axis: Sequence[float]) -> StateVector:
    """Eigenstate of ``n . S`` with eigenvalue ``+j``.

    The global phase is fixed so that the first non-negligible amplitude is
    real and positive.
    """
    op = spin_operator(j, axis)
    jj = _two_j(j) / 2.0
    vec = op.eigvecs[:, -1].copy()
    lead = np.flatnonzero(np.abs(vec) > 1e-12)[0]
    vec *= np.abs(vec[lead]) / vec[lead]
    residual = np.linalg.norm(op.matrix @ vec - jj * vec)
    if residual > DEFAULTS.coherent_residual:
        raise ArithmeticError(f"coherent state residual {residual:.2e} too large")
    return StateVector(_frozen(vec / np.linalg.norm(vec)))


# -- composite systems -------------------------------------------------------

def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Kronecker product; the left factor is the slow index."""
    return StateVector(_frozen(np.kron(a.amplitudes, b.amplitudes)))


def op_tensor(a: Observable, b: Observable) -> Observable:
    return Observable(np.kron(a.matrix, b.matrix))


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def pauli(name: str) -> Observable:
    mats = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z, "i": np.eye(2)}
    return Observable(mats[name.lower()])
