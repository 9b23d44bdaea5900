"""Dense operator and state algebra on the two-qudit + cavity product space.

Subsystem order is fixed everywhere as (qudit 1, qudit 2, cavity), so the
basis index of |l1, l2, n> is ``(l1 * d2 + l2) * (n_max + 1) + n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

QUDIT1, QUDIT2, CAVITY = 0, 1, 2

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class HilbertSpace:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(x) for x in self.dims)
        if len(dims) == 0 or any(x < 2 for x in dims):
            raise DimensionError(f"every subsystem dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def d(self) -> int:
        return self.dims[QUDIT1]

    @property
    def n_max(self) -> int:
        return self.dims[-1] - 1

    def index(self, *levels: int) -> int:
        if len(levels) != len(self.dims):
            raise DimensionError(f"need {len(self.dims)} levels, got {len(levels)}")
        for lvl, dim in zip(levels, self.dims):
            if not 0 <= lvl < dim:
                raise DimensionError(f"level {lvl} out of range for dimension {dim}")
        return int(np.ravel_multi_index(levels, self.dims))

    def labels(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in np.unravel_index(i, self.dims)) for i in range(self.total_dim)]


def composite_space(d: int, n_max: int) -> HilbertSpace:
    """Space of two ``d``-level qudits and a cavity truncated at ``n_max`` photons."""
    if d < 2:
        raise DimensionError(f"qudit dimension must be >= 2, got {d}")
    if n_max < 1:
        raise DimensionError(f"cavity truncation must be >= 1, got {n_max}")
    return HilbertSpace((d, d, n_max + 1))


def _local_space(dim: int) -> HilbertSpace:
    return HilbertSpace((dim,))


@dataclass(frozen=True, eq=False)
class Operator:
    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    __array_ufunc__ = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise DimensionError(f"matrix shape {m.shape} does not match space dimension {n}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def _check(self, other: "Operator"):
        if other.space != self.space:
            raise DimensionError(f"operator spaces differ: {self.space.dims} vs {other.space.dims}")

    def adjoint(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    dag = adjoint

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= tol)

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.space, complex(scalar) * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            if other.space != self.space:
                raise DimensionError("operator and state live in different spaces")
            return StateVector(self.space, self.matrix @ other.amplitudes, normalize=False)
        return NotImplemented

    def allclose(self, other: "Operator", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.matrix, other.matrix, atol=atol, rtol=0))


def add(a: Operator, b: Operator) -> Operator:
    return a + b


def scale(a: Operator, s: complex) -> Operator:
    return a * s


def matmul(a: Operator, b: Operator) -> Operator:
    return a @ b


def adjoint(a: Operator) -> Operator:
    return a.adjoint()


def identity(space: HilbertSpace | int) -> Operator:
    if isinstance(space, int):
        space = _local_space(space)
    return Operator(space, np.eye(space.total_dim))


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def annihilation(n_max: int) -> Operator:
    """Truncated photon annihilation operator on the cavity factor alone."""
    if n_max < 1:
        raise DimensionError(f"cavity truncation must be >= 1, got {n_max}")
    m = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1)
    return Operator(_local_space(n_max + 1), m)


def ket_bra(dim: int, row: int, col: int) -> Operator:
    if not (0 <= row < dim and 0 <= col < dim):
        raise DimensionError(f"|{row}><{col}| out of range for dimension {dim}")
    m = np.zeros((dim, dim), dtype=complex)
    m[row, col] = 1.0
    return Operator(_local_space(dim), m)


def transition_raise(d: int, l: int) -> Operator:
    """Single-qudit |l><l-1| for ``1 <= l <= d-1``."""
    if not 1 <= l <= d - 1:
        raise DimensionError(f"transition level l={l} out of range 1..{d - 1}")
    return ket_bra(d, l, l - 1)


def transition_lower(d: int, l: int) -> Operator:
    return transition_raise(d, l).adjoint()


def projector(d: int, l: int) -> Operator:
    return ket_bra(d, l, l)


def embed(local: Operator, site: int, space: HilbertSpace) -> Operator:
    """Tensor ``local`` into ``space`` at ``site`` with identities elsewhere."""
    if not 0 <= site < len(space.dims):
        raise DimensionError(f"site {site} out of range for {len(space.dims)} subsystems")
    if local.space.total_dim != space.dims[site]:
        raise DimensionError(
            f"local dimension {local.space.total_dim} does not match subsystem {site} "
            f"dimension {space.dims[site]}"
        )
    factors = [np.eye(dim) for dim in space.dims]
    factors[site] = local.matrix
    return Operator(space, reduce(np.kron, factors))


@dataclass(frozen=True, eq=False)
class StateVector:
    space: HilbertSpace
    amplitudes: np.ndarray = field(repr=False)
    normalize: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if v.shape != (self.space.total_dim,):
            raise DimensionError(f"state length {v.size} does not match dimension {self.space.total_dim}")
        if self.normalize:
            nrm = np.linalg.norm(v)
            if nrm == 0:
                raise ValueError("cannot normalize the zero vector")
            v = v / nrm
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        if other.space != self.space:
            raise DimensionError("states live in different spaces")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def amplitude(self, *levels: int) -> complex:
        return complex(self.amplitudes[self.space.index(*levels)])

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))


def basis_ket(space: HilbertSpace, l1: int, l2: int, n: int) -> StateVector:
    v = np.zeros(space.total_dim, dtype=complex)
    v[space.index(l1, l2, n)] = 1.0
    return StateVector(space, v)


def product_state(space: HilbertSpace, qudit1: Sequence[complex], qudit2: Sequence[complex],
                  cavity: Sequence[complex]) -> StateVector:
    parts = [np.asarray(x, dtype=complex) for x in (qudit1, qudit2, cavity)]
    for p, dim in zip(parts, space.dims):
        if p.shape != (dim,):
            raise DimensionError(f"factor of length {p.size} does not match dimension {dim}")
    return StateVector(space, reduce(np.kron, parts))


def expectation(op: Operator, state: StateVector) -> complex:
    if op.space != state.space:
        raise DimensionError("operator and state live in different spaces")
    psi = state.amplitudes
    return complex(np.vdot(psi, op.matrix @ psi))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise DimensionError(f"matrix shape {m.shape} does not match space dimension {n}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def maximally_mixed(cls, space: HilbertSpace) -> "DensityMatrix":
        n = space.total_dim
        return cls(space, np.eye(n) / n)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def validate(self, trace_tol: float = 1e-8, herm_tol: float = 1e-10, eig_tol: float = 1e-8):
        """Raise ``ValueError`` unless this is a unit-trace positive Hermitian matrix."""
        if abs(self.trace - 1) > trace_tol:
            raise ValueError(f"trace {self.trace} differs from 1 by more than {trace_tol}")
        if self.hermiticity_error() > herm_tol:
            raise ValueError(f"not Hermitian within {herm_tol}")
        if self.min_eigenvalue() < -eig_tol:
            raise ValueError(f"minimum eigenvalue {self.min_eigenvalue()} below -{eig_tol}")
        return self
