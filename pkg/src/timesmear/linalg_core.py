"""Dense complex linear algebra on finite-dimensional Hilbert spaces.

Everything here is immutable: matrices handed to :class:`Operator` and
:class:`State` are copied and frozen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import BadParameter, NonFinite, NotHermitian

TOL_HERM = 1e-10
TOL_TRACE = 1e-10
TOL_PSD = 1e-10

_BASES = ("qubit", "fock_truncated", "position_grid", "momentum_grid", "generic")


@dataclass(frozen=True)
class HilbertSpace:
    """Finite Hilbert space with a basis label.

    ``params`` holds the basis parameters: ``(n_max,)`` for a truncated Fock
    space (dim = n_max + 1), ``(n_points, L)`` for a position grid and
    ``(n_points, p_max)`` for a momentum grid.
    """

    dim: int
    basis: str = "generic"
    params: tuple = ()

    def __post_init__(self):
        if self.dim < 2:
            raise BadParameter(f"dim must be >= 2, got {self.dim}")
        if self.basis not in _BASES:
            raise BadParameter(f"unknown basis label {self.basis!r}")
        if self.basis == "qubit" and self.dim != 2:
            raise BadParameter("qubit space has dim 2")
        if self.basis == "fock_truncated" and self.dim != self.params[0] + 1:
            raise BadParameter("fock_truncated: dim must equal n_max + 1")
        if self.basis in ("position_grid", "momentum_grid") and self.dim != self.params[0]:
            raise BadParameter(f"{self.basis}: dim must equal n_points")

    @classmethod
    def qubit(cls) -> HilbertSpace:
        return cls(2, "qubit")

    @classmethod
    def fock(cls, n_max: int) -> HilbertSpace:
        return cls(n_max + 1, "fock_truncated", (n_max,))

    @classmethod
    def position_grid(cls, n_points: int, length: float) -> HilbertSpace:
        return cls(n_points, "position_grid", (n_points, float(length)))

    @classmethod
    def momentum_grid(cls, n_points: int, p_max: float) -> HilbertSpace:
        return cls(n_points, "momentum_grid", (n_points, float(p_max)))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Operator:
    space: HilbertSpace
    matrix: np.ndarray
    units: str | None = None

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (self.space.dim, self.space.dim):
            raise BadParameter(f"matrix shape {m.shape} does not match dim {self.space.dim}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def H(self) -> Operator:
        return Operator(self.space, self.matrix.conj().T, self.units)

    def hermiticity_error(self) -> float:
        norm = np.linalg.norm(self.matrix)
        if norm == 0.0:
            return 0.0
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T) / norm)

    def is_hermitian(self, tol: float = TOL_HERM) -> bool:
        return self.hermiticity_error() < tol

    def __matmul__(self, other: Operator) -> Operator:
        return Operator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: Operator) -> Operator:
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: Operator) -> Operator:
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, c: complex) -> Operator:
        return Operator(self.space, c * self.matrix, self.units)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"Operator(dim={self.dim}, basis={self.space.basis})"


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim))


def commutator(a: Operator, b: Operator) -> Operator:
    return Operator(a.space, a.matrix @ b.matrix - b.matrix @ a.matrix)


@dataclass(frozen=True, eq=False)
class State:
    """Density operator; validated on construction."""

    space: HilbertSpace
    rho: np.ndarray

    def __post_init__(self):
        rho = _frozen(self.rho)
        if rho.shape != (self.space.dim, self.space.dim):
            raise BadParameter("rho shape does not match space")
        if not np.all(np.isfinite(rho)):
            raise NonFinite("rho has non-finite entries")
        if abs(np.trace(rho) - 1.0) > TOL_TRACE:
            raise BadParameter(f"trace(rho) = {np.trace(rho)}, expected 1")
        if np.linalg.norm(rho - rho.conj().T) > TOL_HERM * max(1.0, np.linalg.norm(rho)):
            raise NotHermitian("rho is not Hermitian")
        if np.linalg.eigvalsh(rho).min() < -TOL_PSD:
            raise BadParameter("rho is not positive semidefinite")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def pure(cls, space: HilbertSpace, psi: Sequence[complex]) -> State:
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(space, np.outer(psi, psi.conj()))

    def is_pure(self, tol: float = 1e-10) -> bool:
        return abs(np.trace(self.rho @ self.rho).real - 1.0) < tol

    def vector(self) -> np.ndarray:
        """Dominant eigenvector (the state vector for a pure state)."""
        w, v = np.linalg.eigh(self.rho)
        return v[:, -1]

    def expect(self, op: Operator) -> complex:
        return complex(np.trace(self.rho @ op.matrix))


def _check_finite(m: np.ndarray) -> None:
    if not np.all(np.isfinite(m)):
        raise NonFinite("operator has NaN or Inf entries")


def matrix_exponential(op: Operator, scale: complex = 1.0) -> Operator:
    """Return ``exp(scale * op)``.

    Hermitian input goes through the eigendecomposition; everything else
    uses scipy's scaling-and-squaring Pade routine.
    """
    m = op.matrix
    _check_finite(m)
    if op.is_hermitian():
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        out = (v * np.exp(scale * w)) @ v.conj().T
    else:
        out = scipy.linalg.expm(scale * m)
    if not np.all(np.isfinite(out)):
        from .errors import ConvergenceFailure

        raise ConvergenceFailure("matrix exponential overflowed")
    return Operator(op.space, out)


def _merge_degenerate(w: np.ndarray, v: np.ndarray) -> list[tuple[float, np.ndarray]]:
    groups: list[list[int]] = []
    for i, lam in enumerate(w):
        if groups and abs(lam - w[groups[-1][0]]) < 1e-9 * max(1.0, abs(lam)):
            groups[-1].append(i)
        else:
            groups.append([i])
    out = []
    for g in groups:
        vecs = v[:, g]
        out.append((float(np.mean(w[g])), vecs @ vecs.conj().T))
    return out


def spectral_decompose(op: Operator, tol: float = TOL_HERM) -> list[tuple[float, Operator]]:
    """Eigenvalues (ascending) paired with spectral projectors.

    Eigenvalues closer than ``1e-9 * max(1, |lambda|)`` share one projector.
    """
    if not op.is_hermitian(tol):
        raise NotHermitian(f"relative anti-Hermitian part {op.hermiticity_error():.2e}")
    m = op.matrix
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return [(lam, Operator(op.space, p)) for lam, p in _merge_degenerate(w, v)]


def reconstruct(decomp: Iterable[tuple[float, Operator]]) -> Operator:
    decomp = list(decomp)
    space = decomp[0][1].space
    return Operator(space, sum(lam * p.matrix for lam, p in decomp))


Interval = tuple[float, float]


def as_intervals(u) -> list[Interval]:
    """Normalize a set description to sorted, merged closed intervals.

    Accepts a single ``(lo, hi)`` pair or an iterable of pairs; infinite
    endpoints are allowed.
    """
    if u is None:
        return []
    arr = list(u)
    if len(arr) == 2 and all(np.isscalar(x) for x in arr):
        arr = [tuple(arr)]
    ivs = sorted((float(lo), float(hi)) for lo, hi in arr)
    for lo, hi in ivs:
        if not lo <= hi:
            raise BadParameter(f"empty or reversed interval ({lo}, {hi})")
    merged: list[Interval] = []
    for lo, hi in ivs:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def in_intervals(x: np.ndarray, u: Sequence[Interval]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    mask = np.zeros(x.shape, dtype=bool)
    for lo, hi in u:
        mask |= (x >= lo) & (x <= hi)
    return mask


def indicator_of(op: Operator, u) -> Operator:
    """Spectral indicator ``chi_U(op)``: sum of projectors with eigenvalue in U."""
    ivs = as_intervals(u)
    out = np.zeros((op.dim, op.dim), dtype=complex)
    for lam, p in spectral_decompose(op):
        if in_intervals(np.array([lam]), ivs)[0]:
            out += p.matrix
    return Operator(op.space, out)


def function_of(op: Operator, fn) -> Operator:
    """Apply a scalar function through the spectral decomposition."""
    if not op.is_hermitian():
        raise NotHermitian("function_of needs a Hermitian operator")
    m = op.matrix
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return Operator(op.space, (v * fn(w)) @ v.conj().T)


def pauli(space: HilbertSpace | None = None) -> dict[str, Operator]:
    space = space or HilbertSpace.qubit()
    mats = {
        "id": np.eye(2),
        "sx": np.array([[0, 1], [1, 0]]),
        "sy": np.array([[0, -1j], [1j, 0]]),
        "sz": np.array([[1, 0], [0, -1]]),
    }
    return {k: Operator(space, v) for k, v in mats.items()}


def frob(m) -> float:
    if isinstance(m, Operator):
        m = m.matrix
    return float(np.linalg.norm(m))
