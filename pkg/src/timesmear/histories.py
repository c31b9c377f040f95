"""Decoherence functional over partitions of the a axis.

d(U, U') = tr(D_U^dagger rho_T D_U'),  rho_T = e^{-iHT} rho0 e^{iHT},

plus the wide-bin approximation D_U ~ chi_U(int f(t) A(t) dt) and the
state-dependent condition for it.  Because D(a) = e^{-iHT} C(a) pairs with
the evolved state, the Heisenberg operators in the wide-bin projector are
referred to the final time, A(t) = e^{-iH(T-t)} A e^{iH(T-t)}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .class_operators import ClassOperatorFamily
from .errors import BadParameter, MixedStateUnsupported, NotNormalizedSmearing, OutOfWindow
from .linalg_core import Operator, State, indicator_of
from .models import ModelSpec
from .povm import evolved_state, provenance_hash
from .smearing import SmearingFunction

EPSILON_DEC = 0.05
SATISFIED_FACTOR = 0.1
EMPTY_BIN = 1e-10


@dataclass(frozen=True)
class Partition:
    """Consecutive bins [edges_i, edges_i+1]."""

    edges: tuple

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
            raise BadParameter("partition edges must increase strictly")
        object.__setattr__(self, "edges", tuple(float(v) for v in e))

    @classmethod
    def uniform(cls, lo: float, hi: float, n_bins: int) -> Partition:
        return cls(tuple(np.linspace(lo, hi, n_bins + 1)))

    @classmethod
    def covering(cls, fam: ClassOperatorFamily, inner_edges) -> Partition:
        """Inner edges completed by the window ends."""
        lo, hi = fam.window
        return cls((lo, *sorted(inner_edges), hi))

    @property
    def bins(self) -> list[tuple[float, float]]:
        return list(zip(self.edges[:-1], self.edges[1:]))

    def __len__(self) -> int:
        return len(self.edges) - 1

    def validate(self, window: tuple[float, float], da: float, tol: float = 1e-9) -> None:
        lo, hi = window
        if abs(self.edges[0] - lo) > tol or abs(self.edges[-1] - hi) > tol:
            raise OutOfWindow(f"partition [{self.edges[0]:.6g}, {self.edges[-1]:.6g}] "
                              f"does not cover the window [{lo:.6g}, {hi:.6g}]")
        if np.min(np.diff(self.edges)) < da * (1 - 1e-9):
            raise BadParameter(f"bins narrower than the a spacing {da:.4g}")

    def merged(self, i: int) -> Partition:
        """Merge bin i with bin i + 1."""
        if not 0 <= i < len(self) - 1:
            raise BadParameter(f"cannot merge bin {i} with its successor")
        e = list(self.edges)
        del e[i + 1]
        return Partition(tuple(e))


@dataclass(frozen=True, eq=False)
class DecoherenceMatrix:
    partition: Partition
    d: np.ndarray
    threshold: float = EPSILON_DEC

    @property
    def epsilon(self) -> float:
        diag = np.clip(self.d.diagonal().real, 0.0, None)
        norm = np.sqrt(np.outer(diag, diag))
        # bins holding no weight carry only round-off; they cannot interfere
        live = diag > EMPTY_BIN * max(diag.sum(), 1e-300)
        off = ~np.eye(len(diag), dtype=bool) & np.outer(live, live)
        if not off.any():
            return 0.0
        return float(np.max(np.abs(self.d[off]) / norm[off]))

    @property
    def decoherent(self) -> bool:
        return self.epsilon < self.threshold

    @property
    def probabilities(self) -> np.ndarray | None:
        """Diagonal d_ii when the set decoheres, else None."""
        return self.d.diagonal().real.copy() if self.decoherent else None

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.d - self.d.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.d + self.d.conj().T)).min())

    def total(self) -> complex:
        return complex(self.d.sum())

    def merged(self, i: int) -> DecoherenceMatrix:
        """Coarse-grain bins i and i + 1 by summing the corresponding block."""
        n = len(self.partition)
        s = np.zeros((n - 1, n))
        for j in range(n):
            s[j if j <= i else j - 1, j] = 1.0
        return DecoherenceMatrix(self.partition.merged(i), s @ self.d @ s.T, self.threshold)


def decoherence_matrix(fam: ClassOperatorFamily, rho0: State, partition: Partition,
                       threshold: float = EPSILON_DEC) -> DecoherenceMatrix:
    partition.validate(fam.window, fam.da)
    d_u = fam.integrate_sets(partition.bins)
    model = fam.propagators.model
    rho_t = evolved_state(rho0, model.H, fam.propagators.f.T)
    # d_ij = tr(D_i^dagger rho_T D_j)
    d = np.einsum("iba,bc,jca->ij", np.conj(d_u), rho_t, d_u)
    return DecoherenceMatrix(partition, d, threshold)


def _heisenberg_stack(H: np.ndarray, A: np.ndarray, times: np.ndarray) -> np.ndarray:
    """e^{iHt} A e^{-iHt} for each t."""
    w, v = np.linalg.eigh(H)
    a_eig = v.conj().T @ A @ v
    ph = np.exp(1j * np.outer(times, w))
    stack = ph[:, :, None] * a_eig[None] * np.conj(ph)[:, None, :]
    return v[None] @ stack @ v.conj().T[None]


def time_averaged_operator(model: ModelSpec, A: Operator, f: SmearingFunction,
                           n: int = 2049) -> Operator:
    """int f(t) A(t) dt with A(t) = e^{-iH(T-t)} A e^{iH(T-t)}, by Simpson."""
    t = f.nodes(n)
    stack = _heisenberg_stack(model.H.matrix, A.matrix, t - f.T)
    avg = simpson(f.func(t)[:, None, None] * stack, x=t, axis=0)
    return Operator(model.space, 0.5 * (avg + avg.conj().T))


def coarse_grained_projector(model: ModelSpec, A: Operator, f: SmearingFunction, u,
                             n: int = 2049) -> Operator:
    if abs(f.normalization - 1.0) > 1e-6:
        raise NotNormalizedSmearing(f"int f = {f.normalization:.8g}; averaging needs 1")
    return indicator_of(time_averaged_operator(model, A, f, n), u)


@dataclass(frozen=True)
class ValidityResult:
    lhs: float
    rhs: float
    satisfied: bool
    degenerate_rhs: bool = False

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.satisfied))


def validity_condition(model: ModelSpec, A: Operator, f: SmearingFunction, psi: State,
                       delta: float, n: int = 801) -> ValidityResult:
    """Both sides of the wide-bin condition on a vector state.

    lhs = |int_0^T ds int_0^s ds' f(s) f(s') <[A(s), A(s')]>|,
    rhs = delta |int_0^T ds f(s) <A(s)>|; satisfied when lhs < 0.1 rhs.
    """
    if not psi.is_pure():
        raise MixedStateUnsupported("the condition is stated for a vector state")
    vec = psi.vector()
    t = f.nodes(n)
    fv = f.func(t)
    stack = _heisenberg_stack(model.H.matrix, A.matrix, t)
    phi = stack @ vec  # (n, d): A(s) psi
    gram = np.conj(phi) @ phi.T  # <A(s) A(s')>, using A Hermitian
    comm = gram - gram.T
    # <[A(s), A(s')]> is imaginary; integrate the parts separately
    w = comm * fv[None, :]
    inner = (cumulative_simpson(w.real, x=t, axis=1, initial=0.0)
             + 1j * cumulative_simpson(w.imag, x=t, axis=1, initial=0.0))
    lhs = float(abs(simpson(fv * np.diagonal(inner), x=t)))
    expect = np.einsum("i,nij,j->n", np.conj(vec), stack, vec).real
    rhs = float(delta * abs(simpson(fv * expect, x=t)))
    if rhs == 0.0 or rhs < 1e-14:
        return ValidityResult(lhs, rhs, False, True)
    return ValidityResult(lhs, rhs, lhs < SATISFIED_FACTOR * rhs)


def commutator_profile(model: ModelSpec, A: Operator, psi: State, T: float,
                       n: int = 401) -> tuple[np.ndarray, np.ndarray]:
    """c(tau) = mean over s' in [0, T - tau] of |<[A(s' + tau), A(s')]>|, tau in [0, T]."""
    if not psi.is_pure():
        raise MixedStateUnsupported("the profile is stated for a vector state")
    vec = psi.vector()
    t = np.linspace(0.0, T, n)
    phi = _heisenberg_stack(model.H.matrix, A.matrix, t) @ vec
    gram = np.conj(phi) @ phi.T
    comm = np.abs(gram - gram.T)
    prof = np.array([np.mean(np.diagonal(comm, offset=j)) for j in range(n - 1)])
    return t[:-1], prof


def correlation_time(model: ModelSpec, A: Operator, psi: State, T: float, n: int = 401) -> float:
    """Half-width of the commutator profile about s = s'.

    The profile vanishes at zero lag, so the width is read past its first
    maximum: the lag where c falls to half the peak value.  Returns inf
    when c never decays to half within [0, T] (e.g. undamped precession).
    """
    lag, prof = commutator_profile(model, A, psi, T, n)
    if prof.max() <= 1e-14:
        return 0.0
    falling = np.nonzero(np.diff(prof) < 0)[0]
    peak = int(falling[0]) if falling.size else prof.size - 1
    below = np.nonzero(prof[peak:] <= 0.5 * prof[peak])[0]
    return float(lag[peak + below[0]]) if below.size else float("inf")


def export_csv(path, dm: DecoherenceMatrix, meta: dict) -> Path:
    """Rows (i, j, Re d, Im d) and a trailing epsilon summary line."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# provenance {provenance_hash(meta)}\n")
        w = csv.writer(fh)
        w.writerow(["i", "j", "re_d", "im_d"])
        n = dm.d.shape[0]
        for i in range(n):
            for j in range(n):
                w.writerow([i, j, f"{dm.d[i, j].real:.12g}", f"{dm.d[i, j].imag:.12g}"])
        fh.write(f"# epsilon {dm.epsilon:.12g} decoherent {dm.decoherent}\n")
    return path
