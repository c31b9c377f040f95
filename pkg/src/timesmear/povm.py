"""Pointer-model POVM for time-extended measurements.

With pointer amplitude w(a) and D(a) the class-operator density,

    D(w_x) = int da w(x - a) D(a),    Pi_x = D(w*_x) D(w_x)^dagger,

and p(U) = tr(e^{-iHT} rho e^{iHT} Pi_U).  D(a) is a trigonometric
polynomial in a with period P = 2 pi / dk, so the a integral is done
exactly in the k representation:

    D(w_x) = sum_m (dk / 2pi) e^{-i k_m x} w~(-k_m) e^{-iHT} U(k_m),

with w~(k) = int w(b) e^{-ikb} db.  The pointer transform is the only k
window: a taper on the family would multiply w~ and break completeness,
so it is ignored here.  This is the convolution with the
pointer wrapped onto one period of the a axis.  On an x grid with
dx = da spanning one period the x sum is an exact discrete Fourier
orthogonality, so completeness reduces to Parseval for w.

:func:`apparatus_pointer_distribution` evaluates the pointer density of
the explicit system + pointer model from the propagators alone, as an
independent check of the whole chain.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .class_operators import ClassOperatorFamily, KGrid, set_transform
from .errors import Aliasing, BadParameter, NotNormalized, WindowOverflow
from .linalg_core import Operator, State, as_intervals, in_intervals
from .propagator import TimeSlicing, evolve_family

NORM_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class PointerState:
    """Pointer amplitude w(a) with its Fourier transform w~(k) = int w e^{-ika}."""

    shape: str
    w: Callable[[np.ndarray], np.ndarray]
    ft: Callable[[np.ndarray], np.ndarray]
    width: float
    norm: float = field(init=False)

    def __post_init__(self):
        a = np.linspace(-12 * self.width, 12 * self.width, 8001)
        n = float(simpson(np.abs(self.w(a)) ** 2, x=a))
        if abs(n - 1.0) > NORM_TOL:
            raise NotNormalized(f"pointer norm {n:.10f} differs from 1")
        object.__setattr__(self, "norm", n)

    @classmethod
    def gaussian(cls, delta: float, center: float = 0.0) -> PointerState:
        if not delta > 0:
            raise BadParameter("pointer width delta must be positive")
        amp = (2 * np.pi * delta**2) ** -0.25
        return cls(
            "gaussian",
            lambda a: amp * np.exp(-((np.asarray(a) - center) ** 2) / (4 * delta**2)),
            lambda k: (8 * np.pi * delta**2) ** 0.25 * np.exp(-(delta**2) * np.asarray(k) ** 2
                                                              - 1j * np.asarray(k) * center),
            float(delta),
        )

    @classmethod
    def from_samples(cls, a, w, width: float | None = None) -> PointerState:
        """Tabulated amplitude, cubic-spline interpolated and zero outside the samples.

        The transform is taken by Simpson quadrature over the samples.
        """
        a = np.asarray(a, dtype=float)
        w = np.asarray(w, dtype=complex)
        if a.ndim != 1 or a.shape != w.shape or np.any(np.diff(a) <= 0):
            raise BadParameter("need increasing sample positions matched to amplitudes")
        spline = CubicSpline(a, w)

        def amp(s):
            s = np.asarray(s, dtype=float)
            return np.where((s >= a[0]) & (s <= a[-1]), spline(np.clip(s, a[0], a[-1])), 0.0)

        def ft(k):
            k = np.atleast_1d(np.asarray(k, dtype=float))
            return simpson(w[None, :] * np.exp(-1j * np.outer(k, a)), x=a, axis=1)

        if width is None:
            p = np.abs(w) ** 2
            mean = simpson(a * p, x=a) / simpson(p, x=a)
            width = float(np.sqrt(simpson((a - mean) ** 2 * p, x=a) / simpson(p, x=a)))
        return cls("custom_samples", amp, ft, width)


@dataclass(frozen=True, eq=False)
class Povm:
    x_grid: np.ndarray
    elements: np.ndarray  # (n_x, d, d)
    dx: float
    pointer: PointerState
    family: ClassOperatorFamily

    def element(self, x: float) -> Operator:
        j = int(np.argmin(np.abs(self.x_grid - x)))
        return Operator(self.family.space, self.elements[j])

    def hermiticity_error(self) -> float:
        e = self.elements
        return float(np.max(np.abs(e - np.conj(np.swapaxes(e, -1, -2)))))

    def min_eigenvalue(self) -> float:
        e = self.elements
        herm = 0.5 * (e + np.conj(np.swapaxes(e, -1, -2)))
        return float(np.min(np.linalg.eigvalsh(herm)))

    def completeness_residual(self) -> float:
        total = self.elements.sum(axis=0) * self.dx
        return float(np.max(np.abs(total - np.eye(total.shape[-1]))))

    def effect(self, u) -> Operator:
        """Pi_U = int_U Pi_x dx, with the x integral done exactly in k space.

        Pi_U = sum_{m,n} c_m c_n^* chi~_U(k_m - k_n) V_m V_n^dagger, where
        c_m = (dk/2pi) w~(-k_m) and V_m = e^{-iHT} U(k_m).
        """
        fam = self.family
        ks = fam.kgrid.ks
        v = fam.raw_stack
        c = fam.kgrid.dk / (2 * np.pi) * self.pointer.ft(-ks)
        cv = c[:, None, None] * v
        ivs = fam.clip_to_window(u)
        out = np.zeros(v.shape[1:], dtype=complex)
        for m in range(ks.size):
            chi = set_transform(ks[m] - ks, ivs)
            inner = np.tensordot(chi, np.conj(np.swapaxes(cv, -1, -2)), axes=(0, 0))
            out += cv[m] @ inner
        return Operator(fam.space, out)


def _dw_stack(fam: ClassOperatorFamily, pointer: PointerState, x: np.ndarray) -> np.ndarray:
    """D(w_x) for every x, shape (n_x, d, d)."""
    ks = fam.kgrid.ks
    # the pointer transform is the k window; a family taper would spoil completeness
    coef = np.exp(-1j * np.outer(x, ks)) * (fam.kgrid.dk / (2 * np.pi) * pointer.ft(-ks))[None, :]
    v = fam.raw_stack
    d = v.shape[-1]
    return (coef @ v.reshape(ks.size, -1)).reshape(x.size, d, d)


def default_x_grid(fam: ClassOperatorFamily) -> np.ndarray:
    """One full period of the a axis at spacing da (the a grid itself)."""
    return fam.a_grid.copy()


def build_povm(fam: ClassOperatorFamily, pointer: PointerState, x_grid=None) -> Povm:
    x = default_x_grid(fam) if x_grid is None else np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise BadParameter("x_grid must be a 1-d grid with at least two points")
    lo, hi = fam.window
    if 12 * pointer.width > hi - lo:
        raise WindowOverflow(f"pointer (12 delta = {12 * pointer.width:.3g}) wider than the window")
    if x.min() < lo - 1e-9 or x.max() > hi + 1e-9:
        raise WindowOverflow("x_grid leaves the alias-free window")
    dx = float(x[1] - x[0])
    dw = _dw_stack(fam, pointer, x)
    elements = dw @ np.conj(np.swapaxes(dw, -1, -2))
    elements.setflags(write=False)
    return Povm(x, elements, dx, pointer, fam)


def evolved_state(rho0: State, H: Operator, T: float) -> np.ndarray:
    w, v = np.linalg.eigh(H.matrix)
    u = (v * np.exp(-1j * T * w)) @ v.conj().T
    return u @ rho0.rho @ u.conj().T


def pointer_distribution(povm: Povm, rho0: State, H: Operator, T: float) -> np.ndarray:
    """p(x) = tr(rho_T Pi_x) on the POVM grid (a density: multiply by dx for mass)."""
    rho_t = evolved_state(rho0, H, T)
    return np.einsum("ij,xji->x", rho_t, povm.elements).real


def probability(povm: Povm, rho0: State, H: Operator, T: float, u) -> float:
    """p(U) = tr(rho_T Pi_U) with Pi_U integrated exactly over U."""
    rho_t = evolved_state(rho0, H, T)
    return float(np.trace(rho_t @ povm.effect(u).matrix).real)


def grid_probability(povm: Povm, rho0: State, H: Operator, T: float, u) -> float:
    """p(U) as the dx-weighted sum of tr(rho_T Pi_x) over grid points in U."""
    dens = pointer_distribution(povm, rho0, H, T)
    mask = in_intervals(povm.x_grid, as_intervals(u))
    return float(np.sum(dens[mask]) * povm.dx)


def clipped_mass(povm: Povm, rho0: State, H: Operator, T: float) -> float:
    """Probability on grid points outside |x| <= P/2 - 3 da."""
    lo, hi = povm.family.safe_window
    dens = pointer_distribution(povm, rho0, H, T)
    outside = (povm.x_grid < lo) | (povm.x_grid > hi)
    return float(np.sum(dens[outside]) * povm.dx)


def apparatus_pointer_distribution(model, A: Operator, f, rho0: State, pointer: PointerState,
                                   x_grid, kgrid: KGrid, slicing: TimeSlicing = TimeSlicing(),
                                   family=None) -> np.ndarray:
    """Pointer density of the explicit system + pointer model at time T.

    <x|rho_app|x> = (dk^2 / 2pi) sum_{m,n} e^{i(k_m - k_n) x} Psi(k_m) Psi*(k_n)
                    tr(U(k_m)^dagger rho0 U(k_n)),

    Psi(k) = w~(k) / sqrt(2 pi).  Uses only the propagators: no class
    operators and no POVM.  ``family`` may supply precomputed propagators
    (e.g. a translation family) on the same k grid.
    """
    ks = kgrid.ks
    if family is None:
        family = evolve_family(model, A, f, ks, slicing)
    elif family.ks.size != ks.size or not np.allclose(family.ks, ks):
        raise Aliasing("propagator family k nodes differ from the k grid")
    u = family.values
    psi = pointer.ft(ks) / np.sqrt(2 * np.pi)
    # G[m, n] = tr(U_m^dagger rho U_n)
    rho_u = np.einsum("ij,njk->nik", rho0.rho, u)
    g = np.einsum("mki,nki->mn", np.conj(u), rho_u)
    x = np.asarray(x_grid, dtype=float)
    phase = np.exp(1j * np.outer(x, ks)) * psi[None, :]
    dk = kgrid.dk
    dens = np.einsum("xm,mn,xn->x", phase, g, np.conj(phase)) * dk**2 / (2 * np.pi)
    return dens.real


def bin_probabilities(dens: np.ndarray, x_grid, dx: float, edges) -> np.ndarray:
    x = np.asarray(x_grid, dtype=float)
    edges = np.asarray(edges, dtype=float)
    idx = np.searchsorted(edges, x, side="right") - 1
    out = np.zeros(edges.size - 1)
    ok = (idx >= 0) & (idx < edges.size - 1)
    np.add.at(out, idx[ok], dens[ok] * dx)
    return out


def binned_class_probabilities(fam: ClassOperatorFamily, rho0: State, edges) -> np.ndarray:
    """tr(D_U^dagger rho_T D_U) for consecutive bins [edges_i, edges_i+1]."""
    H = fam.propagators.model.H
    rho_t = evolved_state(rho0, H, fam.propagators.f.T)
    sets = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
    d_u = fam.integrate_sets(sets)
    return np.einsum("uji,jk,uki->u", np.conj(d_u), rho_t, d_u).real


def delta_sweep(fam: ClassOperatorFamily, rho0: State, macro_edges,
                deltas=(0.4, 0.2, 0.1)) -> dict:
    """Pointer-POVM probabilities against class-operator cell probabilities.

    Each macroscopic bin is cut into cells of width delta; the cell
    probabilities tr(D_cell^dagger rho_T D_cell) are summed per bin and
    compared with the POVM (pointer width delta) probability of the bin.
    Bin widths must be multiples of every delta.  Returns the maximum
    deviation per delta and the fitted exponent of deviation vs delta.
    """
    H = fam.propagators.model.H
    T = fam.propagators.f.T
    macro = np.asarray(macro_edges, dtype=float)
    devs = []
    for delta in deltas:
        pov = build_povm(fam, PointerState.gaussian(delta), x_grid=fam.a_grid[:2])
        p_povm = np.array([probability(pov, rho0, H, T, (macro[i], macro[i + 1]))
                           for i in range(macro.size - 1)])
        p_cls = np.zeros(macro.size - 1)
        for i in range(macro.size - 1):
            n_cells = (macro[i + 1] - macro[i]) / delta
            if abs(n_cells - round(n_cells)) > 1e-9:
                raise BadParameter(f"bin width {macro[i + 1] - macro[i]} is not a multiple of {delta}")
            cells = macro[i] + delta * np.arange(round(n_cells) + 1)
            p_cls[i] = binned_class_probabilities(fam, rho0, cells).sum()
        devs.append(float(np.max(np.abs(p_povm - p_cls))))
    slope = float(np.polyfit(np.log(deltas), np.log(devs), 1)[0])
    return {"deltas": list(deltas), "deviation": devs, "exponent": slope}


def provenance_hash(meta: dict) -> str:
    blob = json.dumps(meta, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def export_csv(path, edges, probs, meta: dict) -> Path:
    """CSV with columns x_lo, x_hi, probability; the header carries provenance."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# provenance {provenance_hash(meta)}\n")
        fh.write(f"# config {json.dumps(meta, sort_keys=True, default=str)}\n")
        w = csv.writer(fh)
        w.writerow(["x_lo", "x_hi", "probability"])
        for i, p in enumerate(probs):
            w.writerow([f"{edges[i]:.12g}", f"{edges[i + 1]:.12g}", f"{p:.12g}"])
    return path
