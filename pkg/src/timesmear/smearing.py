"""Smearing functions f(t) on [0, T] and their quadrature coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .errors import BadParameter, BoundaryViolation, CausticSingularity, NotDifferentiable

N_QUAD = 4097

AVERAGING_KINDS = ("uniform", "sine_bump_unit", "raised_cosine")
KINDS = AVERAGING_KINDS + ("sine_bump_paper", "custom_samples")


@dataclass(frozen=True, eq=False)
class SmearingFunction:
    """Weight profile f(t) on [0, T].

    ``kind`` records the construction; derivative smearings carry the kind
    ``"d/dt <parent>"``.  ``antiderivative`` is set for derivative smearings
    (it is the parent f) so slice averages can be taken exactly.
    """

    T: float
    kind: str
    func: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray] | None = None
    antiderivative: Callable[[np.ndarray], np.ndarray] | None = None
    normalization: float = field(init=False)

    def __post_init__(self):
        if not self.T > 0:
            raise BadParameter(f"T must be positive, got {self.T}")
        object.__setattr__(self, "normalization", self.integrate(lambda t, f: f))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= 0) & (t <= self.T), self.func(np.clip(t, 0, self.T)), 0.0)

    @property
    def derivative_available(self) -> bool:
        return self.deriv is not None

    @property
    def is_averaging(self) -> bool:
        return self.kind in AVERAGING_KINDS or self.kind == "sine_bump_paper"

    def nodes(self, n: int = N_QUAD) -> np.ndarray:
        return np.linspace(0.0, self.T, n)

    def integrate(self, integrand, n: int = N_QUAD) -> float:
        """Simpson quadrature of ``integrand(t, f(t))`` over [0, T]."""
        t = self.nodes(n)
        return float(simpson(integrand(t, self.func(t)), x=t))

    def abs_mass(self) -> float:
        """Integral of |f|; bounds the spread of smeared values."""
        return self.integrate(lambda t, f: np.abs(f))

    def slice_values(self, n_slices: int) -> np.ndarray:
        """Per-slice weights for time slicing.

        Midpoint samples, except when an antiderivative is known: then the
        exact slice average is used, so the slice sum reproduces the integral.
        """
        edges = np.linspace(0.0, self.T, n_slices + 1)
        if self.antiderivative is not None:
            F = self.antiderivative(edges)
            return np.diff(F) / np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        return self.func(mid)

    def describe(self) -> dict:
        return {"kind": self.kind, "T": self.T, "normalization": self.normalization}


def make_standard(kind: str, T: float) -> SmearingFunction:
    if not T > 0:
        raise BadParameter(f"T must be positive, got {T}")
    T = float(T)
    if kind == "uniform":
        return SmearingFunction(T, kind, lambda t: np.full_like(np.asarray(t, float), 1.0 / T),
                                deriv=lambda t: np.zeros_like(np.asarray(t, float)))
    if kind in ("sine_bump_paper", "sine_bump_unit"):
        amp = np.pi / T if kind == "sine_bump_paper" else np.pi / (2 * T)
        return SmearingFunction(
            T, kind,
            lambda t: amp * np.sin(np.pi * np.asarray(t) / T),
            deriv=lambda t: amp * (np.pi / T) * np.cos(np.pi * np.asarray(t) / T),
        )
    if kind == "raised_cosine":
        return SmearingFunction(
            T, kind,
            lambda t: (1.0 - np.cos(2 * np.pi * np.asarray(t) / T)) / T,
            deriv=lambda t: (2 * np.pi / T**2) * np.sin(2 * np.pi * np.asarray(t) / T),
        )
    raise BadParameter(f"unknown smearing kind {kind!r}")


def from_samples(t, f, dfdt=None) -> SmearingFunction:
    """Smearing from tabulated samples on a strictly increasing grid from 0 to T."""
    from scipy.interpolate import CubicSpline

    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if t.ndim != 1 or t.shape != f.shape or len(t) < 4:
        raise BadParameter("need matching 1-d sample arrays with at least 4 points")
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise BadParameter("sample times must start at 0 and increase strictly")
    spline = CubicSpline(t, f)
    deriv = None
    if dfdt is not None:
        dspline = CubicSpline(t, np.asarray(dfdt, dtype=float))
        deriv = lambda s: dspline(s)
    return SmearingFunction(float(t[-1]), "custom_samples", lambda s: spline(s), deriv=deriv)


def load_samples(path: str | Path) -> SmearingFunction:
    """Read a whitespace table: t, f(t) and optionally f'(t)."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] not in (2, 3):
        raise BadParameter("sample table needs 2 or 3 columns")
    return from_samples(data[:, 0], data[:, 1], data[:, 2] if data.shape[1] == 3 else None)


def derivative(f: SmearingFunction, tol: float = 1e-10) -> SmearingFunction:
    """Return g = df/dt as a smearing; requires f(0) = f(T) = 0."""
    if f.deriv is None:
        raise NotDifferentiable(f"{f.kind} has no derivative data")
    ends = f.func(np.array([0.0, f.T]))
    if np.max(np.abs(ends)) > tol:
        raise BoundaryViolation(f"f(0), f(T) = {ends[0]:.3g}, {ends[1]:.3g}; both must vanish")
    return SmearingFunction(f.T, f"d/dt {f.kind}", f.deriv, antiderivative=f.func)


def scaled(f: SmearingFunction, c: float) -> SmearingFunction:
    """c * f, keeping derivative data."""
    d = f.deriv
    a = f.antiderivative
    return SmearingFunction(
        f.T, f"{c:g}*{f.kind}", lambda t: c * f.func(t),
        deriv=(lambda t: c * d(t)) if d is not None else None,
        antiderivative=(lambda t: c * a(t)) if a is not None else None,
    )


def oscillator_coefficients(f: SmearingFunction, m: float, omega: float, n: int = N_QUAD):
    """Coefficients (A_f, B_f, C_f) of the forced-oscillator kernel.

    ``omega = 0`` gives the free-particle limit.  The mass enters only the
    kernel prefactor, not these coefficients; it is accepted for symmetry
    with the kernel signatures.
    """
    if omega < 0:
        raise BadParameter("omega must be >= 0")
    T = f.T
    s = f.nodes(n)
    fs = f.func(s)
    if omega == 0.0:
        a_f = simpson(s * fs, x=s) / T
        b_f = simpson((T - s) * fs, x=s) / T
        inner = cumulative_simpson(s * fs, x=s, initial=0.0)
        c_f = simpson((T - s) * fs * inner, x=s) / T
        return float(a_f), float(b_f), float(c_f)
    sin_wt = np.sin(omega * T)
    if abs(sin_wt) < 1e-9:
        raise CausticSingularity(f"sin(omega T) = {sin_wt:.2e}: focusing time")
    a_f = simpson(np.sin(omega * s) * fs, x=s) / sin_wt
    b_f = simpson(np.sin(omega * (T - s)) * fs, x=s) / sin_wt
    inner = cumulative_simpson(np.sin(omega * s) * fs, x=s, initial=0.0)
    c_f = simpson(np.sin(omega * (T - s)) * fs * inner, x=s) / (omega * sin_wt)
    return float(a_f), float(b_f), float(c_f)
