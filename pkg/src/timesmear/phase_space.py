"""Coherent-state path sums and fixed-k class operators for phase-space functionals.

Coherent states |z> = e^{-|z|^2/2} sum_n z^n / sqrt(n!) |n> with overlap
<z|z'> = exp(-|z|^2/2 - |z'|^2/2 + z* z').  A path z_0 ... z_n carries the
exponent

    (|z_n|^2 - |z_0|^2)/2 + sum_i [-|z_i|^2 + z*_{i-1} z_i] + i dt sum_i h(z*_{i-1}, z_i),

which is the product of overlaps <z_{i-1}|z_i> times e^{i dt h}; this is
the "overlap" convention.  The "cc_literal" convention uses the literal
display sum_i z_i (z*_i - z*_{i-1}) with h(z*_i, z_{i-1}); its Gaussian
part grows with |z| and is kept only as a sensitivity switch.

Functionals enter the exponent as + i k F.  For the Liouville functional
V = i sum_i z_i (z*_i - z*_{i-1}) this multiplies the overlap part by
(1 + k); the intermediate measures become (1 + k) d^2z / pi, which keeps
the Gaussian layers normalized.  For h = omega z* z the result is then
exactly (1 + i omega dt / (1 + k))^{n N}, the sliced form of
exp(i H T / (1 + k)) with H = omega N.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Callable

import numpy as np

from .errors import BadParameter, CostBudgetExceeded, PoleAtMinusOne, StepTooLarge
from .linalg_core import HilbertSpace, Operator
from .smearing import SmearingFunction

CONVENTIONS = ("overlap", "cc_literal")
MAX_GRID = 200
MAX_FOCK = 8
MAX_STEPS = 4


@dataclass(frozen=True, eq=False)
class CoherentFrame:
    """Quadrature points z_j and weights w_j with sum_j w_j |z_j><z_j| ~ 1."""

    fock_dim: int
    z: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        if self.z.shape != self.w.shape or self.z.ndim != 1:
            raise BadParameter("frame points and weights must be matching 1-d arrays")

    @classmethod
    def polar(cls, fock_dim: int, n_radial: int = 9, n_angle: int = 28,
              cutoff: float | None = None) -> CoherentFrame:
        """Gauss-Laguerre in u = |z|^2 times a uniform angle grid.

        d^2z / pi = du dtheta / (2 pi); nodes beyond the radius cutoff
        (default sqrt(2 fock_dim)) are dropped.
        """
        cutoff = np.sqrt(2 * fock_dim) if cutoff is None else cutoff
        u, wu = np.polynomial.laguerre.laggauss(n_radial)
        keep = u <= cutoff**2
        u, wu = u[keep], wu[keep] * np.exp(u[keep])
        theta = 2 * np.pi * np.arange(n_angle) / n_angle
        z = (np.sqrt(u)[:, None] * np.exp(1j * theta)[None, :]).ravel()
        w = np.repeat(wu / n_angle, n_angle)
        return cls(fock_dim, z, w)

    def __len__(self) -> int:
        return self.z.size

    def fock_overlaps(self, dim: int | None = None) -> np.ndarray:
        """<n|z_j> as an array (dim, G)."""
        dim = self.fock_dim if dim is None else dim
        n = np.arange(dim)
        norm = np.array([np.sqrt(float(factorial(k))) for k in n])
        return np.exp(-np.abs(self.z) ** 2 / 2)[None, :] * self.z[None, :] ** n[:, None] / norm[:, None]

    def completeness_error(self, levels: int | None = None) -> float:
        levels = self.fock_dim // 2 if levels is None else levels
        v = self.fock_overlaps(levels)
        res = (v * self.w) @ v.conj().T
        return float(np.linalg.norm(res - np.eye(levels)))


@dataclass(frozen=True)
class PathFunctional:
    """Ultralocal sum_i f(t_i) a(z*_{i-1}, z_i) dt, or the Liouville term."""

    kind: str
    f: SmearingFunction | None = None
    a: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("ultralocal", "liouville"):
            raise BadParameter(f"unknown functional kind {self.kind!r}")
        if self.kind == "ultralocal" and (self.f is None or self.a is None):
            raise BadParameter("an ultralocal functional needs f and a(zbar, z)")

    @classmethod
    def liouville(cls) -> PathFunctional:
        return cls("liouville")

    @classmethod
    def ultralocal(cls, f: SmearingFunction, a: Callable) -> PathFunctional:
        return cls("ultralocal", f, a)

    def evaluate(self, path, dt: float) -> complex:
        z = np.asarray(path, dtype=complex)
        if self.kind == "liouville":
            return complex(1j * np.sum(z[1:] * (np.conj(z[1:]) - np.conj(z[:-1]))))
        t = dt * np.arange(1, z.size)
        return complex(np.sum(self.f(t) * self.a(np.conj(z[:-1]), z[1:])) * dt)


def _check_step(hvals, dt: float) -> None:
    hmax = float(np.max(np.abs(hvals))) if np.size(hvals) else 0.0
    if dt * hmax >= 0.5:
        raise StepTooLarge(f"dt max|h| = {dt * hmax:.3g} must stay below 0.5")


def path_amplitude(frame: CoherentFrame | None, h: Callable, path, dt: float,
                   convention: str = "overlap") -> complex:
    """Amplitude of one discretized path (frame is accepted for symmetry; unused)."""
    if convention not in CONVENTIONS:
        raise BadParameter(f"unknown convention {convention!r}")
    z = np.asarray(path, dtype=complex)
    if z.size < 2:
        raise BadParameter("a path needs at least two points")
    prev, nxt = z[:-1], z[1:]
    if convention == "overlap":
        hv = h(np.conj(prev), nxt)
        kin = np.sum(-np.abs(nxt) ** 2 + np.conj(prev) * nxt)
    else:
        hv = h(np.conj(nxt), prev)
        kin = np.sum(nxt * (np.conj(nxt) - np.conj(prev)))
    _check_step(hv, dt)
    expo = (abs(z[-1]) ** 2 - abs(z[0]) ** 2) / 2 + kin + 1j * dt * np.sum(hv)
    return complex(np.exp(expo))


def _step_kernel(frame, h, functional, k, dt, t, convention):
    """exp of one step's exponent on all grid pairs (z_prev, z_next)."""
    zp, zn = frame.z[:, None], frame.z[None, :]
    if convention == "overlap":
        hv = h(np.conj(zp), zn)
        kin = -np.abs(zn) ** 2 + np.conj(zp) * zn
    else:
        hv = h(np.conj(zn), zp)
        kin = np.abs(zn) ** 2 - zn * np.conj(zp)
    _check_step(hv, dt)
    expo = kin + 1j * dt * hv
    if functional.kind == "liouville":
        expo = expo + k * kin
    else:
        expo = expo + 1j * k * dt * functional.f(t) * functional.a(np.conj(zp), zn)
    return np.exp(expo)


def functional_class_operator_fixed_k(frame: CoherentFrame, h: Callable, functional: PathFunctional,
                                      k: float, n: int, T: float,
                                      convention: str = "overlap") -> Operator:
    """Fock matrix of the fixed-k path sum with n steps over [0, T].

    All layers z_0 ... z_n run over the frame; the Fock elements follow
    from <m|z_0> and <z_n|n>.
    """
    if convention not in CONVENTIONS:
        raise BadParameter(f"unknown convention {convention!r}")
    if len(frame) > MAX_GRID or frame.fock_dim > MAX_FOCK or n > MAX_STEPS:
        raise CostBudgetExceeded(f"limits: grid <= {MAX_GRID}, fock_dim <= {MAX_FOCK}, "
                                 f"n <= {MAX_STEPS}; got {len(frame)}, {frame.fock_dim}, {n}")
    if n < 1:
        raise BadParameter("need at least one step")
    scale = 1.0
    if functional.kind == "liouville":
        if abs(1 + k) < 1e-12:
            raise PoleAtMinusOne("k = -1 is a pole of the Liouville class operator")
        scale = 1.0 + k
    dt = T / n
    abs2 = np.abs(frame.z) ** 2
    # <m|z_0> e^{-|z_0|^2/2} from the boundary term, weighted
    left = frame.fock_overlaps() * np.exp(-abs2 / 2)[None, :] * frame.w[None, :]
    acc = left
    for i in range(1, n + 1):
        kern = _step_kernel(frame, h, functional, k, dt, i * dt, convention)
        acc = (acc @ kern) * (scale * frame.w)[None, :]
    # e^{|z_n|^2/2} boundary times <z_n|n>
    right = np.conj(frame.fock_overlaps()) * np.exp(abs2 / 2)[None, :]
    return Operator(HilbertSpace.fock(frame.fock_dim - 1), acc @ right.T)


def harmonic_symbol(omega: float) -> Callable:
    """h(zbar, z) = omega zbar z, the symbol of omega N."""
    return lambda zb, z: omega * zb * z


def sliced_liouville(omega: float, T: float, k: float, n: int, fock_dim: int) -> np.ndarray:
    """Diagonal of (1 + i omega T / (n (1 + k)))^{n N}, the exact n-step path sum."""
    if abs(1 + k) < 1e-12:
        raise PoleAtMinusOne("k = -1 is a pole of the Liouville class operator")
    a = 1 + 1j * omega * T / (n * (1 + k))
    return a ** (n * np.arange(fock_dim))


def relative_error(op: np.ndarray, ref: np.ndarray, levels: int = 3) -> float:
    """Frobenius error on the lowest levels relative to the reference block."""
    d = op[:levels, :levels] - ref[:levels, :levels]
    return float(np.linalg.norm(d) / np.linalg.norm(ref[:levels, :levels]))
