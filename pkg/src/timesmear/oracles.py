"""Closed-form reference results, independent of the numerical pipeline.

Nothing here imports :mod:`propagator` or :mod:`class_operators`; the
oracles only use the smearing quadratures and elementary linear algebra.

Conventions follow :mod:`timesmear.propagator`: ``U_f(T, k)`` is the adjoint
of the forward propagator of ``H + k f A`` and ``D(a) = e^{-iHT} C(a)``.
Under that ordering ``D(a)`` is the Fourier transform of
``e^{i gamma k^2} e^{i k X}`` with ``X = int f(t) A(t - T) dt`` (Heisenberg
picture referred to the final time).  For the free particle this gives

    <x|D(a)|x'> = m / (2 pi B T) exp[-i m/(2T) ((x'^2 - x^2)
                   + (2/B)(A x' - a)(x' - x) - 2C/(B^2 T) (x' - x)^2)]

and for the oscillator the same structure with ``m/T -> m w / sin wT``,
``x'^2 - x^2 -> cos wT (x'^2 - x^2)`` and ``2C/(B^2 T) -> 2 w C/(B^2 sin wT)``.

Two-level system, H = w sigma_z, A = sigma_x, uniform f over [0, T]: the
operator density on (-1, 1) is

    C(a) = -(b / 2s) J1(b s) (1 + a sigma_x) + i (b/2) J0(b s) sigma_z,

b = w T, s = sqrt(1 - a^2), plus point masses P_+ at a = 1 and P_- at a = -1
(P_pm the sigma_x eigenprojectors) carrying the large-k limit e^{ik sigma_x}.
"""

from __future__ import annotations

import decimal
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CausticSingularity, DegenerateB, PoleAtMinusOne
from .linalg_core import HilbertSpace, Operator, pauli
from .smearing import SmearingFunction, oscillator_coefficients

SERIES_LIMIT = 25.0
_PREC = 60


# -- Bessel functions of the first kind, orders 0 and 1 --------------------

def _bessel_series(n: int, z: float) -> float:
    if z == 0.0:
        return 1.0 if n == 0 else 0.0
    with decimal.localcontext() as ctx:
        ctx.prec = _PREC
        half = decimal.Decimal(repr(z)) / 2
        term = half**n / math.factorial(n)
        total = term
        q = -half * half
        m = 0
        eps = decimal.Decimal(10) ** (-(_PREC - 5))
        while True:
            m += 1
            term = term * q / (m * (m + n))
            total += term
            if abs(term) < eps * (abs(total) + eps):
                break
        return float(total)


def _bessel_hankel(n: int, z: float) -> float:
    """Hankel asymptotic expansion, truncated at the smallest term."""
    mu = 4.0 * n * n
    p, q = 1.0, 0.0
    term = 1.0
    k = 1
    last = float("inf")
    while k < 200:
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        if abs(term) > last:
            break
        last = abs(term)
        if k % 2:
            q += term if (k // 2) % 2 == 0 else -term
        else:
            p += -term if (k // 2) % 2 else term
        if abs(term) < 1e-17:
            break
        k += 1
    chi = z - (n / 2 + 0.25) * math.pi
    return math.sqrt(2 / (math.pi * z)) * (p * math.cos(chi) - q * math.sin(chi))


def bessel_j(n: int, z) -> np.ndarray | float:
    """J_0 or J_1: exact-arithmetic power series below |z| = 25, Hankel above."""
    if n not in (0, 1):
        raise ValueError("only orders 0 and 1 are implemented")

    def one(v: float) -> float:
        sign = -1.0 if (v < 0 and n == 1) else 1.0
        v = abs(v)
        if v < SERIES_LIMIT:
            return sign * _bessel_series(n, v)
        return sign * _bessel_hankel(n, v)

    arr = np.asarray(z, dtype=float)
    if arr.ndim == 0:
        return one(float(arr))
    return np.vectorize(one, otypes=[float])(arr)


def _j1_over(b: float, s: np.ndarray) -> np.ndarray:
    """J1(b s) / s with the s -> 0 limit b / 2."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    small = s < 1e-8
    out[small] = b / 2
    out[~small] = bessel_j(1, b * s[~small]) / s[~small]
    return out


# -- Two-level system --------------------------------------------------------

def two_level_density(omega: float, T: float, a) -> np.ndarray:
    """Regular part of C(a); returns matrices of shape a.shape + (2, 2)."""
    s_ = pauli()
    one, sx, sz = (s_[k].matrix for k in ("id", "sx", "sz"))
    a = np.asarray(a, dtype=float)
    b = omega * T
    inside = np.abs(a) <= 1.0
    s = np.sqrt(np.clip(1.0 - a**2, 0.0, None))
    j1 = np.where(inside, _j1_over(b, s), 0.0)
    j0 = np.where(inside, bessel_j(0, b * s), 0.0)
    coef = -(b / 2) * j1
    out = (coef[..., None, None] * (one + a[..., None, None] * sx)
           + (0.5j * b * j0)[..., None, None] * sz)
    return out


def two_level_class_op(omega: float, T: float, a: float) -> Operator:
    """Regular part of C(a) at one point; zero outside |a| <= 1."""
    return Operator(HilbertSpace.qubit(), two_level_density(omega, T, np.array(a)))


def two_level_edge_masses() -> dict[float, np.ndarray]:
    """Point masses of C at the spectral edges a = +1 and a = -1."""
    sx = pauli()["sx"].matrix
    return {1.0: (np.eye(2) + sx) / 2, -1.0: (np.eye(2) - sx) / 2}


def two_level_bin(omega: float, T: float, lo: float, hi: float, n_gauss: int = 96) -> np.ndarray:
    """Integral of C(a) over [lo, hi], edge masses included when inside."""
    nodes, weights = np.polynomial.legendre.leggauss(n_gauss)
    a_lo, a_hi = max(lo, -1.0), min(hi, 1.0)
    out = np.zeros((2, 2), dtype=complex)
    if a_hi > a_lo:
        a = 0.5 * (a_hi - a_lo) * nodes + 0.5 * (a_hi + a_lo)
        out += 0.5 * (a_hi - a_lo) * np.tensordot(weights, two_level_density(omega, T, a), axes=1)
    for edge, proj in two_level_edge_masses().items():
        if lo < edge < hi:
            out += proj
    return out


def two_level_transform(omega: float, T: float, ks, n_gauss: int | None = None) -> np.ndarray:
    """U(k) = int C(a) e^{ika} da including the edge masses, by Gauss-Legendre.

    The regular density is an entire function of a on [-1, 1], so the
    quadrature converges geometrically once the node count exceeds the
    oscillation count of e^{ika}; the default scales with max |k|.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    if n_gauss is None:
        n_gauss = 96 + int(np.max(np.abs(ks), initial=0.0) + omega * T)
    nodes, weights = np.polynomial.legendre.leggauss(n_gauss)
    dens = two_level_density(omega, T, nodes)
    phase = np.exp(1j * np.outer(ks, nodes)) * weights
    out = np.tensordot(phase, dens, axes=(1, 0))
    for edge, proj in two_level_edge_masses().items():
        out += np.exp(1j * ks * edge)[:, None, None] * proj
    return out


def two_level_band_limited(omega: float, T: float, ks, a) -> np.ndarray:
    """The oracle C(a) passed through the same finite k sum as the numerics.

    ``(dk / 2pi) sum_m e^{-i k_m a} U(k_m)`` with the oracle U(k); this is
    the object a k grid can resolve, point masses included.
    """
    ks = np.asarray(ks, dtype=float)
    dk = ks[1] - ks[0]
    a = np.atleast_1d(np.asarray(a, dtype=float))
    u = two_level_transform(omega, T, ks)
    phase = np.exp(-1j * np.outer(a, ks)) * dk / (2 * np.pi)
    return np.tensordot(phase, u, axes=(1, 0))


# -- Gaussian kernels --------------------------------------------------------

def free_particle_kernel(m: float, f: SmearingFunction, a, x, xp):
    """<x|D(a)|x'> for the free particle."""
    A, B, C = oscillator_coefficients(f, m, 0.0)
    if abs(B) < 1e-12:
        raise DegenerateB(f"B_f = {B:.3g}")
    T = f.T
    x, xp, a = (np.asarray(v, dtype=float) for v in (x, xp, a))
    q = (xp**2 - x**2) + (2 / B) * (A * xp - a) * (xp - x) - (2 * C / (B**2 * T)) * (xp - x) ** 2
    return m / (2 * np.pi * B * T) * np.exp(-0.5j * m / T * q)


def oscillator_kernel(m: float, omega: float, f: SmearingFunction, a, x, xp):
    """<x|D(a)|x'> for the oscillator under an external smeared force.

    The bracket reading is the one that reduces term by term to
    :func:`free_particle_kernel` as omega -> 0.
    """
    if omega == 0.0:
        return free_particle_kernel(m, f, a, x, xp)
    T = f.T
    s = np.sin(omega * T)
    if abs(s) < 1e-9:
        raise CausticSingularity(f"sin(omega T) = {s:.2e}")
    A, B, C = oscillator_coefficients(f, m, omega)
    if abs(B) < 1e-12:
        raise DegenerateB(f"B_f = {B:.3g}")
    x, xp, a = (np.asarray(v, dtype=float) for v in (x, xp, a))
    cw = np.cos(omega * T)
    q = (cw * (xp**2 - x**2) + (2 / B) * (A * xp - a) * (xp - x)
         - (2 * omega * C / (B**2 * s)) * (xp - x) ** 2)
    return m * omega / (2 * np.pi * B * s) * np.exp(-0.5j * m * omega / s * q)


# -- Velocity ----------------------------------------------------------------

def velocity_variance(m: float, T: float, delta: float) -> float:
    return delta**2 + np.pi**4 / (2**8 * m**2 * T**2 * delta**2)


def velocity_povm_profile(m: float, T: float, delta: float, v, p):
    """Gaussian density in v - p/m with variance delta^2 + pi^4/(2^8 m^2 T^2 delta^2).

    This width belongs to the sine-bump smearing of unit integral,
    f(t) = (pi / 2T) sin(pi t / T).
    """
    var = velocity_variance(m, T, delta)
    v = np.asarray(v, dtype=float)
    return np.exp(-((v - np.asarray(p) / m) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)


def velocity_chirp(m: float, T: float) -> float:
    """gamma in D(a) = int dk/2pi e^{-ika + i gamma k^2 + i k p/m}, unit sine bump."""
    return np.pi**2 / (16 * m * T)


def velocity_class_kernel(m: float, T: float, a, p):
    """<p|D(a)|p> for the smeared velocity (unit sine bump); D is diagonal in p."""
    gam = velocity_chirp(m, T)
    w = np.asarray(a, dtype=float) - np.asarray(p, dtype=float) / m
    return np.exp(0.25j * np.pi) / (2 * np.pi) * np.sqrt(np.pi / gam) * np.exp(-1j * w**2 / (4 * gam))


def velocity_bin_element(m: float, T: float, lo: float, hi: float, p):
    """<p|D_U|p> for U = [lo, hi], via Fresnel integrals."""
    from scipy.special import fresnel

    gam = velocity_chirp(m, T)
    scale = 1 / np.sqrt(2 * np.pi * gam)  # u = w * scale -> phase pi u^2 / 2
    p = np.asarray(p, dtype=float)
    ends = [(edge - p / m) * scale for edge in (lo, hi)]
    (s0, c0), (s1, c1) = fresnel(ends[0]), fresnel(ends[1])
    integral = ((c1 - c0) - 1j * (s1 - s0)) / scale
    return np.exp(0.25j * np.pi) / (2 * np.pi) * np.sqrt(np.pi / gam) * integral


# -- Phase-space Liouville functional ---------------------------------------

def liouville_class_unitary(omega: float, T: float, k: float, fock_dim: int) -> Operator:
    """exp(i H T / (1 + k)) with H = omega N on a truncated Fock space."""
    if abs(1 + k) < 1e-12:
        raise PoleAtMinusOne("k = -1 is a pole of the Liouville class operator")
    n = np.arange(fock_dim)
    return Operator(HilbertSpace.fock(fock_dim - 1), np.diag(np.exp(1j * omega * n * T / (1 + k))))


@dataclass(frozen=True)
class OracleResult:
    name: str
    evaluate: Callable
    validity_domain: str


ORACLES = {
    o.name: o
    for o in (
        OracleResult("two_level_class_op", two_level_class_op,
                     "H = omega sigma_z, A = sigma_x, uniform f; density supported on |a| <= 1"),
        OracleResult("free_particle_kernel", free_particle_kernel, "T > 0, |B_f| >= 1e-12"),
        OracleResult("oscillator_kernel", oscillator_kernel, "sin(omega T) != 0, |B_f| >= 1e-12"),
        OracleResult("velocity_povm_profile", velocity_povm_profile,
                     "delta > 0, T > 0; unit sine-bump smearing"),
        OracleResult("liouville_class_unitary", liouville_class_unitary, "k != -1"),
    )
}
