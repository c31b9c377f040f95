"""Catalog of concrete systems: qubit, truncated oscillator, free particle grids.

Units with hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadParameter, EdgeProximity
from .linalg_core import HilbertSpace, Operator, State, pauli


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    params: dict
    space: HilbertSpace
    H: Operator
    observables: dict = field(default_factory=dict)

    @property
    def mass(self) -> float | None:
        return self.params.get("m")

    def grid(self) -> np.ndarray | None:
        """Diagonal coordinate values for grid bases (x or p)."""
        return self.params.get("grid")

    def describe(self) -> dict:
        return {"name": self.name, **{k: v for k, v in self.params.items() if k != "grid"}}


def two_level(omega: float) -> ModelSpec:
    s = pauli()
    return ModelSpec(
        "two_level", {"omega": float(omega)}, s["sz"].space, float(omega) * s["sz"],
        {"sx": s["sx"], "sy": s["sy"], "sz": s["sz"], "id": s["id"]},
    )


def oscillator(m: float, omega: float, n_max: int) -> ModelSpec:
    if m <= 0 or omega <= 0:
        raise BadParameter("oscillator needs m > 0 and omega > 0")
    if n_max < 2:
        raise BadParameter("n_max must be >= 2")
    space = HilbertSpace.fock(n_max)
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), 1)
    n = a.conj().T @ a
    x = (a + a.conj().T) / np.sqrt(2 * m * omega)
    p = 1j * np.sqrt(m * omega / 2) * (a.conj().T - a)
    H = omega * (n + 0.5 * np.eye(n_max + 1))
    obs = {"x": Operator(space, x), "p": Operator(space, p), "n": Operator(space, n),
           "a": Operator(space, a)}
    return ModelSpec("oscillator", {"m": float(m), "omega": float(omega), "n_max": n_max},
                     space, Operator(space, H), obs)


def _dft_unitary(n: int) -> np.ndarray:
    return np.fft.fft(np.eye(n), axis=0, norm="ortho")


def free_particle(m: float, n_points: int, length: float) -> ModelSpec:
    """Periodic position grid; x diagonal, p spectral through the DFT.

    x spans [-L/2, L/2).  Plane waves feel the jump of x at the boundary, so
    only states localized well inside the box are faithful.
    """
    if m <= 0 or length <= 0 or n_points < 2:
        raise BadParameter("free_particle needs m, L > 0 and n_points >= 2")
    space = HilbertSpace.position_grid(n_points, length)
    dx = length / n_points
    x = -length / 2 + dx * np.arange(n_points)
    k = 2 * np.pi * np.fft.fftfreq(n_points, d=dx)
    F = _dft_unitary(n_points)
    p = F.conj().T @ np.diag(k) @ F
    # k**2 is even in k, so the kinetic matrix is real symmetric
    H = (F.conj().T @ np.diag(k**2 / (2 * m)) @ F).real
    obs = {"x": Operator(space, np.diag(x)), "p": Operator(space, p)}
    return ModelSpec(
        "free_particle",
        {"m": float(m), "n_points": n_points, "L": float(length), "grid": x, "momenta": k},
        space, Operator(space, H), obs,
    )


def free_particle_momentum(m: float, n_points: int, p_max: float) -> ModelSpec:
    """Free particle on a momentum lattice p_j in [-p_max, p_max).

    Here x is not stored as a matrix: it acts as the generator of momentum
    translations (see :func:`timesmear.propagator.evolve_translation_family`).
    """
    if m <= 0 or p_max <= 0 or n_points < 2:
        raise BadParameter("free_particle_momentum needs m, p_max > 0 and n_points >= 2")
    space = HilbertSpace.momentum_grid(n_points, p_max)
    dp = 2 * p_max / n_points
    p = -p_max + dp * np.arange(n_points)
    obs = {"p": Operator(space, np.diag(p))}
    return ModelSpec(
        "free_particle_momentum",
        {"m": float(m), "n_points": n_points, "p_max": float(p_max), "grid": p},
        space, Operator(space, np.diag(p**2 / (2 * m))), obs,
    )


def build(name: str, **params) -> ModelSpec:
    builders = {
        "two_level": two_level,
        "oscillator": oscillator,
        "free_particle": free_particle,
        "free_particle_momentum": free_particle_momentum,
    }
    if name not in builders:
        raise BadParameter(f"unknown model {name!r}")
    try:
        return builders[name](**params)
    except TypeError as exc:
        raise BadParameter(f"{name}: {exc}") from None


def gaussian_state(model: ModelSpec, x0: float, p0: float, sigma: float) -> State:
    """Minimum-uncertainty packet with position width ``sigma``."""
    if sigma <= 0:
        raise BadParameter("sigma must be positive")
    if model.space.basis == "position_grid":
        L = model.params["L"]
        if abs(x0) > L / 2 - 5 * sigma:
            raise EdgeProximity(f"x0 = {x0} lies within 5 sigma of the box edge")
        x = model.grid()
        psi = np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * p0 * x)
        return State.pure(model.space, psi)
    if model.space.basis == "momentum_grid":
        sp = 1.0 / (2 * sigma)
        if abs(p0) > model.params["p_max"] - 5 * sp:
            raise EdgeProximity(f"p0 = {p0} lies within 5 sigma_p of the lattice edge")
        p = model.grid()
        psi = np.exp(-((p - p0) ** 2) / (4 * sp**2) - 1j * p * x0)
        return State.pure(model.space, psi)
    if model.space.basis == "fock_truncated":
        m, w = model.params["m"], model.params["omega"]
        if abs(sigma - 1 / np.sqrt(2 * m * w)) > 1e-12:
            raise BadParameter("Fock basis supports only the coherent width 1/sqrt(2 m omega)")
        alpha = np.sqrt(m * w / 2) * x0 + 1j * p0 / np.sqrt(2 * m * w)
        n = np.arange(model.space.dim)
        logfact = np.array([np.sum(np.log(np.arange(1, k + 1))) for k in n])
        psi = np.exp(n * np.log(alpha + 0j) - 0.5 * logfact) if alpha != 0 else (n == 0).astype(complex)
        return State.pure(model.space, psi)
    raise BadParameter(f"gaussian_state unsupported for basis {model.space.basis}")
