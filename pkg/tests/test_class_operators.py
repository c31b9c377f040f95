from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timesmear.class_operators import (KGrid, build_family, class_family, lattice_position_D,
                                       momentum_family, set_transform, velocity_family)
from timesmear.errors import Aliasing, BadParameter, BoundaryViolation, MissingNode, OutOfWindow
from timesmear.linalg_core import indicator_of
from timesmear.models import free_particle_momentum, two_level
from timesmear.oracles import two_level_band_limited, velocity_bin_element
from timesmear.propagator import TimeSlicing, evolve_family
from timesmear.smearing import make_standard


def test_kgrid_geometry():
    kg = KGrid(10.0, 101)
    assert kg.dk == pytest.approx(0.2)
    assert kg.period == pytest.approx(2 * np.pi / 0.2)
    assert kg.a_grid.size == 101 and kg.a_grid[50] == 0.0
    with pytest.raises(BadParameter):
        KGrid(10.0, 100)


def test_alias_guard():
    m = two_level(1.0)
    with pytest.raises(Aliasing):
        class_family(m, m.observables["sx"], make_standard("uniform", 1.0), KGrid(40, 21))


def test_missing_node():
    m = two_level(1.0)
    f = make_standard("uniform", 1.0)
    fam = evolve_family(m, m.observables["sx"], f, KGrid(5, 11).ks, TimeSlicing(64))
    with pytest.raises(MissingNode):
        build_family(fam, KGrid(5, 13))


def test_set_transform_zero_node():
    assert set_transform(np.array([0.0]), [(-1.0, 2.5)])[0] == pytest.approx(3.5)


def test_commuting_bin_is_spectral_projector():
    m = two_level(0.0)
    f = make_standard("uniform", 1.0)
    fam = class_family(m, m.observables["sz"], f, KGrid(200, 401), TimeSlicing(16), taper=200 / 6)
    d_u = fam.integrate_set((0.5, 1.5)).matrix
    assert np.linalg.norm(d_u - np.diag([1, 0])) < 1e-6


def test_d_is_back_evolved_c(qubit_family):
    back = qubit_family.back_evolution
    assert np.allclose(qubit_family.D, back[None] @ qubit_family.C, atol=1e-14)


def test_full_window_completeness(qubit_family):
    assert qubit_family.completeness_residual() < 1e-6
    full = qubit_family.integrate_set(qubit_family.window).matrix
    assert np.linalg.norm(full - np.eye(2)) < 1e-6


def test_window_residual_shrinks_with_n_k():
    m = two_level(1.0)
    f = make_standard("uniform", 1.0)
    res = [class_family(m, m.observables["sx"], f, KGrid(40, n), TimeSlicing(256))
           .completeness_residual("safe") for n in (129, 257, 513)]
    assert res[0] > res[1] > res[2]


def test_out_of_window(qubit_family):
    with pytest.raises(OutOfWindow):
        qubit_family.integrate_set((0.0, 1e3))


@settings(max_examples=25, deadline=None)
@given(lo=st.floats(-3, 3), w1=st.floats(0.01, 2), w2=st.floats(0.01, 2))
def test_additivity(qubit_family, lo, w1, w2):
    a = qubit_family.integrate_set((lo, lo + w1)).matrix
    b = qubit_family.integrate_set((lo + w1, lo + w1 + w2)).matrix
    ab = qubit_family.integrate_set((lo, lo + w1 + w2)).matrix
    assert np.linalg.norm(a + b - ab) < 1e-10


def test_matches_band_limited_oracle(qubit_family):
    kg = qubit_family.kgrid
    a = qubit_family.a_grid[::7]
    ref = two_level_band_limited(1.0, 1.0, kg.ks, a)
    assert np.max(np.linalg.norm(qubit_family.C_at(a) - ref, axis=(1, 2))) < 1e-4


def test_reflection_under_sign_flip(qubit_model):
    # flipping A -> -A maps C(a) to C(-a)
    f = make_standard("raised_cosine", 1.0)
    kg = KGrid(20, 201)
    plus = class_family(qubit_model, qubit_model.observables["sx"], f, kg, TimeSlicing(512))
    minus = class_family(qubit_model, -1.0 * qubit_model.observables["sx"], f, kg,
                         TimeSlicing(512))
    a = np.linspace(-2, 2, 9)
    assert np.allclose(plus.C_at(a), minus.C_at(-a), atol=1e-8)


def test_integrate_sets_stack(qubit_family):
    sets = [(-1.2, 0.0), (0.0, 1.2)]
    stack = qubit_family.integrate_sets(sets)
    for s, d in zip(sets, stack):
        assert np.allclose(d, qubit_family.integrate_set(s).matrix)


def test_velocity_needs_vanishing_ends():
    with pytest.raises(BoundaryViolation):
        velocity_family(free_particle_momentum(1.0, 32, 4.0), make_standard("uniform", 1.0),
                        KGrid(5, 31))


def test_velocity_bins_diagonal_fresnel():
    m = free_particle_momentum(1.0, 128, 4.0)
    f = make_standard("sine_bump_unit", 10.0)
    fam = velocity_family(m, f, KGrid(30, 301), TimeSlicing(1024))
    d_u = fam.integrate_set((0.3, 1.1)).matrix
    assert np.count_nonzero(d_u - np.diag(np.diag(d_u))) == 0
    p = m.grid()
    num = np.diag(d_u)
    ref = velocity_bin_element(1.0, 10.0, 0.3, 1.1, p)
    inside = np.abs(p) < 2.5
    assert np.max(np.abs(num[inside] - ref[inside])) < 2e-2


def test_momentum_bins_are_projectors():
    m = free_particle_momentum(1.0, 64, 4.0)
    f = make_standard("sine_bump_unit", 5.0)
    fam = momentum_family(m, f, KGrid(400, 1601), TimeSlicing(16), taper=400 / 6)
    dp = 0.125
    lo, hi = 0.5 + dp / 2, 1.5 + dp / 2
    d_u = fam.integrate_set((lo, hi)).matrix
    ref = indicator_of(m.observables["p"], (lo, hi)).matrix
    assert np.linalg.norm(d_u - ref) < 1e-4


def test_lattice_position_d_streams():
    m = free_particle_momentum(1.0, 32, 4.0)
    f = make_standard("uniform", 1.0)
    dp = 0.25
    kg = KGrid(4 * dp, 9)
    d = lattice_position_D(m, f, kg, [0.0, 1.0])
    assert d.shape == (2, 32, 32) and np.all(np.isfinite(d))
