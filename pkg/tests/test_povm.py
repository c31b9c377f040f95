from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timesmear.class_operators import KGrid, class_family
from timesmear.errors import BadParameter, NotNormalized, WindowOverflow
from timesmear.linalg_core import State
from timesmear.models import two_level
from timesmear.povm import (PointerState, apparatus_pointer_distribution, bin_probabilities,
                            binned_class_probabilities, build_povm, clipped_mass, delta_sweep,
                            export_csv, grid_probability, pointer_distribution, probability,
                            provenance_hash)
from timesmear.propagator import TimeSlicing
from timesmear.smearing import make_standard

KG = KGrid(30, 241)
SL = TimeSlicing(1024)


@pytest.fixture(scope="module")
def setup():
    m = two_level(1.0)
    f = make_standard("uniform", 1.0)
    fam = class_family(m, m.observables["sx"], f, KG, SL)
    pov = build_povm(fam, PointerState.gaussian(0.3))
    rho = State.pure(m.space, [0.8, 0.6j])
    return m, f, fam, pov, rho


@pytest.mark.parametrize("delta", [0.1, 0.3, 1.0])
def test_gaussian_pointer_normalized_and_transform(delta):
    ptr = PointerState.gaussian(delta, center=0.2)
    assert ptr.norm == pytest.approx(1.0, abs=1e-8)
    a = np.linspace(-15 * delta, 15 * delta, 20001) + 0.2
    for k in (0.0, 1.3 / delta):
        num = np.trapezoid(ptr.w(a) * np.exp(-1j * k * a), a)
        assert abs(num - ptr.ft(k)) < 1e-8


def test_pointer_rejects_bad_width():
    with pytest.raises(BadParameter):
        PointerState.gaussian(0.0)


def test_sampled_pointer_matches_gaussian():
    ref = PointerState.gaussian(0.5)
    a = np.linspace(-6, 6, 4001)
    ptr = PointerState.from_samples(a, ref.w(a))
    assert ptr.width == pytest.approx(0.5, rel=1e-6)
    assert abs(ptr.ft(np.array([0.8]))[0] - ref.ft(0.8)) < 1e-8


def test_sampled_pointer_not_normalized():
    a = np.linspace(-6, 6, 2001)
    with pytest.raises(NotNormalized):
        PointerState.from_samples(a, 2 * PointerState.gaussian(0.5).w(a))


def test_povm_is_hermitian_positive_complete(setup):
    _, _, _, pov, _ = setup
    assert pov.hermiticity_error() < 1e-12
    assert pov.min_eigenvalue() > -1e-12
    assert pov.completeness_residual() < 1e-10


def test_effect_over_window_is_identity(setup):
    _, _, fam, pov, _ = setup
    assert np.allclose(pov.effect(fam.window).matrix, np.eye(2), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3.0, 3.0))
def test_effects_are_additive(cut):
    m = two_level(1.0)
    fam = class_family(m, m.observables["sx"], make_standard("uniform", 1.0), KG, SL)
    pov = build_povm(fam, PointerState.gaussian(0.3))
    lo, hi = -3.5, 3.5
    whole = pov.effect((lo, hi)).matrix
    parts = pov.effect((lo, cut)).matrix + pov.effect((cut, hi)).matrix
    assert np.allclose(whole, parts, atol=1e-10)


def test_exact_and_grid_probabilities_agree_roughly(setup):
    m, _, _, pov, rho = setup
    p = probability(pov, rho, m.H, 1.0, (-0.5, 0.5))
    g = grid_probability(pov, rho, m.H, 1.0, (-0.5, 0.5))
    assert 0 <= p <= 1 and abs(p - g) < 3 * pov.dx * pointer_distribution(pov, rho, m.H, 1.0).max()


def test_density_normalized_and_little_clipped(setup):
    m, _, _, pov, rho = setup
    dens = pointer_distribution(pov, rho, m.H, 1.0)
    assert np.sum(dens) * pov.dx == pytest.approx(1.0, abs=1e-10)
    assert clipped_mass(pov, rho, m.H, 1.0) < 1e-12


def test_apparatus_model_reproduces_povm(setup):
    m, f, _, pov, rho = setup
    app = apparatus_pointer_distribution(m, m.observables["sx"], f, rho, pov.pointer,
                                         pov.x_grid, KG, SL)
    assert np.max(np.abs(app - pointer_distribution(pov, rho, m.H, 1.0))) < 1e-10


def test_pointer_too_wide(setup):
    _, _, fam, _, _ = setup
    with pytest.raises(WindowOverflow):
        build_povm(fam, PointerState.gaussian(5.0))


def test_x_grid_outside_window(setup):
    _, _, fam, _, _ = setup
    with pytest.raises(WindowOverflow):
        build_povm(fam, PointerState.gaussian(0.3), x_grid=np.array([0.0, 1e3]))


def test_bin_probabilities():
    x = np.arange(10) * 0.5
    out = bin_probabilities(np.ones(10), x, 0.5, [0.0, 2.0, 10.0])
    assert np.allclose(out, [2.0, 3.0])


def test_binned_class_probabilities_sum_to_one(setup):
    _, _, fam, _, rho = setup
    lo, hi = fam.window
    p = binned_class_probabilities(fam, rho, [lo, -0.5, 0.5, hi])
    assert p.sum() == pytest.approx(1.0, abs=0.2)
    assert np.all(p >= 0)


def test_delta_sweep_structure(setup):
    _, _, fam, _, rho = setup
    out = delta_sweep(fam, rho, [-1.2, 0.0, 1.2])
    assert set(out) == {"deltas", "deviation", "exponent"} and len(out["deviation"]) == 3
    with pytest.raises(BadParameter):
        delta_sweep(fam, rho, [-1.25, 0.0, 1.2], deltas=(0.4, 0.2))


def test_export_csv(tmp_path):
    meta = {"scenario": "x", "k_max": 30}
    path = export_csv(tmp_path / "p.csv", [0.0, 1.0, 2.0], [0.25, 0.75], meta)
    lines = path.read_text().splitlines()
    assert lines[0] == f"# provenance {provenance_hash(meta)}"
    assert lines[2] == "x_lo,x_hi,probability" and len(lines) == 5
    assert provenance_hash(meta) == provenance_hash(dict(reversed(list(meta.items()))))


def test_family_taper_does_not_spoil_completeness():
    m = two_level(1.0)
    fam = class_family(m, m.observables["sz"], make_standard("uniform", 1.0), KGrid(200, 401),
                       TimeSlicing(16), taper=200 / 6)
    pov = build_povm(fam, PointerState.gaussian(0.05))
    assert pov.completeness_residual() < 1e-10
    assert np.allclose(pov.effect(fam.window).matrix, np.eye(2), atol=1e-10)
