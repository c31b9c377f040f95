from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timesmear.errors import BadParameter, CostBudgetExceeded, PoleAtMinusOne, StepTooLarge
from timesmear.oracles import liouville_class_unitary
from timesmear.phase_space import (CoherentFrame, PathFunctional, functional_class_operator_fixed_k,
                                   harmonic_symbol, path_amplitude, relative_error,
                                   sliced_liouville)
from timesmear.smearing import make_standard

T = 0.12


@pytest.fixture(scope="module")
def frame():
    return CoherentFrame.polar(6)


def test_frame_resolves_identity_on_low_levels(frame):
    assert len(frame) == 168
    assert frame.completeness_error(3) < 1e-3


def test_frame_cutoff_drops_outer_nodes():
    assert len(CoherentFrame.polar(6, cutoff=1.0)) < len(CoherentFrame.polar(6))


def test_frame_shape_check():
    with pytest.raises(BadParameter):
        CoherentFrame(4, np.zeros(3, complex), np.zeros(2))


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.integers(2, 5))
def test_constant_path_amplitude(x, y, n):
    # a constant path has no kinetic phase: amplitude e^{i n dt h(z*, z)}
    z = complex(x, y)
    dt = 0.01
    amp = path_amplitude(None, harmonic_symbol(1.0), [z] * (n + 1), dt)
    assert amp == pytest.approx(np.exp(1j * n * dt * abs(z) ** 2), abs=1e-12)


def test_path_amplitude_checks():
    h = harmonic_symbol(1.0)
    with pytest.raises(BadParameter):
        path_amplitude(None, h, [0.1], 0.1)
    with pytest.raises(BadParameter):
        path_amplitude(None, h, [0.1, 0.2], 0.1, convention="other")
    with pytest.raises(StepTooLarge):
        path_amplitude(None, h, [3.0, 3.0], 0.1)


def test_liouville_functional_value():
    z = np.array([1.0, 1j, 0.5])
    ref = 1j * (1j * (-1j - 1.0) + 0.5 * (0.5 + 1j))
    assert PathFunctional.liouville().evaluate(z, 0.1) == pytest.approx(ref)


def test_ultralocal_functional_value():
    f = make_standard("uniform", 1.0)
    fn = PathFunctional.ultralocal(f, lambda zb, z: zb * z)
    z = np.array([1.0, 2.0, 3.0])
    assert fn.evaluate(z, 0.5) == pytest.approx(0.5 * (1 * 2 + 2 * 3) * 1.0)


def test_functional_kind_checks():
    with pytest.raises(BadParameter):
        PathFunctional("other")
    with pytest.raises(BadParameter):
        PathFunctional("ultralocal")


@pytest.mark.parametrize("k", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("n", [3, 4])
def test_liouville_matches_closed_forms(frame, k, n):
    op = functional_class_operator_fixed_k(frame, harmonic_symbol(1.0), PathFunctional.liouville(),
                                           k, n, T).matrix
    assert relative_error(op, np.diag(sliced_liouville(1.0, T, k, n, 6))) < 3e-3
    assert relative_error(op, liouville_class_unitary(1.0, T, k, 6).matrix) < 3e-3


def test_ultralocal_constant_gives_phase(frame):
    # a = c constant: the functional is c int f, so the class operator picks up e^{i k c}
    f = make_standard("uniform", T)
    h = harmonic_symbol(1.0)
    base = functional_class_operator_fixed_k(frame, h, PathFunctional.liouville(), 0.0, 3, T).matrix
    op = functional_class_operator_fixed_k(frame, h, PathFunctional.ultralocal(f, lambda zb, z: 0.7 + 0 * z),
                                           2.0, 3, T).matrix
    assert np.allclose(op, np.exp(1.4j) * base, atol=1e-12)


def test_guards(frame):
    h = harmonic_symbol(1.0)
    fn = PathFunctional.liouville()
    with pytest.raises(PoleAtMinusOne):
        functional_class_operator_fixed_k(frame, h, fn, -1.0, 3, T)
    with pytest.raises(CostBudgetExceeded):
        functional_class_operator_fixed_k(frame, h, fn, 0.0, 5, T)
    with pytest.raises(CostBudgetExceeded):
        functional_class_operator_fixed_k(CoherentFrame.polar(6, n_angle=40), h, fn, 0.0, 3, T)
    with pytest.raises(StepTooLarge):
        functional_class_operator_fixed_k(frame, h, fn, 0.0, 1, T)
    with pytest.raises(BadParameter):
        functional_class_operator_fixed_k(frame, h, fn, 0.0, 3, T, convention="other")
    with pytest.raises(PoleAtMinusOne):
        sliced_liouville(1.0, T, -1.0, 3, 4)


def test_sliced_form_tends_to_unitary():
    ref = np.diag(liouville_class_unitary(1.0, 1.0, 0.5, 5).matrix)
    err = [np.max(np.abs(sliced_liouville(1.0, 1.0, 0.5, n, 5) - ref)) for n in (10, 100, 1000)]
    assert err[0] > err[1] > err[2] and err[2] < 1e-3
