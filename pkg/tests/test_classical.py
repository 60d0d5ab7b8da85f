import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import beta as beta_fn

from anharmonic.classical import (ActionPair, EnergyMomentum, OscillatorModel, action_a1,
                                  action_map, circular_radius, effective_potential, frequencies,
                                  invert_energy, max_momentum, radial_action,
                                  radial_action_direct, residue_decomposition, turning_points)
from anharmonic.errors import CircularBoundary, Inadmissible


def beta_oracle(ell, E):
    R = (2 * ell * E) ** (1 / (2 * ell))
    return math.sqrt(2 * E) * R / math.pi * beta_fn(1 / (2 * ell), 1.5) / (2 * ell)


@pytest.mark.parametrize("ell", [1, 2, 3, 5])
def test_model_exponents(ell):
    m = OscillatorModel(ell)
    assert m.M == (ell - 1) / (ell + 1)
    assert m.energy_degree == 2 * ell / (ell + 1)


def test_model_rejects_bad_ell():
    with pytest.raises((ValueError, Inadmissible)):
        OscillatorModel(0)


def test_effective_potential(m2):
    assert effective_potential(m2, 0.0, 1.0) == pytest.approx(0.25)
    assert effective_potential(m2, 1.0, 1.0) == pytest.approx(0.75)
    assert circular_radius(m2, 1.0) == pytest.approx(1.0)


def test_turning_points(m1, m2):
    tp = turning_points(m2, EnergyMomentum(1.0, 0.0))
    assert tp.r_m == 0.0 and tp.r_M == pytest.approx(4 ** 0.25, rel=1e-14)
    tp = turning_points(m1, EnergyMomentum(1.0, 0.5))
    assert tp.r_m == pytest.approx(math.sqrt(1 - math.sqrt(3) / 2), rel=1e-13)
    assert tp.r_M == pytest.approx(math.sqrt(1 + math.sqrt(3) / 2), rel=1e-13)
    assert len(tp.s_roots) == m1.ell + 1
    with pytest.raises(CircularBoundary):
        turning_points(m2, EnergyMomentum(0.75, 1.0))


def test_turning_points_are_roots(m2):
    E, L = 2.0, 0.7
    tp = turning_points(m2, EnergyMomentum(E, L))
    for r in (tp.r_m, tp.r_M):
        assert effective_potential(m2, L, r) == pytest.approx(E, rel=1e-12)


def test_inadmissible(m2):
    with pytest.raises(Inadmissible):
        radial_action(m2, EnergyMomentum(1.0, 5.0))
    with pytest.raises(Inadmissible):
        radial_action(m2, EnergyMomentum(-1.0, 0.0))


def test_radial_action_values(m1, m2):
    assert radial_action(m1, EnergyMomentum(1.0, 0.5)) == pytest.approx(0.25, abs=1e-13)
    assert radial_action(m2, EnergyMomentum(1.0, 0.0)) == pytest.approx(beta_oracle(2, 1.0), abs=1e-12)
    assert radial_action(m2, EnergyMomentum(0.75, 1.0)) == 0.0


def test_radial_action_against_direct_quadrature(m2):
    for E, L in [(1.0, 0.3), (2.5, -1.1), (0.8, 0.9)]:
        em = EnergyMomentum(E, L)
        assert radial_action(m2, em) == pytest.approx(radial_action_direct(m2, em), rel=1e-8)


def test_action_a1(m1, m2):
    assert action_a1(m1, EnergyMomentum(1.0, 0.5)) == pytest.approx(0.25, abs=1e-13)
    assert action_a1(m1, EnergyMomentum(1.0, -0.5)) == pytest.approx(0.75, abs=1e-13)
    assert action_a1(m2, EnergyMomentum(0.75, 1.0)) == 0.0


def test_residue_decomposition(m1, m2):
    s, f = residue_decomposition(m2, EnergyMomentum(1.0, 0.0))
    assert s == 0.0 and f == pytest.approx(beta_oracle(2, 1.0), abs=1e-12)
    for L in (0.5, -0.5):
        assert residue_decomposition(m1, EnergyMomentum(1.0, L))[1] == pytest.approx(0.5, abs=1e-13)


def test_residue_smoothness_probe(m2):
    g = lambda L: residue_decomposition(m2, EnergyMomentum(1.0, L))[1]
    second = [abs(g(h) - 2 * g(0.0) + g(-h)) / h**2 for h in (1e-2, 5e-3, 2.5e-3)]
    assert max(second) < 2 * min(second)
    a = lambda L: radial_action(m2, EnergyMomentum(1.0, L))
    h = 1e-5
    jump = (a(h) - a(0.0)) / h - (a(0.0) - a(-h)) / h
    assert jump == pytest.approx(-1.0, abs=1e-4)


def test_invert_energy(m1, m2):
    assert invert_energy(m1, ActionPair(0.25, 0.5)) == pytest.approx(1.0, rel=1e-12)
    assert invert_energy(m2, ActionPair(1e-10, 1.0)) == pytest.approx(0.75, rel=1e-8)
    a = ActionPair(0.7, 0.4)
    E = invert_energy(m2, a)
    for lam in (2.0, 5.0):
        assert invert_energy(m2, ActionPair(lam * a[0], lam * a[1])) == pytest.approx(
            lam ** (4 / 3) * E, rel=1e-8)
    with pytest.raises(Inadmissible):
        invert_energy(m2, ActionPair(0.5, -1.0))


def test_frequencies(m1, m2):
    assert np.allclose(frequencies(m1, ActionPair(0.3, 0.8)), (2, 1), atol=1e-10)
    assert np.allclose(frequencies(m2, ActionPair(1e-8, 1.0)), (math.sqrt(6), 1), rtol=1e-6)
    a = ActionPair(0.6, -0.2)
    w = np.array(frequencies(m2, a))
    w3 = np.array(frequencies(m2, ActionPair(3 * a[0], 3 * a[1])))
    assert np.allclose(w3, 3 ** (1 / 3) * w, rtol=1e-7)


admissible = st.tuples(st.floats(0.2, 5.0), st.floats(-0.95, 0.95))


@settings(max_examples=25, deadline=None)
@given(admissible)
def test_action_roundtrip_and_cone(m2, p):
    E, frac = p
    em = EnergyMomentum(E, frac * max_momentum(m2, E))
    a = action_map(m2, em)
    assert a.a1 >= 0 and (a.a2 >= 0 or a.a1 >= abs(a.a2))
    assert invert_energy(m2, a) == pytest.approx(E, rel=1e-10)
    assert frequencies(m2, a).omega1 > 0
