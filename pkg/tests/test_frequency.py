import math

import numpy as np
import pytest

from anharmonic.classical import ActionPair, OscillatorModel, invert_energy
from anharmonic.errors import DegenerateMap
from anharmonic.frequency import (circular_closed_forms, circular_expansion_check,
                                  directional_derivative_scan, frequency_ratio_slope,
                                  omega_on_circle, russmann_constants, sphere_table)


def test_omega_on_circle(m1, m2):
    assert np.allclose(omega_on_circle(m2, math.pi / 2), (math.sqrt(6), 1), rtol=1e-12)
    assert np.allclose(omega_on_circle(m1, math.pi / 4), (2, 1), atol=1e-10)
    w = omega_on_circle(m2, 0.0)
    assert all(np.isfinite(w)) and min(w) > 0


def test_sphere_table_fit(m2):
    tab = sphere_table(2)
    assert tab.residual < 1e-9
    phi = tab.phi_grid(7)
    assert np.all(np.diff(phi) > 0)
    direct = np.array([omega_on_circle(m2, p) for p in phi[1:-1]]).T
    assert np.allclose(tab(phi[1:-1]), direct, rtol=1e-9)


def test_directional_scan_harmonic_degenerate(m1):
    _, tab = directional_derivative_scan(m1, (1, -2))
    assert np.max(tab[0]) < 1e-8


def test_directional_scan(m2):
    phi, tab = directional_derivative_scan(m2, (0, 1))
    assert np.min(tab[0]) > 0
    _, tab2 = directional_derivative_scan(m2, (0, 2))
    assert np.array_equal(tab, tab2)
    with pytest.raises(ValueError):
        directional_derivative_scan(m2, (0, 0))


def test_russmann(m1, m2):
    with pytest.raises(DegenerateMap):
        russmann_constants(m1)
    rep = russmann_constants(m2)
    assert 1 <= rep.mu0 <= 2 and rep.beta > 0
    assert russmann_constants(m2).to_json() == rep.to_json()


def test_circular_expansion_leading_terms(m2):
    res = circular_expansion_check(m2)
    assert res["rel_err"]["c0"] < 0.01 and res["rel_err"]["c1"] < 0.01
    assert res["fitted"]["c0"] == pytest.approx(0.75, rel=1e-3)
    assert res["fitted"]["c1"] == pytest.approx(math.sqrt(6), rel=1e-3)


def test_circular_expansion_second_order_closed_form(m2):
    """The stated second-order coefficient (0.67593) is not what the model produces;
    the fit lands on the value from a direct expansion of the effective potential."""
    res = circular_expansion_check(m2)
    assert res["closed_form"]["c2"] == pytest.approx(1168 / (48 * 36), rel=1e-12)
    assert res["fitted"]["c2"] == pytest.approx(res["c2_birkhoff"], rel=0.01)
    assert res["c2_birkhoff"] == pytest.approx(7 / 12, rel=1e-12)


@pytest.mark.xfail(strict=True, reason="the stated coefficients give c2 = 0.67593 but the "
                   "model's second-order coefficient is 7/12")
def test_circular_expansion_stated_c2(m2):
    assert circular_expansion_check(m2)["rel_err"]["c2"] < 0.01


def test_circular_expansion_harmonic(m1):
    res = circular_expansion_check(m1)
    assert res["fitted"]["c1"] == pytest.approx(2.0, rel=1e-9)


def test_circular_expansion_scaling(m2):
    a = circular_expansion_check(m2, 1.0)["fitted"]
    b = circular_expansion_check(m2, 8.0)["fitted"]
    # h0(a1, a2) of degree 4/3 => c_j(a2) ~ a2^(4/3 - j)
    for j, key in enumerate(("c0", "c1", "c2")):
        assert b[key] == pytest.approx(a[key] * 8.0 ** (4 / 3 - j), rel=1e-3)


def test_frequency_ratio_slope(m1, m2):
    res = frequency_ratio_slope(m2)
    assert res["intercept"] == pytest.approx(1 / math.sqrt(6), rel=0.02)
    assert res["d_closed_form"] == pytest.approx(0.34021, rel=1e-4)
    assert res["rel_err"]["d"] < 0.02
    assert frequency_ratio_slope(m1)["d_closed_form"] == 0.0
    for ell in (2, 3, 4):
        assert circular_closed_forms(ell)["c0"] > 0
