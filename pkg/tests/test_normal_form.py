import math

import numpy as np
import pytest

from anharmonic.classical import ActionPair, OscillatorModel
from anharmonic.errors import GridTooCoarse
from anharmonic.flow import angular_momentum, flow_fourier_coefficient, radial_average, radial_power
from anharmonic.lattice import default_params
from anharmonic.normal_form import (ActionGrid, NormalFormState, TorusSymbol, action_symbol, chi,
                                    cutoff_weights, demo_symbol, h0_bracket_modes, h0_symbol,
                                    normal_form_step, poisson_bracket, solve_homological,
                                    split_symbol)


@pytest.fixture(scope="module")
def params(m2):
    return default_params(m2)


@pytest.fixture(scope="module")
def grid():
    return ActionGrid(10.0, 1000.0)


@pytest.fixture(scope="module")
def symbol(grid):
    return demo_symbol(grid)


def test_chi():
    t = np.linspace(-2, 2, 4001)
    c = chi(t)
    assert np.array_equal(c, chi(-t))
    assert np.all((c >= 0) & (c <= 1))
    assert chi(0.5) == 1.0 and chi(1.0) == 0.0
    h = 1e-2
    d4 = (chi(t + 2 * h) - 4 * chi(t + h) + 6 * c - 4 * chi(t - h) + chi(t - 2 * h)) / h**4
    assert np.max(np.abs(d4)) < 1e5


def test_symbol_reality_and_evaluation(symbol):
    assert symbol.reality_defect() == 0.0
    phi = (0.3, -1.1)
    K = symbol.K
    direct = sum(symbol.mode((k1, k2)) * np.exp(1j * (k1 * phi[0] + k2 * phi[1]))
                 for k1 in range(-K, K + 1) for k2 in range(-K, K + 1))
    assert np.allclose(symbol.evaluate(phi), direct.real, atol=1e-12)
    assert np.max(np.abs(direct.imag)) < 1e-10


def test_symbol_json_roundtrip(symbol):
    back = TorusSymbol.from_json(symbol.to_json())
    assert np.array_equal(back.coeffs, symbol.coeffs) and back.grid == symbol.grid
    with pytest.raises(ValueError):
        TorusSymbol.from_json('{"format": "other"}')


def test_truncate_records_tail(symbol):
    t = symbol.truncate(1)
    assert t.K == 1 and t.tail > 0
    assert np.array_equal(t.truncate(symbol.K).coeffs[symbol.K - 1:symbol.K + 2,
                                                      symbol.K - 1:symbol.K + 2], t.coeffs)


def test_split_reconstructs(symbol, m2, params):
    parts = split_symbol(symbol, m2, params)
    assert np.max(np.abs(parts.total().coeffs - symbol.coeffs)) < 1e-15 * np.max(np.abs(symbol.coeffs))


def test_split_average_only(grid, m2, params):
    f = TorusSymbol.from_modes(grid, 4, {(0, 0): lambda a1, a2: np.hypot(a1, a2)})
    parts = split_symbol(f, m2, params)
    assert not np.any(parts.resonant.coeffs) and not np.any(parts.nonresonant.coeffs)
    assert np.allclose((parts.average + parts.smoothing).coeffs, f.coeffs, rtol=0, atol=1e-14)
    assert not np.any(solve_homological(f, m2, params).coeffs)


def test_nonresonant_support(m2, params):
    # chi~ = 1 needs |k| <= |a|^eps / 2, i.e. |a| beyond about 1e5 for |k| = 1
    symbol = demo_symbol(ActionGrid(2.0**18, 2.0**19, n_rho=16, n_theta=16), K=4)
    cw = cutoff_weights(m2, params, symbol.grid, symbol.K)
    parts = split_symbol(symbol, m2, params)
    K = symbol.K
    full = (cw.chi_k == 0) & (cw.chi_tilde == 1) & (cw.outer == 1)[None, None]
    full[K, K] = False
    assert np.any(full)
    assert np.array_equal(parts.nonresonant.coeffs[full], symbol.coeffs[full])


def test_homological_residual(symbol, m2, params):
    parts = split_symbol(symbol, m2, params)
    g = solve_homological(symbol, m2, params)
    assert g.reality_defect() < 1e-15
    resid = h0_bracket_modes(g, m2).coeffs + parts.nonresonant.coeffs
    assert np.max(np.abs(resid)) < 1e-14 * np.max(np.abs(parts.nonresonant.coeffs))


def test_bracket_paths_agree(symbol, m2, params):
    g = solve_homological(symbol, m2, params)
    alg = h0_bracket_modes(g, m2)
    fd = poisson_bracket(h0_symbol(m2, symbol.grid, symbol.K), g, m2).truncate(symbol.K)
    assert np.max(np.abs(fd.coeffs - alg.coeffs)) < 1e-5 * np.max(np.abs(alg.coeffs))


def test_bracket_antisymmetry(grid):
    f = demo_symbol(grid, K=4)
    assert poisson_bracket(f, f).sup_norm() < 1e-10 * f.sup_norm()
    a1, a2 = action_symbol(grid, 4, 0), action_symbol(grid, 4, 1)
    assert poisson_bracket(a1, a2).sup_norm() == 0.0


def test_coarse_grid_is_reported(m2, params):
    coarse = ActionGrid(10.0, 1000.0, n_rho=12, n_theta=12)
    f = demo_symbol(coarse, K=4)
    g = solve_homological(f, m2, params)
    with pytest.raises(GridTooCoarse):
        poisson_bracket(f, g, m2)


def test_step_on_action_function(grid, m2, params):
    v = TorusSymbol.from_modes(grid, 4, {(0, 0): lambda a1, a2: np.hypot(a1, a2) ** (2 / 3)}, 2 / 3)
    st = normal_form_step(NormalFormState.initial(v), m2, params)
    assert not np.any(st.v.coeffs)
    assert np.array_equal(st.z_list[0].coeffs, split_symbol(v, m2, params).average.coeffs)
    assert st.order_ledger[-1] == pytest.approx(2 / 3 - params.rho)


def test_step_gain(m2, params):
    """Sup norm of the remainder on [A, 2A] after one step scales like A^-rho within a factor 3."""
    norms = []
    for A in (2.0**17, 2.0**18, 2.0**19):
        g = ActionGrid(A, 2 * A, n_rho=32, n_theta=64)
        st = normal_form_step(NormalFormState.initial(demo_symbol(g, K=8, order_m=params.order)),
                              m2, params)
        v0 = demo_symbol(g, K=8, order_m=params.order).sup_norm() / A**params.order
        assert st.v.reality_defect() < 1e-12
        assert st.order_ledger == (params.order, params.order - params.rho)
        norms.append(st.v.sup_norm() / A**params.order / v0)
    expected = 2.0 ** (-params.rho)
    for lo, hi in zip(norms, norms[1:]):
        assert expected / 3 <= hi / lo <= 3 * expected


def test_flow_invariant_function(m2):
    a = ActionPair(1.3, 0.6)
    assert flow_fourier_coefficient(m2, angular_momentum, a) == pytest.approx(0.6, abs=1e-10)
    assert abs(flow_fourier_coefficient(m2, angular_momentum, a, (1, 0))) < 1e-10
    assert abs(flow_fourier_coefficient(m2, angular_momentum, a, (0, 1))) < 1e-10


def test_flow_harmonic_virial(m1):
    for a in [(0.5, 0.0), (1.5, 2.0), (3.5, -1.0)]:
        avg = flow_fourier_coefficient(m1, radial_power(1.0), ActionPair(*a)).real
        assert avg == pytest.approx(2 * a[0] + a[1], abs=1e-9)


def test_flow_average_matches_radial_quadrature(m2):
    a = ActionPair(1.1, 0.4)
    f = flow_fourier_coefficient(m2, radial_power(1.0), a).real
    assert f == pytest.approx(radial_average(m2, lambda r: r**2, a), rel=1e-9)


def test_flow_step_refinement(m2):
    a = ActionPair(0.9, -0.3)
    c = [flow_fourier_coefficient(m2, radial_power(1.0), a, (1, 0), n) for n in (32, 64, 128)]
    assert abs(c[1] - c[0]) < 1e-6 and abs(c[2] - c[1]) < 1e-6
