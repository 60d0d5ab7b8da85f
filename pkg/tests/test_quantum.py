import math

import numpy as np
import pytest

from anharmonic.classical import ActionPair, OscillatorModel, invert_energy
from anharmonic.errors import HighDispersion, Inadmissible
from anharmonic.quantum import (RadialProblem, SpectrumCache, VTerm, Window, _solve,
                                bohr_sommerfeld_predict, counting_function, default_problem,
                                estimate_kappa, joint_spectrum, perturbed_spectrum,
                                radial_eigenvalues, radial_grid, spectrum_tables,
                                stable_eigenvalue_check, state_of_lattice_point,
                                write_joint_csv, write_spectrum_csv)


@pytest.mark.parametrize("m", [0, 2, -3])
def test_harmonic_radial_spectrum(m1, m):
    tab = radial_eigenvalues(default_problem(m1, m, 6), 6)
    exact = 2 * np.arange(6) + abs(m) + 1
    assert np.allclose(tab.energies, exact, rtol=0, atol=1e-8)
    assert max(r.boundary_residual for r in tab.records) < 1e-10


def test_ground_state_self_convergence(m2):
    base = default_problem(m2, 0, 4)
    E1 = radial_eigenvalues(base, 4)[0].E
    finer = RadialProblem(2, 0, 1.2 * base.r_max, int(1.7 * base.n_points))
    E2 = radial_eigenvalues(finer, 4)[0].E
    assert abs(E1 - E2) / E1 < 1e-7


def test_spectrum_rejects_bad_requests(m2):
    with pytest.raises(ValueError):
        radial_eigenvalues(default_problem(m2, 0, 3), 0)
    with pytest.raises(ValueError):
        RadialProblem(2, 0, 5.0, 10)


def test_harmonic_joint_spectrum(m1):
    tabs = spectrum_tables(m1, range(-3, 4), 5, jobs=2)
    pts = joint_spectrum(m1, tabs)
    assert max(p.distance for p in pts) < 1e-9
    assert estimate_kappa(pts).kappa == pytest.approx((0.5, 0.0), abs=1e-9)


def test_tables_parallel_equals_serial(m2):
    a = spectrum_tables(m2, range(-2, 3), 4, jobs=1)
    b = spectrum_tables(m2, range(-2, 3), 4, jobs=3)
    assert list(a) == list(b)
    assert all(np.array_equal(a[m].energies, b[m].energies) for m in a)


def test_estimate_kappa_synthetic():
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.integers(0, 50, 40) + 0.5, rng.integers(-20, 20, 40)]).astype(float)
    k = estimate_kappa(pts)
    assert k.kappa == pytest.approx((0.5, 0.0), abs=1e-12)
    shifted = pts + rng.integers(-5, 5, pts.shape)
    assert estimate_kappa(shifted, weights=np.hypot(*pts.T)).kappa == pytest.approx(k.kappa, abs=1e-12)
    with pytest.raises(HighDispersion):
        estimate_kappa(rng.uniform(0, 50, (40, 2)))
    with pytest.raises(ValueError):
        estimate_kappa(pts[:10])


def test_bohr_sommerfeld(m1, m2):
    for n, m in [(0, 0), (2, 1), (3, 4)]:
        assert bohr_sommerfeld_predict(m1, (n + 0.5, m)).leading == pytest.approx(2 * (n + 0.5) + m)
    a = ActionPair(2.5, 1.0)
    lam = 3.0
    scaled = bohr_sommerfeld_predict(m2, (lam * a[0], lam * a[1])).leading
    assert scaled == pytest.approx(lam ** (4 / 3) * invert_energy(m2, a), rel=1e-9)


def test_bohr_sommerfeld_error_decays(m2):
    errs, radii = [], []
    tab = radial_eigenvalues(default_problem(m2, 0, 40), 40)
    for n in (4, 9, 19, 39):
        a = (n + 0.5, 0.0)
        errs.append(abs(tab[n].E - bohr_sommerfeld_predict(m2, a).leading))
        radii.append(math.hypot(*a))
    assert np.polyfit(np.log(radii), np.log(errs), 1)[0] < 0


def test_state_of_lattice_point():
    assert state_of_lattice_point((3.5, 2)) == (3, 2)
    assert state_of_lattice_point((3.5, -2)) == (1, -2)
    with pytest.raises(Inadmissible):
        state_of_lattice_point((0.5, -2))


def test_perturbed_zero_epsilon(m2):
    recs = perturbed_spectrum(m2, [VTerm(1.0, 1.0)], 0.0, Window(2, -1, 1))
    assert all(r.E == r.E0 for r in recs)


def test_harmonic_radial_perturbation_exact(m1):
    eps = 1e-3
    for r in perturbed_spectrum(m1, [VTerm(1.0, 1.0)], eps, Window(3, -2, 2)):
        assert r.E == pytest.approx((2 * r.n + abs(r.m) + 1) * math.sqrt(1 + 2 * eps), abs=1e-9)


def test_hellmann_feynman(m2):
    prob = default_problem(m2, 1, 3)
    fine = prob.refined(8)
    _, vec = _solve(fine, 3, vectors=True)
    r, _ = radial_grid(fine)
    expect = np.sum(vec**2 * (r**2)[:, None], axis=0)
    shifts = {}
    for eps in (1e-3, 1e-4):
        recs = perturbed_spectrum(m2, [VTerm(1.0, 1.0)], eps, Window(2, 1, 1))
        shifts[eps] = np.array([(rc.E - rc.E0) / eps for rc in recs])
    first = (1e-3 * shifts[1e-4] - 1e-4 * shifts[1e-3]) / (1e-3 - 1e-4)
    assert np.allclose(first, expect, rtol=1e-5)


def test_galerkin_anisotropic_oracle(m1):
    """eps x1^2 = eps r^2 (1 + cos 2 theta)/2 makes the oscillator anisotropic.

    The window must hold whole degenerate levels 2n+|m|+1 = const of the harmonic
    model; (n, m) in {0} x {-1, 0, 1} are exactly the levels 1 and 2.
    """
    eps = 1e-3
    v = [VTerm(0.5, 1.0), VTerm(0.5, 1.0, 2)]
    recs = perturbed_spectrum(m1, v, eps, Window(0, -1, 1))
    low = sorted(r.E for r in recs)
    s = math.sqrt(1 + 2 * eps)
    exact = sorted((n1 + 0.5) * s + n2 + 0.5 for n1 in range(2) for n2 in range(2) if n1 + n2 <= 1)
    assert np.allclose(low, exact, rtol=0, atol=1e-8)


def test_perturbed_rejects_high_order(m2):
    with pytest.raises(Inadmissible):
        perturbed_spectrum(m2, [VTerm(1.0, 2.0)], 1e-3, Window(1, 0, 0))


def test_stability_zero_and_harmonic(m1, m2):
    pts = [(1.5, 0.0), (2.5, 1.0), (3.5, -1.0)]
    rep = stable_eigenvalue_check(m2, [VTerm(1.0, 1.0)], 0.0, pts)
    assert rep.deviation == [0.0, 0.0, 0.0]
    eps = 1e-3
    rep = stable_eigenvalue_check(m1, [VTerm(1.0, 1.0)], eps, pts)
    for p, dev, lam0 in zip(pts, rep.deviation, rep.lambda0):
        # exact: lam0 (sqrt(1 + 2 eps) - 1 - eps) = -lam0 eps^2 / 2 + O(eps^3)
        assert dev == pytest.approx(lam0 * eps**2 / 2, rel=1e-2)


def test_counting_function_harmonic(m1):
    levels, _ = counting_function(m1, 4.5)
    assert len(levels) == 1 + 2 + 3 + 4


def test_cache_roundtrip_and_safety(m2, tmp_path):
    cache = SpectrumCache(tmp_path / "c")
    prob = default_problem(m2, 1, 5)
    cold = radial_eigenvalues(prob, 5, cache)
    warm = radial_eigenvalues(prob, 5, cache)
    assert np.array_equal(cold.energies, warm.energies)
    assert np.array_equal(radial_eigenvalues(prob, 5).energies, cold.energies)
    assert cache.load({"kind": "other"}) is None


def test_csv_export(m1, tmp_path):
    tabs = spectrum_tables(m1, range(0, 2), 2)
    write_spectrum_csv(tmp_path / "s.csv", tabs, {"ell": 1})
    write_joint_csv(tmp_path / "j.csv", joint_spectrum(m1, tabs), {"ell": 1})
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# ell: 1" and lines[1] == "n,m,E,boundary_residual" and len(lines) == 6
    assert (tmp_path / "j.csv").read_text().splitlines()[1].startswith("n,m,E,lambda1")
