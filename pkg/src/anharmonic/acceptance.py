"""Quantitative acceptance checks, shared by the test suite and ``anharmonic verify``.

Each check returns a :class:`CheckResult`; none of them raises on a failed
comparison, so a report can list every outcome.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import beta as beta_fn

from .classical import (ActionPair, EnergyMomentum, OscillatorModel, action_map, circular_energy,
                        frequencies, invert_energy, radial_action)
from .frequency import circular_expansion_check, frequency_ratio_slope, russmann_constants
from .lattice import (LatticeSpec, ResonanceParams, arc_measure_exponent, build_omega,
                      default_params, density_profile)

STABILITY_PARAMS = dict(delta=0.2, epsilon=0.02)
STABILITY_R = 150.0


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    runtime: float = 0.0
    budget: float | None = None

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.key}: {self.title} ({self.runtime:.1f}s)"


def _timed(key: str, title: str, budget: float):
    def wrap(fn: Callable[..., dict]):
        def run(**kw) -> CheckResult:
            t0 = time.perf_counter()
            passed, details = fn(**kw)
            dt = time.perf_counter() - t0
            ok = bool(passed) and dt < budget
            if passed and not ok:
                details["runtime_exceeded"] = True
            return CheckResult(key, title, ok, details, dt, budget)
        run.key = key
        run.title = title
        return run
    return wrap


def quartic_beta_oracle(ell: int, E: float) -> float:
    """``a_r(E, 0) = sqrt(2E) R / pi * B(1/(2l), 3/2) / (2l)`` with ``R = (2l E)^(1/(2l))``."""
    R = (2 * ell * E) ** (1 / (2 * ell))
    return math.sqrt(2 * E) * R / math.pi * beta_fn(1 / (2 * ell), 1.5) / (2 * ell)


def random_admissible(model: OscillatorModel, n: int, seed: int = 0) -> list[EnergyMomentum]:
    """Energies in ``[0.5, 5]`` and ``L`` uniform between the two circular limits."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        E = rng.uniform(0.5, 5.0)
        Lmax = _max_L(model, E)
        L = rng.uniform(-0.95, 0.95) * Lmax
        out.append(EnergyMomentum(E, L))
    return out


def _max_L(model, E):
    from scipy.optimize import brentq
    return brentq(lambda L: circular_energy(model, L) - E, 1e-12, 10 * (E + 1) ** 2)


# ---------------------------------------------------------------------------

@_timed("C1", "harmonic oracle (l=1)", 10.0)
def check_harmonic() -> tuple[bool, dict]:
    from .quantum import estimate_kappa, joint_spectrum, spectrum_tables

    m1 = OscillatorModel(1)
    pts = random_admissible(m1, 40, seed=1)
    ar_err = max(abs(radial_action(m1, p) - (p.E - abs(p.L)) / 2) for p in pts)
    w_err = 0.0
    for p in pts[:20]:
        a = action_map(m1, p)
        w = frequencies(m1, a)
        w_err = max(w_err, abs(w[0] - 2), abs(w[1] - 1))
    tabs = spectrum_tables(m1, range(-4, 5), 6)
    spec_err = max(abs(r.E - (2 * r.n + abs(r.m) + 1)) for t in tabs.values() for r in t.records)
    js = joint_spectrum(m1, tabs)
    dist = max(p.distance for p in js)
    kappa = estimate_kappa(js).kappa
    d = dict(a_r_error=ar_err, omega_error=w_err, spectrum_error=spec_err,
             max_joint_distance=dist, kappa=kappa)
    return ar_err < 1e-10 and w_err < 1e-8 and spec_err < 1e-6 and dist < 1e-6, d


@_timed("C2", "quartic closed form a_r(1, 0)", 1.0)
def check_quartic_closed_form() -> tuple[bool, dict]:
    m2 = OscillatorModel(2)
    value = radial_action(m2, EnergyMomentum(1.0, 0.0))
    oracle = quartic_beta_oracle(2, 1.0)
    return abs(value - oracle) < 1e-5, dict(value=value, beta_oracle=oracle,
                                             stated_value=0.556435, error=abs(value - oracle))


@_timed("C3", "homogeneity of actions, energy and frequencies", 30.0)
def check_homogeneity() -> tuple[bool, dict]:
    m2 = OscillatorModel(2)
    deg, M = m2.energy_degree, m2.M
    worst = {"actions": 0.0, "energy": 0.0, "frequency": 0.0}
    for p in random_admissible(m2, 100, seed=3):
        a = action_map(m2, p)
        E = invert_energy(m2, a)
        w = np.array(frequencies(m2, a))
        for lam in (0.5, 2.0, 10.0):
            b = action_map(m2, EnergyMomentum(lam**deg * p.E, lam * p.L))
            worst["actions"] = max(worst["actions"], abs(b[0] / (lam * a[0]) - 1))
            la = ActionPair(lam * a[0], lam * a[1])
            worst["energy"] = max(worst["energy"], abs(invert_energy(m2, la) / (lam**deg * E) - 1))
            wl = np.array(frequencies(m2, la))
            worst["frequency"] = max(worst["frequency"],
                                     float(np.max(np.abs(wl / (lam**M * w) - 1))))
    return max(worst.values()) < 1e-7, worst


@_timed("C4", "residue decomposition across L = 0", 10.0)
def check_residue() -> tuple[bool, dict]:
    m2 = OscillatorModel(2)
    E = 1.0
    f0 = radial_action(m2, EnergyMomentum(E, 0.0))
    smooth_gaps, jumps = [], []
    for h in (1e-2, 1e-3, 1e-4):
        fp = radial_action(m2, EnergyMomentum(E, h))
        fm = radial_action(m2, EnergyMomentum(E, -h))
        right, left = (fp - f0) / h, (f0 - fm) / h
        jumps.append(right - left)
        # a_r + |L|/2 adds +1/2 and -1/2 to the two one-sided slopes
        smooth_gaps.append(abs((right + 0.5) - (left - 0.5)))
    converging = all(b < a for a, b in zip(smooth_gaps, smooth_gaps[1:])) and smooth_gaps[-1] < 1e-3
    jump_err = abs(jumps[-1] + 1)
    return converging and jump_err < 1e-4, dict(smooth_slope_gaps=smooth_gaps, slope_jumps=jumps,
                                                 jump_error=jump_err)


@_timed("C5", "circular-orbit expansions (l=2)", 60.0)
def check_circular_expansion() -> tuple[bool, dict]:
    m2 = OscillatorModel(2)
    exp = circular_expansion_check(m2)
    ratio = frequency_ratio_slope(m2)
    tol = {"c0": 0.01, "c1": 0.01, "c2": 0.05}
    ok = {k: exp["rel_err"][k] < tol[k] for k in tol}
    ok["d"] = ratio["rel_err"]["d"] < 0.05
    return all(ok.values()), dict(fitted=exp["fitted"], closed_form=exp["closed_form"],
                                  c2_birkhoff=exp["c2_birkhoff"], rel_err=exp["rel_err"],
                                  d=ratio["d"], d_closed_form=ratio["d_closed_form"],
                                  d_rel_err=ratio["rel_err"]["d"], clause_ok=ok)


@_timed("C6", "homological equation", 30.0)
def check_homological() -> tuple[bool, dict]:
    from .normal_form import (ActionGrid, demo_symbol, h0_bracket_modes, h0_symbol,
                              poisson_bracket, solve_homological, split_symbol)

    m2 = OscillatorModel(2)
    params = default_params(m2)
    grid = ActionGrid(10.0, 1000.0)
    f = demo_symbol(grid)
    parts = split_symbol(f, m2, params)
    g = solve_homological(f, m2, params)
    alg = h0_bracket_modes(g, m2)
    scale = float(np.max(np.abs(parts.nonresonant.coeffs)))
    resid = float(np.max(np.abs(alg.coeffs + parts.nonresonant.coeffs))) / scale
    fd = poisson_bracket(h0_symbol(m2, grid, f.K), g, m2).truncate(f.K)
    fd_err = float(np.max(np.abs(fd.coeffs - alg.coeffs))) / float(np.max(np.abs(alg.coeffs)))
    return resid < 1e-14 and fd_err < 1e-5, dict(algebraic_residual=resid, fd_relative_error=fd_err,
                                                  nonresonant_norm=parts.nonresonant.sup_norm())


@_timed("C7", "joint-spectrum lattice clustering (l=2)", 900.0)
def check_clustering(cache=None, jobs: int = 1) -> tuple[bool, dict]:
    from .quantum import (clustering_fit, default_problem, estimate_kappa, joint_spectrum,
                          radial_eigenvalues, semiclassical_energy)

    m2 = OscillatorModel(2)
    spec = LatticeSpec()
    r_lo, r_hi = 10.0, 40.0
    E_cap = max(invert_energy(m2, ActionPair(1.1 * r_hi * math.cos(t), 1.1 * r_hi * math.sin(t)))
                for t in np.linspace(spec.cone[0], spec.cone[1], 9))
    m_top = int(math.ceil(1.1 * r_hi * math.sin(spec.cone[1]))) + 1
    tabs = {}
    for m in range(-m_top, m_top + 1):
        count = 1
        while semiclassical_energy(m2, count - 1, m) < E_cap:
            count += 1
        tabs[m] = radial_eigenvalues(default_problem(m2, m, count, 1.2 * E_cap + 1.0), count, cache)
    pts = joint_spectrum(m2, tabs)
    fit = clustering_fit(pts, r_lo, r_hi, cone=spec.cone)
    window = [p for p in pts if r_lo <= p.radius <= r_hi
              and spec.cone[0] <= math.atan2(p.lambda2, p.lambda1) <= spec.cone[1]]
    kap = estimate_kappa(window)
    kappa_err = max(abs((kap.kappa[i] - t + 0.5) % 1.0 - 0.5) for i, t in enumerate((0.5, 0.0)))
    scaled = [c * d for c, d in zip(fit["bin_centers"], fit["max_distance"])]
    bounded = max(scaled) <= 2 * min(scaled)
    slope_ok = fit["slope"] is not None and abs(fit["slope"] + 1) <= 0.3
    return bounded and slope_ok and kappa_err <= 0.05, dict(
        slope=fit["slope"], scaled_bin_maxima=scaled, max_scaled_distance=fit["max_scaled_distance"],
        points=fit["count"], kappa=kap.kappa, kappa_error=kappa_err)


@_timed("C8", "density-one trend (l=2, default parameters)", 300.0)
def check_density() -> tuple[bool, dict]:
    m2 = OscillatorModel(2)
    params = default_params(m2)
    prof = density_profile(m2, params, LatticeSpec(), [50, 100, 200, 400], strict=False)
    defects = [r["defect"] for r in prof["rows"]]
    nonincreasing = all(b <= a for a, b in zip(defects, defects[1:]))
    slope = prof["slope"]
    return nonincreasing and slope is not None and slope < 0, dict(
        defects=defects, slope=slope, predicted_slope=prof["predicted_slope"],
        params=params.to_dict())


@_timed("C9", "resonant-arc measure exponent", 120.0)
def check_arc_exponent() -> tuple[bool, dict]:
    m2 = OscillatorModel(2)
    mu0 = russmann_constants(m2).mu0
    res = arc_measure_exponent(m2)
    slope = res["slope"]
    return 0.5 / mu0 <= slope <= 2.0 / mu0, dict(slope=slope, mu0=mu0, measures=res["measures"])


def stability_points(n: int = 20) -> np.ndarray:
    m2 = OscillatorModel(2)
    params = ResonanceParams(2, **STABILITY_PARAMS).validate()
    om = build_omega(m2, params, LatticeSpec(), STABILITY_R)
    idx = np.linspace(0, len(om) - 1, n).round().astype(int)
    return om[idx]


@_timed("C10", "first-order eigenvalue stability", 1200.0)
def check_stability(cache=None) -> tuple[bool, dict]:
    from .flow import flow_fourier_coefficient, radial_power
    from .quantum import VTerm, Window, perturbed_spectrum, stable_eigenvalue_check

    eps = 1e-3
    m2 = OscillatorModel(2)
    pts = stability_points()
    rep = stable_eigenvalue_check(m2, [VTerm(1.0, 1.0)], eps, pts, cache=cache)
    r = np.hypot(*np.array(rep.points).T)
    bound = 5 * (eps**2 + eps * r**-0.2)
    dev = np.array(rep.deviation)
    quartic_ok = bool(np.all(dev <= bound))

    # harmonic control: H0 + eps |x|^2 has levels (2n+|m|+1) sqrt(1 + 2 eps) and <|x|^2> = E
    m1 = OscillatorModel(1)
    recs = perturbed_spectrum(m1, [VTerm(1.0, 1.0)], eps, Window(4, -3, 3), cache=cache)
    exact_err = max(abs(rc.E - (2 * rc.n + abs(rc.m) + 1) * math.sqrt(1 + 2 * eps)) for rc in recs)
    virial_err = 0.0
    for a in [(0.5, 0.0), (1.5, 2.0), (3.5, -1.0), (2.5, 3.0)]:
        a = ActionPair(*a)
        avg = flow_fourier_coefficient(m1, radial_power(1.0), a).real
        virial_err = max(virial_err, abs(avg - (2 * a[0] + a[1])))
    harmonic_ok = exact_err < 1e-8 and virial_err < 1e-8
    return quartic_ok and harmonic_ok, dict(
        max_ratio_to_bound=float(np.max(dev / bound)), deviations=dev.tolist(),
        decay_exponent=rep.decay_exponent, harmonic_exact_error=exact_err,
        harmonic_virial_error=virial_err, omega_params=STABILITY_PARAMS)


CHECKS = [check_harmonic, check_quartic_closed_form, check_homogeneity, check_residue,
          check_circular_expansion, check_homological, check_clustering, check_density,
          check_arc_exponent, check_stability]

SUITES = {
    "oracles": [check_harmonic, check_quartic_closed_form, check_homogeneity, check_residue,
                check_homological],
    "classical": [check_harmonic, check_quartic_closed_form, check_homogeneity, check_residue,
                  check_circular_expansion, check_arc_exponent],
    "lattice": [check_density, check_arc_exponent],
    "acceptance": CHECKS,
}
