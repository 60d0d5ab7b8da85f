"""Spectra of H0 = -Delta/2 + |x|^(2l)/(2l) and of small perturbations, joint spectrum
of the actions and Bohr-Sommerfeld comparisons.

Separating ``psi = exp(i m theta) R(r)`` leaves

    -(1/2) (1/r) (r R')' + m^2/(2 r^2) R + r^(2l)/(2l) R = E R .

It is discretized on the cell-centred grid ``r_i = (i - 1/2) h`` in flux
form, which needs no boundary condition at the origin, and symmetrized with
``u = sqrt(r) R``. Eigenvalues from the grids ``N, 2N, 4N`` are combined by
two levels of Richardson extrapolation (the error expands in ``h^2``).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.linalg import eigh_tridiagonal, eigvalsh
from scipy.optimize import brentq, linear_sum_assignment

from .classical import ActionPair, EnergyMomentum, OscillatorModel, action_a1, invert_energy
from .errors import (BoundaryLeak, ConvergenceFailure, HighDispersion, Inadmissible,
                     MatchingAmbiguity, WindowTooSmall)

SCHEME = "cell-flux-2"
RICHARDSON_RTOL = 1e-7
BOUNDARY_TOL = 1e-10
WKB_DECAY = 32.0  # exp(-32) ~ 1e-14
STEP_PHASE = 0.03  # h * max local wavenumber on the coarsest grid
EIG_ATOL = 1e-11


# ---------------------------------------------------------------------------
# radial problem

@dataclass(frozen=True)
class RadialProblem:
    ell: int
    m: int
    r_max: float
    n_points: int
    scheme: str = SCHEME

    def __post_init__(self):
        if self.scheme != SCHEME:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.n_points < 20:
            raise ValueError("n_points must be at least 20")

    def refined(self, factor: int) -> "RadialProblem":
        return RadialProblem(self.ell, self.m, self.r_max, self.n_points * factor, self.scheme)


class SpectrumRecord(NamedTuple):
    n: int
    m: int
    E: float
    boundary_residual: float


@dataclass
class SpectrumTable:
    records: list[SpectrumRecord]

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.E for r in self.records])

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, n: int) -> SpectrumRecord:
        return self.records[n]


def radial_grid(problem: RadialProblem) -> tuple[np.ndarray, float]:
    h = problem.r_max / (problem.n_points + 0.5)
    return (np.arange(1, problem.n_points + 1) - 0.5) * h, h


def radial_matrix(problem: RadialProblem, extra=None) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the symmetric tridiagonal radial operator.

    ``extra`` is an optional additional radial potential evaluated on the grid.
    """
    r, h = radial_grid(problem)
    rh = np.arange(1, problem.n_points) * h
    d = 1.0 / h**2 + problem.m**2 / (2 * r * r) + r ** (2 * problem.ell) / (2 * problem.ell)
    if extra is not None:
        d = d + extra(r)
    e = -0.5 * rh / (h * h * np.sqrt(r[:-1] * r[1:]))
    return d, e


def _boundary_residual(vecs: np.ndarray) -> np.ndarray:
    return np.abs(vecs[-1]) / np.max(np.abs(vecs), axis=0)


def _solve(problem: RadialProblem, count: int, extra=None, vectors: bool = False):
    d, e = radial_matrix(problem, extra)
    if count > problem.n_points:
        raise ValueError("more eigenvalues requested than grid points")
    # the default bisection tolerance ulp*|T| grows like N^2 and spoils the extrapolation
    if not vectors:
        return eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1),
                                eigvals_only=True, tol=EIG_ATOL)
    return eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1), tol=EIG_ATOL)


def _richardson(E1, E2, E4) -> tuple[np.ndarray, np.ndarray]:
    """Two-level extrapolation and the disagreement of the first-level values."""
    R1 = (4 * E2 - E1) / 3
    R2 = (4 * E4 - E2) / 3
    return (16 * R2 - R1) / 15, np.abs(R2 - R1) / np.maximum(np.abs(R2), 1e-300)


def outer_turning_radius(model: OscillatorModel, E: float, m: int = 0) -> float:
    ell = model.ell

    def V(r):
        return m * m / (2 * r * r) + r ** (2 * ell) / (2 * ell)

    r_top = (2 * ell * E) ** (1 / (2 * ell)) + 1.0
    r_lo = max(abs(m) / math.sqrt(2 * E), 1e-8) if m else 1e-8
    return brentq(lambda r: V(r) - E, r_lo, r_top, xtol=1e-14)


def choose_r_max(model: OscillatorModel, E_max: float, m: int = 0) -> float:
    """Larger of 1.5 times the turning radius and the radius where the WKB decay reaches
    ``exp(-32)``; the first alone leaves O(1e-1) tails on the low states."""
    ell = model.ell
    r_t = outer_turning_radius(model, E_max, m)

    def decay(r):
        f = lambda s: math.sqrt(max(2 * (s ** (2 * ell) / (2 * ell) - E_max), 0.0))
        return quad(f, r_t, r, limit=200)[0] - WKB_DECAY

    r_hi = r_t + 1.0
    while decay(r_hi) < 0:
        r_hi = r_t + 2 * (r_hi - r_t)
    return max(1.5 * r_t, brentq(decay, r_t, r_hi, xtol=1e-10))


def semiclassical_energy(model: OscillatorModel, n: int, m: int) -> float:
    """``h0`` at the action point of state ``(n, m)`` on the ``(1/2, 0)``-shifted lattice."""
    a1 = n + 0.5 + max(-m, 0)
    return invert_energy(model, ActionPair(a1, float(m)))


def default_problem(model: OscillatorModel, m: int, count: int, E_max: float | None = None,
                    r_max: float | None = None) -> RadialProblem:
    """Domain and coarsest grid for the lowest ``count`` states with angular number ``m``."""
    if E_max is None:
        E_max = 1.2 * semiclassical_energy(model, count - 1, abs(m)) + 1.0
    if r_max is None:
        r_max = choose_r_max(model, E_max, 0)
    n = int(math.ceil(r_max * math.sqrt(2 * E_max) / STEP_PHASE))
    return RadialProblem(model.ell, int(m), r_max, max(n, 200))


def radial_eigenvalues(problem: RadialProblem, count: int, cache: "SpectrumCache | None" = None,
                       check: bool = True) -> SpectrumTable:
    """Lowest ``count`` eigenvalues, extrapolated from grids ``N, 2N, 4N``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    key = {"kind": "radial", **asdict(problem), "count": count, "v_spec": None, "epsilon": 0.0}
    hit = cache.load(key) if cache is not None else None
    if hit is not None:
        E, res = hit["E"], hit["boundary_residual"]
    else:
        _, vecs = _solve(problem, count, vectors=True)
        res = _boundary_residual(vecs)
        Es = [_solve(problem.refined(f), count) for f in (1, 2, 4)]
        E, dis = _richardson(*Es)
        if check and np.any(dis > RICHARDSON_RTOL):
            i = int(np.argmax(dis))
            raise ConvergenceFailure(
                f"Richardson levels disagree by {dis[i]:.3g} at n={i}, m={problem.m} (N={problem.n_points})")
        if cache is not None:
            cache.store(key, E=E, boundary_residual=res)
    if check and np.any(res > BOUNDARY_TOL):
        raise BoundaryLeak(f"boundary residual {np.max(res):.3g} at r_max={problem.r_max:.4g}")
    return SpectrumTable([SpectrumRecord(n, problem.m, float(E[n]), float(res[n])) for n in range(count)])


def spectrum_tables(model: OscillatorModel, m_values: Sequence[int], count: int,
                    E_max: float | None = None, cache=None, jobs: int = 1) -> dict[int, SpectrumTable]:
    """Tables for several ``m``; solved in parallel, merged in the given order."""
    def one(m):
        return radial_eigenvalues(default_problem(model, m, count, E_max), count, cache)

    m_values = list(m_values)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            out = list(pool.map(one, m_values))
    else:
        out = [one(m) for m in m_values]
    return dict(zip(m_values, out))


# ---------------------------------------------------------------------------
# joint spectrum

@dataclass(frozen=True)
class JointPoint:
    lambda1: float
    lambda2: int
    n: int
    m: int
    E: float
    nearest: tuple[float, float]
    distance: float

    @property
    def radius(self) -> float:
        return math.hypot(self.lambda1, self.lambda2)


def nearest_lattice_point(p, kappa) -> tuple[float, float]:
    return tuple(float(np.round(p[i] - kappa[i]) + kappa[i]) for i in range(2))


def joint_spectrum(model: OscillatorModel, tables: dict[int, SpectrumTable],
                   kappa=(0.5, 0.0)) -> list[JointPoint]:
    """``(a1(E_nm, m), m)`` for every tabulated state."""
    out = []
    for m, tab in tables.items():
        for rec in tab.records:
            lam1 = action_a1(model, EnergyMomentum(rec.E, float(m)))
            near = nearest_lattice_point((lam1, m), kappa)
            out.append(JointPoint(lam1, int(m), rec.n, int(m), rec.E, near,
                                  math.hypot(lam1 - near[0], m - near[1])))
    return out


@dataclass(frozen=True)
class KappaEstimate:
    kappa: tuple[float, float]
    dispersion: tuple[float, float]


def estimate_kappa(points, weights=None, max_dispersion: float = 0.1) -> KappaEstimate:
    """Weighted circular mean of the fractional parts of each coordinate.

    ``points`` is an ``(n, 2)`` array or a list of ``JointPoint``; weights
    default to ``|a|``. The circular variance is ``1 - |mean resultant|``.
    """
    if len(points) and isinstance(points[0], JointPoint):
        P = np.array([(p.lambda1, p.lambda2) for p in points], float)
    else:
        P = np.asarray(points, float)
    if len(P) < 20:
        raise ValueError("at least 20 points are needed")
    w = np.hypot(P[:, 0], P[:, 1]) if weights is None else np.asarray(weights, float)
    z = np.exp(2j * np.pi * P) * w[:, None]
    mean = z.sum(axis=0) / w.sum()
    kappa = tuple(float(np.mod(np.angle(c) / (2 * np.pi), 1.0)) for c in mean)
    kappa = tuple(0.0 if abs(k - 1.0) < 1e-12 else k for k in kappa)
    disp = tuple(float(1 - abs(c)) for c in mean)
    if max(disp) > max_dispersion:
        raise HighDispersion(f"circular variance {disp} exceeds {max_dispersion}")
    return KappaEstimate(kappa, disp)


def clustering_fit(points: list[JointPoint], r_lo: float, r_hi: float, n_bins: int = 6,
                   cone=None) -> dict:
    """Max distance per radial bin and its log-log slope over ``[r_lo, r_hi]``."""
    sel = [p for p in points if r_lo <= p.radius <= r_hi]
    if cone is not None:
        sel = [p for p in sel if cone[0] <= math.atan2(p.lambda2, p.lambda1) <= cone[1]]
    edges = np.geomspace(r_lo, r_hi, n_bins + 1)
    centers, dmax = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        d = [p.distance for p in sel if lo <= p.radius < hi]
        if d:
            centers.append(math.sqrt(lo * hi))
            dmax.append(max(d))
    slope = float(np.polyfit(np.log(centers), np.log(dmax), 1)[0]) if len(centers) >= 2 else None
    scaled = max(p.distance * p.radius for p in sel) if sel else None
    return {"bin_centers": centers, "max_distance": dmax, "slope": slope,
            "max_scaled_distance": scaled, "count": len(sel)}


# ---------------------------------------------------------------------------
# Bohr-Sommerfeld

@dataclass
class BohrSommerfeld:
    leading: float
    corrected: float | None = None


def bohr_sommerfeld_predict(model: OscillatorModel, tt_a, correction=None) -> BohrSommerfeld:
    """``h0(tt_a)``; ``correction`` is an optional fitted ``c_j`` series in ``1/|a|``
    applied as ``h0 + sum_j c_j |a|^(-j)``."""
    a = ActionPair(float(tt_a[0]), float(tt_a[1]))
    E = invert_energy(model, a)
    if correction is None:
        return BohrSommerfeld(E)
    r = math.hypot(*a)
    return BohrSommerfeld(E, E + sum(c * r ** (-j) for j, c in enumerate(correction)))


def fit_correction_series(model: OscillatorModel, samples, order: int = 2) -> np.ndarray:
    """Least-squares ``lambda - h0(a) ~ sum_{j<=order} c_j |a|^-j`` from ``(a, lambda)`` pairs."""
    a = np.array([s[0] for s in samples], float)
    lam = np.array([s[1] for s in samples], float)
    r = np.hypot(a[:, 0], a[:, 1])
    resid = lam - np.array([invert_energy(model, ActionPair(*p)) for p in a])
    V = np.stack([r ** (-j) for j in range(order + 1)], axis=1)
    return np.linalg.lstsq(V, resid, rcond=None)[0]


# ---------------------------------------------------------------------------
# perturbations

@dataclass(frozen=True)
class VTerm:
    """``coef * |x|^(2p) * trig(j theta)`` with ``trig`` = cos or sin."""

    coef: float
    p: float
    j: int = 0
    kind: str = "cos"

    def __post_init__(self):
        if self.kind not in ("cos", "sin"):
            raise ValueError("kind must be 'cos' or 'sin'")
        if self.j < 0:
            raise ValueError("j must be non-negative")

    def order(self, ell: int) -> float:
        return 2 * self.p / (ell + 1)

    def phase(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        r2 = np.sum(x**2, axis=-1)
        th = np.arctan2(x[..., 1], x[..., 0])
        trig = np.cos if self.kind == "cos" else np.sin
        return self.coef * r2**self.p * (trig(self.j * th) if self.j else 1.0)


def check_v_spec(model: OscillatorModel, v_spec: Sequence[VTerm]) -> None:
    # the harmonic model is an oracle only; there |x|^2 (order equal to that of h0) is allowed
    for t in v_spec:
        ok = t.order(model.ell) <= model.energy_degree if model.degenerate \
            else t.order(model.ell) < model.energy_degree
        if not ok:
            raise Inadmissible(f"term {t} has order {t.order(model.ell):.4g} >= {model.energy_degree:.4g}")
        if t.kind == "sin" and t.j == 0:
            raise Inadmissible("sin term with j = 0 vanishes")


def v_phase(v_spec: Sequence[VTerm]):
    """Phase-space function ``v(x, xi)`` of a term list."""
    def v(x, xi):
        return sum(t.phase(x, xi) for t in v_spec)
    return v


def _radial_part(v_spec, epsilon):
    def f(r):
        return epsilon * sum(t.coef * r ** (2 * t.p) for t in v_spec)
    return f


@dataclass(frozen=True)
class Window:
    n_max: int
    m_min: int
    m_max: int

    def states(self):
        return [(n, m) for m in range(self.m_min, self.m_max + 1) for n in range(self.n_max + 1)]


class PerturbedRecord(NamedTuple):
    n: int
    m: int
    E0: float
    E: float


def _v_spec_key(v_spec):
    return [asdict(t) for t in v_spec]


def _radial_perturbed(model, v_spec, epsilon, window, cache):
    """Radial ``v``: the problem stays block diagonal in ``m``; each block is solved on the
    full radial grid, i.e. a Galerkin computation in the complete ``H0`` eigenbasis."""
    E_max = max(semiclassical_energy(model, window.n_max, abs(m))
                for m in (window.m_min, window.m_max, 0) if window.m_min <= m <= window.m_max)
    E_max = 1.2 * E_max + 1.0
    extra = _radial_part(v_spec, epsilon)
    count = window.n_max + 1
    out = []
    for m in range(window.m_min, window.m_max + 1):
        prob = default_problem(model, m, count, E_max)
        t0 = radial_eigenvalues(prob, count, cache)
        key = {"kind": "perturbed", **asdict(prob), "count": count,
               "v_spec": _v_spec_key(v_spec), "epsilon": epsilon}
        hit = cache.load(key) if cache is not None else None
        if hit is None:
            Es = [_solve(prob.refined(f), count, extra) for f in (1, 2, 4)]
            E, dis = _richardson(*Es)
            if np.any(dis > RICHARDSON_RTOL):
                raise ConvergenceFailure(f"perturbed Richardson disagreement {np.max(dis):.3g} (m={m})")
            if cache is not None:
                cache.store(key, E=E, boundary_residual=np.zeros_like(E))
        else:
            E = hit["E"]
        out += [PerturbedRecord(n, m, t0[n].E, float(E[n])) for n in range(count)]
    return out


def _galerkin(model, v_spec, epsilon, n_top, m_lo, m_hi, problem_for):
    """Eigenvalues of H0 + eps V in the basis ``{(n, m): n <= n_top, m_lo <= m <= m_hi}``."""
    basis, vecs, E0 = [], {}, {}
    for m in range(m_lo, m_hi + 1):
        w, v = _solve(problem_for(m), n_top + 1, vectors=True)
        vecs[m], E0[m] = v, w
        basis += [(n, m) for n in range(n_top + 1)]
    r, _ = radial_grid(problem_for(0))
    index = {s: i for i, s in enumerate(basis)}
    H = np.diag([E0[m][n] for n, m in basis]).astype(complex)
    for t in v_spec:
        rad = r ** (2 * t.p)
        for m in range(m_lo, m_hi + 1):
            shifts = [(0, 1.0)] if t.j == 0 else (
                [(t.j, 0.5), (-t.j, 0.5)] if t.kind == "cos" else [(t.j, -0.5j), (-t.j, 0.5j)])
            for dm, c in shifts:
                m2 = m + dm  # <m2| trig |m> = c
                if not (m_lo <= m2 <= m_hi):
                    continue
                block = vecs[m2].T @ (rad[:, None] * vecs[m])
                rows = [index[(n, m2)] for n in range(n_top + 1)]
                cols = [index[(n, m)] for n in range(n_top + 1)]
                H[np.ix_(rows, cols)] += epsilon * t.coef * c * block
    H = 0.5 * (H + H.conj().T)
    return basis, np.array([E0[m][n] for n, m in basis]), np.diag(H).real, eigvalsh(H)


def _match(E0, first_order, lam, ambiguity_factor=10.0):
    """Assign perturbed eigenvalues to unperturbed states by the smallest move from the
    first-order prediction; returns the assignment and a flag per state for collisions."""
    cost = np.abs(first_order[:, None] - lam[None, :])
    rows, cols = linear_sum_assignment(cost)
    order = np.argsort(rows)
    cols = cols[order]
    shift = np.abs(lam[cols] - E0)
    scale = max(float(np.max(shift)), 1e-300)
    gaps = np.abs(lam[None, :] - lam[cols][:, None])
    gaps[np.arange(len(cols)), cols] = np.inf
    ambiguous = np.min(gaps, axis=1) < ambiguity_factor * scale
    return cols, ambiguous


def perturbed_spectrum(model: OscillatorModel, v_spec: Sequence[VTerm], epsilon: float,
                       window: Window, pad_n: int | None = None, pad_m: int | None = None,
                       cache=None, check_ambiguity: bool = False) -> list[PerturbedRecord]:
    """Eigenvalues of ``H0 + eps V`` for the states of ``window``.

    Radial ``v`` is solved block by block. Otherwise a Galerkin matrix in the
    ``H0`` eigenbasis over the window padded by ``pad_n`` radial and
    ``pad_m * j_max`` angular states is diagonalized; the padding is doubled
    once and a change above ``1e-6 eps`` raises ``WindowTooSmall``.
    """
    check_v_spec(model, v_spec)
    if epsilon == 0.0:
        tabs = spectrum_tables(model, range(window.m_min, window.m_max + 1), window.n_max + 1,
                               cache=cache)
        return [PerturbedRecord(n, m, tabs[m][n].E, tabs[m][n].E) for n, m in window.states()]
    if all(t.j == 0 for t in v_spec):
        return _radial_perturbed(model, v_spec, epsilon, window, cache)

    j_max = max(t.j for t in v_spec)
    pad_n = max(8, window.n_max // 2) if pad_n is None else pad_n
    pad_m = 2 if pad_m is None else pad_m

    def bounds(pn, pm):
        return (window.n_max + pn, window.m_min - pm * j_max, window.m_max + pm * j_max)

    # one radial grid for every run, sized for the doubled basis, so that the padding
    # test sees truncation only and not a change of discretization
    n_big, m_lo_big, m_hi_big = bounds(2 * pad_n, 2 * pad_m)
    E_big = 1.2 * max(semiclassical_energy(model, n_big, abs(m)) for m in (m_lo_big, m_hi_big, 0)) + 1.0
    base = default_problem(model, 0, n_big + 1, E_big)

    def run(pn, pm, factor):
        n_top, m_lo, m_hi = bounds(pn, pm)

        def problem_for(m):
            return RadialProblem(model.ell, m, base.r_max, base.n_points * factor)

        basis, E0, diag, lam = _galerkin(model, v_spec, epsilon, n_top, m_lo, m_hi, problem_for)
        idx = [basis.index(s) for s in window.states()]
        cols, amb = _match(E0, E0 + (diag - E0), lam)
        return E0[idx], lam[cols][idx], amb[idx]

    E0s, lams = [], []
    for factor in (1, 2, 4):
        E0, lam, amb = run(pad_n, pad_m, factor)
        E0s.append(E0)
        lams.append(lam)
        if check_ambiguity and factor == 1 and np.any(amb):
            raise MatchingAmbiguity(f"{int(np.sum(amb))} window states have close perturbed neighbours")
    _, lam_big, _ = run(2 * pad_n, 2 * pad_m, 1)
    change = float(np.max(np.abs(lam_big - lams[0])))
    if change > 1e-6 * abs(epsilon):
        raise WindowTooSmall(f"doubling the padding moves eigenvalues by {change:.3g}")
    E0, _ = _richardson(*E0s)
    lam, _ = _richardson(*lams)
    return [PerturbedRecord(n, m, float(E0[i]), float(lam[i])) for i, (n, m) in enumerate(window.states())]


def state_of_lattice_point(tt_a) -> tuple[int, int]:
    """``(n, m)`` whose action image sits at ``tt_a`` on the ``(1/2, 0)``-shifted lattice."""
    m = int(round(tt_a[1]))
    n = int(round(tt_a[0] - 0.5 - max(-m, 0)))
    if n < 0:
        raise Inadmissible(f"{tt_a} is not a lattice point of the action cone")
    return n, m


@dataclass
class StabilityReport:
    points: list
    states: list
    lambda0: list
    lambda_eps: list
    average: list
    deviation: list
    skipped: list = field(default_factory=list)
    decay_exponent: float | None = None


def stable_eigenvalue_check(model: OscillatorModel, v_spec: Sequence[VTerm], epsilon: float,
                            omega_set, cache=None, n_angles: int = 64) -> StabilityReport:
    """``|lambda(eps) - lambda(0) - eps <v>(tt_a)|`` at each point of ``omega_set``.

    ``<v>`` is the torus average of ``v`` from the flow integration.
    """
    from .flow import flow_fourier_coefficient

    pts = [tuple(map(float, p)) for p in omega_set]
    states = [state_of_lattice_point(p) for p in pts]
    rep = StabilityReport(pts, states, [], [], [], [])
    by_m: dict[int, int] = {}
    for n, m in states:
        by_m[m] = max(by_m.get(m, 0), n)
    lam0, lam = {}, {}
    for m, n_max in sorted(by_m.items()):
        recs = perturbed_spectrum(model, v_spec, epsilon, Window(n_max, m, m), cache=cache)
        for r in recs:
            lam0[(r.n, r.m)], lam[(r.n, r.m)] = r.E0, r.E
    v = v_phase(v_spec)
    for p, s in zip(pts, states):
        avg = flow_fourier_coefficient(model, v, ActionPair(*p), (0, 0), n_angles).real
        rep.lambda0.append(lam0[s])
        rep.lambda_eps.append(lam[s])
        rep.average.append(avg)
        rep.deviation.append(abs(lam[s] - lam0[s] - epsilon * avg))
    dev = np.array(rep.deviation)
    r = np.hypot(*np.array(pts).T)
    if len(pts) >= 3 and np.all(dev > 0):
        rep.decay_exponent = float(np.polyfit(np.log(r), np.log(dev), 1)[0])
    return rep


# ---------------------------------------------------------------------------
# counting

def counting_function(model: OscillatorModel, E_max: float, cache=None) -> tuple[np.ndarray, np.ndarray]:
    """All eigenvalues of ``H0`` below ``E_max`` (each ``m`` separately) and the sorted list."""
    levels = []
    m = 0
    while circular_level_floor(model, m) < E_max:
        count = 1
        while semiclassical_energy(model, count - 1, m) < E_max:
            count += 1
        count += 2
        tab = radial_eigenvalues(default_problem(model, m, count, 1.2 * E_max + 1.0), count, cache)
        E = tab.energies[tab.energies < E_max]
        levels += list(E) * (1 if m == 0 else 2)
        m += 1
    return np.sort(np.array(levels)), np.array(levels)


def circular_level_floor(model: OscillatorModel, m: int) -> float:
    """Lower bound for the lowest level with angular number ``m`` (the classical minimum)."""
    ell = model.ell
    r0 = abs(m) ** (1 / (ell + 1)) if m else 0.0
    return 0.0 if m == 0 else m * m / (2 * r0 * r0) + r0 ** (2 * ell) / (2 * ell)


# ---------------------------------------------------------------------------
# cache and export

class SpectrumCache:
    """Eigenvalue arrays on disk keyed by the full parameter set; a stored key that does
    not match exactly is treated as a miss."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def _text(key: dict) -> str:
        return json.dumps(key, sort_keys=True, default=float)

    def path(self, key: dict) -> Path:
        return self.dir / (hashlib.sha256(self._text(key).encode()).hexdigest()[:32] + ".npz")

    def load(self, key: dict):
        p = self.path(key)
        if not p.exists():
            return None
        with np.load(p, allow_pickle=False) as z:
            if str(z["key"]) != self._text(key):
                return None
            return {k: z[k] for k in z.files if k != "key"}

    def store(self, key: dict, **arrays) -> None:
        p = self.path(key)
        tmp = p.with_suffix(f".tmp{os.getpid()}.npz")
        np.savez(tmp, key=np.array(self._text(key)), **arrays)
        os.replace(tmp, p)


def write_spectrum_csv(path, tables: dict[int, SpectrumTable], meta: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh)
        w.writerow(["n", "m", "E", "boundary_residual"])
        for m in tables:
            for r in tables[m].records:
                w.writerow([r.n, r.m, repr(r.E), repr(r.boundary_residual)])


def write_joint_csv(path, points: list[JointPoint], meta: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh)
        w.writerow(["n", "m", "E", "lambda1", "lambda2", "nearest1", "nearest2", "distance"])
        for p in points:
            w.writerow([p.n, p.m, repr(p.E), repr(p.lambda1), p.lambda2,
                        p.nearest[0], p.nearest[1], repr(p.distance)])
