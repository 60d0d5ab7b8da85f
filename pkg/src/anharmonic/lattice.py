"""Shifted lattice in a cone, nonresonance classification and density estimates.

A lattice point ``a`` is *nonresonant* when

    |omega(a) . k| >= gamma |k| |a|^delta   for all integer k, 0 < |k| < 2 |a|^epsilon

with ``gamma = 2``. The frequencies at lattice points come from the
unit-arc Chebyshev table and the homogeneity ``omega(a) = |a|^M omega(a/|a|)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .classical import ARC_LENGTH, ARC_MAX, ARC_MIN, ActionPair, OscillatorModel, frequencies
from .errors import ConfigError, DegenerateFit, DegenerateMap
from .frequency import sphere_table

INTERP_TOL = 1e-7


@dataclass(frozen=True)
class ResonanceParams:
    ell: int
    delta: float
    epsilon: float
    mu0: int = 2
    m_sym: float | None = None
    gamma: float = 2.0

    @property
    def M(self) -> float:
        return (self.ell - 1) / (self.ell + 1)

    @property
    def order(self) -> float:
        """Perturbation order; defaults to that of ``|x|^2``, i.e. ``2/(l+1)``."""
        return 2 / (self.ell + 1) if self.m_sym is None else self.m_sym

    @property
    def e_frak(self) -> float:
        return 2 * self.ell / (self.ell + 1) - self.order

    @property
    def delta0(self) -> float:
        return self.M - min(1 / (self.ell + 1), self.e_frak / 3, 2 / 7)

    @property
    def rho(self) -> float:
        gap = self.M - self.delta
        return min(self.e_frak - 3 * gap, 2 - 7 * gap)

    @property
    def varsigma(self) -> float:
        return 1 - (self.M - self.delta)

    @property
    def delta1(self) -> float:
        return self.delta - (self.ell - 2) / (self.ell + 1)

    @property
    def delta2(self) -> float:
        return self.delta1 + (self.ell - 1) / (self.ell + 1)

    @property
    def density_exponent(self) -> float:
        """Predicted decay rate ``(M - delta)/mu0 - 2 epsilon`` of the density defect."""
        return (self.M - self.delta) / self.mu0 - 2 * self.epsilon

    def validate(self) -> "ResonanceParams":
        M, d, e = self.M, self.delta, self.epsilon
        if self.e_frak <= 0:
            raise ConfigError(f"perturbation order m={self.order} must be below 2l/(l+1)")
        if not ((self.ell - 2) / (self.ell + 1) < d < M):
            raise ConfigError(f"delta={d} violates (l-2)/(l+1) < delta < M={M:.6g}")
        if not (self.delta0 < d):
            raise ConfigError(
                f"delta={d} violates delta0 < delta < M with delta0={self.delta0:.6g}, M={M:.6g}")
        if not (0 < e < (M - d) / (2 * self.mu0)):
            raise ConfigError(
                f"epsilon={e} violates 0 < epsilon < (M - delta)/(2 mu0) = {(M - d) / (2 * self.mu0):.6g}")
        if self.mu0 < 1:
            raise ConfigError("mu0 must be a positive integer")
        if self.rho <= 0:
            raise ConfigError(f"gain rho={self.rho:.6g} must be positive")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(M=self.M, e_frak=self.e_frak, delta0=self.delta0, rho=self.rho,
                 varsigma=self.varsigma, delta1=self.delta1, delta2=self.delta2)
        return d


def default_params(model: OscillatorModel, mu0: int | None = None) -> ResonanceParams:
    """Defaults: ``m = 2/(l+1)`` (a ``|x|^2`` perturbation), ``delta`` 40% of
    the way from ``delta0`` to ``M`` (0.2 for ``l = 2``), ``mu0`` from the
    Rüssmann scan (2 if the scan fails) and ``epsilon = 0.9 (M - delta)/(2 mu0)``."""
    if mu0 is None:
        mu0 = _scanned_mu0(model.ell)
    mu0 = int(mu0)
    base = ResonanceParams(model.ell, delta=0.0, epsilon=0.0, mu0=mu0)
    delta = base.delta0 + 0.4 * (base.M - base.delta0)
    if model.ell == 2:
        delta = 0.2
    eps = 0.9 * (base.M - delta) / (2 * mu0)
    return ResonanceParams(model.ell, delta=delta, epsilon=eps, mu0=mu0).validate()


@lru_cache(maxsize=None)
def _scanned_mu0(ell: int) -> int:
    from .frequency import russmann_constants

    try:
        return russmann_constants(OscillatorModel(ell)).mu0
    except DegenerateMap:
        return 2


@dataclass(frozen=True)
class LatticeSpec:
    kappa: tuple[float, float] = (0.5, 0.0)
    cone: tuple[float, float] = (math.radians(-40), math.radians(40))
    R_inner: float = 2.0

    def __post_init__(self):
        lo, hi = self.cone
        if not (ARC_MIN < lo < hi < ARC_MAX):
            raise ConfigError(
                f"cone {self.cone} must lie strictly inside the action cone ({ARC_MIN:.4f}, {ARC_MAX:.4f})")


# ---------------------------------------------------------------------------
# enumeration

def _sort_points(pts: np.ndarray) -> np.ndarray:
    if len(pts) == 0:
        return pts.reshape(0, 2)
    r = np.hypot(pts[:, 0], pts[:, 1])
    th = np.arctan2(pts[:, 1], pts[:, 0])
    return pts[np.lexsort((th, np.round(r, 12)))]


def lattice_in_cone(spec: LatticeSpec, R: float, r_min: float = 0.0) -> np.ndarray:
    """Points of ``Z^2 + kappa`` in the open cone with ``r_min < |a| <= R``."""
    k1, k2 = spec.kappa
    i = np.arange(math.floor(-R - k1) - 1, math.ceil(R - k1) + 2)
    j = np.arange(math.floor(-R - k2) - 1, math.ceil(R - k2) + 2)
    A1, A2 = np.meshgrid(i + k1, j + k2, indexing="ij")
    A1, A2 = A1.ravel(), A2.ravel()
    r = np.hypot(A1, A2)
    th = np.arctan2(A2, A1)
    mask = (r <= R) & (r > r_min) & (th > spec.cone[0]) & (th < spec.cone[1])
    return _sort_points(np.stack([A1[mask], A2[mask]], axis=1))


def enumerate_lattice(spec: LatticeSpec, R: float) -> np.ndarray:
    """Lattice points in the cone and the annulus ``R_inner < |a| <= R``,
    ordered by (radius, angle)."""
    return lattice_in_cone(spec, R, spec.R_inner)


# ---------------------------------------------------------------------------
# frequencies and the resonance test

def lattice_frequencies(model: OscillatorModel, points: np.ndarray) -> np.ndarray:
    """``omega`` at each point (shape ``(n, 2)``) via the unit-arc table."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) == 0:
        return np.zeros((0, 2))
    tab = sphere_table(model.ell)
    r = np.hypot(pts[:, 0], pts[:, 1])
    th = np.arctan2(pts[:, 1], pts[:, 0])
    lo, hi = tab.domain
    inside = (th >= lo) & (th <= hi)
    out = np.empty_like(pts)
    if tab.residual <= INTERP_TOL:
        out[inside] = (tab(th[inside]) * r[inside] ** model.M).T
    else:
        inside[:] = False
    for idx in np.flatnonzero(~inside):
        out[idx] = frequencies(model, ActionPair(*pts[idx]))
    return out


def half_lattice(kmax: float) -> np.ndarray:
    """Integer vectors ``k`` with ``0 < |k| < kmax``, one from each pair ``{k, -k}``."""
    n = int(math.ceil(kmax))
    ks = [(k1, k2) for k1 in range(0, n + 1) for k2 in range(-n, n + 1)
          if (k1 > 0 or k2 > 0) and math.hypot(k1, k2) < kmax]
    ks.sort(key=lambda k: (math.hypot(*k), k))
    return np.array(ks, dtype=float).reshape(-1, 2)


@dataclass
class Classification:
    points: np.ndarray
    nonresonant: np.ndarray
    worst_k: np.ndarray
    worst_ratio: np.ndarray
    radius: np.ndarray = field(repr=False)


def classify(model: OscillatorModel, params: ResonanceParams, points: np.ndarray,
             gamma: float | None = None, omega: np.ndarray | None = None) -> Classification:
    """Resonance classification of many points at once.

    ``worst_ratio`` is ``min_k |omega.k| / (|k| |a|^delta)`` over the
    admissible ``k`` (``inf`` when the range is empty); a point is
    nonresonant iff ``worst_ratio >= gamma``.
    """
    gamma = params.gamma if gamma is None else gamma
    pts = np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, 2)
    n = len(pts)
    r = np.hypot(pts[:, 0], pts[:, 1])
    w = lattice_frequencies(model, pts) if omega is None else omega
    kmax = 2 * r ** params.epsilon
    ks = half_lattice(float(kmax.max()) if n else 0.0)
    worst = np.full(n, np.inf)
    worst_k = np.zeros((n, 2), dtype=int)
    if len(ks):
        knorm = np.hypot(ks[:, 0], ks[:, 1])
        ratio = np.abs(w @ ks.T) / knorm / (r ** params.delta)[:, None]
        ratio[knorm[None, :] >= kmax[:, None]] = np.inf
        idx = np.argmin(ratio, axis=1)
        worst = ratio[np.arange(n), idx]
        worst_k = ks[idx].astype(int)
        worst_k[~np.isfinite(worst)] = 0
    return Classification(pts, worst >= gamma, worst_k, worst, r)


def is_nonresonant(model: OscillatorModel, params: ResonanceParams, a) -> bool:
    return bool(classify(model, params, np.array([a], dtype=float)).nonresonant[0])


def in_resonant_zone(model: OscillatorModel, params: ResonanceParams, a, k,
                     gamma: float = 2.0) -> bool:
    """Membership of ``a`` in ``Sigma_k(gamma) ∩ T_k(2)`` (direct set definition)."""
    a = np.asarray(a, dtype=float)
    k = np.asarray(k, dtype=float)
    w = np.asarray(frequencies(model, ActionPair(*a)))
    na, nk = float(np.hypot(*a)), float(np.hypot(*k))
    return abs(w @ k) <= gamma * nk * na**params.delta and nk < 2 * na**params.epsilon


def build_omega(model: OscillatorModel, params: ResonanceParams, spec: LatticeSpec,
                R: float) -> np.ndarray:
    pts = enumerate_lattice(spec, R)
    return pts[classify(model, params, pts).nonresonant]


# ---------------------------------------------------------------------------
# density and cardinality

def density_profile(model: OscillatorModel, params: ResonanceParams, spec: LatticeSpec,
                    R_list, strict: bool = True) -> dict:
    """Defect ``1 - #(Omega ∩ B_R) / #(C ∩ B_R)`` per radius and its log-log slope.

    A zero defect is replaced by the bound ``1/#(C ∩ B_R)``; with
    ``strict`` this raises :class:`DegenerateFit`, otherwise the slope is
    fitted to the bounds and the row is flagged.
    """
    R_list = sorted(float(R) for R in R_list)
    Rmax = R_list[-1]
    all_pts = lattice_in_cone(spec, Rmax)
    r_all = np.hypot(all_pts[:, 0], all_pts[:, 1])
    ann = r_all > spec.R_inner
    cls = classify(model, params, all_pts[ann])
    r_omega = cls.radius[cls.nonresonant]
    rows = []
    for R in R_list:
        total = int(np.count_nonzero(r_all <= R))
        n_omega = int(np.count_nonzero(r_omega <= R))
        defect = 1 - n_omega / total if total else 1.0
        bound = defect == 0
        rows.append({"R": R, "total": total, "omega": n_omega,
                     "defect": 1 / total if bound and total else defect, "upper_bound": bound})
    if any(row["upper_bound"] for row in rows) and strict:
        raise DegenerateFit("zero defect at some radius; only an upper bound is available")
    slope = None
    if len(rows) >= 2:
        x = np.log([row["R"] for row in rows])
        y = np.log([row["defect"] for row in rows])
        slope = float(np.polyfit(x, y, 1)[0])
    return {"rows": rows, "slope": slope, "predicted_slope": -params.density_exponent,
            "params": params.to_dict()}


def sigma_cardinality(model: OscillatorModel, params: ResonanceParams, spec: LatticeSpec,
                      R: float, gamma: float | None = None) -> dict:
    """Number of lattice points of the annulus in ``Sigma(gamma)`` and the bound shape
    ``gamma^(1/mu0) R^2 / R^((M-delta)/mu0 - 2 epsilon)``."""
    gamma = params.gamma if gamma is None else gamma
    pts = enumerate_lattice(spec, R)
    cls = classify(model, params, pts, gamma=gamma)
    count = int(np.count_nonzero(~cls.nonresonant))
    shape = gamma ** (1 / params.mu0) * R**2 / R**params.density_exponent
    return {"R": R, "gamma": gamma, "count": count, "annulus_total": len(pts),
            "nonresonant": len(pts) - count, "bound_shape": shape,
            "fitted_C": count / shape}


def resonant_arc_measure(model: OscillatorModel, k, gamma_eff: float,
                         n_grid: int = 4001, xtol: float = 1e-12) -> float:
    """Length of ``{phi on the arc : |omega(phi) . k| <= gamma_eff |k|}``."""
    k = np.asarray(k, dtype=float)
    if not np.any(k) or gamma_eff <= 0:
        raise ValueError("k must be nonzero and gamma_eff positive")
    tab = sphere_table(model.ell)
    u = k / np.linalg.norm(k)

    def g(phi):
        return np.abs(u @ tab(phi)) - gamma_eff

    phi = np.linspace(ARC_MIN, ARC_MAX, n_grid)
    vals = g(phi)
    inside = vals <= 0
    total = 0.0
    start = ARC_MIN if inside[0] else None
    for i in range(1, n_grid):
        if inside[i] == inside[i - 1]:
            continue
        edge = brentq(lambda p: float(g(p)), phi[i - 1], phi[i], xtol=xtol)
        if inside[i]:
            start = edge
        else:
            total += edge - start
            start = None
    if start is not None:
        total += ARC_MAX - start
    # sublevel sets narrower than the grid: refine around local minima of |u.omega|
    s = np.abs(u @ tab(phi))
    for i in range(1, n_grid - 1):
        if s[i] <= s[i - 1] and s[i] <= s[i + 1] and not inside[i] and not inside[i - 1] and not inside[i + 1]:
            total += _narrow_dip(g, phi[i - 1], phi[i + 1], xtol)
    return min(total, ARC_LENGTH)


def _narrow_dip(g, lo: float, hi: float, xtol: float) -> float:
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda p: float(g(p)), bounds=(lo, hi), method="bounded",
                          options={"xatol": xtol})
    if res.fun > 0:
        return 0.0
    left = brentq(lambda p: float(g(p)), lo, res.x, xtol=xtol)
    right = brentq(lambda p: float(g(p)), res.x, hi, xtol=xtol)
    return right - left


def arc_measure_exponent(model: OscillatorModel, k=(1, -2),
                         gammas=(1e-1, 1e-2, 1e-3, 1e-4)) -> dict:
    meas = np.array([resonant_arc_measure(model, k, g) for g in gammas])
    slope = float(np.polyfit(np.log(gammas), np.log(meas), 1)[0])
    return {"k": list(k), "gammas": list(gammas), "measures": meas.tolist(), "slope": slope}
