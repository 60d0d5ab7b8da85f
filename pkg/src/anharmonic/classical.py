"""Action-angle machinery for the isotropic anharmonic oscillator.

The integrable Hamiltonian is ``h0 = |xi|^2/2 + |x|^(2l)/(2l)`` on R^4.
Its actions are the angular momentum ``a2 = L`` and ``a1``, built from
the radial action ``a_r`` of the effective one-dimensional problem

    V*_L(r) = L^2/(2 r^2) + r^(2l)/(2l).

``a1 = a_r`` for ``L >= 0`` and ``a1 = a_r - L`` for ``L < 0``; with this
choice ``a1`` is smooth across ``L = 0`` and the energy ``h0(a1, a2)`` is
homogeneous of degree ``2l/(l+1)`` on the cone

    Pi = {a1 >= 0 if a2 >= 0, a1 >= |a2| if a2 < 0}.

Angles on the unit arc ``Pi ∩ S1`` are polar angles ``phi`` in
``[-pi/4, pi/2]`` (an arc of length ``3 pi / 4``): ``phi = pi/2`` is the
circular orbit with ``L > 0``, ``phi = -pi/4`` the circular orbit with
``L < 0`` and ``phi = 0`` the radial orbit ``L = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from . import quadrature
from .errors import CircularBoundary, Inadmissible, NoConvergence

ARC_MIN = -math.pi / 4
ARC_MAX = math.pi / 2
ARC_LENGTH = ARC_MAX - ARC_MIN

CIRCULAR_RTOL = 1e-10
SPHERE_TABLE_SIZE = 512


@dataclass(frozen=True)
class OscillatorModel:
    """Potential ``|x|^(2 ell) / (2 ell)``.

    ``ell = 1`` is the harmonic oscillator. Its frequency map is constant
    and therefore degenerate; it is accepted only as a closed-form oracle.
    """

    ell: int

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 1:
            raise ValueError(f"ell must be a positive integer, got {self.ell!r}")

    @property
    def M(self) -> float:
        """Homogeneity degree of the frequency map."""
        return (self.ell - 1) / (self.ell + 1)

    @property
    def energy_degree(self) -> float:
        return 2 * self.ell / (self.ell + 1)

    @property
    def degenerate(self) -> bool:
        return self.ell == 1


class EnergyMomentum(NamedTuple):
    E: float
    L: float


class ActionPair(NamedTuple):
    a1: float
    a2: float


class TurningPoints(NamedTuple):
    r_m: float
    r_M: float
    s_roots: np.ndarray


class FrequencyPair(NamedTuple):
    omega1: float
    omega2: float


# ---------------------------------------------------------------------------
# effective problem

def effective_potential(model: OscillatorModel, L: float, r: float) -> float:
    if r <= 0:
        raise Inadmissible(f"radius must be positive, got r={r}")
    ell = model.ell
    return L * L / (2 * r * r) + r ** (2 * ell) / (2 * ell)


def circular_radius(model: OscillatorModel, L: float) -> float:
    """Minimum of the effective potential, ``|L|^(1/(l+1))``."""
    return abs(L) ** (1.0 / (model.ell + 1))


def circular_energy(model: OscillatorModel, L: float) -> float:
    ell = model.ell
    return (ell + 1) / (2 * ell) * abs(L) ** model.energy_degree


def max_momentum(model: OscillatorModel, E: float) -> float:
    """Supremum of ``|L|`` over admissible orbits of energy ``E``."""
    ell = model.ell
    return (2 * ell * E / (ell + 1)) ** ((ell + 1) / (2 * ell))


def _p_coeffs(model: OscillatorModel, E: float, L: float) -> np.ndarray:
    """Coefficients (highest first) of ``2l * p(s, E, L)``, a monic polynomial."""
    ell = model.ell
    c = np.zeros(ell + 2)
    c[0] = 1.0
    c[-2] = -2 * ell * E
    c[-1] = ell * L * L
    return c


def _check_admissible(model: OscillatorModel, E: float, L: float) -> None:
    if not (E > 0 and math.isfinite(E) and math.isfinite(L)):
        raise Inadmissible(f"energy must be positive and finite, got E={E}, L={L}")
    Lmax = max_momentum(model, E)
    if abs(L) > Lmax * (1 + 1e-13):
        raise Inadmissible(f"|L|={abs(L)} exceeds the circular-orbit bound {Lmax} at E={E}")


def turning_points(model: OscillatorModel, em: EnergyMomentum) -> TurningPoints:
    """Radial turning points from the roots of ``p(s) = s^(l+1)/(2l) - E s + L^2/2``.

    All ``l + 1`` roots come from the companion matrix; the two positive
    real ones are then polished by bracketing around the minimum of ``p``.
    """
    E, L = float(em.E), float(em.L)
    _check_admissible(model, E, L)
    ell = model.ell
    s_roots = np.roots(_p_coeffs(model, E, L))
    s_roots = s_roots[np.argsort(s_roots.real)]
    s_top = (2 * ell * E) ** (1.0 / ell)
    if L * L / 2 == 0.0:
        # L = 0, or L^2 underflows: then r_m = |L|/sqrt(2E) and r_M is the L = 0 root
        return TurningPoints(abs(L) / math.sqrt(2 * E), math.sqrt(s_top), s_roots)

    def p(s):
        return s ** (ell + 1) / (2 * ell) - E * s + L * L / 2

    s_star = (2 * ell * E / (ell + 1)) ** (1.0 / ell)
    if p(s_star) >= 0:
        raise CircularBoundary(f"coincident turning points at E={E}, L={L}")
    eps = np.finfo(float).eps
    s0 = L * L / (2 * E)
    if s0 < 0.1 * s_star:
        # small |L|: solve for t = s/s0, whose root is near 1, so that tiny values of p
        # never enter the root finder
        def g(t):
            return s0**ell * t ** (ell + 1) / (2 * ell) - E * t + E
        s_m = s0 * brentq(g, 0.5, 2.0, xtol=1e-300, rtol=4 * eps)
    else:
        s_m = brentq(p, 0.0, s_star, xtol=1e-300, rtol=4 * eps)
    # p(s_top) = L^2/2 can be lost to roundoff; nudge the bracket outward
    s_M = brentq(p, s_star, s_top * (1 + 16 * eps), xtol=1e-300, rtol=4 * eps)
    r_m, r_M = math.sqrt(s_m), math.sqrt(s_M)
    if (r_M - r_m) / r_M < CIRCULAR_RTOL:
        raise CircularBoundary(f"coincident turning points at E={E}, L={L}")
    return TurningPoints(r_m, r_M, s_roots)


def _quotient(model: OscillatorModel, E: float, L: float, tp: TurningPoints) -> np.ndarray:
    """Coefficients of ``Q`` with ``2l p(s) = (s - s_m)(s - s_M) Q(s)``; ``Q > 0`` on ``[s_m, s_M]``."""
    s_m, s_M = tp.r_m**2, tp.r_M**2
    q, _ = np.polydiv(_p_coeffs(model, E, L), np.array([1.0, -(s_m + s_M), s_m * s_M]))
    return q


# In the variable s = r^2,
#   a_r     = 1/(2 pi sqrt(l)) int sqrt((s-s_m)(s_M-s)) sqrt(Q(s)) / s ds,
#   da_r/dE = sqrt(l)/(2 pi)   int 1/sqrt(Q(s)) / sqrt((s-s_m)(s_M-s)) ds.
# The pole of the a_r integrand at s = 0 is subtracted in closed form with
#   int sqrt((s-s_m)(s_M-s))/s ds = pi ((s_m+s_M)/2 - sqrt(s_m s_M)),
#   int 1/(s sqrt((s-s_m)(s_M-s))) ds = pi / sqrt(s_m s_M),
# and s_m s_M Q(0) = l L^2; the sqrt(s_m s_M) piece is exactly -|L|/2.

SPLIT_RATIO = 0.1


def _split_radial_action(model: OscillatorModel, em: EnergyMomentum, tol: float) -> tuple[float, float]:
    """Return ``(-|L|/2, f)`` with ``a_r = -|L|/2 + f``."""
    E, L = float(em.E), float(em.L)
    ell = model.ell
    tp = turning_points(model, em)
    s_m, s_M = tp.r_m**2, tp.r_M**2
    q = _quotient(model, E, L, tp)
    pref = 1.0 / (2 * math.pi * math.sqrt(ell))
    atol = 1e-17 * (s_M - s_m) ** 2
    if s_m > SPLIT_RATIO * s_M:
        # far from the pole: integrate directly, no cancellation near circular orbits
        ar = pref * quadrature.sqrt_vanishing(
            lambda s: np.sqrt(np.polyval(q, s)) / s, s_m, s_M, rtol=tol, atol=atol)
        return -abs(L) / 2, ar + abs(L) / 2
    q0 = q[-1]
    dq = q[:-1]
    sq0 = math.sqrt(q0)

    def smooth(s):
        # (sqrt(Q(s)) - sqrt(Q(0))) / s without cancellation
        Qs = np.polyval(q, s)
        return np.polyval(dq, s) / (np.sqrt(Qs) + sq0) if len(dq) else np.zeros_like(s)

    rest = quadrature.sqrt_vanishing(smooth, s_m, s_M, rtol=tol, atol=atol)
    analytic = pref * (sq0 * math.pi * (s_m + s_M) / 2 + rest)
    return -abs(L) / 2, analytic


def radial_action(model: OscillatorModel, em: EnergyMomentum, tol: float = 1e-13) -> float:
    """``a_r = (sqrt 2 / pi) int_{r_m}^{r_M} sqrt(E - V*_L(r)) dr``.

    Returns 0 on the circular-orbit boundary.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    try:
        singular, analytic = _split_radial_action(model, em, tol)
    except CircularBoundary:
        return 0.0
    return max(singular + analytic, 0.0)


def action_a1(model: OscillatorModel, em: EnergyMomentum, tol: float = 1e-13) -> float:
    ar = radial_action(model, em, tol)
    return ar if em.L >= 0 else ar - em.L


def action_map(model: OscillatorModel, em: EnergyMomentum, tol: float = 1e-13) -> ActionPair:
    return ActionPair(action_a1(model, em, tol), float(em.L))


def residue_decomposition(model: OscillatorModel, em: EnergyMomentum,
                          tol: float = 1e-13) -> tuple[float, float]:
    """Split ``a_r = -|L|/2 + f(E, L)`` into (singular, analytic) parts."""
    ar = radial_action(model, em, tol)
    singular = -abs(em.L) / 2
    return singular, ar - singular


def radial_action_derivatives(model: OscillatorModel, em: EnergyMomentum,
                              tol: float = 1e-13) -> tuple[float, float]:
    """``(d a_r/dE, d a_r/dL)`` by period integrals.

    At ``L = 0`` the L-derivative jumps; the returned value is the limit
    ``L -> 0+``, which is ``-1/2``.
    """
    E, L = float(em.E), float(em.L)
    ell = model.ell
    tp = turning_points(model, em)
    s_m, s_M = tp.r_m**2, tp.r_M**2
    q = _quotient(model, E, L, tp)
    q0 = q[-1]
    dq = q[:-1]
    rq0 = 1.0 / math.sqrt(q0)

    def inv_sqrt_q(s):
        return 1.0 / np.sqrt(np.polyval(q, s))

    dE = math.sqrt(ell) / (2 * math.pi) * quadrature.sqrt_singular(inv_sqrt_q, s_m, s_M, rtol=tol)
    if L == 0.0:
        return dE, -0.5

    if s_m > SPLIT_RATIO * s_M:
        rest = quadrature.sqrt_singular(lambda s: inv_sqrt_q(s) / s, s_m, s_M, rtol=tol)
        return dE, -L * math.sqrt(ell) / (2 * math.pi) * rest

    def smooth(s):
        # (Q(s)^-1/2 - Q(0)^-1/2) / s
        rs = inv_sqrt_q(s)
        return -np.polyval(dq, s) * (rs * rq0) ** 2 / (rs + rq0) if len(dq) else np.zeros_like(s)

    rest = quadrature.sqrt_singular(smooth, s_m, s_M, rtol=tol, atol=1e-17)
    dL = -math.copysign(0.5, L) - L * math.sqrt(ell) / (2 * math.pi) * rest
    return dE, dL


def radial_action_direct(model: OscillatorModel, em: EnergyMomentum) -> float:
    """Plain adaptive quadrature of the defining radial integral (test oracle)."""
    from scipy.integrate import quad

    tp = turning_points(model, em)
    val, _ = quad(lambda r: math.sqrt(max(em.E - effective_potential(model, em.L, r), 0.0)),
                  tp.r_m, tp.r_M, epsabs=0, epsrel=1e-13, limit=500)
    return math.sqrt(2) / math.pi * val


# ---------------------------------------------------------------------------
# inverse map and frequencies

def in_cone_interior(a: ActionPair) -> bool:
    a1, a2 = a
    return a1 > 0 and a1 > -a2


def _check_interior(a: ActionPair) -> None:
    if not (math.isfinite(a[0]) and math.isfinite(a[1])) or not in_cone_interior(a):
        raise Inadmissible(f"action pair {tuple(a)} is not in the interior of the cone Pi")


def _a1_of_energy(model, E, a2, tol):
    return action_a1(model, EnergyMomentum(E, a2), tol)


def _bracketed_energy(model: OscillatorModel, a: ActionPair, tol: float) -> float:
    a1, a2 = a
    E_lo = circular_energy(model, a2)
    E_hi = max(2 * E_lo, 1e-300)
    if E_lo == 0.0:
        E_hi = a1 ** model.energy_degree
    while _a1_of_energy(model, E_hi, a2, tol) < a1:
        E_lo, E_hi = E_hi, 2 * E_hi
    lo = E_lo if E_lo > 0 else E_hi * 1e-12
    return brentq(lambda E: _a1_of_energy(model, E, a2, tol) - a1, lo, E_hi,
                  xtol=1e-300, rtol=1e-14)


def arc_point(phi: float) -> ActionPair:
    return ActionPair(math.cos(phi), math.sin(phi))


def circular_arc_energy(model: OscillatorModel, phi: float) -> float:
    """h0 at the arc endpoints, where the orbit is circular."""
    return circular_energy(model, math.sin(phi))


@lru_cache(maxsize=None)
def _sphere_table(ell: int) -> PchipInterpolator:
    model = OscillatorModel(ell)
    phis = np.linspace(ARC_MIN, ARC_MAX, SPHERE_TABLE_SIZE)
    vals = np.empty_like(phis)
    vals[0] = circular_arc_energy(model, phis[0])
    vals[-1] = circular_arc_energy(model, phis[-1])
    for i in range(1, len(phis) - 1):
        vals[i] = _bracketed_energy(model, arc_point(phis[i]), 1e-12)
    return PchipInterpolator(phis, vals)


def sphere_energy_guess(model: OscillatorModel, a: ActionPair) -> float:
    rho = math.hypot(*a)
    phi = math.atan2(a[1], a[0])
    return rho ** model.energy_degree * float(_sphere_table(model.ell)(phi))


def invert_energy(model: OscillatorModel, a: ActionPair, tol: float = 1e-12,
                  max_iter: int = 50) -> float:
    """Energy ``E = h0(a1, a2)``, the inverse of ``E -> a1(E, a2)``.

    Safeguarded Newton with the homogeneous guess from the unit-arc table;
    ``tol`` is absolute on ``a1`` relative to ``max(1, |a|)``.
    """
    a = ActionPair(float(a[0]), float(a[1]))
    _check_interior(a)
    a1, a2 = a
    qtol = 1e-14
    atol = tol * max(1.0, math.hypot(a1, a2))
    E_lo = circular_energy(model, a2)
    E_hi = math.inf
    E = sphere_energy_guess(model, a)
    if not E > E_lo:
        E = E_lo * (1 + 1e-6) if E_lo > 0 else a1 ** model.energy_degree
    for _ in range(max_iter):
        em = EnergyMomentum(E, a2)
        f = action_a1(model, em, qtol) - a1
        if abs(f) < atol:
            return E
        if f > 0:
            E_hi = min(E_hi, E)
        else:
            E_lo = max(E_lo, E)
        dE, _ = radial_action_derivatives(model, em, qtol)
        E_new = E - f / dE
        if not (E_lo < E_new < E_hi):
            E_new = 0.5 * (E_lo + E_hi) if math.isfinite(E_hi) else 2 * E
        E = E_new
    raise NoConvergence(f"invert_energy did not converge for a={tuple(a)}")


def circular_frequencies(model: OscillatorModel, a2: float) -> FrequencyPair:
    """Closed-form frequencies on the circular-orbit edges of the cone."""
    s = math.sqrt(2 * (model.ell + 1))
    scale = abs(a2) ** model.M
    if a2 > 0:
        return FrequencyPair(s * scale, scale)
    if a2 < 0:
        return FrequencyPair(s * scale, (s - 1) * scale)
    raise Inadmissible("circular limit requires a2 != 0")


def frequencies(model: OscillatorModel, a: ActionPair, tol: float = 1e-12) -> FrequencyPair:
    """``omega = grad h0`` from period integrals at ``E = h0(a)``."""
    a = ActionPair(float(a[0]), float(a[1]))
    E = invert_energy(model, a, tol)
    dE, dL = radial_action_derivatives(model, EnergyMomentum(E, a.a2), 1e-14)
    da1_dL = dL if a.a2 >= 0 else dL - 1.0
    w1 = 1.0 / dE
    return FrequencyPair(w1, -w1 * da1_dL)


def frequencies_on_radial_ray(model: OscillatorModel, a1: float,
                              h: float = 0.0) -> tuple[FrequencyPair, FrequencyPair]:
    """One-sided limits ``a2 -> 0+`` and ``a2 -> 0-`` of the frequencies at ``(a1, 0)``.

    With ``h = 0`` the limits are taken analytically (``d a_r/dL -> -+1/2``);
    a positive ``h`` evaluates at ``a2 = +-h`` instead.
    """
    if h == 0.0:
        E = invert_energy(model, ActionPair(a1, 0.0))
        dE, _ = radial_action_derivatives(model, EnergyMomentum(E, 0.0))
        w1 = 1.0 / dE
        plus = FrequencyPair(w1, -w1 * (-0.5))
        minus = FrequencyPair(w1, -w1 * (0.5 - 1.0))
        return plus, minus
    return frequencies(model, ActionPair(a1, h)), frequencies(model, ActionPair(a1, -h))
