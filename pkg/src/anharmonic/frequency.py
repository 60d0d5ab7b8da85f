"""Frequency map on the unit arc, Rüssmann constants and circular-orbit expansions."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Chebyshev

from .classical import (ARC_MAX, ARC_MIN, ActionPair, FrequencyPair, OscillatorModel,
                        arc_point, circular_frequencies, frequencies, invert_energy)
from .errors import DegenerateMap, FitFailure

CHEB_DEGREE = 64
ENDPOINT_SHRINK = 1e-4
FIT_RESIDUAL = 1e-8


def omega_on_circle(model: OscillatorModel, phi: float) -> FrequencyPair:
    """``omega(cos phi, sin phi)`` for ``phi`` in ``[-pi/4, pi/2]``.

    The two endpoints are circular orbits and use the closed-form limit.
    """
    if not (ARC_MIN - 1e-15 <= phi <= ARC_MAX + 1e-15):
        raise ValueError(f"phi={phi} outside the arc [{ARC_MIN}, {ARC_MAX}]")
    if abs(phi - ARC_MAX) < 1e-15:
        return circular_frequencies(model, 1.0)
    if abs(phi - ARC_MIN) < 1e-15:
        return circular_frequencies(model, -math.sqrt(0.5))
    return frequencies(model, arc_point(phi))


@dataclass(frozen=True)
class SphereFrequencyTable:
    """Chebyshev representation of ``phi -> omega(phi)`` on the (shrunk) arc."""

    omega1: Chebyshev
    omega2: Chebyshev
    residual: float

    @property
    def domain(self) -> tuple[float, float]:
        return tuple(self.omega1.domain)

    def __call__(self, phi, derivative: int = 0) -> np.ndarray:
        """Array of shape ``(2,) + shape(phi)`` with the requested derivative."""
        f1, f2 = self.omega1, self.omega2
        if derivative:
            f1, f2 = f1.deriv(derivative), f2.deriv(derivative)
        return np.array([f1(phi), f2(phi)])

    def phi_grid(self, n: int) -> np.ndarray:
        return np.linspace(*self.domain, n)


@lru_cache(maxsize=None)
def sphere_table(ell: int, degree: int = CHEB_DEGREE) -> SphereFrequencyTable:
    """Fit ``omega`` at Chebyshev points and check it at the interleaved midpoints."""
    model = OscillatorModel(ell)
    lo, hi = ARC_MIN + ENDPOINT_SHRINK, ARC_MAX - ENDPOINT_SHRINK
    n = degree + 1
    t = np.cos((2 * np.arange(n) + 1) * np.pi / (2 * n))
    phis = 0.5 * (hi + lo) + 0.5 * (hi - lo) * t
    vals = np.array([omega_on_circle(model, p) for p in phis])
    fits = [Chebyshev.fit(phis, vals[:, j], degree, domain=[lo, hi]) for j in range(2)]
    tm = np.cos(np.arange(1, n) * np.pi / n)
    check = 0.5 * (hi + lo) + 0.5 * (hi - lo) * tm
    truth = np.array([omega_on_circle(model, p) for p in check])
    resid = max(float(np.max(np.abs(fits[j](check) - truth[:, j]))) for j in range(2))
    if resid > FIT_RESIDUAL:
        raise FitFailure(f"Chebyshev residual {resid:.3g} exceeds {FIT_RESIDUAL:g}")
    return SphereFrequencyTable(fits[0], fits[1], resid)


def directional_derivative_scan(model: OscillatorModel, k, mu_max: int = 2,
                                grid_size: int = 401) -> tuple[np.ndarray, np.ndarray]:
    """``|d^mu/dphi^mu (k . omega(phi)) / |k||`` for ``mu = 0..mu_max``.

    Returns ``(phi_grid, table)`` with ``table.shape == (mu_max + 1, grid_size)``.
    """
    k = np.asarray(k, dtype=float)
    if not np.any(k):
        raise ValueError("k must be nonzero")
    if mu_max > 4:
        raise ValueError("mu_max must be <= 4")
    tab = sphere_table(model.ell)
    phi = tab.phi_grid(grid_size)
    u = k / np.linalg.norm(k)
    out = np.array([np.abs(u @ tab(phi, mu)) for mu in range(mu_max + 1)])
    return phi, out


@dataclass
class NondegeneracyReport:
    mu0: int
    beta: float
    worst_phi: float
    worst_k: tuple[int, int]
    threshold: float
    betas: list[float]
    empirical: bool = True

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _integer_direction(c: np.ndarray, kmax: int = 12) -> tuple[int, int]:
    best, best_err = (1, 0), math.inf
    for k1 in range(-kmax, kmax + 1):
        for k2 in range(0, kmax + 1):
            if (k1, k2) == (0, 0) or math.gcd(k1, k2) != 1:
                continue
            v = np.array([k1, k2]) / math.hypot(k1, k2)
            err = min(np.linalg.norm(v - c), np.linalg.norm(v + c))
            if err < best_err:
                best, best_err = (k1, k2), err
    return best


def russmann_constants(model: OscillatorModel, k_directions: int = 720, mu_max: int = 4,
                       grid_size: int = 401, seed: int = 0) -> NondegeneracyReport:
    """Smallest ``mu0 >= 1`` and bound ``beta`` with
    ``max_{mu <= mu0} |d^mu (c . omega)/dphi^mu| >= beta`` over the arc and unit ``c``.

    Directions are sampled uniformly on the half circle (random phase from
    ``seed``) and augmented with the directions orthogonal to ``omega`` at
    every grid node, where ``c . omega`` vanishes.
    """
    tab = sphere_table(model.ell)
    phi = tab.phi_grid(grid_size)
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, math.pi / k_directions) + np.arange(k_directions) * math.pi / k_directions
    dirs = [np.stack([np.cos(t), np.sin(t)], axis=1)]
    w = tab(phi)
    perp = np.stack([-w[1], w[0]], axis=1)
    dirs.append(perp / np.linalg.norm(perp, axis=1, keepdims=True))
    C = np.concatenate(dirs)
    D = np.array([np.abs(C @ tab(phi, mu)) for mu in range(mu_max + 1)])  # (mu, dir, phi)
    running = np.maximum.accumulate(D, axis=0)
    betas = [float(running[mu].min()) for mu in range(mu_max + 1)]
    for mu0 in range(1, mu_max + 1):
        threshold = 0.01 * float(np.median(running[mu0]))
        if betas[mu0] > threshold:
            i, j = np.unravel_index(np.argmin(running[mu0]), running[mu0].shape)
            return NondegeneracyReport(mu0, betas[mu0], float(phi[j]),
                                       _integer_direction(C[i]), threshold, betas)
    raise DegenerateMap(f"no mu0 <= {mu_max} bounds the directional derivatives (betas={betas})")


# ---------------------------------------------------------------------------
# circular-orbit expansions

def _expansion_letters(ell: int) -> tuple[float, float, float]:
    """The coefficients ``a, b, c`` exactly as printed with the expansion."""
    a = 2 * (ell + 1)
    b = 2 * (2 * ell**2 - 2 * ell - 5)
    c = 2 * (4 * ell**3 - 12 * ell**2 + 11 * ell + 27)
    return a, b, c


def effective_potential_derivatives(ell: int, a2: float = 1.0) -> tuple[float, float, float]:
    """Second, third and fourth derivatives of ``V*_{a2}`` at its minimum."""
    r0 = abs(a2) ** (1 / (ell + 1))
    n = 2 * ell
    A = 3 * a2**2 / r0**4 + (n - 1) * r0 ** (n - 2)
    B = -12 * a2**2 / r0**5 + (n - 1) * (n - 2) * r0 ** (n - 3)
    C = 60 * a2**2 / r0**6 + (n - 1) * (n - 2) * (n - 3) * r0 ** (n - 4)
    return A, B, C


def circular_closed_forms(ell: int, a2: float = 1.0) -> dict:
    M = (ell - 1) / (ell + 1)
    a, b, c = _expansion_letters(ell)
    A, B, C = effective_potential_derivatives(ell, a2)
    return {
        "c0": (ell + 1) / (2 * ell) * a2 ** (2 * ell / (ell + 1)),
        "c1": math.sqrt(2 * (ell + 1)) * a2**M,
        "c2": (3 * a * c - 5 * b**2) / (48 * a**2) * a2 ** (-2 / (ell + 1)),
        # same second-order Birkhoff coefficient from the actual potential derivatives
        "c2_birkhoff": (3 * A * C - 5 * B**2) / (48 * A**2),
    }


def _default_window(a2_ref: float) -> np.ndarray:
    return abs(a2_ref) * np.linspace(0.002, 0.02, 12)


def _lstsq(x: np.ndarray, y: np.ndarray, degree: int) -> np.ndarray:
    if len(np.unique(x)) <= degree:
        raise FitFailure("not enough distinct samples for the fit")
    V = np.vander(x, degree + 1, increasing=True)
    if np.linalg.cond(V) > 1e12:
        raise FitFailure("ill-conditioned sample layout")
    return np.linalg.lstsq(V, y, rcond=None)[0]


def circular_expansion_check(model: OscillatorModel, a2_ref: float = 1.0,
                             a1_samples=None) -> dict:
    """Fit ``h0(a1, a2_ref) ~ c0 + c1 a1 + c2 a1^2`` near the circular orbit."""
    a1 = _default_window(a2_ref) if a1_samples is None else np.asarray(a1_samples, float)
    E = np.array([invert_energy(model, ActionPair(x, a2_ref), tol=1e-14) for x in a1])
    fit = _lstsq(a1, E, 2)
    closed = circular_closed_forms(model.ell, a2_ref)
    return {
        "fitted": {"c0": fit[0], "c1": fit[1], "c2": fit[2]},
        "closed_form": {k: closed[k] for k in ("c0", "c1", "c2")},
        "c2_birkhoff": closed["c2_birkhoff"],
        "rel_err": {k: abs(fit[i] / closed[k] - 1) for i, k in enumerate(("c0", "c1", "c2"))},
    }


def ratio_slope_closed_form(ell: int) -> float:
    a = 2 * (ell + 1)
    return 16 * (ell + 1) ** 2 * (ell - 1) * (2 * ell + 1) / (24 * a**2 * math.sqrt(2 * (ell + 1)))


def frequency_ratio_slope(model: OscillatorModel, a2_ref: float = 1.0, a1_samples=None) -> dict:
    """Fit ``omega2/omega1 ~ (1 + d a1/a2) / sqrt(2(l+1))`` near the circular orbit."""
    a1 = _default_window(a2_ref) if a1_samples is None else np.asarray(a1_samples, float)
    W = np.array([frequencies(model, ActionPair(x, a2_ref)) for x in a1])
    x = a1 / a2_ref
    fit = _lstsq(x, W[:, 1] / W[:, 0], 2)
    intercept = 1 / math.sqrt(2 * (model.ell + 1))
    d = ratio_slope_closed_form(model.ell)
    return {
        "intercept": fit[0],
        "d": fit[1] / fit[0],
        "intercept_closed_form": intercept,
        "d_closed_form": d,
        "rel_err": {"intercept": abs(fit[0] / intercept - 1),
                    "d": abs(fit[1] / fit[0] / d - 1) if d else abs(fit[1] / fit[0])},
    }
