"""Torus Fourier coefficients of phase-space functions along the flow of the actions."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .classical import (ActionPair, EnergyMomentum, OscillatorModel, frequencies,
                        invert_energy, turning_points)
from .errors import FlowDivergence, NonPeriodicity

PhaseFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]

ENERGY_DRIFT = 1e-8
CLOSURE_TOL = 1e-6


def h0_phase(model: OscillatorModel, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    ell = model.ell
    return 0.5 * np.sum(xi**2, axis=-1) + np.sum(x**2, axis=-1) ** ell / (2 * ell)


def angular_momentum(x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    return x[..., 0] * xi[..., 1] - x[..., 1] * xi[..., 0]


def torus_base_point(model: OscillatorModel, a: ActionPair) -> tuple[np.ndarray, np.ndarray, float]:
    """Point at the outer turning radius on the torus with actions ``a``."""
    E = invert_energy(model, a)
    L = a[1]
    r_M = turning_points(model, EnergyMomentum(E, L)).r_M
    return np.array([r_M, 0.0]), np.array([0.0, L / r_M]), E


def a1_flow(model: OscillatorModel, a: ActionPair, n_angles: int, rtol: float = 1e-12):
    """Samples of the ``a1``-flow at ``phi1 = 2 pi j / n_angles`` starting at the base point.

    ``grad a1 = (1/omega1) grad h0 - (omega2/omega1) grad L`` with constant
    coefficients on the torus. Returns ``(x, xi)`` arrays of shape ``(n, 2)``.
    """
    w1, w2 = frequencies(model, a)
    cE, cL = 1.0 / w1, -w2 / w1
    x0, xi0, E = torus_base_point(model, a)
    ell = model.ell

    def rhs(_t, z):
        x1, x2, p1, p2 = z
        f = (x1 * x1 + x2 * x2) ** (ell - 1)
        return [cE * p1 - cL * x2, cE * p2 + cL * x1,
                -cE * f * x1 - cL * p2, -cE * f * x2 + cL * p1]

    z0 = np.concatenate([x0, xi0])
    scale = float(np.max(np.abs(z0)))
    t_eval = 2 * np.pi * np.arange(n_angles + 1) / n_angles
    sol = solve_ivp(rhs, (0.0, 2 * np.pi), z0, method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=rtol * scale)
    if not sol.success:
        raise FlowDivergence(sol.message)
    Z = sol.y.T
    x, xi = Z[:, :2], Z[:, 2:]
    drift = float(np.max(np.abs(h0_phase(model, x, xi) - E))) / E
    if drift > ENERGY_DRIFT:
        raise FlowDivergence(f"energy drift {drift:.3g} along the a1-flow")
    gap = float(np.max(np.abs(Z[-1] - Z[0]))) / scale
    if gap > CLOSURE_TOL:
        raise NonPeriodicity(f"a1-flow does not close after 2 pi (gap {gap:.3g})")
    return x[:-1], xi[:-1]


def _rotate(v: np.ndarray, angles: np.ndarray) -> np.ndarray:
    c, s = np.cos(angles), np.sin(angles)
    return np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]], axis=-1)


def torus_samples(model: OscillatorModel, a: ActionPair, n_angles: int = 64, rtol: float = 1e-12):
    """``(x, xi)`` on the ``n x n`` grid of angles, index order ``[phi1, phi2]``."""
    if n_angles < 2 or n_angles & (n_angles - 1):
        raise ValueError("n_angles must be a power of two")
    x1, xi1 = a1_flow(model, a, n_angles, rtol)
    phi2 = 2 * np.pi * np.arange(n_angles) / n_angles
    # the two flows commute; the a2-flow is a rigid rotation of x and xi
    x = _rotate(x1[:, None, :], phi2[None, :])
    xi = _rotate(xi1[:, None, :], phi2[None, :])
    return x, xi


def torus_fourier_coefficients(model: OscillatorModel, v: PhaseFunction, a: ActionPair,
                               n_angles: int = 64, rtol: float = 1e-12) -> np.ndarray:
    """All discrete coefficients ``f_k``; entry ``[k1 mod n, k2 mod n]``."""
    x, xi = torus_samples(model, ActionPair(*a), n_angles, rtol)
    vals = np.asarray(v(x, xi), dtype=float)
    return np.fft.fft2(vals) / n_angles**2


def flow_fourier_coefficient(model: OscillatorModel, v: PhaseFunction, a: ActionPair,
                             k=(0, 0), n_angles: int = 64, rtol: float = 1e-12) -> complex:
    """``(2 pi)^-2 int v(phi_a^phi(z)) e^{-i k.phi} dphi`` by the trapezoidal rule on the torus."""
    c = torus_fourier_coefficients(model, v, a, n_angles, rtol)
    k1, k2 = int(k[0]), int(k[1])
    if max(abs(k1), abs(k2)) >= n_angles // 2:
        raise ValueError("|k| too large for the angular resolution")
    return complex(c[k1 % n_angles, k2 % n_angles])


def radial_power(p: float) -> PhaseFunction:
    """``|x|^(2p)``."""
    def v(x, xi):
        return np.sum(x**2, axis=-1) ** p
    return v


def radial_average(model: OscillatorModel, f: Callable[[np.ndarray], np.ndarray],
                   a: ActionPair) -> float:
    """Time average of ``f(r)`` over the torus, via ``int f dr/p_r / int dr/p_r``.

    Independent of the flow integration; used as an oracle for ``k = 0``.
    """
    from scipy.integrate import quad

    E = invert_energy(model, ActionPair(*a))
    L = a[1]
    tp = turning_points(model, EnergyMomentum(E, L))
    ell = model.ell

    # r = c - h cos(t) removes the inverse square-root endpoint singularities
    c, h = 0.5 * (tp.r_M + tp.r_m), 0.5 * (tp.r_M - tp.r_m)

    def pr(r):
        return math.sqrt(max(2 * (E - L * L / (2 * r * r) - r ** (2 * ell) / (2 * ell)), 1e-300))

    def w(t):
        r = c - h * math.cos(t)
        return h * math.sin(t) / pr(r)

    if tp.r_m == 0.0:
        # radial orbit through the origin: integrate the symmetric full chord
        c, h = 0.0, tp.r_M

        def w(t):  # noqa: F811
            r = -h * math.cos(t)
            return h * math.sin(t) / math.sqrt(max(2 * (E - r ** (2 * ell) / (2 * ell)), 1e-300))

        num = quad(lambda t: f(np.array(abs(-h * math.cos(t)))) * w(t), 0, math.pi, epsabs=0, epsrel=1e-13, limit=200)[0]
        den = quad(w, 0, math.pi, epsabs=0, epsrel=1e-13, limit=200)[0]
        return float(num / den)
    num = quad(lambda t: float(f(np.array(c - h * math.cos(t)))) * w(t), 0, math.pi, epsabs=0, epsrel=1e-13, limit=200)[0]
    den = quad(w, 0, math.pi, epsabs=0, epsrel=1e-13, limit=200)[0]
    return float(num / den)
