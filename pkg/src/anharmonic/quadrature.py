"""Gauss-Chebyshev rules for integrals with square-root endpoint behaviour.

Both rules integrate over ``[lo, hi]`` after the affine map
``r = c + h*x``, ``x in [-1, 1]``:

* :func:`sqrt_vanishing` computes ``int sqrt((r-lo)(hi-r)) g(r) dr``
  (second-kind weight),
* :func:`sqrt_singular` computes ``int g(r) / sqrt((r-lo)(hi-r)) dr``
  (first-kind weight).

The node count doubles until two successive estimates agree to the
requested relative tolerance.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import QuadratureFailure

ArrayFunc = Callable[[np.ndarray], np.ndarray]

N_START = 32
N_MAX = 2**21


def _first_kind(n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.cos((2 * np.arange(1, n + 1) - 1) * np.pi / (2 * n))
    return x, np.full(n, np.pi / n)


def _second_kind(n: int) -> tuple[np.ndarray, np.ndarray]:
    t = np.arange(1, n + 1) * np.pi / (n + 1)
    return np.cos(t), np.pi / (n + 1) * np.sin(t) ** 2


def _adaptive(rule, g: ArrayFunc, lo: float, hi: float, scale_pow: int,
              rtol: float, atol: float, n_start: int, n_max: int) -> float:
    if not hi > lo:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    c = 0.5 * (hi + lo)
    h = 0.5 * (hi - lo)
    prev = None
    n = n_start
    while n <= n_max:
        x, w = rule(n)
        val = float(h**scale_pow * np.dot(w, g(c + h * x)))
        if prev is not None and abs(val - prev) <= max(rtol * abs(val), atol):
            return val
        prev = val
        n *= 2
    raise QuadratureFailure(
        f"no convergence to rtol={rtol:g} within {n_max} nodes (last={prev!r})"
    )


def sqrt_vanishing(g: ArrayFunc, lo: float, hi: float, rtol: float = 1e-12,
                   atol: float = 0.0, n_start: int = N_START,
                   n_max: int = N_MAX) -> float:
    """``int_lo^hi sqrt((r-lo)(hi-r)) g(r) dr`` for smooth ``g``."""
    return _adaptive(_second_kind, g, lo, hi, 2, rtol, atol, n_start, n_max)


def sqrt_singular(g: ArrayFunc, lo: float, hi: float, rtol: float = 1e-12,
                  atol: float = 0.0, n_start: int = N_START,
                  n_max: int = N_MAX) -> float:
    """``int_lo^hi g(r) / sqrt((r-lo)(hi-r)) dr`` for smooth ``g``."""
    return _adaptive(_first_kind, g, lo, hi, 0, rtol, atol, n_start, n_max)
