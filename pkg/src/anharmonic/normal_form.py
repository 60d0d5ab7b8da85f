"""Torus symbols, cutoff splitting, homological equation and the classical normal-form step.

A symbol is a finite Fourier sum ``f(a, phi) = sum_k f_k(a) exp(i k.phi)``
with ``|k|_inf <= K``; the coefficients live on a grid that is geometric in
``|a|`` and uniform in the polar angle of ``a``. The Poisson bracket is

    {f, g} = d_a f . d_phi g - d_phi f . d_a g

so that ``{h0, g} = sum_k i (omega . k) g_k exp(i k.phi)``.
"""

from __future__ import annotations

import base64
import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

from .classical import ActionPair, OscillatorModel, invert_energy
from .errors import GridTooCoarse
from .frequency import sphere_table
from .lattice import ResonanceParams

log = logging.getLogger(__name__)

FD_RTOL = 1e-5
FORMAT = "torus-symbol/1"


# ---------------------------------------------------------------------------
# cutoff

def _sigma(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def chi(t):
    """Smooth even cutoff: 1 on ``|t| <= 1/2``, 0 on ``|t| >= 1``."""
    t = np.abs(np.asarray(t, dtype=float))
    s = 2.0 * (t - 0.5)
    a, b = _sigma(s), _sigma(1.0 - s)
    mid = b / np.where(a + b > 0, a + b, 1.0)
    out = np.where(t <= 0.5, 1.0, np.where(t >= 1.0, 0.0, mid))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# grid and symbols

@dataclass(frozen=True)
class ActionGrid:
    """Geometric radii ``rho_min .. rho_max`` times uniform polar angles."""

    rho_min: float
    rho_max: float
    theta_min: float = math.radians(-40)
    theta_max: float = math.radians(40)
    n_rho: int = 64
    n_theta: int = 32

    def __post_init__(self):
        if not (0 < self.rho_min < self.rho_max):
            raise ValueError("need 0 < rho_min < rho_max")
        if self.n_rho < 10 or self.n_theta < 10:
            raise ValueError("grid needs at least 10 nodes per axis")

    @property
    def u(self) -> np.ndarray:
        return np.linspace(math.log(self.rho_min), math.log(self.rho_max), self.n_rho)

    @property
    def theta(self) -> np.ndarray:
        return np.linspace(self.theta_min, self.theta_max, self.n_theta)

    @property
    def rho(self) -> np.ndarray:
        return np.exp(self.u)[:, None] * np.ones(self.n_theta)

    def nodes(self) -> np.ndarray:
        """Action coordinates, shape ``(2, n_rho, n_theta)``."""
        r = np.exp(self.u)[:, None]
        th = self.theta[None, :]
        return np.array([r * np.cos(th), r * np.sin(th)])

    def to_dict(self) -> dict:
        return {"rho_min": self.rho_min, "rho_max": self.rho_max, "theta_min": self.theta_min,
                "theta_max": self.theta_max, "n_rho": self.n_rho, "n_theta": self.n_theta}


def mode_grid(K: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(-K, K + 1)
    return k[:, None] * np.ones(2 * K + 1, int), np.ones(2 * K + 1, int)[:, None] * k[None, :]


def _encode(arr: np.ndarray) -> dict:
    a = np.ascontiguousarray(arr, dtype="<c16")
    return {"dtype": "complex128", "shape": list(a.shape),
            "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<c16").reshape(d["shape"]).copy()


@dataclass(frozen=True, eq=False)
class TorusSymbol:
    """``coeffs[k1 + K, k2 + K, i_rho, i_theta]``."""

    grid: ActionGrid
    K: int
    coeffs: np.ndarray
    order_m: float = 0.0
    tail: float = 0.0

    def __post_init__(self):
        n = 2 * self.K + 1
        want = (n, n, self.grid.n_rho, self.grid.n_theta)
        if self.coeffs.shape != want:
            raise ValueError(f"coefficient array has shape {self.coeffs.shape}, expected {want}")

    @classmethod
    def zeros(cls, grid: ActionGrid, K: int, order_m: float = 0.0) -> "TorusSymbol":
        n = 2 * K + 1
        return cls(grid, K, np.zeros((n, n, grid.n_rho, grid.n_theta), complex), order_m)

    @classmethod
    def from_modes(cls, grid: ActionGrid, K: int, modes: dict, order_m: float = 0.0) -> "TorusSymbol":
        """Build from ``{k: f_k(a1, a2)}``; the conjugate modes are filled in."""
        out = cls.zeros(grid, K, order_m)
        a1, a2 = grid.nodes()
        for k, fn in modes.items():
            k1, k2 = k
            val = np.broadcast_to(np.asarray(fn(a1, a2), complex), a1.shape)
            if (k1, k2) == (0, 0):
                out.coeffs[K, K] += val.real
            else:
                out.coeffs[K + k1, K + k2] += val
                out.coeffs[K - k1, K - k2] += np.conj(val)
        return out

    def mode(self, k) -> np.ndarray:
        k1, k2 = k
        if max(abs(k1), abs(k2)) > self.K:
            return np.zeros((self.grid.n_rho, self.grid.n_theta), complex)
        return self.coeffs[self.K + k1, self.K + k2]

    @property
    def average(self) -> np.ndarray:
        return self.coeffs[self.K, self.K].real

    def reality_defect(self) -> float:
        flipped = np.conj(self.coeffs[::-1, ::-1])
        scale = max(float(np.max(np.abs(self.coeffs))), 1e-300)
        return float(np.max(np.abs(self.coeffs - flipped))) / scale

    def evaluate(self, phi) -> np.ndarray:
        """``f(a, phi)`` at every node for a single angle pair."""
        k1, k2 = mode_grid(self.K)
        ph = np.exp(1j * (k1 * phi[0] + k2 * phi[1]))
        return np.einsum("ij,ijab->ab", ph, self.coeffs).real

    def sup_norm(self, mask=None) -> float:
        """``max_a sum_k |f_k(a)|``, an upper bound for the sup over the angles."""
        s = np.sum(np.abs(self.coeffs), axis=(0, 1))
        if mask is not None:
            s = s[mask]
        return float(np.max(s)) if s.size else 0.0

    def with_coeffs(self, coeffs, order_m=None, tail=0.0) -> "TorusSymbol":
        return replace(self, coeffs=coeffs, order_m=self.order_m if order_m is None else order_m,
                       tail=tail)

    def __add__(self, other: "TorusSymbol") -> "TorusSymbol":
        _check_compatible(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs, max(self.order_m, other.order_m))

    def __sub__(self, other: "TorusSymbol") -> "TorusSymbol":
        _check_compatible(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs, max(self.order_m, other.order_m))

    def scale(self, c: float) -> "TorusSymbol":
        return self.with_coeffs(c * self.coeffs)

    def truncate(self, K: int) -> "TorusSymbol":
        """Restrict (or zero-pad) to ``|k|_inf <= K``; ``tail`` records the dropped sup norm."""
        if K >= self.K:
            n = 2 * K + 1
            c = np.zeros((n, n) + self.coeffs.shape[2:], complex)
            d = K - self.K
            c[d:d + 2 * self.K + 1, d:d + 2 * self.K + 1] = self.coeffs
            return replace(self, K=K, coeffs=c)
        d = self.K - K
        kept = self.coeffs[d:d + 2 * K + 1, d:d + 2 * K + 1]
        dropped = np.sum(np.abs(self.coeffs), axis=(0, 1)) - np.sum(np.abs(kept), axis=(0, 1))
        return replace(self, K=K, coeffs=kept.copy(), tail=self.tail + float(np.max(dropped)))

    # serialization ---------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps({"format": FORMAT, "grid": self.grid.to_dict(), "K": self.K,
                           "order_m": self.order_m, "tail": self.tail,
                           "coeffs": _encode(self.coeffs)})

    @classmethod
    def from_json(cls, text: str) -> "TorusSymbol":
        d = json.loads(text)
        if d.get("format") != FORMAT:
            raise ValueError(f"unknown symbol container {d.get('format')!r}")
        return cls(ActionGrid(**d["grid"]), int(d["K"]), _decode(d["coeffs"]),
                   float(d["order_m"]), float(d["tail"]))


def _check_compatible(f: TorusSymbol, g: TorusSymbol) -> None:
    if f.grid != g.grid:
        raise ValueError("symbols live on different grids")
    if f.K != g.K:
        raise ValueError(f"symbols have different K ({f.K} vs {g.K})")


# ---------------------------------------------------------------------------
# model data on the grid

@lru_cache(maxsize=32)
def grid_frequencies(ell: int, grid: ActionGrid) -> np.ndarray:
    """``omega`` at the nodes, shape ``(2, n_rho, n_theta)``."""
    M = (ell - 1) / (ell + 1)
    w = sphere_table(ell)(grid.theta)
    return w[:, None, :] * (np.exp(grid.u) ** M)[None, :, None]


@lru_cache(maxsize=32)
def grid_energy(ell: int, grid: ActionGrid) -> np.ndarray:
    """``h0`` at the nodes from the unit-radius values and homogeneity."""
    model = OscillatorModel(ell)
    unit = np.array([invert_energy(model, ActionPair(math.cos(t), math.sin(t)), tol=1e-14)
                     for t in grid.theta])
    return unit[None, :] * (np.exp(grid.u) ** model.energy_degree)[:, None]


def h0_symbol(model: OscillatorModel, grid: ActionGrid, K: int) -> TorusSymbol:
    s = TorusSymbol.zeros(grid, K, model.energy_degree)
    s.coeffs[K, K] = grid_energy(model.ell, grid)
    return s


def action_symbol(grid: ActionGrid, K: int, j: int) -> TorusSymbol:
    """The projection ``a -> a_j`` (``j`` = 0 or 1)."""
    s = TorusSymbol.zeros(grid, K, 1.0)
    s.coeffs[K, K] = grid.nodes()[j]
    return s


# ---------------------------------------------------------------------------
# splitting and homological equation

@dataclass(frozen=True)
class CutoffWeights:
    outer: np.ndarray   # 1 - chi(|a|), shape (n_rho, n_theta)
    chi_k: np.ndarray   # chi(omega.k / (|k| |a|^delta)), shape (n, n, n_rho, n_theta)
    chi_tilde: np.ndarray
    omega_k: np.ndarray  # omega.k


def cutoff_weights(model: OscillatorModel, params: ResonanceParams, grid: ActionGrid,
                   K: int) -> CutoffWeights:
    w = grid_frequencies(model.ell, grid)
    rho = grid.rho
    k1, k2 = mode_grid(K)
    knorm = np.hypot(k1, k2).astype(float)[:, :, None, None]
    wk = k1[:, :, None, None] * w[0] + k2[:, :, None, None] * w[1]
    safe = np.where(knorm > 0, knorm, 1.0)
    chi_k = chi(wk / (safe * rho**params.delta))
    chi_t = chi(knorm / rho**params.epsilon)
    chi_k[K, K] = 1.0
    return CutoffWeights(1.0 - chi(rho), chi_k, chi_t, wk)


@dataclass(frozen=True)
class Splitting:
    average: TorusSymbol
    resonant: TorusSymbol
    nonresonant: TorusSymbol
    smoothing: TorusSymbol

    def total(self) -> TorusSymbol:
        return self.average + self.resonant + self.nonresonant + self.smoothing


def split_symbol(f: TorusSymbol, model: OscillatorModel, params: ResonanceParams) -> Splitting:
    """``f = <f> + f_res + f_nr + f_S``, exactly at every node."""
    K = f.K
    cw = cutoff_weights(model, params, f.grid, K)
    c = f.coeffs
    avg = np.zeros_like(c)
    avg[K, K] = cw.outer * c[K, K]
    res = cw.outer * cw.chi_k * cw.chi_tilde * c
    nr = cw.outer * (1.0 - cw.chi_k) * cw.chi_tilde * c
    res[K, K] = 0.0
    nr[K, K] = 0.0
    smooth = c - avg - res - nr
    return Splitting(f.with_coeffs(avg), f.with_coeffs(res), f.with_coeffs(nr), f.with_coeffs(smooth))


def solve_homological(f: TorusSymbol, model: OscillatorModel, params: ResonanceParams) -> TorusSymbol:
    """``g`` with ``{h0, g} + f_nr = 0``.

    Per mode ``g_k = -d_k chi~_k (1 - chi(|a|)) f_k`` with
    ``d_k = (1 - chi_k)/(i omega.k)``; the minus sign matches the bracket
    convention of this module, for which ``{h0, g}_k = i (omega.k) g_k``.
    """
    K = f.K
    cw = cutoff_weights(model, params, f.grid, K)
    safe = np.where(cw.chi_k < 1.0, cw.omega_k, 1.0)
    d = np.where(cw.chi_k < 1.0, (1.0 - cw.chi_k) / (1j * safe), 0.0)
    g = -d * cw.chi_tilde * cw.outer * f.coeffs
    g[K, K] = 0.0
    return f.with_coeffs(g, f.order_m - model.M)


def h0_bracket_modes(g: TorusSymbol, model: OscillatorModel) -> TorusSymbol:
    """``{h0, g}`` from the per-mode formula ``i (omega.k) g_k``."""
    k1, k2 = mode_grid(g.K)
    w = grid_frequencies(model.ell, g.grid)
    wk = k1[:, :, None, None] * w[0] + k2[:, :, None, None] * w[1]
    return g.with_coeffs(1j * wk * g.coeffs, g.order_m + model.M)


# ---------------------------------------------------------------------------
# Poisson bracket

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_EDGE_WIDTH = 7


def _one_sided(i: int, width: int = _EDGE_WIDTH) -> np.ndarray:
    """Weights for ``f'(x_i)`` from nodes ``0..width-1`` (exact on polynomials of degree < width)."""
    x = np.arange(width) - i
    V = np.vander(x, width, increasing=True).T
    rhs = np.zeros(width)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


# one-sided closures at the two edge nodes are taken one order higher than the
# interior, since their error constants are several times larger
_EDGE = np.array([_one_sided(0), _one_sided(1)])


def _diff4(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order centred first derivative; one-sided closure at the two edge nodes."""
    f = np.moveaxis(f, axis, -1)
    n = f.shape[-1]
    out = np.empty_like(f)
    out[..., 2:-2] = (f[..., :-4] * _D1[0] + f[..., 1:-3] * _D1[1]
                      + f[..., 3:-1] * _D1[3] + f[..., 4:] * _D1[4])
    for i in (0, 1):
        out[..., i] = f[..., :_EDGE_WIDTH] @ _EDGE[i]
        out[..., n - 1 - i] = -(f[..., ::-1][..., :_EDGE_WIDTH] @ _EDGE[i])
    return np.moveaxis(out / h, -1, axis)


_D6 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0


def _fd_error(f: np.ndarray, h: float, axis: int, d_fine: np.ndarray) -> float:
    """Error estimate of the centred fourth-order derivative: its distance to the
    sixth-order one on the interior nodes."""
    f = np.moveaxis(f, axis, -1)
    n = f.shape[-1]
    if n < 7:
        return 0.0
    d6 = sum(_D6[j] * f[..., j:n - 6 + j] for j in range(7)) / h
    d4 = np.moveaxis(d_fine, axis, -1)[..., 3:n - 3]
    return float(np.max(np.abs(d4 - d6)))


def action_gradient(f: TorusSymbol, check: bool = True, rtol: float = FD_RTOL):
    """``(d f_k/da1, d f_k/da2)`` by the chain rule from ``(log|a|, theta)``."""
    grid = f.grid
    du = grid.u[1] - grid.u[0]
    dth = grid.theta[1] - grid.theta[0]
    fu = _diff4(f.coeffs, du, 2)
    ft = _diff4(f.coeffs, dth, 3)
    if check and np.any(f.coeffs):
        scale = max(float(np.max(np.abs(fu))), float(np.max(np.abs(ft))), 1e-300)
        err = max(_fd_error(f.coeffs, du, 2, fu), _fd_error(f.coeffs, dth, 3, ft)) / scale
        if err > rtol:
            raise GridTooCoarse(f"finite-difference error estimate {err:.3g} exceeds {rtol:g}")
    r = np.exp(grid.u)[:, None]
    c, s = np.cos(grid.theta)[None, :], np.sin(grid.theta)[None, :]
    return (c * fu - s * ft) / r, (s * fu + c * ft) / r


def _conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return fftconvolve(a, b, mode="full", axes=(0, 1))


def poisson_bracket(f: TorusSymbol, g: TorusSymbol, model: OscillatorModel | None = None,
                    K_out: int | None = None, check: bool = True) -> TorusSymbol:
    """``{f, g} = d_a f . d_phi g - d_phi f . d_a g``.

    The product of two sums with ``|k| <= K`` has ``|k| <= 2K``; the result
    is truncated to ``K_out`` (default ``2K``) and the discarded sup norm is
    stored in ``tail``.
    """
    _check_compatible(f, g)
    K = f.K
    k1, k2 = mode_grid(K)
    ik = (1j * k1[:, :, None, None], 1j * k2[:, :, None, None])
    out = np.zeros((4 * K + 1, 4 * K + 1) + f.coeffs.shape[2:], complex)
    fk = [ik[j] * f.coeffs for j in range(2)]
    gk = [ik[j] * g.coeffs for j in range(2)]
    # gradients are only formed (and error-checked) where their partner is nonzero
    if any(np.any(x) for x in gk):
        fa = action_gradient(f, check)
        for j in range(2):
            if np.any(gk[j]):
                out += _conv(fa[j], gk[j])
    if any(np.any(x) for x in fk):
        ga = action_gradient(g, check)
        for j in range(2):
            if np.any(fk[j]):
                out -= _conv(fk[j], ga[j])
    # the exact bracket of real symbols is real
    out = 0.5 * (out + np.conj(out[::-1, ::-1]))
    order = f.order_m + g.order_m - 1.0
    full = TorusSymbol(f.grid, 2 * K, out, order)
    res = full.truncate(2 * K if K_out is None else K_out)
    return replace(res, tail=res.tail + f.tail + g.tail)


# ---------------------------------------------------------------------------
# normal-form iteration

@dataclass(frozen=True, eq=False)
class NormalFormState:
    n: int
    z_list: tuple
    v: TorusSymbol
    order_ledger: tuple
    resonant: TorusSymbol
    smoothing: TorusSymbol
    dropped: tuple = field(default=())

    @classmethod
    def initial(cls, v: TorusSymbol) -> "NormalFormState":
        zero = v.with_coeffs(np.zeros_like(v.coeffs))
        return cls(0, (), v, (v.order_m,), zero, zero)

    def z_total(self) -> np.ndarray:
        """``<z^(n)> = z_1 + ... + z_n`` on the grid."""
        if not self.z_list:
            return np.zeros((self.v.grid.n_rho, self.v.grid.n_theta))
        return np.sum([z.average for z in self.z_list], axis=0)


def normal_form_step(state: NormalFormState, model: OscillatorModel, params: ResonanceParams,
                     lie_order: int = 2, check: bool = True) -> NormalFormState:
    """One step of the classical normal form.

    ``z_{n+1} = <v_n>``, ``g`` solves the homological equation for ``v_n`` and

        v_{n+1} = 1/2 {v_nr, g} + {<v> + v_res + z^(n), g}

    plus, for ``lie_order >= 3``, ``1/2 {{z^(n) + v, g}, g} - 1/6 {{v_nr, g}, g}``.
    The sup norm of the first omitted group is logged and kept in ``dropped``.
    """
    v = state.v
    K = v.K
    parts = split_symbol(v, model, params)
    g = solve_homological(v, model, params)
    z_next = parts.average
    z_acc = v.with_coeffs(np.zeros_like(v.coeffs))
    z_acc.coeffs[K, K] = state.z_total()

    if not np.any(g.coeffs):
        new_v = v.with_coeffs(np.zeros_like(v.coeffs), state.order_ledger[-1] - params.rho)
        dropped = 0.0
    else:
        def br(a, b):
            return poisson_bracket(a, b, model, K_out=K, check=check)

        slow = parts.average + parts.resonant + z_acc
        new_v = br(parts.nonresonant, g).scale(0.5) + br(slow, g)
        third = br(br(z_acc + v, g), g).scale(0.5) - br(br(parts.nonresonant, g), g).scale(1 / 6)
        if lie_order >= 3:
            new_v = new_v + third
            dropped = float("nan")
        else:
            dropped = third.sup_norm()
        new_v = new_v.with_coeffs(new_v.coeffs, state.order_ledger[-1] - params.rho,
                                  tail=new_v.tail)
    log.debug("normal-form step %d: dropped Lie-series norm %.3g", state.n + 1, dropped)
    return NormalFormState(
        n=state.n + 1,
        z_list=state.z_list + (z_next,),
        v=new_v,
        order_ledger=state.order_ledger + (state.order_ledger[-1] - params.rho,),
        resonant=state.resonant + parts.resonant,
        smoothing=state.smoothing + parts.smoothing,
        dropped=state.dropped + (dropped,),
    )


def demo_symbol(grid: ActionGrid, K: int = 8, modes=((1, 0), (0, 1), (1, -1), (2, -1), (1, -2)),
                order_m: float = 2 / 3) -> TorusSymbol:
    """Smooth real test symbol of order ``order_m``: a ``|x|^2``-like average plus a few modes."""
    def radial(a1, a2):
        return np.hypot(a1, a2) ** order_m

    spec = {(0, 0): lambda a1, a2: radial(a1, a2) * (1 + 0.2 * a2 / np.hypot(a1, a2))}
    for i, k in enumerate(modes):
        amp = 0.3 / (1 + i)
        spec[tuple(k)] = (lambda c, ph: lambda a1, a2: c * radial(a1, a2)
                          * np.exp(1j * ph * a2 / np.hypot(a1, a2)))(amp, 0.5 * (i + 1))
    return TorusSymbol.from_modes(grid, K, spec, order_m)
