"""Batch front-end: ``anharmonic <command> [options]``.

Exit codes: 0 success (rows may carry errors), 1 verification failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .classical import EnergyMomentum, OscillatorModel, action_map, frequencies, radial_action
from .errors import AnharmonicError, ConfigError
from .lattice import LatticeSpec, ResonanceParams, classify, default_params, density_profile

log = logging.getLogger("anharmonic")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULT_CONFIG = {
    "ell": 2,
    "resonance": {"delta": None, "epsilon": None, "mu0": None, "gamma": 2.0, "m_sym": None},
    "lattice": {"kappa": [0.5, 0.0], "cone_deg": [-40.0, 40.0], "R_inner": 2.0},
    "grid": {"rho_min": 10.0, "rho_max": 1000.0, "n_rho": 64, "n_theta": 64, "K": 8},
    "output_dir": "out",
    "cache_dir": None,
    "seed": 0,
}

_SCHEMA = {
    "ell": int, "output_dir": str, "seed": int,
    "resonance": {"delta": float, "epsilon": float, "mu0": int, "gamma": float, "m_sym": float},
    "lattice": {"kappa": list, "cone_deg": list, "R_inner": float},
    "grid": {"rho_min": float, "rho_max": float, "n_rho": int, "n_theta": int, "K": int},
    "cache_dir": str,
}


# ---------------------------------------------------------------------------
# configuration

def _validate_tree(tree: dict, schema: dict, path: str = "") -> None:
    for key, val in tree.items():
        where = f"{path}{key}"
        if key not in schema:
            raise ConfigError(f"unknown configuration key '{where}'")
        want = schema[key]
        if isinstance(want, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{where}' must be a table")
            _validate_tree(val, want, where + ".")
        elif val is not None:
            ok = isinstance(val, (int, float)) and not isinstance(val, bool) if want is float \
                else isinstance(val, want) and not (want is int and isinstance(val, bool))
            if not ok:
                raise ConfigError(f"'{where}' must be of type {want.__name__}, got {val!r}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


class RunConfig:
    """Validated configuration; ``resolved`` holds every value actually used."""

    def __init__(self, tree: dict | None = None):
        tree = tree or {}
        _validate_tree(tree, _SCHEMA)
        self.raw = _merge(DEFAULT_CONFIG, tree)
        ell = self.raw["ell"]
        if ell < 1:
            raise ConfigError("'ell' must be a positive integer")
        self.model = OscillatorModel(ell)
        self.params = self._params()
        lat = self.raw["lattice"]
        if len(lat["kappa"]) != 2 or len(lat["cone_deg"]) != 2:
            raise ConfigError("'lattice.kappa' and 'lattice.cone_deg' need two entries")
        self.spec = LatticeSpec(tuple(float(x) for x in lat["kappa"]),
                                tuple(math.radians(float(x)) for x in lat["cone_deg"]),
                                float(lat["R_inner"]))
        if self.params is not None:
            self.resolved = _merge(self.raw, {"resonance": {
                k: getattr(self.params, k) for k in ("delta", "epsilon", "mu0", "gamma")}})
        else:
            self.resolved = copy.deepcopy(self.raw)

    def _params(self) -> ResonanceParams | None:
        r = self.raw["resonance"]
        base = default_params(self.model, r["mu0"]) if self.model.ell > 1 else None
        if base is None and r["delta"] is None and r["epsilon"] is None:
            return None  # harmonic case: no resonance structure unless requested
        if base is None and (r["delta"] is None or r["epsilon"] is None):
            raise ConfigError("l = 1 has no default resonance parameters; set delta and epsilon")
        p = ResonanceParams(
            self.model.ell,
            delta=base.delta if r["delta"] is None else float(r["delta"]),
            epsilon=base.epsilon if r["epsilon"] is None else float(r["epsilon"]),
            mu0=(base.mu0 if base else 2) if r["mu0"] is None else int(r["mu0"]),
            m_sym=r["m_sym"],
            gamma=float(r["gamma"]),
        )
        return p.validate()

    @classmethod
    def load(cls, path: str | None, overrides: dict | None = None) -> "RunConfig":
        tree = {}
        if path:
            try:
                tree = json.loads(Path(path).read_text())
            except FileNotFoundError:
                raise ConfigError(f"configuration file {path} not found")
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})")
            if not isinstance(tree, dict):
                raise ConfigError(f"{path}: top level must be an object")
        return cls(_merge(tree, overrides or {}))

    def require_params(self) -> ResonanceParams:
        if self.params is None:
            raise ConfigError(f"l = {self.model.ell} needs resonance.delta and resonance.epsilon")
        return self.params

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.resolved, sort_keys=True).encode()).hexdigest()

    def cache(self):
        from .quantum import SpectrumCache
        return SpectrumCache(self.raw["cache_dir"]) if self.raw["cache_dir"] else None


# ---------------------------------------------------------------------------
# output helpers

def _outdir(cfg: RunConfig, args) -> Path:
    d = Path(args.out or cfg.raw["output_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_csv(path: Path, header: list[str], rows, meta: dict) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _manifest(cfg: RunConfig, out: Path, command: str, t0: float, extra: dict | None = None) -> None:
    _write_json(out / f"{command}.manifest.json", {
        "command": command, "version": __version__, "config_hash": cfg.digest(),
        "config": cfg.resolved, "wall_time_s": time.perf_counter() - t0, **(extra or {})})


def _meta(cfg: RunConfig, command: str) -> dict:
    return {"command": command, "version": __version__, "config_hash": cfg.digest(),
            "ell": cfg.model.ell}


def _range(spec: list[float]) -> np.ndarray:
    lo, hi, n = spec
    return np.linspace(float(lo), float(hi), int(n))


# ---------------------------------------------------------------------------
# commands

def cmd_actions(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    t0 = time.perf_counter()
    rows = []
    for E in _range(args.E):
        for L in _range(args.L):
            try:
                em = EnergyMomentum(float(E), float(L))
                a_r = radial_action(cfg.model, em)
                a = action_map(cfg.model, em)
                w = frequencies(cfg.model, a)
                rows.append([float(E), float(L), a_r, a[0], w[0], w[1], ""])
            except AnharmonicError as exc:
                rows.append([float(E), float(L), "", "", "", "", f"{type(exc).__name__}: {exc}"])
    _write_csv(out / "actions.csv", ["E", "L", "a_r", "a1", "omega1", "omega2", "error"], rows,
               _meta(cfg, "actions"))
    _manifest(cfg, out, "actions", t0, {"rows": len(rows)})
    return EXIT_OK


def cmd_freq(cfg: RunConfig, args) -> int:
    from .frequency import omega_on_circle, russmann_constants, sphere_table

    out = _outdir(cfg, args)
    t0 = time.perf_counter()
    tab = sphere_table(cfg.model.ell)
    phis = tab.phi_grid(args.points)
    rows = [[float(p), *map(float, omega_on_circle(cfg.model, float(p)))] for p in phis]
    _write_csv(out / "freq.csv", ["phi", "omega1", "omega2"], rows, _meta(cfg, "freq"))
    report = {"fit_residual": tab.residual}
    if not cfg.model.degenerate:
        rep = russmann_constants(cfg.model, seed=cfg.raw["seed"])
        report["russmann"] = json.loads(rep.to_json())
    _write_json(out / "freq.json", report)
    _manifest(cfg, out, "freq", t0)
    return EXIT_OK


def cmd_lattice(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    t0 = time.perf_counter()
    R_list = sorted(float(r) for r in args.R)
    from .lattice import enumerate_lattice
    params = cfg.require_params()
    pts = enumerate_lattice(cfg.spec, R_list[-1])
    cl = classify(cfg.model, params, pts)
    rows = [[float(p[0]), float(p[1]), float(r), int(f), int(k[0]), int(k[1]), float(q)]
            for p, r, f, k, q in zip(cl.points, cl.radius, cl.nonresonant, cl.worst_k, cl.worst_ratio)]
    _write_csv(out / "lattice.csv",
               ["a1", "a2", "radius", "nonresonant_flag", "worst_k1", "worst_k2", "worst_ratio"],
               rows, _meta(cfg, "lattice"))
    prof = density_profile(cfg.model, params, cfg.spec, R_list, strict=False)
    _write_json(out / "density.json", {"R_list": R_list, **prof})
    _manifest(cfg, out, "lattice", t0)
    return EXIT_OK


def cmd_nf(cfg: RunConfig, args) -> int:
    from .normal_form import ActionGrid, NormalFormState, demo_symbol, normal_form_step

    params = cfg.require_params()
    out = _outdir(cfg, args)
    t0 = time.perf_counter()
    g = cfg.raw["grid"]
    grid = ActionGrid(g["rho_min"], g["rho_max"], cfg.spec.cone[0], cfg.spec.cone[1],
                      g["n_rho"], g["n_theta"])
    state = NormalFormState.initial(demo_symbol(grid, g["K"], order_m=params.order))
    steps = []
    for _ in range(args.steps):
        state = normal_form_step(state, cfg.model, params, check=not args.no_check)
        steps.append({"n": state.n, "remainder_sup": state.v.sup_norm(),
                      "order": state.order_ledger[-1], "dropped": state.dropped[-1],
                      "tail": state.v.tail})
    (out / "nf_remainder.json").write_text(state.v.to_json())
    _write_json(out / "nf.json", {"params": params.to_dict(), "grid": grid.to_dict(),
                                  "order_ledger": list(state.order_ledger), "steps": steps})
    _manifest(cfg, out, "nf", t0)
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, args) -> int:
    from .quantum import estimate_kappa, joint_spectrum, spectrum_tables, write_joint_csv, write_spectrum_csv

    out = _outdir(cfg, args)
    t0 = time.perf_counter()
    m_lo, m_hi = args.m
    tabs = spectrum_tables(cfg.model, range(m_lo, m_hi + 1), args.count, cache=cfg.cache(),
                           jobs=args.jobs)
    meta = _meta(cfg, "spectrum")
    write_spectrum_csv(out / "spectrum.csv", tabs, meta)
    pts = joint_spectrum(cfg.model, tabs, cfg.spec.kappa)
    write_joint_csv(out / "joint.csv", pts, meta)
    summary = {"states": len(pts), "max_distance": max(p.distance for p in pts)}
    if len(pts) >= 20:
        try:
            k = estimate_kappa(pts)
            summary.update(kappa=k.kappa, dispersion=k.dispersion)
        except AnharmonicError as exc:
            summary["kappa_error"] = str(exc)
    _write_json(out / "spectrum.json", summary)
    _manifest(cfg, out, "spectrum", t0)
    return EXIT_OK


def _parse_term(text: str):
    from .quantum import VTerm

    parts = text.split(":")
    if not 2 <= len(parts) <= 4:
        raise ConfigError(f"term '{text}' must look like coef:p[:j[:cos|sin]]")
    try:
        coef, p = float(parts[0]), float(parts[1])
        j = int(parts[2]) if len(parts) > 2 else 0
    except ValueError:
        raise ConfigError(f"term '{text}' has a non-numeric field")
    return VTerm(coef, p, j, parts[3] if len(parts) > 3 else "cos")


def cmd_perturbed(cfg: RunConfig, args) -> int:
    from .quantum import Window, perturbed_spectrum

    out = _outdir(cfg, args)
    t0 = time.perf_counter()
    terms = [_parse_term(t) for t in args.v]
    n_max, m_lo, m_hi = args.window
    recs = perturbed_spectrum(cfg.model, terms, args.epsilon, Window(n_max, m_lo, m_hi),
                              cache=cfg.cache())
    meta = {**_meta(cfg, "perturbed"), "epsilon": args.epsilon, "v": " + ".join(args.v)}
    _write_csv(out / "perturbed.csv", ["n", "m", "E0", "E", "shift"],
               [[r.n, r.m, r.E0, r.E, r.E - r.E0] for r in recs], meta)
    _manifest(cfg, out, "perturbed", t0)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    from .acceptance import SUITES

    if args.list:
        for name, checks in SUITES.items():
            print(f"{name}: " + ", ".join(c.key for c in checks))
        return EXIT_OK
    if args.suite is None:
        print("verify: a suite name or --list is required", file=sys.stderr)
        return EXIT_USAGE
    if args.suite not in SUITES:
        print(f"verify: unknown suite '{args.suite}' (known: {', '.join(SUITES)})", file=sys.stderr)
        return EXIT_USAGE
    out = _outdir(cfg, args)
    t0 = time.perf_counter()
    results = []
    for check in SUITES[args.suite]:
        kw = {}
        if check.key in ("C7", "C10"):
            kw["cache"] = cfg.cache()
        res = check(**kw)
        print(res.line())
        results.append(res)
    verdict = all(r.passed for r in results)
    _write_json(out / f"verify_{args.suite}.json", {
        "suite": args.suite, "passed": verdict,
        "checks": [{"key": r.key, "title": r.title, "passed": r.passed, "runtime_s": r.runtime,
                    "budget_s": r.budget, "details": r.details} for r in results]})
    _manifest(cfg, out, f"verify_{args.suite}", t0)
    print(f"suite {args.suite}: {'PASS' if verdict else 'FAIL'} "
          f"({sum(r.passed for r in results)}/{len(results)})")
    return EXIT_OK if verdict else EXIT_FAIL


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anharmonic", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--ell", type=int, help="override the model exponent l")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--cache", help="spectrum cache directory (overrides cache_dir)")
    common.add_argument("--jobs", type=int, default=1, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("actions", parents=[common], help="actions and frequencies on an (E, L) grid")
    p.add_argument("--E", nargs=3, type=float, metavar=("LO", "HI", "N"), default=[1.0, 2.0, 3])
    p.add_argument("--L", nargs=3, type=float, metavar=("LO", "HI", "N"), default=[-0.5, 0.5, 3])
    p.set_defaults(func=cmd_actions)

    p = sub.add_parser("freq", parents=[common], help="frequency map on the unit arc")
    p.add_argument("--points", type=int, default=201)
    p.set_defaults(func=cmd_freq)

    p = sub.add_parser("lattice", parents=[common], help="nonresonant lattice points and density")
    p.add_argument("--R", nargs="+", type=float, default=[50, 100, 200, 400])
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("nf", parents=[common], help="classical normal-form steps on a test symbol")
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--no-check", action="store_true", help="skip the grid-resolution check")
    p.set_defaults(func=cmd_nf)

    p = sub.add_parser("spectrum", parents=[common], help="radial spectra and joint spectrum")
    p.add_argument("--m", nargs=2, type=int, metavar=("MIN", "MAX"), default=[-3, 3])
    p.add_argument("--count", type=int, default=10)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("perturbed", parents=[common], help="spectrum of H0 + eps V")
    p.add_argument("--v", nargs="+", default=["1:1"], help="terms coef:p[:j[:cos|sin]]")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--window", nargs=3, type=int, metavar=("NMAX", "MMIN", "MMAX"), default=[4, -2, 2])
    p.set_defaults(func=cmd_perturbed)

    p = sub.add_parser("verify", parents=[common], help="run an acceptance suite")
    p.add_argument("suite", nargs="?")
    p.add_argument("--list", action="store_true", help="list the suites")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.ell is not None:
        overrides["ell"] = args.ell
    if args.cache:
        overrides["cache_dir"] = args.cache
    try:
        cfg = RunConfig.load(args.config, overrides)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AnharmonicError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
