import csv
import json

import pytest

from anharmonic.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, RunConfig, main
from anharmonic.errors import ConfigError


def read_csv(path):
    rows = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(rows))


def test_actions_harmonic_smoke(tmp_path):
    rc = main(["actions", "--ell", "1", "--E", "1", "3", "3", "--L", "-0.5", "0.5", "3",
               "--out", str(tmp_path)])
    assert rc == EXIT_OK
    rows = read_csv(tmp_path / "actions.csv")
    assert len(rows) == 9
    for r in rows:
        E, L = float(r["E"]), float(r["L"])
        assert float(r["a_r"]) == pytest.approx((E - abs(L)) / 2, abs=1e-12)
        assert float(r["a1"]) == pytest.approx((E - abs(L)) / 2 + max(-L, 0), abs=1e-12)
        assert (float(r["omega1"]), float(r["omega2"])) == pytest.approx((2, 1), abs=1e-9)
    manifest = json.loads((tmp_path / "actions.manifest.json").read_text())
    assert {"config_hash", "version", "wall_time_s", "config"} <= set(manifest)


def test_actions_empty_and_partial(tmp_path):
    assert main(["actions", "--E", "1", "2", "0", "--out", str(tmp_path / "a")]) == EXIT_OK
    lines = (tmp_path / "a" / "actions.csv").read_text().splitlines()
    assert lines[-1] == "E,L,a_r,a1,omega1,omega2,error"
    assert main(["actions", "--E", "1", "1", "1", "--L", "5", "5", "1",
                 "--out", str(tmp_path / "b")]) == EXIT_OK
    row = read_csv(tmp_path / "b" / "actions.csv")[0]
    assert row["error"].startswith("Inadmissible") and row["a_r"] == ""


def test_lattice_deterministic_and_singleton(tmp_path):
    for d in ("x", "y"):
        assert main(["lattice", "--R", "60", "--out", str(tmp_path / d)]) == EXIT_OK
    for name in ("lattice.csv", "density.json"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()
    dens = json.loads((tmp_path / "x" / "density.json").read_text())
    assert dens["slope"] is None and len(dens["rows"]) == 1


def test_lattice_slope_for_several_radii(tmp_path):
    assert main(["lattice", "--R", "30", "60", "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "density.json").read_text())["slope"] is not None


def test_config_rejections(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"resonance": {"delta": 0.05}}))
    assert main(["lattice", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "delta0 < delta < M" in capsys.readouterr().err
    bad.write_text(json.dumps({"resonance": {"epsilon": 0.5}}))
    assert main(["lattice", "--config", str(bad)]) == EXIT_USAGE
    assert "(M - delta)/(2 mu0)" in capsys.readouterr().err
    bad.write_text(json.dumps({"colour": 1}))
    assert main(["lattice", "--config", str(bad)]) == EXIT_USAGE
    bad.write_text("{not json")
    assert main(["lattice", "--config", str(bad)]) == EXIT_USAGE
    assert main(["lattice", "--config", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert main(["nosuchcommand"]) == EXIT_USAGE


def test_harmonic_lattice_needs_params(tmp_path):
    assert main(["lattice", "--ell", "1", "--out", str(tmp_path)]) == EXIT_USAGE


def test_run_config_resolves_defaults():
    cfg = RunConfig({"ell": 2})
    assert cfg.resolved["resonance"]["delta"] == 0.2
    assert cfg.digest() == RunConfig({}).digest()
    with pytest.raises(ConfigError):
        RunConfig({"ell": 2, "lattice": {"kappa": [0.5]}})


def test_verify_list_and_unknown(capsys):
    assert main(["verify", "--list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "oracles" in out and "acceptance" in out
    assert main(["verify", "nope"]) == EXIT_USAGE


def test_verify_oracles_passes(tmp_path, capsys):
    assert main(["verify", "oracles", "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "verify_oracles.json").read_text())
    assert report["passed"] and all(c["passed"] for c in report["checks"])
    assert "suite oracles: PASS" in capsys.readouterr().out


def test_verify_failure_exit_code(tmp_path):
    # the lattice suite contains the density-trend check, which does not hold at these radii
    assert main(["verify", "lattice", "--out", str(tmp_path)]) == EXIT_FAIL


def test_freq_and_spectrum(tmp_path):
    assert main(["freq", "--points", "5", "--out", str(tmp_path)]) == EXIT_OK
    assert len(read_csv(tmp_path / "freq.csv")) == 5
    assert json.loads((tmp_path / "freq.json").read_text())["russmann"]["mu0"] >= 1
    assert main(["spectrum", "--ell", "1", "--m", "-2", "2", "--count", "4", "--jobs", "2",
                 "--cache", str(tmp_path / "cache"), "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "spectrum.json").read_text())
    assert summary["states"] == 20 and summary["max_distance"] < 1e-9


def test_perturbed_and_nf(tmp_path):
    assert main(["perturbed", "--ell", "1", "--v", "1:1", "--epsilon", "1e-3", "--window", "1", "0", "1",
                 "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "perturbed.csv")
    assert len(rows) == 4
    assert main(["perturbed", "--v", "1:1:x", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["nf", "--out", str(tmp_path)]) == EXIT_OK
    nf = json.loads((tmp_path / "nf.json").read_text())
    assert len(nf["steps"]) == 1 and nf["order_ledger"][1] < nf["order_ledger"][0]
