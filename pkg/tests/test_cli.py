import json

import numpy as np
import pytest

from dnls_lattice import cli
from dnls_lattice._io import write_csv
from dnls_lattice.config import OUTPUT_ENV, PotentialSpec, RunConfig, parse_params
from dnls_lattice.lattice import LatticeWindow


def test_config_roundtrip(tmp_path):
    cfg = RunConfig(window=LatticeWindow(-40, 50), theta_grid_size=256, lambda_grid_size=128,
                    potential_spec=PotentialSpec("exponential", parse_params("c=-0.25,a=0.5")), seed=7,
                    output_dir=str(tmp_path))
    assert RunConfig.loads(cfg.dumps()) == cfg
    path = tmp_path / "c.ini"
    cfg.save(path)
    assert RunConfig.load(path) == cfg


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(theta_grid_size=32)
    with pytest.raises(ValueError):
        RunConfig(tolerances=(("resolvent", 0.0),))
    with pytest.raises(ValueError):
        RunConfig.loads("[tolerances]\nbogus = 1e-3\n")
    with pytest.raises(ValueError):
        parse_params("c")


def test_csv_format(tmp_path):
    path = write_csv(tmp_path / "x.csv", ["n", "v"], [np.array([1, 2]), np.array([0.1, 1 / 3])])
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "n,v" and lines[1] == "1,0.10000000000000001" and lines[2] == "2,0.33333333333333331"


def _run(tmp_path, *argv):
    return cli.main([*argv, "--output-dir", str(tmp_path)])


def _manifest(tmp_path, sub):
    return json.loads((tmp_path / sub / "manifest.json").read_text())


def test_classify_free_case(tmp_path):
    assert _run(tmp_path, "classify", "--potential", "zero", "--half-width", "32") == 0
    rep = json.loads((tmp_path / "classify" / "classify.json").read_text())
    assert rep["is_generic"] is False and rep["resonant_edges"] == [0, 4]


def test_manifest_lists_every_file(tmp_path):
    assert _run(tmp_path, "scatter", "--half-width", "32", "--count", "64") == 0
    m = _manifest(tmp_path, "scatter")
    on_disk = {p.name for p in (tmp_path / "scatter").iterdir()} - {"manifest.json"}
    assert set(m["outputs"]) == on_disk
    assert m["status"] == "ok" and m["measured"]["max_identity_residual"] < 1e-12
    assert set(m["versions"]) >= {"numpy", "scipy", "dnls_lattice"}
    assert "theta_grid_size" in m["config"]


def test_rerun_leaves_no_orphans(tmp_path):
    assert _run(tmp_path, "decay-scan", "--half-width", "64", "--t-min", "1", "--t-max", "12",
                "--t-count", "6") == 0
    assert _run(tmp_path, "decay-scan", "--half-width", "64") == 2
    files = {p.name for p in (tmp_path / "decay-scan").iterdir()}
    assert files == {"manifest.json", "config.ini", "error.json"}


def test_deterministic_outputs(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["norms", "--field", "random", "--half-width", "32", "--t-max", "4", "--skip-lap",
                         "--seed", "3", "--run-dir", str(tmp_path / d)]) == 0
        assert cli.main(["propagate", "--half-width", "32", "--t", "2", "--kernel-half-width", "8",
                         "--run-dir", str(tmp_path / d / "prop")]) == 0
    assert (tmp_path / "a" / "norms.json").read_bytes() == (tmp_path / "b" / "norms.json").read_bytes()
    assert (tmp_path / "a" / "prop" / "kernel.csv").read_bytes() == (tmp_path / "b" / "prop" / "kernel.csv").read_bytes()


def test_error_record_and_exit_status(tmp_path, capsys):
    status = _run(tmp_path, "jost", "--theta", "0.5+0.1j", "--half-width", "16")
    assert status == 1
    err = json.loads((tmp_path / "jost" / "error.json").read_text())
    assert err["type"] == "ValueError" and "above the real axis" in err["message"]
    assert _manifest(tmp_path, "jost")["status"] == "error"
    line = capsys.readouterr().err.strip().splitlines()[0]
    assert json.loads(line)["status"] == "error"


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2
    assert json.loads(capsys.readouterr().err.splitlines()[0])["type"] == "UsageError"
    assert cli.run("frobnicate", RunConfig()) == 2


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["classify", "--half-width", "16"]) == 0
    assert (tmp_path / "env" / "classify" / "manifest.json").exists()


def test_config_file_and_override(tmp_path):
    cfg = RunConfig(window=LatticeWindow.symmetric(20), potential_spec=PotentialSpec("single_site",
                    (("value", 1.0),)), output_dir=str(tmp_path))
    cfg.save(tmp_path / "c.ini")
    assert cli.main(["spectrum", "--config", str(tmp_path / "c.ini"), "--no-contour", "--lac-half-width", "16"]) == 0
    m = _manifest(tmp_path, "spectrum")
    assert m["measured"]["eigenvalues"][0] == pytest.approx(2 + np.sqrt(5))
    assert cli.main(["spectrum", "--config", str(tmp_path / "c.ini"), "--params", "value=-1", "--no-contour",
                     "--lac-half-width", "16"]) == 0
    assert _manifest(tmp_path, "spectrum")["measured"]["eigenvalues"][0] == pytest.approx(2 - np.sqrt(5))


def test_every_subcommand_has_a_handler():
    assert set(cli.HANDLERS) == set(cli.SUBCOMMANDS)


def test_small_end_to_end_runs(tmp_path):
    assert _run(tmp_path, "jost", "--theta", "0.5-0.1i", "--half-width", "16", "--nu-max", "32") == 0
    assert _run(tmp_path, "resolvent", "--lam", "1.0", "--half-width", "16") == 0
    assert _run(tmp_path, "standing-wave", "--half-width", "64", "--count", "4") == 0
    assert _run(tmp_path, "simulate", "--half-width", "64", "--t-final", "2", "--stride", "0.5") == 0
    assert _run(tmp_path, "sweep", "--half-width", "64", "--t-final", "1", "--stride", "0.5",
                "--epsilons", "1e-3", "--omega-factors", "1.1,1.2") == 0
    idx = json.loads((tmp_path / "sweep" / "index.json").read_text())
    assert len(idx["cells"]) == 2
    m = _manifest(tmp_path, "sweep")
    for c in idx["cells"]:
        assert c["report"] in m["outputs"]
    sim = _manifest(tmp_path, "simulate")
    assert {"curves.csv", "report.json", "snapshots.csv"} <= set(sim["outputs"])
