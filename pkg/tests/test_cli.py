import json

import numpy as np
import pytest

from kbi.blau_space import load_population
from kbi.cli import EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME, main

PRIORS = {
    "free": {"beta": [0, 2], "J": [0, 10], "h_y": [-1.5, 0.5]},
    "pinned": {"h_x": 1.0, "theta0": 6.697414907005954, "theta_x": 2.0, "theta_y": 0.5},
}


def _cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def _run(cmd, cfg, out, *extra):
    return main([cmd, "--config", str(cfg), "--out", str(out), *extra])


@pytest.fixture(scope="module")
def snapshot(tmp_path_factory):
    d = tmp_path_factory.mktemp("snap")
    cfg = _cfg(d, {"synthetic": {"side": 4, "spins_per_cell": 10, "J": 5.0}, "sweeps": 100})
    assert _run("simulate", cfg, d / "out", "--seed", "3") == 0
    return d / "out"


def test_simulate_is_reproducible(tmp_path, snapshot):
    cfg = _cfg(tmp_path, {"synthetic": {"side": 4, "spins_per_cell": 10, "J": 5.0}, "sweeps": 100})
    assert _run("simulate", cfg, tmp_path / "o", "--seed", "3") == 0
    for f in ("population.csv", "summary.csv"):
        assert (tmp_path / "o" / f).read_bytes() == (snapshot / f).read_bytes()
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["command"] == "simulate" and man["seed"] == 3 and "version" in man
    # rerun from the manifest alone
    assert _run("simulate", tmp_path / "o" / "manifest.json", tmp_path / "m") == 0
    assert (tmp_path / "m" / "summary.csv").read_bytes() == (snapshot / "summary.csv").read_bytes()


def test_infer_writes_posterior_and_hashes_inputs(tmp_path, snapshot):
    cfg = _cfg(tmp_path, {
        "population": str(snapshot / "population.csv"), "priors": PRIORS,
        "budget": 12, "keep": 4, "sweeps": 20,
        "truth": {"beta": 0.3, "J": 5.0, "h_x": 1.0, "h_y": -1.0, "theta0": 6.697414907005954, "theta_x": 2.0, "theta_y": 0.5},
    })
    assert _run("infer", cfg, tmp_path / "o", "--seed", "1", "--workers", "1") == 0
    lines = (tmp_path / "o" / "posterior.csv").read_text().splitlines()
    assert lines[0].startswith("draw_index,eta,")
    assert len(lines) == 5
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert set(man["inputs"]) == {"population"}
    assert "coverage" in man["result"]
    assert (tmp_path / "o" / "gaussian.json").exists()
    assert (tmp_path / "o" / "marginals.csv").exists()


def test_infer_min_eta_at_pinned_truth(tmp_path):
    # full-size cells keep the resampling noise inside the anchor band
    sim = _cfg(tmp_path, {"synthetic": {"side": 10, "spins_per_cell": 100, "J": 5.0}, "sweeps": 500}, "sim.json")
    assert _run("simulate", sim, tmp_path / "s", "--seed", "4") == 0
    pinned = {"beta": 0.3, "J": 5.0, "h_x": 1.0, "h_y": -1.0, "theta0": 9.0, "theta_x": 2.0, "theta_y": 0.5}
    cfg = _cfg(tmp_path, {
        "population": str(tmp_path / "s" / "population.csv"),
        "priors": {"free": {}, "pinned": pinned}, "budget": 10, "keep": 10, "sweeps": 500,
    })
    assert _run("infer", cfg, tmp_path / "o", "--seed", "1") == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["result"]["eta_min"] <= 0.06


@pytest.mark.parametrize(
    "obj, code, msg",
    [
        ({"priors": {"free": {"J": [3, 1]}}}, EXIT_CONFIG, "'J'"),
        ({"priors": {"free": {"J": [0, 1]}}}, EXIT_CONFIG, "missing"),
        ({"priors": {"free": {"J": [0, 1], "gamma": [0, 1]}}}, EXIT_CONFIG, "gamma"),
        ({"priors": PRIORS, "budget": "lots"}, EXIT_CONFIG, "'budget'"),
        ({"priors": PRIORS, "budget": 3, "keep": 5}, EXIT_CONFIG, "keep"),
    ],
)
def test_infer_config_errors(tmp_path, snapshot, capsys, obj, code, msg):
    cfg = _cfg(tmp_path, {"population": str(snapshot / "population.csv"), **obj})
    assert _run("infer", cfg, tmp_path / "o") == code
    assert msg in capsys.readouterr().err


def test_missing_and_malformed_inputs(tmp_path, capsys):
    assert _run("infer", tmp_path / "nope.json", tmp_path / "o") == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _run("infer", bad, tmp_path / "o") == EXIT_CONFIG
    cfg = _cfg(tmp_path, {"population": "absent.csv", "priors": PRIORS})
    assert _run("infer", cfg, tmp_path / "o") == EXIT_DATA
    assert "absent.csv" in capsys.readouterr().err
    (tmp_path / "pop.csv").write_text("id,x,y,n,S\na,0,0,0,0.5\n")
    cfg = _cfg(tmp_path, {"population": "pop.csv", "priors": PRIORS})
    assert _run("infer", cfg, tmp_path / "o") == EXIT_DATA
    cfg = _cfg(tmp_path, {"synthetic": {"side": 2}, "scenario": {"type": "teleport"}})
    assert _run("intervene", cfg, tmp_path / "o") == EXIT_CONFIG
    man = _cfg(tmp_path, {"command": "infer", "config": {}}, "m.json")
    assert _run("simulate", man, tmp_path / "o") == EXIT_CONFIG


def test_runtime_error_code(tmp_path):
    # a scenario on a dimension the kernel does not have fails at run time
    cfg = _cfg(tmp_path, {"synthetic": {"side": 3}, "scenario": {"type": "remove_homophily", "dimensions": ["age"]},
                          "reps": 1, "sweeps": 2})
    assert _run("intervene", cfg, tmp_path / "o") == EXIT_RUNTIME


def test_calibrate(tmp_path, snapshot):
    cfg = _cfg(tmp_path, {"population": str(snapshot / "population.csv"), "dims": ["x", "y"]})
    assert _run("calibrate", cfg, tmp_path / "o") == 0
    rows = (tmp_path / "o" / "ols.csv").read_text().splitlines()
    assert rows[0] == "dimension,coefficient" and len(rows) == 4
    pop = load_population(snapshot / "population.csv")
    assert pop.C == 16
    (tmp_path / "flat.csv").write_text("id,x,y,n,S\na,0,1,1,0.1\nb,0,1,1,0.2\nc,0,1,1,0.3\n")
    cfg = _cfg(tmp_path, {"population": "flat.csv", "dims": ["x"]})
    assert _run("calibrate", cfg, tmp_path / "o2") == EXIT_DATA


def test_sweep_and_intervene(tmp_path):
    cfg = _cfg(tmp_path, {"synthetic": {"side": 3, "spins_per_cell": 10, "J": 5.0}, "beta_grid": [0, 0.5], "reps": 2, "sweeps": 10})
    assert _run("sweep", cfg, tmp_path / "s") == 0
    arr = np.loadtxt(tmp_path / "s" / "magnetisation.csv", delimiter=",", skiprows=1)
    assert arr.shape == (2, 3)
    cfg = _cfg(tmp_path, {"synthetic": {"side": 3, "spins_per_cell": 10}, "scenario": {"type": "strength_shift", "multiplier": 0},
                          "reps": 3, "sweeps": 10})
    assert _run("intervene", cfg, tmp_path / "i") == 0
    summ = json.loads((tmp_path / "i" / "summary.json").read_text())
    assert summ["reps"] == 3 and summ["scenario"]["type"] == "strength_shift"
