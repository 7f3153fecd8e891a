import csv
import json

import numpy as np
import pytest

from sptforge.config import ExperimentConfig, RunManifest, worker_count
from sptforge.experiments import EXPERIMENTS, run_experiment, simplex_grid

SMALL = dict(
    L=4,
    g_values=[0.2, 2.5],
    grid_points=3,
    restarts=2,
    budget=300,
    shots=2000,
    trajectories=200,
    t_points=6,
    quench_initial="0110",
    renyi_L=4,
    tomography_L=4,
    seed=7,
)


def small(mode="exact", **extra):
    return ExperimentConfig(**{**SMALL, "mode": mode, **extra})


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_defaults():
    c = ExperimentConfig()
    assert (c.shots, c.p_ecr, c.p_readout) == (20000, 0.005, 0.006)
    assert c.quench_initial == "01111110" and c.zne_m == [0, 2, 4, 6]


def test_config_validation_and_round_trip(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        ExperimentConfig(mode="fast")
    with pytest.raises(ValueError):
        ExperimentConfig(zne_m=[0, 3])
    path = tmp_path / "c.json"
    path.write_text(json.dumps(small().to_dict()))
    loaded = ExperimentConfig.load(path)
    assert loaded == small()
    assert loaded.config_hash() == small().config_hash()
    assert small().config_hash() != small(seed=8).config_hash()
    assert small().config_hash() == small(out="elsewhere").config_hash()


def test_worker_count(monkeypatch):
    monkeypatch.setenv("SPTFORGE_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("SPTFORGE_WORKERS", "x")
    assert worker_count() == 1


def test_simplex_grid():
    cells = simplex_grid(3)
    assert len(cells) == 6
    assert all(abs(sum(c) - 1) < 1e-12 for c in cells)
    with pytest.raises(ValueError):
        simplex_grid(2)


@pytest.mark.parametrize("name", EXPERIMENTS)
@pytest.mark.parametrize("mode", ["exact", "noiseless", "noisy"])
def test_every_experiment_writes_checked_manifest(tmp_path, name, mode):
    config = small(mode)
    res = run_experiment(name, config, tmp_path)
    manifest_path = tmp_path / f"{name}_manifest.json"
    doc = json.loads(manifest_path.read_text())
    manifest = RunManifest(**doc)
    manifest.check(tmp_path)
    assert manifest.config_hash == config.config_hash()
    assert manifest.files == res.files and manifest.seed == 7
    csvs = [f for f in res.files if f.endswith(".csv")]
    assert csvs and read_csv(tmp_path / csvs[0])


@pytest.mark.parametrize("name", ["string-sweep", "renyi", "edge-profile"])
def test_reproducible_bytes(tmp_path, name):
    config = small("noisy")
    a = run_experiment(name, config, tmp_path / "a")
    b = run_experiment(name, config, tmp_path / "b")
    for f in a.files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert a.files == b.files


def test_modes_accumulate_columns(tmp_path):
    cols = {}
    for mode in ("exact", "noiseless", "noisy"):
        run_experiment("string-sweep", small(mode), tmp_path / mode)
        cols[mode] = set(read_csv(tmp_path / mode / "string_sweep.csv")[0])
    assert cols["exact"] < cols["noiseless"] < cols["noisy"]
    assert {"raw", "mitigated"} <= cols["noisy"]


def test_string_sweep_exact_limits(tmp_path):
    run_experiment("string-sweep", small(g_values=[0.0, 0.2, 1.0, 2.5, 10.0]), tmp_path)
    rows = read_csv(tmp_path / "string_sweep.csv")
    exact = [float(r["exact"]) for r in rows]
    assert abs(exact[0]) < 0.1 and exact[-1] > 0.9
    assert np.all(np.diff(exact) > -1e-9)


def test_phase_diagram_corners(tmp_path):
    run_experiment("phase-diagram", small(grid_points=3), tmp_path)
    rows = read_csv(tmp_path / "phase_diagram.csv")
    by = {(float(r["J_t"]), float(r["h_t"]), float(r["g_t"])): float(r["exact"]) for r in rows}
    assert by[(0.0, 0.0, 1.0)] == pytest.approx(1.0)
    assert abs(by[(0.0, 1.0, 0.0)]) < 1e-9
    assert abs(by[(1.0, 0.0, 0.0)]) < 1e-9


def test_renyi_noiseless_near_ln2(tmp_path):
    res = run_experiment("renyi", small("noiseless"), tmp_path)
    rows = {int(r["x"]): r for r in read_csv(tmp_path / "renyi.csv")}
    assert abs(float(rows[2]["S2_noiseless"]) - np.log(2)) < 0.05
    assert float(rows[0]["S2_exact"]) < 0.02 and float(rows[4]["S2_exact"]) < 0.02
    assert res.summary["S2_x2_noiseless"] == pytest.approx(float(rows[2]["S2_noiseless"]))


def test_tomography_record(tmp_path):
    run_experiment("tomography", small("noisy"), tmp_path)
    doc = json.loads((tmp_path / "tomography.json").read_text())
    assert "record" in doc
    rows = read_csv(tmp_path / "tomography.csv")
    assert len(rows) == 8


def test_quench_summary(tmp_path):
    res = run_experiment("quench", small("noiseless"), tmp_path)
    rows = read_csv(tmp_path / "quench.csv")
    assert len(rows) == 6
    assert float(rows[0]["edge_exact"]) == pytest.approx(1.0)
    assert "edge_above_0.6" in res.summary


def test_unknown_experiment(tmp_path):
    with pytest.raises(ValueError):
        run_experiment("nope", small(), tmp_path)
