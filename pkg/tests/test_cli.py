import json

from sptforge.cli import build_parser, load_config, main
from sptforge.config import RunManifest
from test_experiments import SMALL


def write_config(tmp_path, **extra):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({**SMALL, **extra}))
    return path


def test_parser_overrides(tmp_path):
    path = write_config(tmp_path)
    args = build_parser().parse_args(["renyi", "--config", str(path), "--mode", "noisy", "--seed", "3", "--out", "o"])
    c = load_config(args)
    assert (c.mode, c.seed, c.out, c.L) == ("noisy", 3, "o", 4)


def test_run_experiment_from_cli(tmp_path, capsys):
    path = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["renyi", "--config", str(path), "--mode", "noiseless", "--out", str(out)]) == 0
    assert "renyi.csv" in capsys.readouterr().out
    doc = json.loads((out / "renyi_manifest.json").read_text())
    RunManifest(**doc).check(out)


def test_invalid_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "red"}))
    assert main(["renyi", "--config", str(bad)]) == 2
    assert main(["renyi", "--config", str(tmp_path / "missing.json")]) == 2


def test_verify_requires_seed(tmp_path, capsys):
    path = write_config(tmp_path, seed=None)
    assert main(["verify", "--config", str(path)]) == 2
    assert "seed" in capsys.readouterr().err


def test_verify_subset_prints_table(capsys):
    assert main(["verify", "--seed", "0", "--criteria", "1", "10"]) == 0
    out = capsys.readouterr().out
    assert "claim" in out and "tolerance" in out and "2/2 criteria passed" in out
