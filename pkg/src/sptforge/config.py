"""Experiment configuration and run manifests."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

MODES = ("exact", "noiseless", "noisy")


@dataclass
class ExperimentConfig:
    # model
    J: float = 1.0
    h: float = 1.0
    g: float = 2.5
    L: int = 8
    g_values: list[float] = field(default_factory=lambda: [0.0, 0.2, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
    grid_points: int = 15
    degeneracy_tol: float = 1e-8
    edge_degeneracy_tol: float = 0.05
    # imaginary time
    beta: float | None = None
    target_fidelity: float = 0.999
    max_beta: float = 256.0
    # ansatz
    start_layers: int = 2
    max_layers: int = 12
    restarts: int = 8
    budget: int = 2000
    train_tol: float = 1e-4
    # noise and mitigation
    p_ecr: float = 0.005
    p_readout: float = 0.006
    zne_m: list[int] = field(default_factory=lambda: [0, 2, 4, 6])
    fit_form: str = "exponential"
    shots: int = 20000
    trajectories: int | None = None
    # quench
    quench_initial: str = "01111110"
    t_max: float = 5.0
    t_points: int = 26
    # entanglement
    renyi_L: int = 4
    tomography_L: int = 4
    subsystem: list[int] = field(default_factory=lambda: [0, 1, 2])
    spectrum_floor: float = 1e-12
    # run control
    seed: int | None = None
    mode: str = "exact"
    out: str = "results"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.shots <= 0:
            raise ValueError("shots must be positive")
        if any(m < 0 or m % 2 for m in self.zne_m):
            raise ValueError("ZNE identity-layer counts must be even and non-negative")

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def config_hash(self) -> str:
        """Hash of every result-affecting field; the output directory is excluded."""
        d = self.to_dict()
        d.pop("out")
        canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @property
    def run_seed(self) -> int:
        return 0 if self.seed is None else int(self.seed)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SPTFORGE_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass
class RunManifest:
    experiment: str
    config_hash: str
    version: str
    files: list[str]
    timings: dict[str, float]
    seed: int | None
    mode: str

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / f"{self.experiment}_manifest.json"
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
        return path

    @classmethod
    def make(cls, experiment: str, config: ExperimentConfig, files, timings) -> RunManifest:
        return cls(experiment, config.config_hash(), __version__, [str(f) for f in files], dict(timings),
                   config.seed, config.mode)

    def check(self, out_dir) -> None:
        """Every listed file exists and parses as CSV or JSON."""
        for name in self.files:
            path = Path(out_dir) / name
            if not path.exists():
                raise FileNotFoundError(path)
            if path.suffix == ".json":
                with open(path) as fh:
                    json.load(fh)
            elif path.suffix == ".csv":
                with open(path, newline="") as fh:
                    rows = list(csv.reader(fh))
                if not rows:
                    raise ValueError(f"{path} is empty")
