"""Figure-data experiments.

Every experiment runs in one of three modes. ``exact`` uses the
exact-diagonalization oracle only. ``noiseless`` also compiles the QITE
target into a trained layered circuit and evaluates it analytically.
``noisy`` adds trajectory noise, finite shots and zero-noise extrapolation.
Columns accumulate: a noisy run also reports the exact and noiseless values.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .ansatz import LayeredCircuit, compile_state, evaluate
from .config import ExperimentConfig, RunManifest, worker_count
from .dilation import DilationError, beta_schedule, qite_prepare
from .model import (
    GroundSpace,
    IsingClusterParams,
    build_hamiltonian,
    exact_ground_state,
    quench_propagator,
    sector_ground_state,
    symmetry_broken_representative,
)
from .noise import NoiseModel, trajectory_density_matrix
from .observables import (
    edge_bulk_average,
    entanglement_spectrum,
    magnetization_profile,
    product_register,
    purity_of_subsystem,
    qae_estimate,
    qae_renyi,
    quench_edge_bulk,
    renyi2_swap,
    string_order,
    string_order_operator,
    tomography_3q,
    two_copy_qite_register,
    TwoCopyState,
    PAULIS_3Q,
)
from .pauli import PauliString
from .qstate import DensityMatrix, Statevector, apply_gates, partial_trace, reduced_density
from .zne import extrapolate, fold, zne_expectation

EXPERIMENTS = ("phase-diagram", "string-sweep", "edge-profile", "quench", "renyi", "tomography")


# ------------------------------------------------------- shared pipeline


def hamiltonian(config: ExperimentConfig, **overrides):
    p = dict(J=config.J, h=config.h, g=config.g, L=config.L)
    p.update(overrides)
    return build_hamiltonian(IsingClusterParams(**p))


def ground_reference(H, initial: Statevector, tol: float) -> tuple[GroundSpace, bool]:
    """Ground space within ``tol``; the even spin-flip sector if ``initial`` cannot reach it."""
    space = exact_ground_state(H, tol)
    if space.projection_fidelity(initial) >= 1e-12:
        return space, False
    e, state = sector_ground_state(H, +1)
    return GroundSpace(e, [state], float("nan")), True


@dataclass
class Preparation:
    initial: Statevector
    reference: GroundSpace
    beta: float
    target: Statevector
    qite_fidelity: float
    circuit: LayeredCircuit | None = None
    train_cost: float | None = None
    sector_fallback: bool = False

    @property
    def state(self) -> Statevector:
        return evaluate(self.circuit, self.initial)

    def summary(self) -> dict:
        return {
            "beta": self.beta,
            "qite_fidelity": self.qite_fidelity,
            "n_layers": None if self.circuit is None else self.circuit.n_layers,
            "train_cost": self.train_cost,
            "sector_fallback": self.sector_fallback,
        }


def prepare(H, initial: Statevector, config: ExperimentConfig, seed: int, reference=None, train=True) -> Preparation:
    """QITE target from ``initial`` and, if requested, its trained circuit."""
    fallback = False
    if reference is None:
        reference, fallback = ground_reference(H, initial, config.degeneracy_tol)
    beta = config.beta
    if beta is None:
        try:
            beta = beta_schedule(H, config.target_fidelity, initial, reference, max_beta=config.max_beta)
        except DilationError:
            beta = config.max_beta
    target, _ = qite_prepare(H, beta, initial, reference)
    prep = Preparation(initial, reference, beta, target, reference.projection_fidelity(target), sector_fallback=fallback)
    if train:
        circuit, report = compile_state(
            initial, target, tol=config.train_tol, start_layers=config.start_layers,
            max_layers=config.max_layers, restarts=config.restarts, budget=config.budget, seed=seed,
        )
        prep.circuit = circuit
        prep.train_cost = report.final_cost
    return prep


def noise_model(config: ExperimentConfig, seed: int) -> NoiseModel:
    return NoiseModel(config.p_ecr, config.p_readout, seed)


def zne_m_list(config: ExperimentConfig) -> list[int]:
    return sorted(set(config.zne_m) | {0})


def mitigate(circuit: LayeredCircuit, initial: Statevector, observables, config: ExperimentConfig, seed: int):
    """Raw (unfolded) and extrapolated noisy expectations of Pauli observables."""
    values, fits = zne_expectation(
        circuit, list(observables), noise_model(config, seed), zne_m_list(config), config.shots,
        config.fit_form, seed, initial, config.trajectories,
    )
    raw = np.array([f.ys[0] for f in fits])
    raw_err = np.array([f.yerrs[0] for f in fits])
    return raw, raw_err, np.asarray(values), fits


def cell_seed(config: ExperimentConfig, index: int) -> int:
    return int(np.random.SeedSequence([config.run_seed, index]).generate_state(1)[0])


def _map(fn, items):
    workers = worker_count()
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _wants(config: ExperimentConfig, mode: str) -> bool:
    order = {"exact": 0, "noiseless": 1, "noisy": 2}
    return order[config.mode] >= order[mode]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row.get(k)) for k in header])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)


@dataclass
class ExperimentResult:
    name: str
    rows: list[dict]
    summary: dict
    files: list[str] = field(default_factory=list)
    manifest: RunManifest | None = None


# ------------------------------------------------------- phase diagram


def simplex_grid(points: int) -> list[tuple[float, float, float]]:
    if points < 3:
        raise ValueError("simplex grid needs at least 3 points per edge")
    n = points - 1
    return [(i / n, j / n, (n - i - j) / n) for i in range(n + 1) for j in range(n + 1 - i)]


def _string_cell(item, config: ExperimentConfig):
    index, (J, h, g) = item
    L = config.L
    H = build_hamiltonian(IsingClusterParams(J, h, g, L))
    op = string_order_operator(L, L)
    space = exact_ground_state(H, config.degeneracy_tol)
    row = {"exact": space.average(op.dense()), "degeneracy": space.degeneracy}
    if _wants(config, "noiseless"):
        seed = cell_seed(config, index)
        prep = prepare(H, Statevector.plus(L), config, seed)
        row["qite"] = string_order(prep.target)
        row["noiseless"] = string_order(prep.state)
        row.update({k: v for k, v in prep.summary().items() if k in ("beta", "n_layers", "train_cost")})
        if _wants(config, "noisy"):
            raw, err, mit, _ = mitigate(prep.circuit, prep.initial, [op], config, seed)
            row.update(raw=raw[0], raw_err=err[0], mitigated=mit[0])
    return row


def run_phase_diagram(config: ExperimentConfig) -> ExperimentResult:
    cells = simplex_grid(config.grid_points)
    results = _map(partial(_string_cell, config=config), list(enumerate(cells)))
    rows = [{"J_t": J, "h_t": h, "g_t": g, **r} for (J, h, g), r in zip(cells, results)]
    header = ["J_t", "h_t", "g_t", "exact", "degeneracy"]
    if _wants(config, "noiseless"):
        header += ["qite", "noiseless", "beta", "n_layers", "train_cost"]
    if _wants(config, "noisy"):
        header += ["raw", "raw_err", "mitigated"]
    return ExperimentResult("phase-diagram", rows, {"cells": len(rows)}, [("phase_diagram.csv", header)])


def run_string_sweep(config: ExperimentConfig) -> ExperimentResult:
    gs = [float(g) for g in config.g_values]
    items = [(i, (config.J, config.h, g)) for i, g in enumerate(gs)]
    results = _map(partial(_string_cell, config=config), items)
    rows = [{"g": g, **r} for g, r in zip(gs, results)]
    header = ["g", "exact", "degeneracy"]
    summary = {"exact": [r["exact"] for r in rows]}
    if _wants(config, "noiseless"):
        header += ["qite", "noiseless", "beta", "n_layers", "train_cost"]
        summary["max_noiseless_deviation"] = max(abs(r["noiseless"] - r["exact"]) for r in rows)
    if _wants(config, "noisy"):
        header += ["raw", "raw_err", "mitigated"]
        better = [abs(r["mitigated"] - r["exact"]) < abs(r["raw"] - r["exact"]) for r in rows]
        summary["mitigated_closer_fraction"] = float(np.mean(better))
    return ExperimentResult("string-sweep", rows, summary, [("string_sweep.csv", header)])


# ------------------------------------------------------- edge profile


def _profile_margin(profile) -> float:
    L = len(profile)
    a = np.abs(profile)
    return float(min(a[0], a[L - 1]) - a[1 : L - 1].max())


def run_edge_profile(config: ExperimentConfig) -> ExperimentResult:
    L = config.L
    H = hamiltonian(config)
    doublet = exact_ground_state(H, config.edge_degeneracy_tol)
    exact = magnetization_profile(symmetry_broken_representative(doublet, site=0))
    columns = {"exact": exact}
    summary = {"degeneracy": doublet.degeneracy, "exact_margin": _profile_margin(exact)}
    if _wants(config, "noiseless"):
        prep = prepare(H, Statevector.zero(L), config, config.run_seed, reference=doublet)
        columns["qite"] = magnetization_profile(prep.target)
        columns["noiseless"] = magnetization_profile(prep.state)
        summary.update(prep.summary())
        summary["noiseless_margin"] = _profile_margin(columns["noiseless"])
        if _wants(config, "noisy"):
            obs = [PauliString.from_sites(L, {i: "Z"}) for i in range(L)]
            raw, err, mit, fits = mitigate(prep.circuit, prep.initial, obs, config, config.run_seed)
            columns.update(raw=raw, raw_err=err, mitigated=mit)
            ref = columns["noiseless"]
            summary["sites_improved"] = int(np.sum(np.abs(mit - ref) < np.abs(raw - ref)))
            summary["fits"] = [f.to_json() for f in fits]
    rows = [{"site": i, **{k: v[i] for k, v in columns.items()}} for i in range(L)]
    header = ["site"] + list(columns)
    return ExperimentResult("edge-profile", rows, summary, [("edge_profile.csv", header), ("edge_profile.json", None)])


# ------------------------------------------------------- quench


def time_grid(config: ExperimentConfig) -> np.ndarray:
    return np.linspace(0.0, config.t_max, config.t_points)


def noiseless_quench(H, initial: str, times) -> tuple[np.ndarray, np.ndarray]:
    """Edge/bulk from applying exp(-i t H) as a generic unitary gate."""
    psi0 = Statevector.from_bitstring(initial)
    eb = [edge_bulk_average(magnetization_profile(apply_gates(psi0, [quench_propagator(H, t)]))) for t in times]
    eb = np.array(eb).reshape(-1, 2)
    return eb[:, 0], eb[:, 1]


def _noisy_quench_point(item, H, config: ExperimentConfig):
    index, t = item
    L = config.L
    psi0 = Statevector.from_bitstring(config.quench_initial)
    target = apply_gates(psi0, [quench_propagator(H, t)])
    seed = cell_seed(config, index)
    circuit, report = compile_state(psi0, target, tol=config.train_tol, start_layers=config.start_layers,
                                    max_layers=config.max_layers, restarts=config.restarts,
                                    budget=config.budget, seed=seed)
    obs = [PauliString.from_sites(L, {i: "Z"}) for i in range(L)]
    raw, _, mit, _ = mitigate(circuit, psi0, obs, config, seed)
    return edge_bulk_average(raw), edge_bulk_average(mit), report.final_cost


def run_quench(config: ExperimentConfig) -> ExperimentResult:
    if len(config.quench_initial) != config.L:
        raise ValueError("quench_initial must have one character per site")
    H = hamiltonian(config)
    times = time_grid(config)
    res = quench_edge_bulk(H, config.quench_initial, times)
    columns = {"edge_exact": res.edge, "bulk_exact": res.bulk}
    summary = {"initial": config.quench_initial, "min_edge_exact": res.min_edge, "max_abs_bulk_exact": res.max_abs_bulk}
    if _wants(config, "noiseless"):
        edge, bulk = noiseless_quench(H, config.quench_initial, times)
        columns.update(edge_noiseless=edge, bulk_noiseless=bulk)
        summary["min_edge_noiseless"] = float(edge.min())
        summary["max_abs_bulk_noiseless"] = float(np.abs(bulk).max())
        summary["edge_above_0.6"] = bool(edge.min() > 0.6)
        if _wants(config, "noisy"):
            out = _map(partial(_noisy_quench_point, H=H, config=config), list(enumerate(times)))
            columns["edge_raw"] = np.array([o[0][0] for o in out])
            columns["bulk_raw"] = np.array([o[0][1] for o in out])
            columns["edge_mitigated"] = np.array([o[1][0] for o in out])
            columns["bulk_mitigated"] = np.array([o[1][1] for o in out])
            columns["train_cost"] = np.array([o[2] for o in out])
    rows = [{"t": t, **{k: v[i] for k, v in columns.items()}} for i, t in enumerate(times)]
    return ExperimentResult("quench", rows, summary, [("quench.csv", ["t"] + list(columns)), ("quench.json", None)])


# ------------------------------------------------------- Rényi entropy


def _entropy(r: float) -> float:
    return float(-np.log(max(r, 1e-12)))


def run_renyi(config: ExperimentConfig) -> ExperimentResult:
    L = config.renyi_L
    H = hamiltonian(config, L=L)
    xs = list(range(L + 1))
    space = exact_ground_state(H, config.degeneracy_tol)
    gs = space.states[0]
    columns = {"S2_exact": [_entropy(purity_of_subsystem(gs, x)) for x in xs]}
    summary = {"degeneracy": space.degeneracy}
    if _wants(config, "noiseless"):
        seed = config.run_seed
        prep = prepare(H, Statevector.plus(L), config, seed)
        state = prep.state
        register = product_register(state)
        two = TwoCopyState.from_state(state)
        qite_reg = two_copy_qite_register(H, prep.beta, prep.initial)
        columns["S2_qite"] = [_entropy(qae_renyi(qite_reg, L, x).value) for x in xs]
        columns["S2_swap"] = [_entropy(renyi2_swap(two, x)) for x in xs]
        columns["S2_noiseless"] = [_entropy(qae_renyi(register, L, x).value) for x in xs]
        shot = [qae_renyi(register, L, x, shots=config.shots, seed=cell_seed(config, x)) for x in xs]
        columns["S2_shots"] = [_entropy(r.value) for r in shot]
        columns["R2_shots_err"] = [r.stderr for r in shot]
        summary.update(prep.summary())
        summary["S2_x2_noiseless"] = columns["S2_noiseless"][min(2, L)]
        if _wants(config, "noisy"):
            raw, mit, fits = noisy_renyi(prep.circuit, prep.initial, xs, config, seed)
            columns["S2_raw"] = [_entropy(r) for r in raw]
            columns["S2_mitigated"] = [_entropy(r) for r in mit]
            summary["fits"] = [f.to_json() if f else None for f in fits]
    rows = [{"x": x, **{k: v[i] for k, v in columns.items()}} for i, x in enumerate(xs)]
    return ExperimentResult("renyi", rows, summary, [("renyi.csv", ["x"] + list(columns)), ("renyi.json", None)])


def noisy_renyi(circuit: LayeredCircuit, initial: Statevector, xs, config: ExperimentConfig, seed: int):
    """Two independent noisy copies: the swap test measures Tr(rho_A^2) of the noisy state.

    Per fold depth the copy density matrix comes from trajectories; ancilla
    outcomes are then sampled with readout flips and postselected.
    """
    L = circuit.n_qubits
    noise = noise_model(config, seed)
    ms = zne_m_list(config)
    traj = config.trajectories or config.shots
    seeds = np.random.SeedSequence(seed).spawn(len(ms))
    values = np.zeros((len(ms), len(xs)))
    errs = np.zeros_like(values)
    for a, (m, ss) in enumerate(zip(ms, seeds)):
        s_traj, s_shot = ss.spawn(2)
        rho = trajectory_density_matrix(fold(circuit, m).circuit, initial, noise, traj, s_traj)
        shot_seeds = s_shot.spawn(len(xs))
        for b, x in enumerate(xs):
            R = 1.0 if x == 0 else partial_trace(rho, list(range(x))).purity()
            p = np.array([(1 + R) / 2, 0.0, (1 - R) / 2, 0.0])
            res = qae_estimate(p, L, x, config.shots, noise, int(shot_seeds[b].generate_state(1)[0]))
            values[a, b], errs[a, b] = res.value, res.stderr
    layers = [circuit.n_layers + m for m in ms]
    raw = values[0]
    fits, mit = [], []
    for b in range(len(xs)):
        if len(ms) >= 4:
            f = extrapolate(layers, values[:, b], errs[:, b], config.fit_form)
            fits.append(f)
            mit.append(f.zero_noise_value)
        else:
            fits.append(None)
            mit.append(raw[b])
    return raw, np.array(mit), fits


# ------------------------------------------------------- tomography


def _spectrum_record(spec) -> dict:
    return spec.to_json()


def noisy_tomography(circuit, initial, subsystem, config: ExperimentConfig, seed: int, reference):
    noise = noise_model(config, seed)
    ms = zne_m_list(config)
    traj = config.trajectories or config.shots
    seeds = np.random.SeedSequence(seed).spawn(len(ms))
    coeffs = []
    for m, ss in zip(ms, seeds):
        s_traj, s_shot = ss.spawn(2)
        rho = trajectory_density_matrix(fold(circuit, m).circuit, initial, noise, traj, s_traj)
        tomo = tomography_3q(rho, subsystem, config.shots, int(s_shot.generate_state(1)[0]), noise)
        coeffs.append(tomo.coefficients)
        if m == 0:
            raw = tomo
    layers = [circuit.n_layers + m for m in ms]
    mitigated = np.zeros((8, 8), dtype=complex)
    for label in PAULIS_3Q:
        ys = [c[label] for c in coeffs]
        c = 1.0 if label == "III" else (extrapolate(layers, ys, None, config.fit_form).zero_noise_value
                                          if len(ms) >= 4 else ys[0])
        mitigated += c * PauliString(label).dense()
    mit_rho = DensityMatrix(mitigated / 8)
    floor = config.spectrum_floor
    return (
        raw,
        entanglement_spectrum(raw.rho, floor, reference),
        mit_rho,
        entanglement_spectrum(mit_rho, floor, reference),
    )


def run_tomography(config: ExperimentConfig) -> ExperimentResult:
    L = config.tomography_L
    sub = tuple(config.subsystem)
    H = hamiltonian(config, L=L)
    gs = exact_ground_state(H, config.degeneracy_tol).states[0]
    rho_exact = reduced_density(gs, sub)
    floor = config.spectrum_floor
    exact = entanglement_spectrum(rho_exact, floor)
    spectra = {"exact": exact}
    record = {"subsystem": list(sub), "rho_exact": {"real": rho_exact.elements.real, "imag": rho_exact.elements.imag}}
    if _wants(config, "noiseless"):
        prep = prepare(H, Statevector.plus(L), config, config.run_seed)
        state = prep.state
        analytic = tomography_3q(state, sub)
        shots = tomography_3q(state, sub, config.shots, config.run_seed)
        spectra["noiseless"] = entanglement_spectrum(analytic.rho, floor, exact)
        spectra["shots"] = entanglement_spectrum(shots.rho, floor, exact)
        record["preparation"] = prep.summary()
        record["tomography_noiseless"] = analytic.to_json()
        record["tomography_shots"] = shots.to_json()
        if _wants(config, "noisy"):
            raw, raw_spec, mit_rho, mit_spec = noisy_tomography(prep.circuit, prep.initial, sub, config,
                                                                config.run_seed, exact)
            spectra["raw"] = raw_spec
            spectra["mitigated"] = mit_spec
            record["tomography_raw"] = raw.to_json()
            record["rho_mitigated"] = {"real": mit_rho.elements.real, "imag": mit_rho.elements.imag}
    record["spectra"] = {k: _spectrum_record(s) for k, s in spectra.items()}
    rows = []
    for i in range(len(exact.epsilons)):
        row = {"level": i}
        for k, s in spectra.items():
            row[f"eps_{k}"] = s.epsilons[i]
            row[f"lambda_{k}"] = s.lambdas[i]
            if s.delta_eps is not None:
                row[f"delta_eps_{k}"] = s.delta_eps[i]
        rows.append(row)
    header = ["level"] + [c for c in rows[0] if c != "level"]
    res = ExperimentResult("tomography", rows, {"gap_exact": exact.gap}, [("tomography.csv", header), ("tomography.json", None)])
    res.summary["record"] = record
    return res


# ------------------------------------------------------- driver

RUNNERS = {
    "phase-diagram": run_phase_diagram,
    "string-sweep": run_string_sweep,
    "edge-profile": run_edge_profile,
    "quench": run_quench,
    "renyi": run_renyi,
    "tomography": run_tomography,
}


def run_experiment(name: str, config: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run, write the CSV/JSON artifacts and the manifest, all from this single writer."""
    if name not in RUNNERS:
        raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    out = Path(out_dir or config.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = RUNNERS[name](config)
    elapsed = time.perf_counter() - t0
    written = []
    for fname, header in result.files:
        path = out / fname
        if fname.endswith(".csv"):
            write_csv(path, header, result.rows)
        else:
            write_json(path, {"experiment": name, "mode": config.mode, "seed": config.seed, **result.summary})
        written.append(fname)
    result.files = written
    result.manifest = RunManifest.make(name, config, written, {"run_seconds": round(elapsed, 3)})
    result.manifest.write(out)
    return result
