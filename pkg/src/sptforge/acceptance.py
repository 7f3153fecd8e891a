"""Acceptance checks shared by ``sptforge verify`` and the acceptance test module.

Each criterion returns a :class:`CriterionResult` holding one or more claims,
each with the expected bound, the measured value and the tolerance. A
criterion passes only if every claim does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import FidelityCost, LayeredCircuit, evaluate
from .config import ExperimentConfig
from .dilation import beta_schedule, dilate_propagator, propagator, qite_prepare
from .experiments import (
    prepare,
    run_edge_profile,
    run_quench,
    run_renyi,
    run_string_sweep,
)
from .model import IsingClusterParams, build_hamiltonian, exact_ground_state
from .noise import NoiseModel
from .observables import (
    TwoCopyState,
    entanglement_spectrum,
    product_register,
    purity_of_subsystem,
    qae_joint_probabilities,
    qae_renyi,
    renyi2_swap,
    string_order,
    string_order_operator,
    tomography_3q,
)
from .qstate import Statevector, reduced_density
from .zne import fold, zne_expectation


@dataclass
class Claim:
    claim: str
    expected: str
    got: float
    tolerance: str
    passed: bool


@dataclass
class CriterionResult:
    number: int
    title: str
    claims: list[Claim] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.claims)

    def add(self, claim: str, expected: str, got: float, tolerance: str, passed: bool) -> None:
        self.claims.append(Claim(claim, expected, float(got), tolerance, bool(passed)))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        detail = "; ".join(f"{c.claim} got {c.got:.6g} ({'ok' if c.passed else 'FAILED'})" for c in self.claims)
        return f"[{status}] criterion {self.number}: {self.title}: {detail}"


def _random_hermitian(rng, L: int) -> np.ndarray:
    d = 1 << L
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / (2 * math.sqrt(d))


def _random_state(rng, n: int) -> Statevector:
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return Statevector(v / np.linalg.norm(v))


def _ising(L, g=2.5, J=1.0, h=1.0):
    return build_hamiltonian(IsingClusterParams(J, h, g, L))


# ------------------------------------------------------- criteria


def criterion_1(config: ExperimentConfig) -> CriterionResult:
    res = CriterionResult(1, "dilation soundness")
    rng = np.random.default_rng(config.run_seed)
    block_err = unit_err = 0.0
    count = 0
    for k in range(50):
        if k % 2 == 0:
            L = int(rng.integers(3, 5))
            J, h, g = rng.uniform(-2, 2, size=3)
            H = build_hamiltonian(IsingClusterParams(J, h, g, L)).dense()
        else:
            H = _random_hermitian(rng, int(rng.integers(1, 5)))
        for beta in (0.5, 1.0, 2.0, 4.0):
            dil = dilate_propagator(H, beta)
            ref = dil.u * propagator(H, beta, dil.energy_shift)
            block_err = max(block_err, np.abs(dil.top_left - ref).max())
            Q = dil.matrix
            unit_err = max(unit_err, np.linalg.norm(Q.conj().T @ Q - np.eye(Q.shape[0]), 2))
            count += 1
    res.add(f"max |top-left - u e^(-beta H)| over {count} dilations", "< 1e-9", block_err, "1e-9", block_err < 1e-9)
    res.add("max ||Q^dag Q - I||", "< 1e-10", unit_err, "1e-10", unit_err < 1e-10)
    return res


def criterion_2(config: ExperimentConfig) -> CriterionResult:
    res = CriterionResult(2, "QITE convergence at L=4, g=2.5")
    H = _ising(4)
    space = exact_ground_state(H, config.degeneracy_tol)
    initial = Statevector.plus(4)
    beta = beta_schedule(H, config.target_fidelity, initial, space)
    state, _ = qite_prepare(H, beta, initial, space)
    f_qite = space.projection_fidelity(state)
    prep = prepare(H, initial, config.replace(beta=beta), config.run_seed, reference=space)
    f_circ = space.projection_fidelity(prep.state)
    res.add(f"QITE fidelity at beta={beta:g}", "> 0.999", f_qite, "0.999", f_qite > 0.999)
    res.add("trained 4-qubit circuit fidelity", "> 0.99", f_circ, "0.99", f_circ > 0.99)
    return res


def criterion_3(config: ExperimentConfig) -> CriterionResult:
    res = CriterionResult(3, "string-order transition at L=8")
    cfg = config.replace(J=1.0, h=1.0, L=8, g_values=[0.0, 0.2, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0], mode="noiseless")
    sweep = run_string_sweep(cfg)
    by_g = {r["g"]: r for r in sweep.rows}
    lo, hi = by_g[0.2]["exact"], by_g[2.5]["exact"]
    dev = max(abs(r["noiseless"] - r["exact"]) for r in sweep.rows)
    res.add("exact O_str(8) at g=0.2", "< 0.1", lo, "0.1", lo < 0.1)
    res.add("exact O_str(8) at g=2.5", "> 0.9", hi, "0.9", hi > 0.9)
    res.add("max |noiseless - exact| over the g grid", "< 0.05", dev, "0.05", dev < 0.05)
    return res


def criterion_4(config: ExperimentConfig) -> CriterionResult:
    res = CriterionResult(4, "edge modes at L=8, g=2.5")
    cfg = config.replace(J=1.0, h=1.0, g=2.5, L=8, mode="noiseless")
    prof = run_edge_profile(cfg)
    for col in ("exact", "noiseless"):
        margin = prof.summary[f"{col}_margin"]
        res.add(f"{col}: min edge |Z| - max bulk |Z|", ">= 0.1", margin, "margin 0.1", margin >= 0.1)
    return res


def criterion_5(config: ExperimentConfig) -> CriterionResult:
    res = CriterionResult(5, "quench robustness at L=8, g=2.5")
    cfg = config.replace(J=1.0, h=1.0, g=2.5, L=8, t_max=5.0, t_points=max(26, config.t_points),
                         quench_initial="01111110", mode="noiseless")
    q = run_quench(cfg)
    edge = q.summary["min_edge_noiseless"]
    bulk = q.summary["max_abs_bulk_noiseless"]
    res.add("min_t <Z_edge(t)>", "> 0.6", edge, "0.6", edge > 0.6)
    res.add("max_t |<Z_bulk(t)>|", "< 0.2", bulk, "0.2", bulk < 0.2)
    return res


def criterion_6(config: ExperimentConfig) -> CriterionResult:
    res = CriterionResult(6, "second Renyi entropy at L=4, g=2.5")
    cfg = config.replace(J=1.0, h=1.0, g=2.5, renyi_L=4, mode="noiseless")
    rows = run_renyi(cfg).rows
    s = {r["x"]: r["S2_noiseless"] for r in rows}
    d = abs(s[2] - math.log(2))
    res.add("|S2(x=2) - ln 2|", "< 0.05", d, "0.05", d < 0.05)
    res.add("S2(x=0)", "< 0.02", s[0], "0.02", s[0] < 0.02)
    res.add("S2(x=4)", "< 0.02", s[4], "0.02", s[4] < 0.02)
    return res


def criterion_7(config: ExperimentConfig) -> CriterionResult:
    res = CriterionResult(7, "QAE / swap / trace agreement")
    rng = np.random.default_rng(config.run_seed)
    L = 4
    worst = 0.0
    worst_z = 0.0
    for k in range(20):
        psi = _random_state(rng, L)
        reg = product_register(psi)
        two = TwoCopyState.from_state(psi)
        for x in range(L + 1):
            a = qae_renyi(reg, L, x).value
            b = renyi2_swap(two, x)
            c = purity_of_subsystem(psi, x)
            worst = max(worst, abs(a - b), abs(a - c), abs(b - c))
            shot = qae_renyi(reg, L, x, shots=config.shots, seed=1000 * k + x)
            p0 = qae_joint_probabilities(reg, L, x)[0]
            sigma = 2 * math.sqrt(max(p0 * (1 - p0), 0.0) / config.shots)
            dev = abs(shot.value - a)
            worst_z = max(worst_z, dev / sigma if sigma > 0 else (0.0 if dev < 1e-12 else math.inf))
    res.add("max pairwise deviation (analytic QAE, swap, Tr rho^2)", "< 1e-9", worst, "1e-9", worst < 1e-9)
    res.add(f"max |shots - analytic| / sigma at {config.shots} shots", "<= 4", worst_z, "4 sigma", worst_z <= 4)
    return res


def criterion_8(config: ExperimentConfig) -> CriterionResult:
    res = CriterionResult(8, "tomography and entanglement spectrum at L=4, g=2.5")
    H = _ising(4)
    gs = exact_ground_state(H, config.degeneracy_tol).states[0]
    sub = (0, 1, 2)
    exact_rho = reduced_density(gs, sub)
    exact = entanglement_spectrum(exact_rho)
    analytic = tomography_3q(gs, sub)
    err = np.abs(analytic.rho.elements - exact_rho.elements).max()
    res.add("analytic tomography vs ED reduced matrix", "< 1e-9", err, "1e-9", err < 1e-9)
    shot = tomography_3q(gs, sub, 20000, config.run_seed)
    spec = entanglement_spectrum(shot.rho, reference=exact)
    d1 = abs(spec.epsilons[0] - exact.epsilons[0])
    d2 = abs(spec.epsilons[1] - exact.epsilons[1])
    res.add("|eps1 shots - exact| (20000/basis)", "< 0.05", d1, "0.05", d1 < 0.05)
    res.add("|eps2 shots - exact| (20000/basis)", "< 0.05", d2, "0.05", d2 < 0.05)
    top = spec.epsilons[0] + spec.epsilons[1]
    res.add("eps1 + eps2 (shots)", "> 0.9", top, "0.9", top > 0.9)
    ok = spec.delta_eps is not None and np.all(np.isfinite(spec.delta_eps))
    res.add("delta-eps report entries", "8 finite", 0 if spec.delta_eps is None else len(spec.delta_eps), "-", ok)
    ratios = []
    for shots in (5000, 200000):
        s = entanglement_spectrum(tomography_3q(gs, sub, shots, config.run_seed + 1).rho)
        e1 = abs(s.epsilons[0] - exact.epsilons[0])
        for i in (2, 3):
            ratios.append(abs(s.lambdas[i] - exact.lambdas[i]) / max(e1, 1e-300))
    worst = min(ratios)
    res.add("min over {5000, 200000} shots of |lambda3,4 dev| / |eps1 dev|", "> 10", worst, "10x", worst > 10)
    return res


def criterion_9(config: ExperimentConfig) -> CriterionResult:
    res = CriterionResult(9, "ZNE efficacy at L=4, g=2.5")
    H = _ising(4)
    initial = Statevector.plus(4)
    prep = prepare(H, initial, config, config.run_seed)
    base = prep.circuit
    obs = string_order_operator(4, 4)
    ideal = string_order(evaluate(base, initial))
    noise = NoiseModel(0.005, 0.006, config.run_seed)
    raw, mit = [], []
    for s in range(20):
        v, fit = zne_expectation(base, obs, noise, (0, 2, 4, 6), config.shots, "exponential", config.run_seed + s, initial)
        raw.append(abs(fit.ys[0] - ideal))
        mit.append(abs(v - ideal))
    res.add("median |ZNE - noiseless| (20 seeds)", f"< median raw {np.median(raw):.4g}", np.median(mit),
            "strict", np.median(mit) < np.median(raw))
    out = evaluate(base, initial)
    worst = 0.0
    for m in (2, 4, 6, 8):
        folded = evaluate(fold(base, m).circuit, initial)
        worst = max(worst, np.abs(folded.amplitudes - out.amplitudes).max(),
                    abs(string_order(folded) - ideal))
    res.add("noiseless folding deviation (m = 2..8)", "< 1e-9", worst, "1e-9", worst < 1e-9)
    return res


def criterion_10(config: ExperimentConfig) -> CriterionResult:
    res = CriterionResult(10, "gradient check on 3-qubit circuits")
    rng = np.random.default_rng(config.run_seed)
    worst = 0.0
    h = 1e-6
    for k in range(6):
        circuit = LayeredCircuit(3, 1 + k % 3)
        cost = FidelityCost(circuit, _random_state(rng, 3), _random_state(rng, 3))
        x = rng.uniform(-math.pi, math.pi, circuit.n_params)
        _, grad = cost.value_and_grad(x)
        fd = np.empty_like(x)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h
            fd[i] = (cost(x + e) - cost(x - e)) / (2 * h)
        worst = max(worst, np.linalg.norm(grad - fd) / np.linalg.norm(fd))
    res.add("max relative error, adjoint vs central differences", "< 1e-5", worst, "1e-5", worst < 1e-5)
    return res


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def default_config(seed: int = 0) -> ExperimentConfig:
    return ExperimentConfig(seed=seed)


def run_all(config: ExperimentConfig, numbers=None) -> list[CriterionResult]:
    return [CRITERIA[n](config) for n in (numbers or sorted(CRITERIA))]


def format_table(results: list[CriterionResult]) -> str:
    rows = [("#", "claim", "expected", "got", "tolerance", "status")]
    for r in results:
        for c in r.claims:
            rows.append((str(r.number), c.claim, c.expected, f"{c.got:.6g}", c.tolerance, "PASS" if c.passed else "FAIL"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
