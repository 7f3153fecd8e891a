"""Physical measurements: string order, magnetization, quench dynamics, Rényi entropy, tomography."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .dilation import dilate, propagator
from .model import as_dense
from .noise import NoiseModel, apply_readout_error
from .pauli import PauliString, product_of
from .qstate import (
    DensityMatrix,
    MeasurementRecord,
    PostselectionError,
    Statevector,
    apply_gates,
    basis_rotations,
    counts_from_probabilities,
    cswap,
    hadamard,
    marginal_probabilities,
    partial_trace,
    postselect,
    reduced_density,
    swap,
    unitary_gate,
)

# ------------------------------------------------------- string order


def string_order_operator(L: int, n: int) -> PauliString:
    """Z_0 Y_1 [X_2 ... X_{n-3}] Y_{n-2} Z_{n-1} on an L-qubit register.

    The factors are multiplied literally, so for n = 2 and 3 the overlapping
    sites combine with their phases (giving X_0 X_1 and Z_0 Z_2).
    """
    if n < 2:
        raise ValueError("string window must have n >= 2")
    if n > L:
        raise ValueError(f"string window n={n} exceeds chain length L={L}")
    factors = [PauliString.from_sites(L, {0: "Z"}), PauliString.from_sites(L, {1: "Y"})]
    factors += [PauliString.from_sites(L, {k: "X"}) for k in range(2, n - 2)]
    factors += [PauliString.from_sites(L, {n - 2: "Y"}), PauliString.from_sites(L, {n - 1: "Z"})]
    return product_of(factors)


def pauli_value(state, obs: PauliString) -> float:
    if isinstance(state, DensityMatrix):
        return state.expectation(obs)
    return float(np.real(kernels.pauli_expectation(state.amplitudes, *obs.masks())))


def string_order(state, n: int | None = None) -> float:
    L = state.n_qubits
    return pauli_value(state, string_order_operator(L, L if n is None else n))


def magnetization_profile(state) -> np.ndarray:
    L = state.n_qubits
    return np.array([pauli_value(state, PauliString.from_sites(L, {i: "Z"})) for i in range(L)])


# ------------------------------------------------------- quench


def edge_sites(L: int) -> tuple[int, ...]:
    return (0, L - 1)


def bulk_sites(L: int) -> tuple[int, ...]:
    return tuple(range(1, L - 1))


@dataclass
class QuenchResult:
    initial: str
    times: np.ndarray
    edge: np.ndarray
    bulk: np.ndarray
    profiles: np.ndarray

    @property
    def min_edge(self) -> float:
        return float(self.edge.min())

    @property
    def max_abs_bulk(self) -> float:
        return float(np.abs(self.bulk).max())

    def to_json(self) -> dict:
        return {
            "initial": self.initial,
            "times": self.times.tolist(),
            "edge": self.edge.tolist(),
            "bulk": self.bulk.tolist(),
            "min_edge": self.min_edge,
            "max_abs_bulk": self.max_abs_bulk,
        }


def edge_bulk_average(profile: np.ndarray) -> tuple[float, float]:
    L = len(profile)
    return float(np.mean(profile[list(edge_sites(L))])), float(np.mean(profile[list(bulk_sites(L))]))


def quench_edge_bulk(H, initial: str, times: Sequence[float]) -> QuenchResult:
    """Edge and bulk Z magnetization along exp(-i t H)|initial>, by dense eigendecomposition."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("time grid must be sorted")
    psi0 = Statevector.from_bitstring(initial)
    w, v = np.linalg.eigh(as_dense(H))
    if v.shape[0] != psi0.amplitudes.size:
        raise ValueError("initial bitstring length does not match the Hamiltonian")
    coeff = v.conj().T @ psi0.amplitudes
    profiles = np.array([magnetization_profile(Statevector(v @ (np.exp(-1j * t * w) * coeff))) for t in times])
    eb = np.array([edge_bulk_average(p) for p in profiles]).reshape(-1, 2)
    return QuenchResult(initial, times, eb[:, 0], eb[:, 1], profiles)


# ------------------------------------------------------- Rényi entropy


@dataclass
class TwoCopyState:
    """|psi>_1 |psi>_2 with copy 1 on qubits 0..L-1 and copy 2 on L..2L-1."""

    state: Statevector
    L: int

    def __post_init__(self):
        if self.state.n_qubits != 2 * self.L:
            raise ValueError("two-copy register must hold exactly 2L qubits")

    @classmethod
    def from_state(cls, psi: Statevector) -> TwoCopyState:
        return cls(psi.tensor(psi), psi.n_qubits)

    @classmethod
    def from_register(cls, register: Statevector, L: int) -> TwoCopyState:
        """Postselect both ancillas of a [copy1, copy2, A0, A1] register on 0."""
        s, _ = postselect(register, 2 * L + 1, 0, drop=True)
        s, _ = postselect(s, 2 * L, 0, drop=True)
        return cls(s, L)

    def check(self, tol: float = 1e-8) -> None:
        r1 = reduced_density(self.state, range(self.L)).elements
        r2 = reduced_density(self.state, range(self.L, 2 * self.L)).elements
        err = np.abs(r1 - r2).max()
        if err > tol:
            raise ValueError(f"copies differ (max reduced-state deviation {err:.2e})")


def _swap_permutation(L: int, x: int) -> np.ndarray:
    idx = np.arange(1 << (2 * L))
    mask = (1 << x) - 1
    a = idx & mask
    b = (idx >> L) & mask
    return idx ^ a ^ (b << L) ^ b ^ (a << L)


def renyi2_swap(two_copy: TwoCopyState, x: int) -> float:
    """<psi psi| SWAP_sub(x) |psi psi> where the subsystem is sites 0..x-1."""
    if not 0 <= x <= two_copy.L:
        raise ValueError(f"subsystem length x={x} outside 0..{two_copy.L}")
    a = two_copy.state.amplitudes
    return float(np.real(np.vdot(a, a[_swap_permutation(two_copy.L, x)])))


def renyi2_entropy(purity: float) -> float:
    if purity <= 0:
        raise ValueError("purity must be positive")
    return -math.log(purity)


def purity_of_subsystem(state: Statevector, x: int) -> float:
    if x == 0:
        return 1.0
    return reduced_density(state, range(x)).purity()


def ancilla_indices(L: int) -> tuple[int, int]:
    """(A0, A1) of the [copy1, copy2, A0, A1] register."""
    return 2 * L, 2 * L + 1


def two_copy_qite_register(H, beta: float, initial: Statevector) -> Statevector:
    """exp(-beta H) x exp(-beta H) dilated with a single ancilla placed on A1.

    The spectrum is shifted by its ground energy before exponentiation; the
    dilation rescales by 1/sigma_max, so the postselected state is unchanged.
    """
    L = initial.n_qubits
    e0 = float(np.linalg.eigvalsh(as_dense(H))[0])
    K = propagator(H, beta, e0)
    dil = dilate(np.kron(K, K), beta=beta)
    a0, a1 = ancilla_indices(L)
    register = initial.tensor(initial).tensor(Statevector.zero(2))
    gate = unitary_gate(dil.matrix, list(range(2 * L)) + [a1], check=False)
    return apply_gates(register, [gate])


def product_register(psi: Statevector) -> Statevector:
    """|psi>|psi>|0_A0 0_A1>, the register of an ancilla-free preparation."""
    return psi.tensor(psi).tensor(Statevector.zero(2))


def qae_circuit(L: int, x: int) -> list:
    a0, a1 = ancilla_indices(L)
    gates = [swap(a1, a0), hadamard(a1)]
    gates += [cswap(a1, j, L + j) for j in range(x)]
    gates.append(hadamard(a1))
    return gates


def qae_joint_probabilities(register, L: int, x: int) -> np.ndarray:
    """Outcome distribution of (A0, A1) after the estimation circuit; index = a0 + 2*a1.

    ``register`` is a Statevector or a sequence of ``(Statevector, weight)``
    pairs describing a mixture.
    """
    if not 0 <= x <= L:
        raise ValueError(f"subsystem length x={x} outside 0..{L}")
    mix = [(register, 1.0)] if isinstance(register, Statevector) else list(register)
    total = sum(w for _, w in mix)
    gates = qae_circuit(L, x)
    p = np.zeros(4)
    for state, w in mix:
        if state.n_qubits != 2 * L + 2:
            raise ValueError("register must be [copy1, copy2, A0, A1]")
        out = apply_gates(state, gates).probabilities()
        p += w * marginal_probabilities(out, 2 * L + 2, ancilla_indices(L))
    return p / total


@dataclass
class QAEResult:
    x: int
    value: float
    stderr: float
    retained: int | None
    shots: int | None
    record: MeasurementRecord | None = None

    @property
    def entropy(self) -> float:
        return renyi2_entropy(self.value)

    def to_json(self) -> dict:
        return {
            "x": self.x,
            "value": self.value,
            "stderr": self.stderr,
            "retained": self.retained,
            "shots": self.shots,
            "record": None if self.record is None else self.record.to_json(),
        }


def qae_renyi(
    register,
    L: int,
    x: int,
    shots: int | None = None,
    noise: NoiseModel | None = None,
    seed: int = 0,
    min_retained: int = 100,
) -> QAEResult:
    """2 P(A1 = 0 | A0 = 0) - 1.

    With ``shots=None`` the analytic probabilities are used. Otherwise
    outcomes are sampled, readout flips from ``noise`` are applied to both
    ancillas, and postselection uses the flipped A0 bit.
    """
    return qae_estimate(qae_joint_probabilities(register, L, x), L, x, shots, noise, seed, min_retained)


def qae_estimate(
    p: np.ndarray,
    L: int,
    x: int,
    shots: int | None = None,
    noise: NoiseModel | None = None,
    seed: int = 0,
    min_retained: int = 100,
) -> QAEResult:
    """Estimate from the (A0, A1) outcome distribution ``p`` (index a0 + 2*a1)."""
    if shots is None:
        keep = p[0] + p[2]
        if keep <= 0:
            raise PostselectionError("A0 = 0 has zero probability")
        return QAEResult(x, float(2 * p[0] / keep - 1), 0.0, None, None)
    if shots <= 0:
        raise ValueError("shots must be positive")
    ss = np.random.SeedSequence(seed)
    s_draw, s_read = ss.spawn(2)
    counts = counts_from_probabilities(p, shots, np.random.default_rng(s_draw), 2)
    rec = MeasurementRecord("ZZ", ancilla_indices(L), shots, counts, seed)
    if noise is not None:
        rec = apply_readout_error(rec, noise, s_read)
    retained = rec.counts.get("00", 0) + rec.counts.get("01", 0)
    if retained < min_retained:
        raise PostselectionError(f"only {retained} shots survive postselection (minimum {min_retained})")
    p0 = rec.counts.get("00", 0) / retained
    return QAEResult(x, 2 * p0 - 1, 2 * math.sqrt(max(p0 * (1 - p0), 0.0) / retained), retained, shots, rec)


# ------------------------------------------------------- tomography


SETTINGS_3Q = tuple("".join(s) for s in itertools.product("XYZ", repeat=3))
PAULIS_3Q = tuple("".join(s) for s in itertools.product("IXYZ", repeat=3))


@dataclass
class TomographyResult:
    subsystem: tuple[int, ...]
    rho: DensityMatrix
    coefficients: dict[str, float]
    shots: int | None
    seed: int | None
    records: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> dict:
        m = self.rho.elements
        return {
            "subsystem": list(self.subsystem),
            "shots": self.shots,
            "seed": self.seed,
            "coefficients": self.coefficients,
            "rho_real": m.real.tolist(),
            "rho_imag": m.imag.tolist(),
            "counts": self.records,
        }


def _subsystem_state(state, subsystem) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return partial_trace(state, subsystem)
    return reduced_density(state, subsystem)


def setting_probabilities(rho3: DensityMatrix, setting: str) -> np.ndarray:
    """Outcome distribution (index bit j = qubit j) after rotating each qubit into ``setting``."""
    rot = np.eye(8, dtype=complex)
    for g in basis_rotations(setting, range(3)):
        full = np.kron(np.eye(1 << (2 - g.targets[0])), np.kron(g.matrix, np.eye(1 << g.targets[0])))
        rot = full @ rot
    return np.clip(np.real(np.diag(rot @ rho3.elements @ rot.conj().T)), 0.0, None)


def _parity_signs(positions: Sequence[int]) -> np.ndarray:
    idx = np.arange(8)
    par = np.zeros(8, dtype=int)
    for j in positions:
        par ^= (idx >> j) & 1
    return 1.0 - 2.0 * par


def tomography_3q(
    state,
    subsystem: Sequence[int],
    shots: int | None = None,
    seed: int = 0,
    noise: NoiseModel | None = None,
    min_shots: int = 10,
) -> TomographyResult:
    """Linear-inversion tomography from the 27 X/Y/Z settings.

    Coefficients of strings containing identities average the corresponding
    marginal parity over every setting that agrees on the non-identity letters.
    """
    subsystem = tuple(int(q) for q in subsystem)
    if len(subsystem) != 3:
        raise ValueError("tomography needs exactly three qubits")
    if shots is not None and shots < min_shots:
        raise ValueError(f"{shots} shots per setting is below the floor of {min_shots}")
    rho3 = _subsystem_state(state, subsystem)
    seeds = np.random.SeedSequence(seed).spawn(len(SETTINGS_3Q))
    dists = {}
    records = {}
    for setting, ss in zip(SETTINGS_3Q, seeds):
        p = setting_probabilities(rho3, setting)
        if shots is None:
            dists[setting] = p / p.sum()
            continue
        s_draw, s_read = ss.spawn(2)
        counts = counts_from_probabilities(p, shots, np.random.default_rng(s_draw), 3)
        rec = MeasurementRecord(setting, subsystem, shots, counts, seed)
        if noise is not None:
            rec = apply_readout_error(rec, noise, s_read)
        records[setting] = dict(sorted(rec.counts.items()))
        dists[setting] = rec.probabilities()
    coeffs = {}
    rho = np.zeros((8, 8), dtype=complex)
    for label in PAULIS_3Q:
        positions = [j for j, c in enumerate(label) if c != "I"]
        if not positions:
            c = 1.0
        else:
            signs = _parity_signs(positions)
            vals = [signs @ dists[s] for s in SETTINGS_3Q if all(s[j] == label[j] for j in positions)]
            c = float(np.mean(vals))
        coeffs[label] = c
        rho += c * PauliString(label).dense()
    return TomographyResult(subsystem, DensityMatrix(rho / 8), coeffs, shots, seed if shots else None, records)


# ------------------------------------------------------- entanglement spectrum


@dataclass
class EntanglementSpectrum:
    epsilons: np.ndarray
    lambdas: np.ndarray
    gap: float
    gap_pair: tuple[int, int]
    raw_epsilons: np.ndarray
    floor: float
    delta_eps: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "epsilons": self.epsilons.tolist(),
            "raw_epsilons": self.raw_epsilons.tolist(),
            "lambdas": self.lambdas.tolist(),
            "gap": self.gap,
            "gap_pair": list(self.gap_pair),
            "floor": self.floor,
            "delta_eps": None if self.delta_eps is None else self.delta_eps.tolist(),
        }


def entanglement_spectrum(
    rho: DensityMatrix,
    floor: float = 1e-12,
    reference=None,
    gap_pair: tuple[int, int] = (1, 2),
) -> EntanglementSpectrum:
    """Descending eigenvalues, lambda = -ln(max(eps, floor)), and the gap lambda[j] - lambda[i].

    ``raw_epsilons`` keeps the eigenvalues as measured (negative ones included);
    ``epsilons`` clips them at zero and renormalizes. ``reference`` (another
    spectrum or an eigenvalue array) adds the per-level discrepancy ``delta_eps``.
    """
    tr = np.real(rho.trace())
    if abs(tr - 1) > 1e-3:
        raise ValueError(f"trace {tr:.6f} deviates from 1 by more than 1e-3")
    raw = rho.eigenvalues()
    eps = np.clip(raw, 0.0, None)
    eps = eps / eps.sum()
    lam = -np.log(np.maximum(eps, floor))
    i, j = gap_pair
    if not (0 <= i < len(lam) and 0 <= j < len(lam)):
        raise ValueError(f"gap pair {gap_pair} outside the spectrum")
    delta = None
    if reference is not None:
        ref = reference.epsilons if isinstance(reference, EntanglementSpectrum) else np.asarray(reference)
        delta = np.abs(eps - ref)
    return EntanglementSpectrum(eps, lam, float(lam[j] - lam[i]), (i, j), raw, floor, delta)
