"""Device-noise emulation: two-qubit depolarizing after every ECR, readout bit flips.

Trajectories unravel the depolarizing channel: after each ECR, with
probability ``p_ecr`` one of the 15 non-identity two-qubit Paulis is inserted
on its targets. Error patterns are drawn in one vectorized batch from the
seed; identical patterns are simulated once and weighted by multiplicity,
and every pattern resumes from the cached noiseless prefix state at its first
error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .ansatz import _ECR_STACK, LayeredCircuit, u3_batch
from .pauli import PauliString
from .qstate import (
    DensityMatrix,
    MeasurementRecord,
    Statevector,
    basis_rotations,
    bitstring_to_index,
    index_to_bitstring,
    marginal_probabilities,
    apply_gates,
)

MAX_DENSITY_QUBITS = 6
_LETTERS = "IXYZ"


@dataclass(frozen=True)
class NoiseModel:
    p_ecr: float = 0.005
    p_readout: float = 0.006
    seed: int = 0

    def __post_init__(self):
        for name in ("p_ecr", "p_readout"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def noiseless(cls, seed: int = 0) -> NoiseModel:
        return cls(0.0, 0.0, seed)

    def to_json(self) -> dict:
        return {"p_ecr": self.p_ecr, "p_readout": self.p_readout, "seed": self.seed}


def two_qubit_pauli(index: int) -> tuple[str, str]:
    """Letters on (first, second) target for index 1..15."""
    if not 1 <= index <= 15:
        raise ValueError("two-qubit Pauli index must be in 1..15")
    return _LETTERS[index & 3], _LETTERS[index >> 2]


def _pauli_masks(index: int, a: int, b: int) -> tuple[int, int, complex]:
    la, lb = two_qubit_pauli(index)
    x = z = 0
    phase = 1.0 + 0j
    for letter, q in ((la, a), (lb, b)):
        if letter in "XY":
            x |= 1 << q
        if letter in "ZY":
            z |= 1 << q
        if letter == "Y":
            phase *= 1j
    return x, z, phase


@dataclass
class NoisyEstimate:
    means: np.ndarray
    stderrs: np.ndarray
    trajectories: int
    distinct_patterns: int


def sample_error_patterns(n_ecr: int, p: float, trajectories: int, rng: np.random.Generator):
    """Per trajectory, a tuple of ``(ecr_number, pauli_index)`` pairs."""
    hits = rng.random((trajectories, n_ecr)) < p
    paulis = rng.integers(1, 16, size=(trajectories, n_ecr))
    patterns = []
    for t in range(trajectories):
        where = np.nonzero(hits[t])[0]
        patterns.append(tuple((int(j), int(paulis[t, j])) for j in where))
    return patterns


def trajectory_states(circuit: LayeredCircuit, input: Statevector, model: NoiseModel, trajectories: int, seed=None):
    """Yield ``(amplitudes, multiplicity)`` for each distinct error pattern, in a fixed order."""
    if trajectories <= 0:
        raise ValueError("trajectories must be positive")
    if input.n_qubits != circuit.n_qubits:
        raise ValueError("input size does not match circuit")
    rng = np.random.default_rng(model.seed if seed is None else seed)
    prog = circuit.program()
    m1 = u3_batch(circuit.params.reshape(-1, 3)) if circuit.n_layers else np.zeros((0, 2, 2), complex)
    ecr_rows = circuit.ecr_positions()
    patterns = sample_error_patterns(len(ecr_rows), model.p_ecr, trajectories, rng)
    groups: dict[tuple, int] = {}
    for pat in patterns:
        groups[pat] = groups.get(pat, 0) + 1

    ideal = input.amplitudes.copy()
    prefix = []
    start = 0
    for row in ecr_rows:
        kernels.run_program(ideal, prog[start : row + 1], m1, _ECR_STACK)
        prefix.append(ideal.copy())
        start = row + 1
    kernels.run_program(ideal, prog[start:], m1, _ECR_STACK)

    for pat in sorted(groups, key=lambda p: (len(p), p)):
        mult = groups[pat]
        if not pat:
            yield ideal, mult
            continue
        first = pat[0][0]
        psi = prefix[first].copy()
        for k, (j, pidx) in enumerate(pat):
            a, b = prog[ecr_rows[j], 1], prog[ecr_rows[j], 2]
            kernels.apply_pauli(psi, *_pauli_masks(pidx, int(a), int(b)))
            stop = ecr_rows[pat[k + 1][0]] + 1 if k + 1 < len(pat) else len(prog)
            kernels.run_program(psi, prog[ecr_rows[j] + 1 : stop], m1, _ECR_STACK)
        yield psi, mult


def noisy_evaluate(
    circuit: LayeredCircuit,
    input: Statevector,
    model: NoiseModel,
    trajectories: int,
    observables: Sequence[PauliString],
    seed=None,
) -> NoisyEstimate:
    """Trajectory average of exact per-trajectory expectation values."""
    masks = [obs.masks() for obs in observables]
    values, weights = [], []
    n_distinct = 0
    for psi, mult in trajectory_states(circuit, input, model, trajectories, seed):
        n_distinct += 1
        values.append([np.real(kernels.pauli_expectation(psi, *m)) for m in masks])
        weights.append(mult)
    vals = np.array(values).reshape(len(values), len(masks))
    w = np.array(weights, dtype=float)
    mean = np.sum(w[:, None] * vals, axis=0) / trajectories
    var = np.sum(w[:, None] * (vals - mean) ** 2, axis=0) / max(trajectories - 1, 1)
    return NoisyEstimate(mean, np.sqrt(var / trajectories), trajectories, n_distinct)


def noisy_sample(
    circuit: LayeredCircuit,
    input: Statevector,
    model: NoiseModel,
    basis: str,
    shots: int,
    trajectories: int | None = None,
    seed=None,
    qubits: Sequence[int] | None = None,
    readout: bool = True,
) -> MeasurementRecord:
    """Shot record of the noisy circuit measured in ``basis`` (one letter per measured qubit).

    Shots are spread evenly over the trajectories; readout bit flips follow.
    """
    if shots <= 0:
        raise ValueError("shots must be positive")
    trajectories = shots if trajectories is None else trajectories
    trajectories = min(trajectories, shots)
    qubits = tuple(range(circuit.n_qubits)) if qubits is None else tuple(qubits)
    if len(basis) != len(qubits):
        raise ValueError("one basis letter per measured qubit")
    ss = np.random.SeedSequence(model.seed if seed is None else seed)
    traj_seed, shot_seed, readout_seed = ss.spawn(3)
    rotations = basis_rotations(basis, qubits)
    n = circuit.n_qubits
    base, extra = divmod(shots, trajectories)
    rng = np.random.default_rng(shot_seed)
    tally = np.zeros(1 << len(qubits), dtype=np.int64)
    # trajectories are consumed in group order; the first ``extra`` get one more shot
    consumed = 0
    for psi, mult in trajectory_states(circuit, input, model, trajectories, traj_seed):
        rotated = apply_gates(Statevector(psi), rotations).probabilities()
        probs = marginal_probabilities(rotated, n, qubits)
        bonus = max(0, min(extra - consumed, mult))
        group_shots = base * mult + bonus
        consumed += mult
        if group_shots:
            p = np.clip(probs, 0, None)
            tally += rng.multinomial(group_shots, p / p.sum())
    counts = {index_to_bitstring(i, len(qubits)): int(c) for i, c in enumerate(tally) if c}
    record = MeasurementRecord(basis, qubits, shots, counts, seed if isinstance(seed, int) else model.seed)
    if readout and model.p_readout > 0:
        record = apply_readout_error(record, model, readout_seed)
    return record


def apply_readout_error(record: MeasurementRecord, model: NoiseModel, seed=None) -> MeasurementRecord:
    """Flip every bit of every shot independently with probability ``p_readout``."""
    rng = np.random.default_rng(model.seed if seed is None else seed)
    width = len(record.qubits)
    if model.p_readout == 0:
        return MeasurementRecord(record.basis, record.qubits, record.shots, dict(record.counts), record.seed)
    keys = sorted(record.counts)
    idx = np.repeat([bitstring_to_index(k) for k in keys], [record.counts[k] for k in keys])
    flips = rng.random((idx.size, width)) < model.p_readout
    flipmask = flips.astype(np.int64) @ (1 << np.arange(width, dtype=np.int64))
    out = np.bincount(idx ^ flipmask, minlength=1 << width)
    counts = {index_to_bitstring(i, width): int(c) for i, c in enumerate(out) if c}
    return MeasurementRecord(record.basis, record.qubits, record.shots, counts, record.seed)


# ------------------------------------------------------- density matrices


def _dm_apply_1q(vec, m, q, n):
    kernels.apply_1q(vec, m, q + n)
    kernels.apply_1q(vec, np.ascontiguousarray(m.conj()), q)


def _dm_apply_2q(vec, m, a, b, n):
    kernels.apply_2q(vec, m, a + n, b + n)
    kernels.apply_2q(vec, np.ascontiguousarray(m.conj()), a, b)


def _dm_depolarize(vec, a, b, p, n):
    if p == 0:
        return vec
    acc = (1 - p) * vec
    for idx in range(1, 16):
        x, z, phase = _pauli_masks(idx, a, b)
        term = vec.copy()
        kernels.apply_pauli(term, x << n, z << n, phase)
        kernels.apply_pauli(term, x, z, np.conj(phase))
        acc += (p / 15) * term
    return acc


def density_matrix_reference(circuit: LayeredCircuit, input, model: NoiseModel) -> DensityMatrix:
    """Exact channel composition on the vectorized density matrix (n <= 6)."""
    n = circuit.n_qubits
    if n > MAX_DENSITY_QUBITS:
        raise ValueError(f"density-matrix reference limited to {MAX_DENSITY_QUBITS} qubits")
    rho = DensityMatrix.from_statevector(input) if isinstance(input, Statevector) else input
    if rho.n_qubits != n:
        raise ValueError("input size does not match circuit")
    # row-major flattening: column index in the low n bits, row index above
    vec = np.ascontiguousarray(rho.elements.reshape(-1)).astype(np.complex128)
    m1 = u3_batch(circuit.params.reshape(-1, 3)) if circuit.n_layers else None
    for kind, q0, q1, k in circuit.program():
        if kind == 1:
            _dm_apply_1q(vec, m1[k], int(q0), n)
        else:
            _dm_apply_2q(vec, _ECR_STACK[0], int(q0), int(q1), n)
            vec = _dm_depolarize(vec, int(q0), int(q1), model.p_ecr, n)
    return DensityMatrix(vec.reshape(1 << n, 1 << n))


def readout_expectation_factor(model: NoiseModel, weight: int) -> float:
    """Multiplicative bias of a weight-``weight`` parity under readout flips."""
    return (1.0 - 2.0 * model.p_readout) ** weight


def trajectory_density_matrix(
    circuit: LayeredCircuit, input: Statevector, model: NoiseModel, trajectories: int, seed=None
) -> DensityMatrix:
    """Trajectory average of the output projectors."""
    dim = 1 << circuit.n_qubits
    rho = np.zeros((dim, dim), dtype=complex)
    for psi, mult in trajectory_states(circuit, input, model, trajectories, seed):
        rho += mult * np.outer(psi, psi.conj())
    return DensityMatrix(rho / trajectories)
