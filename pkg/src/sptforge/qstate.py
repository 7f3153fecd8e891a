"""Dense statevector / density-matrix core.

Bit convention: qubit 0 is the least-significant bit of a basis index. Every
bitstring crossing the I/O boundary is written left to right as
qubit 0 ... qubit n-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .pauli import PauliString

UNITARY_TOL = 1e-10


class PostselectionError(RuntimeError):
    """Raised when a postselected branch has (numerically) zero probability."""


class Statevector:
    """Complex amplitude vector over ``n_qubits`` qubits."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, amplitudes, n_qubits: int | None = None):
        amps = np.ascontiguousarray(amplitudes, dtype=np.complex128).ravel()
        dim = amps.shape[0]
        n = dim.bit_length() - 1
        if dim == 0 or (1 << n) != dim:
            raise ValueError(f"amplitude length {dim} is not a power of two")
        if n_qubits is not None and n_qubits != n:
            raise ValueError(f"expected 2**{n_qubits} amplitudes, got {dim}")
        self.n_qubits = n
        self.amplitudes = amps

    @classmethod
    def zero(cls, n_qubits: int) -> Statevector:
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps)

    @classmethod
    def from_bitstring(cls, bits: str) -> Statevector:
        """Product state with ``bits[q]`` in ``{0, 1, +, -}`` on qubit ``q``."""
        single = {
            "0": np.array([1, 0], dtype=complex),
            "1": np.array([0, 1], dtype=complex),
            "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
            "-": np.array([1, -1], dtype=complex) / math.sqrt(2),
        }
        amps = np.ones(1, dtype=complex)
        for c in bits:
            if c not in single:
                raise ValueError(f"invalid product-state symbol {c!r}")
            # later qubits are more significant
            amps = np.kron(single[c], amps)
        return cls(amps)

    @classmethod
    def plus(cls, n_qubits: int) -> Statevector:
        return cls.from_bitstring("+" * n_qubits)

    def copy(self) -> Statevector:
        return Statevector(self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> Statevector:
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return Statevector(self.amplitudes / nrm)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def inner(self, other: Statevector) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor(self, other: Statevector) -> Statevector:
        """``self`` on the low qubits, ``other`` on the qubits above them."""
        return Statevector(np.kron(other.amplitudes, self.amplitudes))

    def __repr__(self):
        return f"Statevector(n_qubits={self.n_qubits})"


@dataclass
class DensityMatrix:
    elements: np.ndarray
    n_qubits: int = field(init=False)

    def __post_init__(self):
        self.elements = np.asarray(self.elements, dtype=np.complex128)
        dim = self.elements.shape[0]
        if self.elements.shape != (dim, dim) or dim & (dim - 1):
            raise ValueError("density matrix must be square with power-of-two dimension")
        self.n_qubits = dim.bit_length() - 1

    @classmethod
    def from_statevector(cls, state: Statevector) -> DensityMatrix:
        a = state.amplitudes
        return cls(np.outer(a, a.conj()))

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> DensityMatrix:
        dim = 1 << n_qubits
        return cls(np.eye(dim, dtype=complex) / dim)

    def trace(self) -> complex:
        return complex(np.trace(self.elements))

    def eigenvalues(self) -> np.ndarray:
        """Real eigenvalues in descending order."""
        herm = 0.5 * (self.elements + self.elements.conj().T)
        return np.linalg.eigvalsh(herm)[::-1]

    def purity(self) -> float:
        return float(np.real(np.vdot(self.elements.conj().T, self.elements)))

    def expectation(self, obs: PauliString) -> float:
        return float(np.real(np.trace(self.elements @ obs.dense())))

    def check(self, tol: float = 1e-10) -> None:
        """Raise ``ValueError`` if the Hermitian / unit-trace / PSD invariants fail."""
        herm_err = np.max(np.abs(self.elements - self.elements.conj().T))
        if herm_err > tol:
            raise ValueError(f"not Hermitian (max deviation {herm_err:.2e})")
        if abs(self.trace() - 1) > tol:
            raise ValueError(f"trace {self.trace():.12f} != 1")
        lo = self.eigenvalues()[-1]
        if lo < -tol:
            raise ValueError(f"negative eigenvalue {lo:.2e}")


# ---------------------------------------------------------------- gates

ECR_MATRIX = np.array(
    [[0, 1, 0, 1j], [1, 0, -1j, 0], [0, 1j, 0, 1], [-1j, 0, 1, 0]], dtype=np.complex128
) / math.sqrt(2)

X_MATRIX = np.array([[0, 1], [1, 0]], dtype=np.complex128)

SWAP_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=np.complex128,
    )


def u3_derivatives(theta: float, phi: float, lam: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partial derivatives of :func:`u3_matrix` with respect to (theta, phi, lam)."""
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    ep = np.exp(1j * phi)
    el = np.exp(1j * lam)
    epl = ep * el
    d_theta = 0.5 * np.array([[-s, -el * c], [ep * c, -epl * s]], dtype=np.complex128)
    d_phi = np.array([[0, 0], [1j * ep * s, 1j * epl * c]], dtype=np.complex128)
    d_lam = np.array([[0, -1j * el * s], [0, 1j * epl * c]], dtype=np.complex128)
    return d_theta, d_phi, d_lam


def cswap_matrix() -> np.ndarray:
    """Local ordering (control, a, b): swap a and b when the control bit is set."""
    m = np.eye(8, dtype=np.complex128)
    # control=1 (bit 0): |c=1,a=1,b=0> = 3 <-> |c=1,a=0,b=1> = 5
    m[[3, 5]] = m[[5, 3]]
    return m


@dataclass(frozen=True)
class GateOp:
    kind: str
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()
    unitary: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def matrix(self) -> np.ndarray:
        if self.kind == "U3":
            return u3_matrix(*self.params)
        if self.kind == "ECR":
            return ECR_MATRIX
        if self.kind == "X":
            return X_MATRIX
        if self.kind == "SWAP":
            return SWAP_MATRIX
        if self.kind == "CSWAP":
            return cswap_matrix()
        if self.kind == "UNITARY":
            return self.unitary
        raise ValueError(f"unknown gate kind {self.kind!r}")

    def dagger(self) -> GateOp:
        if self.kind in ("ECR", "X", "SWAP", "CSWAP"):
            return self
        return GateOp("UNITARY", self.targets, (), np.ascontiguousarray(self.matrix.conj().T))


def u3(theta: float, phi: float, lam: float, qubit: int) -> GateOp:
    return GateOp("U3", (qubit,), (float(theta), float(phi), float(lam)))


def ecr(q0: int, q1: int) -> GateOp:
    return GateOp("ECR", (q0, q1))


def xgate(qubit: int) -> GateOp:
    return GateOp("X", (qubit,))


def hadamard(qubit: int) -> GateOp:
    return u3(math.pi / 2, 0.0, math.pi, qubit)


def swap(a: int, b: int) -> GateOp:
    return GateOp("SWAP", (a, b))


def cswap(control: int, a: int, b: int) -> GateOp:
    return GateOp("CSWAP", (control, a, b))


def unitary_gate(matrix, targets: Sequence[int], check: bool = True) -> GateOp:
    mat = np.ascontiguousarray(matrix, dtype=np.complex128)
    k = len(targets)
    if mat.shape != (1 << k, 1 << k):
        raise ValueError(f"matrix shape {mat.shape} does not match {k} targets")
    if check:
        err = np.max(np.abs(mat.conj().T @ mat - np.eye(1 << k)))
        if err > UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (max deviation {err:.2e})")
    return GateOp("UNITARY", tuple(int(t) for t in targets), (), mat)


def basis_rotations(basis: str, qubits: Sequence[int] | None = None) -> list[GateOp]:
    """Gates mapping an X/Y/Z measurement on each qubit to a Z measurement."""
    qubits = range(len(basis)) if qubits is None else qubits
    ops = []
    for c, q in zip(basis, qubits):
        if c == "X":
            ops.append(u3(math.pi / 2, 0.0, math.pi, q))
        elif c == "Y":
            ops.append(u3(math.pi / 2, 0.0, math.pi / 2, q))
        elif c not in "ZI":
            raise ValueError(f"invalid basis letter {c!r}")
    return ops


def _apply_matrix(psi: np.ndarray, mat: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    k = len(targets)
    if k == 1:
        kernels.apply_1q(psi, mat, targets[0])
        return psi
    if k == 2:
        kernels.apply_2q(psi, mat, targets[0], targets[1])
        return psi
    if tuple(targets) == tuple(range(n)):
        psi[:] = mat @ psi
        return psi
    t = psi.reshape([2] * n)
    # tensor axis a holds qubit n-1-a; gate row axis j holds target k-1-j
    psi_axes = [n - 1 - targets[k - 1 - j] for j in range(k)]
    g = mat.reshape([2] * (2 * k))
    out = np.tensordot(g, t, axes=(list(range(k, 2 * k)), psi_axes))
    out = np.moveaxis(out, list(range(k)), psi_axes)
    psi[:] = out.reshape(-1)
    return psi


def _check_targets(gate: GateOp, n: int) -> None:
    if len(set(gate.targets)) != len(gate.targets):
        raise ValueError(f"repeated target qubits {gate.targets}")
    for t in gate.targets:
        if not 0 <= t < n:
            raise IndexError(f"target qubit {t} outside 0..{n - 1}")


def apply_gate_inplace(amplitudes: np.ndarray, gate: GateOp, n_qubits: int) -> np.ndarray:
    if gate.kind == "X":
        kernels.apply_pauli(amplitudes, 1 << gate.targets[0], 0, 1.0)
        return amplitudes
    return _apply_matrix(amplitudes, gate.matrix, gate.targets, n_qubits)


def apply_gate(state: Statevector, gate: GateOp) -> Statevector:
    _check_targets(gate, state.n_qubits)
    out = state.amplitudes.copy()
    apply_gate_inplace(out, gate, state.n_qubits)
    return Statevector(out)


def apply_gates(state: Statevector, gates: Sequence[GateOp]) -> Statevector:
    out = state.amplitudes.copy()
    for g in gates:
        _check_targets(g, state.n_qubits)
        apply_gate_inplace(out, g, state.n_qubits)
    return Statevector(out)


# ---------------------------------------------------------- measurements


def expectation(state: Statevector, obs: PauliString) -> float:
    if obs.n_qubits != state.n_qubits:
        raise ValueError(f"observable on {obs.n_qubits} qubits, state has {state.n_qubits}")
    if not obs.is_hermitian():
        raise ValueError(f"observable {obs} is not Hermitian")
    x, z, phase = obs.masks()
    return float(np.real(kernels.pauli_expectation(state.amplitudes, x, z, phase)))


def reduced_density(state: Statevector, keep: Sequence[int]) -> DensityMatrix:
    """Trace out everything except ``keep``; result qubit ``j`` is ``keep[j]``."""
    keep = list(keep)
    n = state.n_qubits
    if not keep:
        raise ValueError("keep set must be nonempty")
    if len(set(keep)) != len(keep) or any(not 0 <= q < n for q in keep):
        raise ValueError(f"invalid keep set {keep} for {n} qubits")
    k = len(keep)
    t = state.amplitudes.reshape([2] * n)
    front = [n - 1 - keep[j] for j in reversed(range(k))]
    rest = [a for a in range(n) if a not in front]
    m = t.transpose(front + rest).reshape(1 << k, -1)
    return DensityMatrix(m @ m.conj().T)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced density matrix of a mixed state; result qubit ``j`` is ``keep[j]``."""
    keep = list(keep)
    n = rho.n_qubits
    if not keep or len(set(keep)) != len(keep) or any(not 0 <= q < n for q in keep):
        raise ValueError(f"invalid keep set {keep} for {n} qubits")
    k = len(keep)
    t = rho.elements.reshape([2] * (2 * n))
    front = [n - 1 - keep[j] for j in reversed(range(k))]
    rest = [a for a in range(n) if a not in front]
    t = t.transpose(front + rest + [n + a for a in front] + [n + a for a in rest])
    t = t.reshape(1 << k, 1 << (n - k), 1 << k, 1 << (n - k))
    return DensityMatrix(np.einsum("arbr->ab", t))


def marginal_probabilities(probs: np.ndarray, n_qubits: int, qubits: Sequence[int]) -> np.ndarray:
    """Distribution over ``qubits``; outcome index bit ``j`` is qubit ``qubits[j]``."""
    qubits = list(qubits)
    if qubits == list(range(n_qubits)):
        return probs
    t = probs.reshape([2] * n_qubits)
    front = [n_qubits - 1 - qubits[j] for j in reversed(range(len(qubits)))]
    rest = tuple(a for a in range(n_qubits) if a not in front)
    return t.transpose(front + list(rest)).reshape(1 << len(qubits), -1).sum(axis=1)


def index_to_bitstring(index: int, width: int) -> str:
    return "".join("1" if (index >> j) & 1 else "0" for j in range(width))


def bitstring_to_index(bits: str) -> int:
    return sum(1 << j for j, c in enumerate(bits) if c == "1")


@dataclass
class MeasurementRecord:
    """Shot counts; bitstring character ``j`` is the outcome of ``qubits[j]``."""

    basis: str
    qubits: tuple[int, ...]
    shots: int
    counts: dict[str, int]
    seed: int | None = None

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to shots")

    def probabilities(self) -> np.ndarray:
        width = len(self.qubits)
        p = np.zeros(1 << width)
        for bits, c in self.counts.items():
            p[bitstring_to_index(bits)] += c
        return p / self.shots

    def parity_expectation(self, positions: Sequence[int]) -> tuple[float, float]:
        """Mean and standard error of ``(-1)^(sum of bits at positions)``."""
        total = 0
        for bits, c in self.counts.items():
            par = sum(bits[j] == "1" for j in positions) & 1
            total += -c if par else c
        mean = total / self.shots
        stderr = math.sqrt(max(1.0 - mean * mean, 0.0) / self.shots)
        return mean, stderr

    def to_json(self) -> dict:
        return {
            "basis": self.basis,
            "qubits": list(self.qubits),
            "shots": self.shots,
            "seed": self.seed,
            "counts": dict(sorted(self.counts.items())),
        }


def counts_from_probabilities(probs: np.ndarray, shots: int, rng: np.random.Generator, width: int) -> dict[str, int]:
    p = np.clip(np.real(probs), 0.0, None)
    p = p / p.sum()
    draws = rng.multinomial(shots, p)
    return {index_to_bitstring(i, width): int(c) for i, c in enumerate(draws) if c}


def sample(
    state: Statevector,
    rotations: Sequence[GateOp],
    shots: int,
    seed: int | None,
    qubits: Sequence[int] | None = None,
    basis: str | None = None,
) -> MeasurementRecord:
    """Draw ``shots`` outcomes after applying ``rotations``; deterministic given ``seed``."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    rotated = apply_gates(state, rotations)
    qubits = tuple(range(state.n_qubits)) if qubits is None else tuple(qubits)
    probs = marginal_probabilities(rotated.probabilities(), state.n_qubits, qubits)
    rng = np.random.default_rng(seed)
    counts = counts_from_probabilities(probs, shots, rng, len(qubits))
    return MeasurementRecord(basis or "Z" * len(qubits), qubits, shots, counts, seed)


def postselect(
    state: Statevector, qubit: int, outcome: int, drop: bool = False, min_probability: float = 1e-14
) -> tuple[Statevector, float]:
    """Project ``qubit`` onto ``outcome`` and renormalize.

    With ``drop=True`` the measured qubit is removed from the register.
    """
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} outside 0..{n - 1}")
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    v = state.amplitudes.reshape(-1, 2, 1 << qubit)
    branch = v[:, outcome, :]
    prob = float(np.sum(np.abs(branch) ** 2))
    if prob <= min_probability:
        raise PostselectionError(f"outcome {outcome} on qubit {qubit} has probability {prob:.3e}")
    if drop:
        return Statevector(branch.reshape(-1) / math.sqrt(prob)), prob
    out = np.zeros_like(v)
    out[:, outcome, :] = branch / math.sqrt(prob)
    return Statevector(out.reshape(-1)), prob


def fidelity(a: Statevector, b: Statevector) -> float:
    """``|<a|b>|`` (not squared)."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("dimension mismatch")
    return abs(np.vdot(a.amplitudes, b.amplitudes))
