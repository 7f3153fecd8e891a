"""Ising-cluster chain with open boundaries and its exact-diagonalization oracle.

    H = -J sum_i Z_i Z_{i+1} - h sum_i X_i - g sum_i Z_{i-1} X_i Z_{i+1}
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pauli import PauliString
from .qstate import GateOp, Statevector, unitary_gate

MAX_DENSE_QUBITS = 12


@dataclass(frozen=True)
class IsingClusterParams:
    J: float
    h: float
    g: float
    L: int

    def __post_init__(self):
        if self.L < 3:
            raise ValueError(f"chain length L={self.L} < 3; the cluster term needs three sites")

    def normalized(self) -> tuple[float, float, float]:
        s = self.J + self.h + self.g
        if s <= 0:
            raise ValueError("J + h + g must be positive to normalize")
        return self.J / s, self.h / s, self.g / s


@dataclass
class HamiltonianOperator:
    terms: list[PauliString]
    _dense: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_qubits(self) -> int:
        return self.terms[0].n_qubits

    def dense(self) -> np.ndarray:
        if self._dense is None:
            if self.n_qubits > MAX_DENSE_QUBITS:
                raise MemoryError(f"dense form of {self.n_qubits} qubits exceeds the {MAX_DENSE_QUBITS}-qubit cap")
            dim = 1 << self.n_qubits
            mat = np.zeros((dim, dim), dtype=complex)
            for t in self.terms:
                mat += t.dense()
            herm = np.max(np.abs(mat - mat.conj().T)) if dim else 0.0
            if herm > 1e-12:
                raise ValueError(f"Hamiltonian is not Hermitian (deviation {herm:.2e})")
            self._dense = mat
        return self._dense

    def expectation(self, state: Statevector) -> float:
        a = state.amplitudes
        return float(np.real(np.vdot(a, self.dense() @ a)))


def build_hamiltonian(p: IsingClusterParams) -> HamiltonianOperator:
    L = p.L
    terms = []
    for i in range(L - 1):
        terms.append(PauliString.from_sites(L, {i: "Z", i + 1: "Z"}, -p.J))
    for i in range(L):
        terms.append(PauliString.from_sites(L, {i: "X"}, -p.h))
    for i in range(1, L - 1):
        terms.append(PauliString.from_sites(L, {i - 1: "Z", i: "X", i + 1: "Z"}, -p.g))
    return HamiltonianOperator(terms)


def as_dense(H) -> np.ndarray:
    """Dense matrix of a :class:`HamiltonianOperator` or an array-like."""
    if isinstance(H, HamiltonianOperator):
        return H.dense()
    mat = np.asarray(H, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("Hamiltonian must be a square matrix")
    if mat.shape[0] > 1 << MAX_DENSE_QUBITS:
        raise MemoryError("dimension too large for dense diagonalization")
    return mat


@dataclass
class GroundSpace:
    energy: float
    states: list[Statevector]
    gap: float

    @property
    def degeneracy(self) -> int:
        return len(self.states)

    def projection_fidelity(self, state: Statevector) -> float:
        """Norm of the projection of ``state`` onto this space."""
        return float(np.sqrt(sum(abs(s.inner(state)) ** 2 for s in self.states)))

    def average(self, op: np.ndarray) -> float:
        """Ground-space average Tr(P_0 O) / dim, independent of the chosen basis."""
        vals = [np.vdot(s.amplitudes, op @ s.amplitudes).real for s in self.states]
        return float(np.mean(vals))


def spectrum(H) -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(as_dense(H))


def exact_ground_state(H, degeneracy_tol: float = 1e-8) -> GroundSpace:
    """Lowest eigenvalue and an orthonormal basis of every eigenvector within tolerance."""
    w, v = spectrum(H)
    e0 = float(w[0])
    sel = np.nonzero(w <= e0 + degeneracy_tol)[0]
    above = w[w > e0 + degeneracy_tol]
    gap = float(above[0] - e0) if above.size else 0.0
    return GroundSpace(e0, [Statevector(v[:, i]) for i in sel], gap)


def symmetry_operators(L: int) -> dict[str, PauliString]:
    if L < 1:
        raise ValueError("L must be positive")
    odd = PauliString.from_sites(L, {n: "X" for n in range(1, L, 2)})
    even = PauliString.from_sites(L, {n: "X" for n in range(0, L, 2)})
    return {"P_odd": odd, "P_even": even, "P": odd * even}


def sector_projector(L: int, parity: int) -> np.ndarray:
    """Projector onto the global spin-flip sector with eigenvalue ``parity``."""
    P = symmetry_operators(L)["P"].dense()
    return 0.5 * (np.eye(1 << L) + parity * P)


def sector_ground_state(H, parity: int) -> tuple[float, Statevector]:
    """Lowest eigenpair of ``H`` restricted to a global spin-flip sector."""
    mat = as_dense(H)
    L = mat.shape[0].bit_length() - 1
    proj = sector_projector(L, parity)
    w, v = np.linalg.eigh(proj @ mat @ proj + 1e6 * (np.eye(1 << L) - proj))
    return float(w[0]), Statevector(v[:, 0])


def symmetry_broken_representative(space: GroundSpace, site: int = 0) -> Statevector:
    """State in ``space`` maximizing <Z_site>; an explicit choice for degenerate doublets."""
    L = space.states[0].n_qubits
    zop = PauliString.from_sites(L, {site: "Z"}).dense()
    basis = np.stack([s.amplitudes for s in space.states], axis=1)
    proj = basis.conj().T @ zop @ basis
    w, c = np.linalg.eigh(0.5 * (proj + proj.conj().T))
    vec = basis @ c[:, -1]
    # fix global phase on the largest component for reproducibility
    k = int(np.argmax(np.abs(vec)))
    vec = vec * np.exp(-1j * np.angle(vec[k]))
    return Statevector(vec / np.linalg.norm(vec))


def quench_propagator(H, t: float) -> GateOp:
    """exp(-i t H) as a generic-unitary gate over the whole register."""
    mat = as_dense(H)
    w, v = np.linalg.eigh(mat)
    u = (v * np.exp(-1j * t * w)) @ v.conj().T
    n = mat.shape[0].bit_length() - 1
    return unitary_gate(u, list(range(n)))


def cluster_closed_form_l4() -> Statevector:
    """1/2 (|0000> + |0100> + |0010> - |0110>), bitstrings written qubit 0 first."""
    amps = np.zeros(16, dtype=complex)
    for bits, c in (("0000", 1), ("0100", 1), ("0010", 1), ("0110", -1)):
        amps[sum(1 << j for j, b in enumerate(bits) if b == "1")] = c / 2
    return Statevector(amps)
