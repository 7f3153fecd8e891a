"""Unitary dilation of the imaginary-time propagator and ancilla-postselected QITE.

The L-qubit contraction u*exp(-beta H) is placed in the ancilla-0 block of an
(L+1)-qubit unitary. The ancilla is the most significant qubit (index L), so
the top-left 2^L block of the matrix is the ancilla-0 -> ancilla-0 block.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import GroundSpace, as_dense, exact_ground_state
from .qstate import PostselectionError, Statevector, postselect, unitary_gate


class DilationError(ValueError):
    pass


class DegenerateGroundStateError(ValueError):
    """No unique target: the caller must name a sector or subspace explicitly."""


@dataclass(frozen=True)
class DilatedUnitary:
    beta: float
    u: float
    matrix: np.ndarray
    ancilla_index: int
    # blocks of the assembled pre-QR matrix [[uU, I], [C, I]]
    C: np.ndarray
    triangular: np.ndarray
    energy_shift: float = 0.0

    @property
    def n_system(self) -> int:
        return self.ancilla_index

    @property
    def dim(self) -> int:
        return 1 << self.n_system

    @property
    def top_left(self) -> np.ndarray:
        return self.matrix[: self.dim, : self.dim]

    @property
    def blocks(self) -> dict[str, np.ndarray]:
        d = self.dim
        return {
            "uU": self.matrix[:d, :d],
            "B": self.matrix[:d, d:],
            "C": self.matrix[d:, :d],
            "D": self.matrix[d:, d:],
        }

    def gate(self):
        return unitary_gate(self.matrix, list(range(self.ancilla_index + 1)), check=False)


def propagator(H, beta: float, shift: float = 0.0) -> np.ndarray:
    """exp(-beta (H - shift)) from the eigendecomposition of the Hermitian H."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    w, v = np.linalg.eigh(as_dense(H))
    return (v * np.exp(-beta * (w - shift))) @ v.conj().T


def dilate(U_nonunit: np.ndarray, u: float | None = None, beta: float = float("nan")) -> DilatedUnitary:
    """Embed a square matrix as the top-left block of a unitary via SVD + QR.

    ``u`` defaults to ``1 / sigma_max``, the largest scale keeping u*U a contraction.
    """
    U = np.asarray(U_nonunit, dtype=complex)
    d = U.shape[0]
    if U.shape != (d, d):
        raise DilationError("matrix to dilate must be square")
    if d & (d - 1):
        raise DilationError("dimension must be a power of two")
    A, sigma, Bh = np.linalg.svd(U)
    if u is None:
        u = 1.0 / sigma[0]
    scaled = (u * sigma) ** 2
    if np.any(scaled > 1 + 1e-12):
        raise DilationError(f"u^2 sigma^2 reaches {scaled.max():.6g} > 1")
    C = (A * np.sqrt(np.clip(1.0 - scaled, 0.0, None))) @ Bh
    eye = np.eye(d, dtype=complex)
    upp = np.block([[u * U, eye], [C, eye]])
    Q, R = scipy.linalg.qr(upp)
    # positive real diagonal of the triangular factor makes Q unique
    phases = np.diag(R) / np.where(np.abs(np.diag(R)) > 0, np.abs(np.diag(R)), 1.0)
    Q = Q * phases
    R = phases.conj()[:, None] * R
    diag = np.abs(np.diag(R))
    if diag.min() < 1e-12 * diag.max():
        raise DilationError("assembled block matrix is numerically singular")
    n = d.bit_length() - 1
    return DilatedUnitary(float(beta), float(u), Q, n, C, R)


def dilate_propagator(H, beta: float) -> DilatedUnitary:
    """Dilation of exp(-beta H).

    When exp(-beta E) would overflow the spectrum is shifted by the ground
    energy first; ``energy_shift`` records it and the top-left block is then
    u * exp(-beta (H - energy_shift)).
    """
    w = np.linalg.eigvalsh(as_dense(H))
    shift = float(w[0]) if beta * np.max(np.abs(w)) > 600 else 0.0
    dil = dilate(propagator(H, beta, shift), beta=beta)
    return dataclasses.replace(dil, energy_shift=shift)


def apply_dilated(dil: DilatedUnitary, initial: Statevector) -> Statevector:
    """U_imag |psi0>|0_A> on the (L+1)-qubit register."""
    if initial.n_qubits != dil.n_system:
        raise ValueError(f"initial state has {initial.n_qubits} qubits, dilation acts on {dil.n_system}")
    full = initial.tensor(Statevector.zero(1))
    return Statevector(dil.matrix @ full.amplitudes)


def qite_prepare(
    H,
    beta: float,
    initial: Statevector,
    reference: GroundSpace | None | bool = None,
) -> tuple[Statevector, float]:
    """Post[U_imag(beta)|psi0>|0_A>] and its success probability.

    ``reference`` is the target subspace used for the overlap precondition;
    by default the exact ground space of ``H``. Pass ``False`` to skip the check.
    """
    if reference is None:
        reference = exact_ground_state(H)
    if reference is not False and reference.projection_fidelity(initial) < 1e-12:
        raise DilationError("initial state is orthogonal to the target space; imaginary time cannot reach it")
    dil = dilate_propagator(H, beta)
    out = apply_dilated(dil, initial)
    try:
        state, prob = postselect(out, dil.ancilla_index, 0, drop=True)
    except PostselectionError as exc:
        raise DilationError(str(exc)) from exc
    return state, prob


def qite_fidelity(H, beta: float, initial: Statevector, reference: GroundSpace) -> float:
    state, _ = qite_prepare(H, beta, initial, reference)
    return reference.projection_fidelity(state)


def beta_schedule(
    H,
    target_fidelity: float,
    initial: Statevector,
    reference: GroundSpace | None = None,
    beta0: float = 0.125,
    max_beta: float = 256.0,
    degeneracy_tol: float = 1e-8,
) -> float:
    """Smallest beta on the grid beta0 * 2^k whose QITE output reaches the target.

    Without an explicit ``reference`` the exact ground state must be unique.
    """
    if reference is None:
        reference = exact_ground_state(H, degeneracy_tol)
        if reference.degeneracy > 1:
            raise DegenerateGroundStateError(
                f"ground space is {reference.degeneracy}-fold degenerate; pass an explicit reference subspace"
            )
    beta = beta0
    while beta <= max_beta:
        if qite_fidelity(H, beta, initial, reference) >= target_fidelity:
            return beta
        beta *= 2
    raise DilationError(f"target fidelity {target_fidelity} not reached by beta={max_beta}")
