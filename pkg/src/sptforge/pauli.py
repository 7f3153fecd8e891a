"""Signed Pauli strings with phase-tracked multiplication."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

_LETTERS = "IXYZ"

# single-site products: (a, b) -> (phase, a*b)
_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}

SINGLE_QUBIT = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    """``coefficient * P_0 P_1 ... P_{n-1}`` where ``letters[q]`` acts on qubit ``q``."""

    letters: str
    coefficient: complex = 1.0

    def __post_init__(self):
        if any(c not in _LETTERS for c in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")

    @classmethod
    def from_sites(cls, n_qubits: int, ops: Mapping[int, str], coefficient: complex = 1.0) -> PauliString:
        chars = ["I"] * n_qubits
        for q, c in ops.items():
            if not 0 <= q < n_qubits:
                raise IndexError(f"site {q} outside 0..{n_qubits - 1}")
            chars[q] = c
        return cls("".join(chars), coefficient)

    @classmethod
    def identity(cls, n_qubits: int) -> PauliString:
        return cls("I" * n_qubits)

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, c in enumerate(self.letters) if c != "I")

    def __mul__(self, other):
        if isinstance(other, PauliString):
            if other.n_qubits != self.n_qubits:
                raise ValueError("Pauli strings act on different numbers of qubits")
            phase = complex(self.coefficient * other.coefficient)
            out = []
            for a, b in zip(self.letters, other.letters):
                p, c = _PRODUCT[(a, b)]
                phase *= p
                out.append(c)
            return PauliString("".join(out), phase)
        if np.isscalar(other):
            return PauliString(self.letters, self.coefficient * other)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return PauliString(self.letters, other * self.coefficient)
        return NotImplemented

    def __neg__(self):
        return PauliString(self.letters, -self.coefficient)

    def commutes_with(self, other: PauliString) -> bool:
        anti = sum(
            1 for a, b in zip(self.letters, other.letters) if a != "I" and b != "I" and a != b
        )
        return anti % 2 == 0

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return abs(complex(self.coefficient).imag) <= tol

    def masks(self) -> tuple[int, int, complex]:
        """Return ``(xmask, zmask, phase)`` with ``self == phase * X^x Z^z``."""
        x = z = 0
        ny = 0
        for q, c in enumerate(self.letters):
            if c in "XY":
                x |= 1 << q
            if c in "ZY":
                z |= 1 << q
            if c == "Y":
                ny += 1
        return x, z, complex(self.coefficient) * (1j ** ny)

    def dense(self) -> np.ndarray:
        x, z, phase = self.masks()
        dim = 1 << self.n_qubits
        idx = np.arange(dim, dtype=np.uint64)
        sign = 1.0 - 2.0 * (np.bitwise_count(idx & np.uint64(z)) & 1)
        mat = np.zeros((dim, dim), dtype=complex)
        mat[(idx ^ np.uint64(x)).astype(np.intp), idx.astype(np.intp)] = phase * sign
        return mat

    def __str__(self):
        return f"{complex(self.coefficient):+g}*{self.letters}"


def product_of(strings) -> PauliString:
    strings = list(strings)
    out = strings[0]
    for s in strings[1:]:
        out = out * s
    return out
