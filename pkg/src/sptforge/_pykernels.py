"""Pure numpy implementations of the statevector kernels.

Same contract as the compiled module: in-place updates on a contiguous
complex128 array, qubit ``q`` stored in bit ``q`` of the index.
"""

import numpy as np


def apply_1q(psi, m, q):
    v = psi.reshape(-1, 2, 1 << q)
    a = v[:, 0, :].copy()
    b = v[:, 1, :].copy()
    v[:, 0, :] = m[0, 0] * a + m[0, 1] * b
    v[:, 1, :] = m[1, 0] * a + m[1, 1] * b


def _split_2q(psi, q0, q1):
    lo, hi = min(q0, q1), max(q0, q1)
    v = psi.reshape(-1, 2, 1 << (hi - lo - 1), 2, 1 << lo)
    # axis 1 holds bit hi, axis 3 holds bit lo
    def sl(b0, b1):
        bits = {q0: b0, q1: b1}
        return v[:, bits[hi], :, bits[lo], :]
    return sl


def apply_2q(psi, m, q0, q1):
    sl = _split_2q(psi, q0, q1)
    a = [sl(k & 1, k >> 1).copy() for k in range(4)]
    for r in range(4):
        sl(r & 1, r >> 1)[...] = m[r, 0] * a[0] + m[r, 1] * a[1] + m[r, 2] * a[2] + m[r, 3] * a[3]


def outer_1q(lam, phi, q):
    vl = lam.reshape(-1, 2, 1 << q)
    vp = phi.reshape(-1, 2, 1 << q)
    return np.einsum("iaj,ibj->ab", vl.conj(), vp)


def _parity(idx, zmask):
    return np.bitwise_count(idx & np.uint64(zmask)) & 1


def pauli_expectation(psi, xmask, zmask, phase):
    idx = np.arange(psi.shape[0], dtype=np.uint64)
    sign = 1.0 - 2.0 * _parity(idx, zmask)
    flipped = (idx ^ np.uint64(xmask)).astype(np.intp)
    return phase * np.sum(psi[flipped].conj() * psi * sign)


def apply_pauli(psi, xmask, zmask, phase):
    idx = np.arange(psi.shape[0], dtype=np.uint64)
    sign = 1.0 - 2.0 * _parity(idx, zmask)
    flipped = (idx ^ np.uint64(xmask)).astype(np.intp)
    out = np.empty_like(psi)
    out[flipped] = phase * sign * psi
    psi[:] = out


def run_program(psi, prog, m1, m2):
    for kind, q0, q1, k in prog:
        if kind == 1:
            apply_1q(psi, m1[k], q0)
        else:
            apply_2q(psi, m2[k], q0, q1)


def adjoint_program(psi, lam, prog, m1, m2, rs):
    for kind, q0, q1, k in prog[::-1]:
        if kind == 1:
            dag = m1[k].conj().T
            apply_1q(psi, dag, q0)
            rs[k] = outer_1q(lam, psi, q0)
            apply_1q(lam, dag, q0)
        else:
            dag = m2[k].conj().T
            apply_2q(psi, dag, q0, q1)
            apply_2q(lam, dag, q0, q1)
