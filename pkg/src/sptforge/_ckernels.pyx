# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled statevector kernels.

All kernels operate in place on a contiguous complex128 amplitude array whose
index encodes qubit ``q`` in bit ``q`` (qubit 0 least significant).

A *program* is an int64 array of rows ``(kind, q0, q1, midx)``: kind 1 applies
the 2x2 matrix ``m1[midx]`` to ``q0``; kind 2 applies the 4x4 matrix
``m2[midx]`` to ``(q0, q1)`` with local index ``bit(q0) + 2*bit(q1)``.
"""
import numpy as np

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline void _a1(double complex* psi, Py_ssize_t n, double complex m00, double complex m01,
                     double complex m10, double complex m11, Py_ssize_t q) noexcept nogil:
    cdef Py_ssize_t stride = 1 << q
    cdef Py_ssize_t low = stride - 1
    cdef Py_ssize_t i, i0, i1
    cdef double complex a, b
    for i in range(n >> 1):
        i0 = ((i >> q) << (q + 1)) | (i & low)
        i1 = i0 | stride
        a = psi[i0]
        b = psi[i1]
        psi[i0] = m00 * a + m01 * b
        psi[i1] = m10 * a + m11 * b


cdef inline void _a2(double complex* psi, Py_ssize_t n, const double complex* m,
                     Py_ssize_t q0, Py_ssize_t q1) noexcept nogil:
    # m is row-major 4x4
    cdef Py_ssize_t lo = q0 if q0 < q1 else q1
    cdef Py_ssize_t hi = q1 if q0 < q1 else q0
    cdef Py_ssize_t s0 = 1 << q0
    cdef Py_ssize_t s1 = 1 << q1
    cdef Py_ssize_t lomask = (1 << lo) - 1
    cdef Py_ssize_t himask = (1 << hi) - 1
    cdef Py_ssize_t i, base, t, k, r
    cdef Py_ssize_t idx[4]
    cdef double complex a[4]
    for i in range(n >> 2):
        t = ((i >> lo) << (lo + 1)) | (i & lomask)
        base = ((t >> hi) << (hi + 1)) | (t & himask)
        idx[0] = base
        idx[1] = base | s0
        idx[2] = base | s1
        idx[3] = base | s0 | s1
        for k in range(4):
            a[k] = psi[idx[k]]
        for r in range(4):
            psi[idx[r]] = m[4 * r] * a[0] + m[4 * r + 1] * a[1] + m[4 * r + 2] * a[2] + m[4 * r + 3] * a[3]


cdef inline void _outer(const double complex* lam, const double complex* phi, Py_ssize_t n,
                        Py_ssize_t q, double complex* out) noexcept nogil:
    cdef Py_ssize_t stride = 1 << q
    cdef Py_ssize_t low = stride - 1
    cdef Py_ssize_t i, i0, i1
    cdef double complex l0, l1, p0, p1
    cdef double complex r00 = 0, r01 = 0, r10 = 0, r11 = 0
    for i in range(n >> 1):
        i0 = ((i >> q) << (q + 1)) | (i & low)
        i1 = i0 | stride
        l0 = lam[i0].conjugate()
        l1 = lam[i1].conjugate()
        p0 = phi[i0]
        p1 = phi[i1]
        r00 = r00 + l0 * p0
        r01 = r01 + l0 * p1
        r10 = r10 + l1 * p0
        r11 = r11 + l1 * p1
    out[0] = r00
    out[1] = r01
    out[2] = r10
    out[3] = r11


def apply_1q(double complex[::1] psi, double complex[:, ::1] m, Py_ssize_t q):
    with nogil:
        _a1(&psi[0], psi.shape[0], m[0, 0], m[0, 1], m[1, 0], m[1, 1], q)


def apply_2q(double complex[::1] psi, double complex[:, ::1] m, Py_ssize_t q0, Py_ssize_t q1):
    """Local index of the 4x4 matrix is bit(q0) + 2*bit(q1)."""
    with nogil:
        _a2(&psi[0], psi.shape[0], &m[0, 0], q0, q1)


def outer_1q(double complex[::1] lam, double complex[::1] phi, Py_ssize_t q):
    """R[a, b] = sum over the other qubits of conj(lam[a, rest]) * phi[b, rest]."""
    out = np.empty((2, 2), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    with nogil:
        _outer(&lam[0], &phi[0], phi.shape[0], q, &o[0, 0])
    return out


def run_program(double complex[::1] psi, long long[:, ::1] prog,
                double complex[:, :, ::1] m1, double complex[:, :, ::1] m2):
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t g, k
    with nogil:
        for g in range(prog.shape[0]):
            k = prog[g, 3]
            if prog[g, 0] == 1:
                _a1(&psi[0], n, m1[k, 0, 0], m1[k, 0, 1], m1[k, 1, 0], m1[k, 1, 1], prog[g, 1])
            else:
                _a2(&psi[0], n, &m2[k, 0, 0], prog[g, 1], prog[g, 2])


def adjoint_program(double complex[::1] psi, double complex[::1] lam, long long[:, ::1] prog,
                    double complex[:, :, ::1] m1, double complex[:, :, ::1] m2,
                    double complex[:, :, ::1] rs):
    """Reverse sweep for <lam| program |psi_in> given ``psi`` = program |psi_in>.

    For every 1-qubit row the 2x2 environment ``rs[midx]`` is written so that
    the derivative of the overlap with respect to that matrix is
    ``sum(dM * rs[midx])``. Both vectors are consumed.
    """
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t g, k, r, c
    cdef double complex d00, d01, d10, d11
    cdef double complex dag[16]
    with nogil:
        for g in range(prog.shape[0] - 1, -1, -1):
            k = prog[g, 3]
            if prog[g, 0] == 1:
                d00 = m1[k, 0, 0].conjugate()
                d01 = m1[k, 1, 0].conjugate()
                d10 = m1[k, 0, 1].conjugate()
                d11 = m1[k, 1, 1].conjugate()
                _a1(&psi[0], n, d00, d01, d10, d11, prog[g, 1])
                _outer(&lam[0], &psi[0], n, prog[g, 1], &rs[k, 0, 0])
                _a1(&lam[0], n, d00, d01, d10, d11, prog[g, 1])
            else:
                for r in range(4):
                    for c in range(4):
                        dag[4 * r + c] = m2[k, c, r].conjugate()
                _a2(&psi[0], n, dag, prog[g, 1], prog[g, 2])
                _a2(&lam[0], n, dag, prog[g, 1], prog[g, 2])


def pauli_expectation(double complex[::1] psi, unsigned long long xmask,
                      unsigned long long zmask, double complex phase):
    """<psi| phase * X^x Z^z |psi> without building the operator."""
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t b
    cdef double complex acc = 0
    cdef double complex term
    with nogil:
        for b in range(n):
            term = psi[b ^ xmask].conjugate() * psi[b]
            if __builtin_popcountll(b & zmask) & 1:
                acc = acc - term
            else:
                acc = acc + term
    return phase * acc


def apply_pauli(double complex[::1] psi, unsigned long long xmask,
                unsigned long long zmask, double complex phase):
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t b, c
    cdef double complex u, v
    cdef double su, sv
    with nogil:
        if xmask == 0:
            for b in range(n):
                if __builtin_popcountll(b & zmask) & 1:
                    psi[b] = -phase * psi[b]
                else:
                    psi[b] = phase * psi[b]
        else:
            for b in range(n):
                c = b ^ xmask
                if c < b:
                    continue
                u = psi[b]
                v = psi[c]
                su = -1.0 if __builtin_popcountll(b & zmask) & 1 else 1.0
                sv = -1.0 if __builtin_popcountll(c & zmask) & 1 else 1.0
                psi[c] = phase * su * u
                psi[b] = phase * sv * v
