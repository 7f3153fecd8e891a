import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from conftest import random_state, random_unitary
from sptforge.pauli import PauliString
from sptforge.qstate import (
    ECR_MATRIX,
    DensityMatrix,
    PostselectionError,
    Statevector,
    apply_gate,
    apply_gates,
    basis_rotations,
    cswap,
    ecr,
    expectation,
    fidelity,
    hadamard,
    marginal_probabilities,
    partial_trace,
    postselect,
    reduced_density,
    sample,
    swap,
    u3,
    u3_derivatives,
    u3_matrix,
    unitary_gate,
    xgate,
)


def dense_gate(mat, targets, n):
    """Full 2^n matrix of ``mat`` on ``targets`` (local index bit j = targets[j])."""
    dim = 1 << n
    full = np.zeros((dim, dim), dtype=complex)
    k = len(targets)
    for col in range(dim):
        loc = sum(((col >> t) & 1) << j for j, t in enumerate(targets))
        base = col
        for t in targets:
            base &= ~(1 << t)
        for r in range(1 << k):
            row = base | sum(((r >> j) & 1) << t for j, t in enumerate(targets))
            full[row, col] += mat[r, loc]
    return full


def test_bitstring_is_qubit_zero_first():
    s = Statevector.from_bitstring("100")
    assert s.amplitudes[1] == 1
    assert expectation(s, PauliString("ZII")) == -1
    assert expectation(s, PauliString("IZI")) == 1


def test_invalid_amplitude_length():
    with pytest.raises(ValueError):
        Statevector(np.ones(3))


def test_u3_identity_and_hadamard():
    np.testing.assert_allclose(u3_matrix(0, 0, 0), np.eye(2), atol=1e-15)
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    np.testing.assert_allclose(hadamard(0).matrix, h, atol=1e-15)


@given(st.floats(-7, 7), st.floats(-7, 7), st.floats(-7, 7))
def test_u3_derivatives_match_finite_differences(th, ph, la):
    d = u3_derivatives(th, ph, la)
    eps = 1e-6
    for i, (dt, dp, dl) in enumerate([(eps, 0, 0), (0, eps, 0), (0, 0, eps)]):
        fd = (u3_matrix(th + dt, ph + dp, la + dl) - u3_matrix(th - dt, ph - dp, la - dl)) / (2 * eps)
        np.testing.assert_allclose(d[i], fd, atol=1e-8)


@pytest.mark.parametrize(
    "gate",
    [u3(0.3, 1.1, -0.4, 0), ecr(0, 1), xgate(0), hadamard(0), swap(0, 1), cswap(0, 1, 2)],
    ids=lambda g: g.kind,
)
def test_gate_matrices_unitary(gate):
    m = gate.matrix
    assert np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) < 1e-12


def test_ecr_involution(rng):
    assert np.max(np.abs(ECR_MATRIX @ ECR_MATRIX - np.eye(4))) < 1e-15
    s = random_state(rng, 4)
    out = apply_gates(s, [ecr(1, 3), ecr(1, 3)])
    assert np.max(np.abs(out.amplitudes - s.amplitudes)) < 1e-10


@pytest.mark.parametrize("targets", [(0,), (2,), (0, 1), (3, 1), (2, 0), (0, 2, 3), (3, 0, 1), (1, 2, 3, 0)])
def test_kernel_application_matches_dense(rng, targets):
    n = 4
    mat = random_unitary(rng, 1 << len(targets))
    s = random_state(rng, n)
    out = apply_gate(s, unitary_gate(mat, targets))
    np.testing.assert_allclose(out.amplitudes, dense_gate(mat, targets, n) @ s.amplitudes, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 12))
def test_norm_preserved_by_random_circuits(seed, n, depth):
    rng = np.random.default_rng(seed)
    s = random_state(rng, n)
    gates = []
    for _ in range(depth):
        if n > 1 and rng.random() < 0.5:
            a, b = rng.choice(n, 2, replace=False)
            gates.append(ecr(int(a), int(b)))
        else:
            gates.append(u3(*rng.uniform(-np.pi, np.pi, 3), int(rng.integers(n))))
    assert abs(apply_gates(s, gates).norm() - 1) < 1e-9


def test_bad_targets():
    s = Statevector.zero(2)
    with pytest.raises(IndexError):
        apply_gate(s, xgate(2))
    with pytest.raises(ValueError):
        apply_gate(s, ecr(1, 1))
    with pytest.raises(ValueError):
        unitary_gate(np.ones((2, 2)), [0])


def test_expectation_matches_dense(rng):
    s = random_state(rng, 3)
    for label in ("XYZ", "ZIZ", "IYI", "XXX"):
        p = PauliString(label)
        ref = np.vdot(s.amplitudes, p.dense() @ s.amplitudes).real
        assert abs(expectation(s, p) - ref) < 1e-12


def test_expectation_rejects_non_hermitian():
    with pytest.raises(ValueError):
        expectation(Statevector.zero(1), PauliString("Z", 1j))


@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.data())
def test_partial_trace_consistency(seed, n, data):
    rng = np.random.default_rng(seed)
    s = random_state(rng, n)
    keep = data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n, unique=True))
    rho = reduced_density(s, keep)
    assert abs(rho.trace() - 1) < 1e-9
    label = data.draw(st.text(alphabet="IXYZ", min_size=len(keep), max_size=len(keep)))
    full = PauliString.from_sites(n, {q: c for q, c in zip(keep, label) if c != "I"})
    assert abs(rho.expectation(PauliString(label)) - expectation(s, full)) < 1e-9
    mixed = partial_trace(DensityMatrix.from_statevector(s), keep)
    np.testing.assert_allclose(mixed.elements, rho.elements, atol=1e-12)


def test_density_matrix_check():
    DensityMatrix.maximally_mixed(2).check()
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5])).check()
    with pytest.raises(ValueError):
        DensityMatrix(np.ones((3, 3)))


def test_marginal_probabilities_order():
    s = Statevector.from_bitstring("011")
    p = marginal_probabilities(s.probabilities(), 3, [2, 0])
    # outcome bit 0 is qubit 2 (=1), bit 1 is qubit 0 (=0)
    assert p[1] == pytest.approx(1.0)


def test_postselect():
    s = Statevector(np.array([1, 0, 0, 1]) / np.sqrt(2))
    out, p = postselect(s, 1, 1, drop=True)
    assert p == pytest.approx(0.5)
    np.testing.assert_allclose(out.amplitudes, [0, 1])
    kept, _ = postselect(s, 0, 0)
    assert kept.n_qubits == 2
    with pytest.raises(PostselectionError):
        postselect(Statevector.from_bitstring("1"), 0, 0)


def test_sampling_deterministic_and_converges(rng):
    s = random_state(rng, 3)
    rots = basis_rotations("XYZ")
    a = sample(s, rots, 20000, seed=7)
    b = sample(s, rots, 20000, seed=7)
    assert a.counts == b.counts
    probs = apply_gates(s, rots).probabilities()
    observed = a.probabilities() * 20000
    expected = probs * 20000
    mask = expected > 5
    chi2 = np.sum((observed[mask] - expected[mask]) ** 2 / expected[mask])
    assert stats.chi2.sf(chi2, mask.sum() - 1) > 1e-4


def test_parity_expectation():
    s = Statevector.from_bitstring("10")
    rec = sample(s, [], 100, seed=0)
    assert rec.parity_expectation([0]) == (-1.0, 0.0)
    assert rec.parity_expectation([1])[0] == 1.0
    assert rec.to_json()["counts"] == {"10": 100}


def test_sample_rejects_zero_shots():
    with pytest.raises(ValueError):
        sample(Statevector.zero(1), [], 0, seed=0)


def test_fidelity_phase_invariant(rng):
    s = random_state(rng, 2)
    assert fidelity(s, s) == pytest.approx(1.0)
    assert fidelity(s, Statevector(np.exp(0.7j) * s.amplitudes)) == pytest.approx(1.0)
    assert fidelity(Statevector.from_bitstring("0"), Statevector.from_bitstring("1")) == 0
