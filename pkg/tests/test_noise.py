import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state
from sptforge.ansatz import LayeredCircuit, evaluate
from sptforge.noise import (
    NoiseModel,
    _pauli_masks,
    apply_readout_error,
    density_matrix_reference,
    noisy_evaluate,
    noisy_sample,
    readout_expectation_factor,
    sample_error_patterns,
    trajectory_density_matrix,
    two_qubit_pauli,
)
from sptforge.pauli import PauliString
from sptforge.qstate import DensityMatrix, MeasurementRecord, Statevector


def circuit(seed, n=4, layers=2):
    rng = np.random.default_rng(seed)
    c = LayeredCircuit(n, layers)
    return c.with_params(rng.uniform(-np.pi, np.pi, c.n_params))


def depolarize_dense(rho, a, b, p, n):
    out = (1 - p) * rho
    for idx in range(1, 16):
        la, lb = two_qubit_pauli(idx)
        P = PauliString.from_sites(n, {q: c for q, c in ((a, la), (b, lb)) if c != "I"}).dense()
        out = out + p / 15 * P @ rho @ P.conj().T
    return out


def test_model_validation():
    assert NoiseModel().p_ecr == 0.005 and NoiseModel().p_readout == 0.006
    with pytest.raises(ValueError):
        NoiseModel(p_ecr=1.5)
    assert NoiseModel.noiseless().to_json()["p_ecr"] == 0.0


def test_fifteen_distinct_paulis():
    labels = {two_qubit_pauli(i) for i in range(1, 16)}
    assert len(labels) == 15 and ("I", "I") not in labels
    with pytest.raises(ValueError):
        two_qubit_pauli(0)


@pytest.mark.parametrize("idx", range(1, 16))
def test_pauli_masks_match_dense(idx):
    la, lb = two_qubit_pauli(idx)
    x, z, phase = _pauli_masks(idx, 2, 0)
    label = [lb, "I", la]
    p = PauliString("".join(label))
    assert p.masks() == (x, z, phase)


def test_error_pattern_rate():
    rng = np.random.default_rng(0)
    pats = sample_error_patterns(10, 0.05, 4000, rng)
    hits = sum(len(p) for p in pats)
    assert abs(hits / 40000 - 0.05) < 0.005


def test_noiseless_trajectories_match_ideal(rng):
    c = circuit(1)
    s = random_state(rng, 4)
    obs = [PauliString("ZIII"), PauliString("XYZI")]
    est = noisy_evaluate(c, s, NoiseModel.noiseless(), 50, obs, seed=0)
    ideal = evaluate(c, s)
    for o, m in zip(obs, est.means):
        ref = np.vdot(ideal.amplitudes, o.dense() @ ideal.amplitudes).real
        assert abs(m - ref) < 1e-12
    assert est.distinct_patterns == 1


def test_density_reference_matches_dense_kraus():
    c = circuit(2, n=3, layers=1)
    model = NoiseModel(0.1, 0.0)
    s = Statevector.from_bitstring("0+1")
    rho = DensityMatrix.from_statevector(s).elements
    from sptforge.qstate import apply_gate

    n = 3
    dim = 1 << n
    for g in c.gates():
        U = np.column_stack([apply_gate(Statevector(e), g).amplitudes for e in np.eye(dim)])
        rho = U @ rho @ U.conj().T
        if g.kind == "ECR":
            rho = depolarize_dense(rho, *g.targets, model.p_ecr, n)
    ref = density_matrix_reference(c, s, model)
    np.testing.assert_allclose(ref.elements, rho, atol=1e-12)
    assert abs(ref.trace() - 1) < 1e-10


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_trajectories_agree_with_exact_channel(seed):
    c = circuit(seed)
    model = NoiseModel(0.05, 0.0)
    s = Statevector.zero(4)
    obs = [PauliString("ZIII"), PauliString("IXXI"), PauliString("ZZZZ")]
    est = noisy_evaluate(c, s, model, 3000, obs, seed=seed)
    rho = density_matrix_reference(c, s, model)
    for o, m, e in zip(obs, est.means, est.stderrs):
        assert abs(m - rho.expectation(o)) < 4 * max(e, 1e-3)


def test_trajectory_density_matrix_is_state():
    c = circuit(3)
    rho = trajectory_density_matrix(c, Statevector.zero(4), NoiseModel(0.05), 500, seed=0)
    rho.check(1e-9)


def test_noise_monotone_in_depth():
    c = circuit(4)
    model = NoiseModel(0.01, 0.0)
    s = Statevector.zero(4)
    ideal = evaluate(c, s).amplitudes
    fids = []
    for pairs in range(4):
        rho = density_matrix_reference(c.append_identity_pairs(pairs), s, model).elements
        fids.append(np.vdot(ideal, rho @ ideal).real)
    assert np.all(np.diff(fids) <= 1e-12)


def test_maximally_mixed_fixed_point():
    c = circuit(5, n=3)
    rho = density_matrix_reference(c, DensityMatrix.maximally_mixed(3), NoiseModel(0.3))
    np.testing.assert_allclose(rho.elements, np.eye(8) / 8, atol=1e-14)


def test_seeded_determinism():
    c = circuit(6)
    s = Statevector.zero(4)
    model = NoiseModel(0.02, 0.01, seed=9)
    a = noisy_sample(c, s, model, "XZZY", 3000, trajectories=300, seed=11)
    b = noisy_sample(c, s, model, "XZZY", 3000, trajectories=300, seed=11)
    assert a.counts == b.counts and a.shots == 3000
    e1 = noisy_evaluate(c, s, model, 200, [PauliString("ZZII")], seed=3)
    e2 = noisy_evaluate(c, s, model, 200, [PauliString("ZZII")], seed=3)
    np.testing.assert_array_equal(e1.means, e2.means)


def test_noisy_sample_validation():
    c = circuit(0)
    with pytest.raises(ValueError):
        noisy_sample(c, Statevector.zero(4), NoiseModel(), "ZZ", 10)
    with pytest.raises(ValueError):
        noisy_sample(c, Statevector.zero(4), NoiseModel(), "ZZZZ", 0)


@given(st.floats(0.0, 0.3), st.integers(1, 3))
def test_readout_bias_factor(p, weight):
    model = NoiseModel(0.0, p, seed=1)
    rec = MeasurementRecord("ZZZ", (0, 1, 2), 40000, {"000": 40000})
    flipped = apply_readout_error(rec, model, seed=2)
    mean, _ = flipped.parity_expectation(list(range(weight)))
    f = readout_expectation_factor(model, weight)
    assert abs(mean - f) < 5 * np.sqrt((1 - f * f) / rec.shots) + 2 / rec.shots


def test_readout_zero_rate_is_identity():
    rec = MeasurementRecord("ZZ", (0, 1), 10, {"01": 4, "10": 6})
    assert apply_readout_error(rec, NoiseModel(0.1, 0.0)).counts == rec.counts
