import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state
from sptforge.ansatz import LayeredCircuit, compile_state, evaluate
from sptforge.dilation import qite_prepare
from sptforge.model import IsingClusterParams, build_hamiltonian
from sptforge.noise import NoiseModel, density_matrix_reference
from sptforge.observables import string_order, string_order_operator
from sptforge.pauli import PauliString
from sptforge.qstate import Statevector
from sptforge.zne import (
    ExtrapolationError,
    estimate_paulis,
    extrapolate,
    fold,
    measurement_groups,
    zne_expectation,
)


@pytest.fixture(scope="module")
def cluster_circuit():
    ham = build_hamiltonian(IsingClusterParams(1, 1, 2.5, 4))
    s = Statevector.plus(4)
    target, _ = qite_prepare(ham, 2.0, s)
    circuit, _ = compile_state(Statevector.zero(4), target, tol=1e-4, seed=0)
    return circuit


def test_fold_validation():
    base = LayeredCircuit(3, 2)
    assert fold(base, 4).total_layers == 6
    for bad in (-2, 3):
        with pytest.raises(ValueError):
            fold(base, bad)


@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(1, 3), st.sampled_from([0, 2, 4, 6]))
def test_folding_noiseless_invariance(seed, n, layers, m):
    rng = np.random.default_rng(seed)
    base = LayeredCircuit(n, layers)
    base = base.with_params(rng.uniform(-np.pi, np.pi, base.n_params))
    s = random_state(rng, n)
    a = evaluate(base, s).amplitudes
    b = evaluate(fold(base, m).circuit, s).amplitudes
    assert np.max(np.abs(a - b)) < 1e-9


@given(st.floats(-1, 1), st.floats(0.1, 2), st.floats(0.6, 0.98))
def test_exponential_recovered(a, b, r):
    xs = np.array([2, 4, 6, 8, 10.0])
    fit = extrapolate(xs, a + b * r**xs)
    assert not fit.fallback
    assert fit.zero_noise_value == pytest.approx(a + b, abs=1e-5)


def test_polynomial_forms_exact():
    xs = np.array([1.0, 3, 5, 7])
    assert extrapolate(xs, 0.5 - 0.1 * xs, form="linear").zero_noise_value == pytest.approx(0.5)
    quad = extrapolate(xs, 0.2 + 0.1 * xs - 0.01 * xs**2, form="quadratic")
    assert quad.zero_noise_value == pytest.approx(0.2)
    assert quad.fit_residual < 1e-12


def test_exponential_falls_back_on_linear_growth():
    xs = np.array([2.0, 4, 6, 8])
    fit = extrapolate(xs, 0.1 + 0.2 * xs, form="exponential")
    assert fit.fallback and fit.form == "quadratic" and fit.requested_form == "exponential"
    assert fit.zero_noise_value == pytest.approx(0.1)


def test_extrapolation_errors():
    with pytest.raises(ExtrapolationError):
        extrapolate([1, 1, 2, 2], [0, 0, 1, 1])
    with pytest.raises(ExtrapolationError):
        extrapolate([1, 2, 3], [0, 1, 2], form="exponential")
    with pytest.raises(ValueError):
        extrapolate([1, 2, 3], [0, 1, 2], form="cubic")


def test_fit_deterministic_and_serializable():
    xs, ys, es = [2, 4, 6, 8], [0.9, 0.8, 0.72, 0.66], [0.01, 0.01, 0.02, 0.02]
    f1, f2 = extrapolate(xs, ys, es), extrapolate(xs, ys, es)
    assert f1.zero_noise_value == f2.zero_noise_value
    doc = f1.to_json()
    assert set(doc) >= {"xs", "ys", "errs", "form", "intercept", "residual"}


def test_measurement_groups():
    obs = [PauliString("ZIZ"), PauliString("ZZI"), PauliString("XII"), PauliString("IIZ")]
    groups = measurement_groups(obs)
    assert groups[0] == ("ZZZ", [0, 1, 3])
    assert groups[1] == ("XZZ", [2])


def test_shot_and_analytic_estimates_agree():
    base = LayeredCircuit(3, 2)
    base = base.with_params(np.random.default_rng(0).uniform(-1, 1, base.n_params))
    obs = [PauliString("ZZI"), PauliString("IXI")]
    model = NoiseModel(0.02, 0.01)
    s = Statevector.zero(3)
    exact = estimate_paulis(base, s, model, obs, None, 0, trajectories=4000)
    shots = estimate_paulis(base, s, model, obs, 20000, 1, trajectories=2000)
    for m, e, se in zip(exact.means, shots.means, shots.stderrs):
        assert abs(m - e) < 5 * se + 0.01


@pytest.mark.parametrize("form", ["exponential", "quadratic", "linear"])
def test_mitigation_beats_raw_on_exact_channel(cluster_circuit, form):
    ideal = string_order(evaluate(cluster_circuit, Statevector.zero(4)))
    obs = string_order_operator(4, 4)
    model = NoiseModel(0.005, 0.0)
    xs, ys = [], []
    for m in (0, 2, 4, 6):
        folded = fold(cluster_circuit, m)
        xs.append(folded.total_layers)
        ys.append(density_matrix_reference(folded.circuit, Statevector.zero(4), model).expectation(obs))
    fit = extrapolate(xs, ys, form=form)
    assert abs(fit.zero_noise_value - ideal) < abs(ys[0] - ideal) / 2


def test_trajectory_estimates_follow_exact_channel(cluster_circuit):
    obs = string_order_operator(4, 4)
    model = NoiseModel(0.005, 0.0)
    _, fit = zne_expectation(cluster_circuit, obs, model, shots=None, trajectories=4000, seed=0)
    for x, y, e in zip(fit.xs, fit.ys, fit.yerrs):
        folded = fold(cluster_circuit, int(x) - cluster_circuit.n_layers)
        exact = density_matrix_reference(folded.circuit, Statevector.zero(4), model).expectation(obs)
        assert abs(y - exact) < 4 * e


def test_fit_residual_shrinks_with_shots(cluster_circuit):
    obs = string_order_operator(4, 4)
    model = NoiseModel(0.005, 0.006)
    res = []
    for shots in (2000, 200000):
        errs = [zne_expectation(cluster_circuit, obs, model, shots=shots, seed=s, form="linear")[1].fit_residual
                for s in range(4)]
        res.append(np.median(errs))
    assert res[1] < res[0] / 3


def test_multiple_observables_shape(cluster_circuit):
    obs = [PauliString("ZIII"), PauliString("IIIZ"), string_order_operator(4, 4)]
    values, fits = zne_expectation(cluster_circuit, obs, NoiseModel(), shots=2000, seed=1)
    assert values.shape == (3,) and len(fits) == 3
