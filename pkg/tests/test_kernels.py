import importlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state, random_unitary
from sptforge import _pykernels
from sptforge.ansatz import LayeredCircuit, u3_batch
from sptforge.pauli import PauliString
from sptforge.qstate import ECR_MATRIX
from test_qstate import dense_gate

try:
    _ckernels = importlib.import_module("sptforge._ckernels")
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
BACKENDS.append(
    pytest.param(_ckernels, id="cython", marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))
)
ECR_STACK = np.ascontiguousarray(ECR_MATRIX[None])


@pytest.mark.parametrize("k", BACKENDS)
@pytest.mark.parametrize("q", [0, 1, 3])
def test_apply_1q(k, q, rng):
    m = np.ascontiguousarray(random_unitary(rng, 2))
    psi = random_state(rng, 4).amplitudes
    ref = dense_gate(m, [q], 4) @ psi
    k.apply_1q(psi, m, q)
    np.testing.assert_allclose(psi, ref, atol=1e-12)


@pytest.mark.parametrize("k", BACKENDS)
@pytest.mark.parametrize("pair", [(0, 1), (1, 0), (0, 3), (3, 2)])
def test_apply_2q(k, pair, rng):
    m = np.ascontiguousarray(random_unitary(rng, 4))
    psi = random_state(rng, 4).amplitudes
    ref = dense_gate(m, list(pair), 4) @ psi
    k.apply_2q(psi, m, *pair)
    np.testing.assert_allclose(psi, ref, atol=1e-12)


@pytest.mark.parametrize("k", BACKENDS)
@pytest.mark.parametrize("label", ["XIZY", "ZZZZ", "IIII", "YIIX"])
def test_pauli_kernels(k, label, rng):
    p = PauliString(label, -0.5)
    psi = random_state(rng, 4).amplitudes
    ref = p.dense() @ psi
    assert abs(k.pauli_expectation(psi, *p.masks()) - np.vdot(psi, ref)) < 1e-12
    k.apply_pauli(psi, *p.masks())
    np.testing.assert_allclose(psi, ref, atol=1e-12)


@pytest.mark.parametrize("k", BACKENDS)
def test_outer_1q(k, rng):
    a = random_state(rng, 3).amplitudes
    b = random_state(rng, 3).amplitudes
    out = np.asarray(k.outer_1q(a, b, 1))
    ta, tb = a.reshape(2, 2, 2), b.reshape(2, 2, 2)
    ref = np.einsum("iaj,ibj->ab", ta.conj(), tb)
    np.testing.assert_allclose(out, ref, atol=1e-12)


def _program_case(seed, n, layers):
    rng = np.random.default_rng(seed)
    circ = LayeredCircuit(n, layers, rng.uniform(-np.pi, np.pi, 6 * n * layers))
    psi = random_state(rng, n).amplitudes
    return circ, psi, u3_batch(circ.params.reshape(-1, 3))


@pytest.mark.skipif(_ckernels is None, reason="extension not built")
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(1, 4))
def test_backends_agree_on_programs(seed, n, layers):
    circ, psi, m1 = _program_case(seed, n, layers)
    prog = circ.program()
    a, b = psi.copy(), psi.copy()
    _pykernels.run_program(a, prog, m1, ECR_STACK)
    _ckernels.run_program(b, prog, m1, ECR_STACK)
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.skipif(_ckernels is None, reason="extension not built")
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(1, 3))
def test_backends_agree_on_adjoint(seed, n, layers):
    circ, psi, m1 = _program_case(seed, n, layers)
    prog = circ.program()
    _pykernels.run_program(psi, prog, m1, ECR_STACK)
    lam = random_state(np.random.default_rng(seed + 1), n).amplitudes
    outs = []
    for k in (_pykernels, _ckernels):
        p, l_ = psi.copy(), lam.copy()
        rs = np.zeros((m1.shape[0], 2, 2), dtype=complex)
        k.adjoint_program(p, l_, prog, m1, ECR_STACK, rs)
        outs.append((p, l_, rs))
    for x, y in zip(*outs):
        np.testing.assert_allclose(x, y, atol=1e-11)


@pytest.mark.parametrize("k", BACKENDS)
def test_adjoint_uncomputes_to_input(k, rng):
    circ, psi0, m1 = _program_case(5, 4, 2)
    prog = circ.program()
    psi = psi0.copy()
    k.run_program(psi, prog, m1, ECR_STACK)
    rs = np.zeros((m1.shape[0], 2, 2), dtype=complex)
    k.adjoint_program(psi, psi.copy(), prog, m1, ECR_STACK, rs)
    np.testing.assert_allclose(psi, psi0, atol=1e-12)


def test_environment_forces_fallback(monkeypatch):
    import sptforge.kernels as kernels

    monkeypatch.setenv("SPTFORGE_PURE_PYTHON", "1")
    try:
        reloaded = importlib.reload(kernels)
        assert reloaded.BACKEND == "python"
    finally:
        monkeypatch.delenv("SPTFORGE_PURE_PYTHON")
        importlib.reload(kernels)


def test_benchmark_script_runs(capsys):
    import runpy
    from pathlib import Path

    script = Path(__file__).resolve().parents[1] / "benchmarks" / "benchmark.py"
    mod = runpy.run_path(str(script))
    mod["main"](["--qubits", "3", "--layers", "1", "--trajectories", "5", "--repeat", "1"])
    assert "evaluate" in capsys.readouterr().out
