"""Cython vs pure-Python kernel timings.

    python3 benchmarks/benchmark.py [--qubits 4 8 10] [--layers 4] [--repeat 5]

Times one circuit evaluation, one adjoint cost+gradient and a batch of noisy
trajectories with each backend, and prints the speedup.
"""

import argparse
import contextlib
import importlib
import timeit

import numpy as np

from sptforge import _pykernels, kernels
from sptforge.ansatz import FidelityCost, LayeredCircuit, evaluate
from sptforge.noise import NoiseModel, noisy_evaluate
from sptforge.pauli import PauliString
from sptforge.qstate import Statevector

NAMES = ("apply_1q", "apply_2q", "outer_1q", "pauli_expectation", "apply_pauli", "run_program", "adjoint_program")


@contextlib.contextmanager
def backend(module):
    saved = {n: getattr(kernels, n) for n in NAMES}
    for n in NAMES:
        setattr(kernels, n, getattr(module, n))
    try:
        yield
    finally:
        for n, f in saved.items():
            setattr(kernels, n, f)


def cases(n, layers, trajectories, seed=0):
    rng = np.random.default_rng(seed)
    circuit = LayeredCircuit(n, layers)
    circuit = circuit.with_params(rng.uniform(-np.pi, np.pi, circuit.n_params))
    psi = Statevector.zero(n)
    target = Statevector(rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)).normalize()
    cost = FidelityCost(circuit, psi, target)
    obs = [PauliString.from_sites(n, {0: "Z"})]
    model = NoiseModel(0.01, 0.0)
    return {
        "evaluate": lambda: evaluate(circuit, psi),
        "gradient": lambda: cost.value_and_grad(circuit.params),
        f"trajectories x{trajectories}": lambda: noisy_evaluate(circuit, psi, model, trajectories, obs, seed=1),
    }


def best_ms(fn, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return 1e3 * min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--qubits", type=int, nargs="+", default=[4, 8, 10])
    parser.add_argument("--layers", type=int, default=4)
    parser.add_argument("--trajectories", type=int, default=200)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    try:
        compiled = importlib.import_module("sptforge._ckernels")
    except ImportError:
        compiled = None
        print("compiled extension not built; timing the Python backend only")
    print(f"{'case':<22}{'qubits':>7}{'cython ms':>12}{'python ms':>12}{'speedup':>9}")
    for n in args.qubits:
        for name, fn in cases(n, args.layers, args.trajectories).items():
            with backend(_pykernels):
                py = best_ms(fn, args.repeat)
            if compiled is None:
                print(f"{name:<22}{n:>7}{'-':>12}{py:>12.3f}{'-':>9}")
                continue
            with backend(compiled):
                cy = best_ms(fn, args.repeat)
            print(f"{name:<22}{n:>7}{cy:>12.3f}{py:>12.3f}{py / cy:>8.1f}x")


if __name__ == "__main__":
    main()
