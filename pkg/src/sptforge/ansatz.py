"""Layered ECR + U3 variational circuits and their training.

One layer is ``ECR on bond set A -> U3 on every qubit -> ECR on bond set B ->
U3 on every qubit`` where (A, B) is (even, odd) bonds for a forward layer and
(odd, even) for a mirrored one. Even bonds are (0,1), (2,3), ...; odd bonds
are (1,2), (3,4), ....
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.optimize

from . import kernels
from .dilation import DilatedUnitary, apply_dilated
from .qstate import ECR_MATRIX, GateOp, Statevector, apply_gates, postselect, u3, ecr

FORWARD = "eo"
MIRRORED = "oe"


def even_bonds(n: int) -> list[tuple[int, int]]:
    return [(q, q + 1) for q in range(0, n - 1, 2)]


def odd_bonds(n: int) -> list[tuple[int, int]]:
    return [(q, q + 1) for q in range(1, n - 1, 2)]


def u3_batch(params: np.ndarray) -> np.ndarray:
    """U3 matrices for an (N, 3) parameter array, shape (N, 2, 2)."""
    th, ph, la = params[:, 0], params[:, 1], params[:, 2]
    c = np.cos(th / 2)
    s = np.sin(th / 2)
    ep = np.exp(1j * ph)
    el = np.exp(1j * la)
    out = np.empty((params.shape[0], 2, 2), dtype=np.complex128)
    out[:, 0, 0] = c
    out[:, 0, 1] = -el * s
    out[:, 1, 0] = ep * s
    out[:, 1, 1] = ep * el * c
    return out


def u3_batch_derivatives(params: np.ndarray) -> np.ndarray:
    """d U3 / d(theta, phi, lam), shape (N, 3, 2, 2)."""
    th, ph, la = params[:, 0], params[:, 1], params[:, 2]
    c = np.cos(th / 2)
    s = np.sin(th / 2)
    ep = np.exp(1j * ph)
    el = np.exp(1j * la)
    d = np.zeros((params.shape[0], 3, 2, 2), dtype=np.complex128)
    d[:, 0, 0, 0] = -0.5 * s
    d[:, 0, 0, 1] = -0.5 * el * c
    d[:, 0, 1, 0] = 0.5 * ep * c
    d[:, 0, 1, 1] = -0.5 * ep * el * s
    d[:, 1, 1, 0] = 1j * ep * s
    d[:, 1, 1, 1] = 1j * ep * el * c
    d[:, 2, 0, 1] = -1j * el * s
    d[:, 2, 1, 1] = 1j * ep * el * c
    return d


_ECR_STACK = np.ascontiguousarray(ECR_MATRIX[None, :, :])


@dataclass
class LayeredCircuit:
    n_qubits: int
    n_layers: int
    params: np.ndarray = None
    orders: tuple[str, ...] = None
    _program: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.orders is None:
            self.orders = (FORWARD,) * self.n_layers
        self.orders = tuple(self.orders)
        if len(self.orders) != self.n_layers or any(o not in (FORWARD, MIRRORED) for o in self.orders):
            raise ValueError("one order flag ('eo' or 'oe') per layer is required")
        if self.params is None:
            self.params = np.zeros(self.n_params)
        self.params = np.asarray(self.params, dtype=float).reshape(-1)
        if self.params.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {self.params.size}")

    @property
    def n_u3(self) -> int:
        return 2 * self.n_layers * self.n_qubits

    @property
    def n_params(self) -> int:
        return 3 * self.n_u3

    @property
    def ecr_per_layer(self) -> int:
        return len(even_bonds(self.n_qubits)) + len(odd_bonds(self.n_qubits))

    @property
    def n_ecr(self) -> int:
        return self.ecr_per_layer * self.n_layers

    def with_params(self, params) -> LayeredCircuit:
        return LayeredCircuit(self.n_qubits, self.n_layers, np.array(params, dtype=float), self.orders)

    def program(self) -> np.ndarray:
        """Rows ``(kind, q0, q1, midx)``; U3 number k uses midx k, ECR uses 0."""
        if self._program is None:
            rows = []
            k = 0
            n = self.n_qubits
            for order in self.orders:
                first, second = (even_bonds(n), odd_bonds(n)) if order == FORWARD else (odd_bonds(n), even_bonds(n))
                for bonds in (first, second):
                    for a, b in bonds:
                        rows.append((2, a, b, 0))
                    for q in range(n):
                        rows.append((1, q, 0, k))
                        k += 1
            self._program = np.array(rows, dtype=np.int64).reshape(-1, 4)
        return self._program

    def gates(self) -> list[GateOp]:
        p = self.params.reshape(-1, 3)
        ops = []
        for kind, q0, q1, k in self.program():
            ops.append(u3(*p[k], q0) if kind == 1 else ecr(int(q0), int(q1)))
        return ops

    def ecr_positions(self) -> np.ndarray:
        """Program row indices of the ECR gates, in execution order."""
        return np.nonzero(self.program()[:, 0] == 2)[0]

    def append_identity_pairs(self, n_pairs: int) -> LayeredCircuit:
        """Append forward+mirrored layer pairs with identity rotations."""
        orders = self.orders + (FORWARD, MIRRORED) * n_pairs
        params = np.concatenate([self.params, np.zeros(2 * n_pairs * 2 * self.n_qubits * 3)])
        return LayeredCircuit(self.n_qubits, self.n_layers + 2 * n_pairs, params, orders)

    def to_json(self, **extra) -> dict:
        doc = {
            "n_qubits": self.n_qubits,
            "n_layers": self.n_layers,
            "orders": list(self.orders),
            "params": self.params.tolist(),
        }
        doc.update(extra)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> LayeredCircuit:
        return cls(doc["n_qubits"], doc["n_layers"], np.array(doc["params"]), tuple(doc["orders"]))


def save_circuit(path, circuit: LayeredCircuit, **extra) -> None:
    with open(path, "w") as fh:
        json.dump(circuit.to_json(**extra), fh, indent=2)


def load_circuit(path) -> tuple[LayeredCircuit, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    return LayeredCircuit.from_json(doc), doc


def _check_params(circuit: LayeredCircuit, params: np.ndarray) -> None:
    # the compiled kernels index parameter rows without bounds checks
    if params.size != circuit.n_params:
        raise ValueError(f"expected {circuit.n_params} parameters, got {params.size}")


def _run(circuit: LayeredCircuit, params: np.ndarray, amps: np.ndarray) -> np.ndarray:
    _check_params(circuit, params)
    psi = np.array(amps, dtype=np.complex128, copy=True)
    if circuit.n_layers:
        m1 = u3_batch(params.reshape(-1, 3))
        kernels.run_program(psi, circuit.program(), m1, _ECR_STACK)
    return psi


def evaluate(circuit: LayeredCircuit, input: Statevector, params=None) -> Statevector:
    if input.n_qubits != circuit.n_qubits:
        raise ValueError(f"circuit acts on {circuit.n_qubits} qubits, input has {input.n_qubits}")
    p = circuit.params if params is None else np.asarray(params, dtype=float)
    return Statevector(_run(circuit, p, input.amplitudes))


def overlap_fidelity(a: Statevector, b: Statevector) -> float:
    """|<a|b>|, clipped into [0, 1]."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("dimension mismatch")
    return min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)))


# ------------------------------------------------------------------ costs


def pad_with_zeros(state: Statevector, n_qubits: int) -> Statevector:
    """Tensor |0> qubits above ``state`` up to ``n_qubits``."""
    if n_qubits < state.n_qubits:
        raise ValueError("cannot pad to fewer qubits")
    if n_qubits == state.n_qubits:
        return state
    return state.tensor(Statevector.zero(n_qubits - state.n_qubits))


def target_unitary(U, input: Statevector) -> Statevector:
    if isinstance(U, GateOp) or (isinstance(U, (list, tuple)) and U and isinstance(U[0], GateOp)):
        gates = [U] if isinstance(U, GateOp) else list(U)
        return apply_gates(input, gates)
    return Statevector(np.asarray(U) @ input.amplitudes)


def target_postselected(dilated: DilatedUnitary, input: Statevector) -> Statevector:
    out = apply_dilated(dilated, input)
    state, _ = postselect(out, dilated.ancilla_index, 0, drop=True)
    return state


def target_qae(dilated: DilatedUnitary, U_qae, input: Statevector, n_qubits: int) -> Statevector:
    prepared = pad_with_zeros(target_postselected(dilated, input), n_qubits)
    return target_unitary(U_qae, prepared)


class FidelityCost:
    """``1 - |<target| V(params) |input>|`` with adjoint-mode gradients."""

    def __init__(self, circuit: LayeredCircuit, input: Statevector, target: Statevector):
        if input.n_qubits != circuit.n_qubits or target.n_qubits != circuit.n_qubits:
            raise ValueError("circuit, input and target sizes differ")
        self.circuit = circuit
        self.input = input.amplitudes
        self.target = target.normalize().amplitudes
        self.n_evals = 0

    def __call__(self, params) -> float:
        psi = _run(self.circuit, np.asarray(params, dtype=float), self.input)
        self.n_evals += 1
        return max(0.0, 1.0 - abs(np.vdot(self.target, psi)))

    def value_and_grad(self, params) -> tuple[float, np.ndarray]:
        params = np.asarray(params, dtype=float)
        circuit = self.circuit
        _check_params(circuit, params)
        self.n_evals += 1
        if circuit.n_layers == 0:
            return max(0.0, 1.0 - abs(np.vdot(self.target, self.input))), np.zeros(0)
        p3 = params.reshape(-1, 3)
        m1 = u3_batch(p3)
        prog = circuit.program()
        psi = np.array(self.input, dtype=np.complex128, copy=True)
        kernels.run_program(psi, prog, m1, _ECR_STACK)
        z = np.vdot(self.target, psi)
        lam = self.target.copy()
        rs = np.zeros((m1.shape[0], 2, 2), dtype=np.complex128)
        kernels.adjoint_program(psi, lam, prog, m1, _ECR_STACK, rs)
        dz = np.einsum("kpab,kab->kp", u3_batch_derivatives(p3), rs).reshape(-1)
        az = abs(z)
        if az == 0:
            return 1.0, np.zeros_like(params)
        grad = -np.real(np.conj(z) * dz) / az
        return max(0.0, 1.0 - az), grad


def cost_unitary(circuit: LayeredCircuit, params, U_target, input: Statevector) -> float:
    return FidelityCost(circuit, input, target_unitary(U_target, input))(params)


def cost_postselected(circuit: LayeredCircuit, params, U_dilated: DilatedUnitary, input: Statevector) -> float:
    return FidelityCost(circuit, input, target_postselected(U_dilated, input))(params)


def cost_qae(circuit: LayeredCircuit, params, U_dilated: DilatedUnitary, U_qae, input: Statevector) -> float:
    """V acts on ``input`` padded with |0> ancillas up to the circuit size."""
    padded = pad_with_zeros(input, circuit.n_qubits)
    target = target_qae(U_dilated, U_qae, input, circuit.n_qubits)
    return FidelityCost(circuit, padded, target)(params)


# --------------------------------------------------------------- training


@dataclass
class TrainingReport:
    final_cost: float
    iterations: int
    cost_history: list[float]
    seed: int
    converged: bool
    n_layers: int = 0
    restarts: int = 1

    def to_json(self) -> dict:
        return {
            "final_cost": self.final_cost,
            "iterations": self.iterations,
            "cost_history": self.cost_history,
            "seed": self.seed,
            "converged": self.converged,
            "n_layers": self.n_layers,
            "restarts": self.restarts,
        }


def _best_so_far(history: Sequence[float]) -> list[float]:
    return list(np.minimum.accumulate(np.asarray(history, dtype=float))) if len(history) else []


def _minimize(cost: FidelityCost, x0: np.ndarray, budget: int, tol: float):
    history = []
    best = {"x": x0.copy(), "f": math.inf}

    def fun(x):
        f, g = cost.value_and_grad(x)
        history.append(f)
        if f < best["f"]:
            best["f"], best["x"] = f, x.copy()
        return f, g

    def stop(intermediate_result):
        if intermediate_result.fun < tol:
            raise StopIteration

    res = scipy.optimize.minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        callback=stop,
        options={"maxiter": budget, "maxfun": 4 * budget + 10, "ftol": 1e-16, "gtol": 1e-12},
    )
    return best["x"], best["f"], history, int(res.nit)


def train(
    circuit: LayeredCircuit,
    cost: FidelityCost | Callable,
    budget: int = 2000,
    seed: int = 0,
    restarts: int = 8,
    tol: float = 1e-3,
    init_scale: float = 0.1,
    warm_start: np.ndarray | None = None,
) -> tuple[np.ndarray, TrainingReport]:
    """Multi-start L-BFGS on the exact simulated cost.

    Restart 0 uses ``warm_start`` when given; others draw U3 angles uniformly
    from [-init_scale, init_scale]. The lowest cost wins, ties going to the
    fewest iterations. ``budget`` is the iteration cap per restart.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    if not isinstance(cost, FidelityCost):
        raise TypeError("cost must be a FidelityCost")
    seqs = np.random.SeedSequence(seed).spawn(restarts)
    best = None
    for r, ss in enumerate(seqs):
        rng = np.random.default_rng(ss)
        if r == 0 and warm_start is not None:
            x0 = np.asarray(warm_start, dtype=float).reshape(-1).copy()
            _check_params(circuit, x0)
        else:
            x0 = rng.uniform(-init_scale, init_scale, circuit.n_params)
        x, f, hist, nit = _minimize(cost, x0, budget, tol)
        cand = (f, nit, x, hist)
        if best is None or (f, nit) < (best[0], best[1]):
            best = cand
        if f < tol:
            break
    f, nit, x, hist = best
    report = TrainingReport(
        final_cost=float(f),
        iterations=nit,
        cost_history=_best_so_far(hist),
        seed=seed,
        converged=bool(f < tol),
        n_layers=circuit.n_layers,
        restarts=restarts,
    )
    return x, report


def compile_state(
    input: Statevector,
    target: Statevector,
    tol: float = 1e-3,
    start_layers: int = 2,
    max_layers: int = 12,
    restarts: int = 8,
    budget: int = 2000,
    seed: int = 0,
) -> tuple[LayeredCircuit, TrainingReport]:
    """Grow the layer count (doubling, capped) until the fidelity cost falls below ``tol``.

    Each growth step warm-starts from the previous optimum padded with
    identity layer pairs, so the achieved cost never increases with depth.
    """
    n_layers = start_layers
    prev: LayeredCircuit | None = None
    while True:
        if prev is None:
            circuit = LayeredCircuit(input.n_qubits, n_layers)
            warm = None
        else:
            extra = n_layers - prev.n_layers
            grown = prev.append_identity_pairs(extra // 2)
            if extra % 2:
                grown = LayeredCircuit(
                    grown.n_qubits, grown.n_layers + 1,
                    np.concatenate([grown.params, np.zeros(6 * grown.n_qubits)]),
                    grown.orders + (FORWARD,),
                )
            circuit = LayeredCircuit(grown.n_qubits, grown.n_layers, orders=grown.orders)
            warm = grown.params
        cost = FidelityCost(circuit, input, target)
        params, report = train(circuit, cost, budget=budget, seed=seed, restarts=restarts, tol=tol, warm_start=warm)
        trained = circuit.with_params(params)
        if report.converged or n_layers >= max_layers:
            return trained, report
        prev = trained
        n_layers = min(2 * n_layers, max_layers)
