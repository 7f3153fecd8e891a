"""Zero-noise extrapolation by appending identity layer blocks.

Each appended block is a forward layer followed by a mirrored layer with
identity rotations. The ECR sub-layers then meet in adjacent equal pairs and
cancel because ECR is self-inverse, so the block is exactly the identity in
the noiseless limit while adding ECR noise. Observables are fitted against
the total layer count and evaluated at zero layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .ansatz import LayeredCircuit
from .noise import NoiseModel, noisy_evaluate, noisy_sample, readout_expectation_factor
from .pauli import PauliString
from .qstate import Statevector

FORMS = ("linear", "quadratic", "exponential")
_N_PARAMS = {"linear": 2, "quadratic": 3, "exponential": 3}


class ExtrapolationError(ValueError):
    pass


@dataclass(frozen=True)
class FoldedCircuit:
    base: LayeredCircuit
    m_identity: int

    def __post_init__(self):
        if self.m_identity < 0 or self.m_identity % 2:
            raise ValueError(f"identity layer count must be even and non-negative, got {self.m_identity}")

    @property
    def circuit(self) -> LayeredCircuit:
        return self.base.append_identity_pairs(self.m_identity // 2)

    @property
    def total_layers(self) -> int:
        return self.base.n_layers + self.m_identity


def fold(base: LayeredCircuit, m: int) -> FoldedCircuit:
    return FoldedCircuit(base, m)


@dataclass
class ExtrapolationFit:
    xs: np.ndarray
    ys: np.ndarray
    yerrs: np.ndarray | None
    form: str
    zero_noise_value: float
    fit_residual: float
    coefficients: tuple[float, ...] = ()
    fallback: bool = False
    requested_form: str = ""

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        c = self.coefficients
        if self.form == "exponential":
            return c[0] + c[1] * c[2] ** x
        return np.polyval(c, x)

    def to_json(self) -> dict:
        return {
            "xs": np.asarray(self.xs).tolist(),
            "ys": np.asarray(self.ys).tolist(),
            "errs": None if self.yerrs is None else np.asarray(self.yerrs).tolist(),
            "form": self.form,
            "requested_form": self.requested_form or self.form,
            "fallback": self.fallback,
            "coefficients": list(self.coefficients),
            "intercept": self.zero_noise_value,
            "residual": self.fit_residual,
        }


def _weights(yerrs, n):
    if yerrs is None:
        return np.ones(n)
    e = np.asarray(yerrs, dtype=float)
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        return np.ones(n)
    return 1.0 / e


def _poly_fit(xs, ys, w, degree):
    design = np.vander(xs, degree + 1)
    if np.linalg.matrix_rank(design * w[:, None]) < degree + 1:
        raise ExtrapolationError("degenerate design matrix")
    coef, *_ = np.linalg.lstsq(design * w[:, None], ys * w, rcond=None)
    return tuple(float(c) for c in coef)


def _exp_fit(xs, ys, w, min_rate):
    """a + b r^x by variable projection: (a, b) are linear for fixed r."""

    def solve(r):
        design = np.column_stack([np.ones_like(xs), r**xs])
        coef, *_ = np.linalg.lstsq(design * w[:, None], ys * w, rcond=None)
        return coef, float(np.sum((w * (design @ coef - ys)) ** 2))

    hi = 1 - 1e-9
    res = minimize_scalar(lambda r: solve(r)[1], bounds=(min_rate, hi), method="bounded", options={"xatol": 1e-12})
    r = float(res.x)
    coef, _ = solve(r)
    span = hi - min_rate
    if not res.success or not np.all(np.isfinite(coef)) or r > hi - 1e-6 * span or r < min_rate + 1e-6 * span:
        raise ExtrapolationError("exponential fit ran to the edge of the allowed decay rates")
    return float(coef[0]), float(coef[1]), r


def extrapolate(xs, ys, yerrs=None, form: str = "exponential", min_rate: float = 0.5) -> ExtrapolationFit:
    """Weighted least-squares fit of ``ys`` against layer count, evaluated at zero.

    The exponential form restricts the per-layer rate to ``min_rate <= r < 1``
    and falls back to a quadratic when the optimum sits on either bound.
    """
    if form not in FORMS:
        raise ValueError(f"unknown fit form {form!r}; choose from {FORMS}")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be equal-length 1-d sequences")
    if np.unique(xs).size < 3:
        raise ExtrapolationError("at least three distinct layer counts are required")
    if xs.size < _N_PARAMS[form] + 1:
        raise ExtrapolationError(f"{form} fit needs at least {_N_PARAMS[form] + 1} points")
    w = _weights(yerrs, xs.size)
    fallback = False
    used = form
    if form == "exponential":
        try:
            coef = _exp_fit(xs, ys, w, min_rate)
        except ExtrapolationError:
            fallback, used = True, "quadratic"
            coef = _poly_fit(xs, ys, w, 2)
    else:
        coef = _poly_fit(xs, ys, w, 1 if form == "linear" else 2)
    fit = ExtrapolationFit(xs, ys, None if yerrs is None else np.asarray(yerrs, float), used, 0.0, 0.0,
                           coef, fallback, form)
    fit.zero_noise_value = float(fit.predict(0.0))
    fit.fit_residual = float(np.sqrt(np.mean((fit.predict(xs) - ys) ** 2)))
    return fit


# ------------------------------------------------------- noisy estimation


def measurement_groups(observables: Sequence[PauliString]) -> list[tuple[str, list[int]]]:
    """Greedy grouping of observables whose non-identity letters agree qubit by qubit.

    Returns ``(basis, members)`` with ``basis`` a full-register string where
    unconstrained qubits read ``Z``.
    """
    groups: list[tuple[list[str], list[int]]] = []
    for i, obs in enumerate(observables):
        for letters, members in groups:
            if all(a == "I" or b == "I" or a == b for a, b in zip(obs.letters, letters)):
                for q, a in enumerate(obs.letters):
                    if a != "I":
                        letters[q] = a
                members.append(i)
                break
        else:
            groups.append((list(obs.letters), [i]))
    return [("".join("Z" if c == "I" else c for c in letters), members) for letters, members in groups]


@dataclass
class PauliEstimate:
    means: np.ndarray
    stderrs: np.ndarray
    records: list = field(default_factory=list)


def estimate_paulis(
    circuit: LayeredCircuit,
    input: Statevector,
    model: NoiseModel,
    observables: Sequence[PauliString],
    shots: int | None,
    seed,
    trajectories: int | None = None,
) -> PauliEstimate:
    """Noisy Pauli expectations from shot records, or analytically when ``shots`` is None.

    The analytic path averages exact trajectory expectations and applies the
    readout bias factor of each observable's weight.
    """
    for obs in observables:
        if abs(np.imag(obs.coefficient)) > 1e-12:
            raise ValueError("observables must carry real coefficients")
    if shots is None:
        est = noisy_evaluate(circuit, input, model, trajectories or 2000, observables, seed)
        f = np.array([readout_expectation_factor(model, len(o.support)) for o in observables])
        return PauliEstimate(est.means * f, est.stderrs * f)
    means = np.zeros(len(observables))
    errs = np.zeros(len(observables))
    records = []
    groups = measurement_groups(observables)
    seeds = np.random.SeedSequence(seed).spawn(len(groups))
    for (basis, members), s in zip(groups, seeds):
        rec = noisy_sample(circuit, input, model, basis, shots, trajectories, int(s.generate_state(1)[0]))
        records.append(rec)
        for i in members:
            obs = observables[i]
            mean, err = rec.parity_expectation(obs.support)
            c = float(np.real(obs.coefficient))
            means[i], errs[i] = c * mean, abs(c) * err
    return PauliEstimate(means, errs, records)


def zne_expectation(
    base: LayeredCircuit,
    observable,
    noise: NoiseModel,
    m_list: Sequence[int] = (0, 2, 4, 6),
    shots: int | None = 20000,
    form: str = "exponential",
    seed: int = 0,
    input: Statevector | None = None,
    trajectories: int | None = None,
):
    """Fold, estimate at every fold depth, extrapolate to zero layers.

    ``observable`` is a PauliString or a sequence of them. A single observable
    returns ``(value, fit)``; a sequence returns ``(values, fits)``.
    """
    single = isinstance(observable, PauliString)
    observables = [observable] if single else list(observable)
    input = Statevector.zero(base.n_qubits) if input is None else input
    m_list = sorted(set(int(m) for m in m_list))
    seeds = np.random.SeedSequence(seed).spawn(len(m_list))
    xs, ys, es = [], [], []
    for m, s in zip(m_list, seeds):
        folded = fold(base, m)
        est = estimate_paulis(folded.circuit, input, noise, observables, shots, int(s.generate_state(1)[0]), trajectories)
        xs.append(folded.total_layers)
        ys.append(est.means)
        es.append(est.stderrs)
    ys = np.array(ys)
    es = np.array(es)
    fits = [extrapolate(xs, ys[:, j], es[:, j], form) for j in range(len(observables))]
    values = np.array([f.zero_noise_value for f in fits])
    if single:
        return float(values[0]), fits[0]
    return values, fits
