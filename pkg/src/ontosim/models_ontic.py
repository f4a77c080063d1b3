"""ψ-ontic reference models for any dimension: Beltrametti-Bugajski and Bell.

Also hosts the interval engine shared by every model whose ontic space is
(state, p ∈ [0, 1]) and whose response function partitions [0, 1] into
consecutive Born-length intervals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolationError
from .ontomodel import ArrayBatch, OntologicalModel, StateInterval, psi_ontic_update_rule
from .qcore import ProjectiveMeasurement, PureState, fourier_basis

# ---------------------------------------------------------------------------
# Interval engine


@dataclass
class IntervalBatch(ArrayBatch):
    states: np.ndarray  # (N, d) complex, phase-canonical rows
    p: np.ndarray  # (N,)


def born_rows(states: np.ndarray, measurement: ProjectiveMeasurement) -> np.ndarray:
    """⟨λ|Π_k|λ⟩ for each row state, shape (N, K)."""
    return np.real(np.einsum("ni,kij,nj->nk", states.conj(), measurement.matrices, states))


def interval_outcomes(probs: np.ndarray, p: np.ndarray, order: np.ndarray | None = None) -> np.ndarray:
    """Outcome selected by p against cumulative sums taken in ``order``.

    Intervals are left-closed and right-open; the last one is closed.
    ``order[n, l]`` is the outcome placed at position l for sample n.
    """
    n, k = probs.shape
    if order is None:
        order = np.broadcast_to(np.arange(k), (n, k))
    ordered = np.take_along_axis(probs, order, axis=1)
    cum = np.cumsum(ordered, axis=1)
    pos = (cum <= p[:, None]).sum(axis=1)
    pos = np.minimum(pos, k - 1)
    # skip zero-length intervals that a boundary p could otherwise select
    return order[np.arange(n), pos]


def one_hot(idx: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((idx.size, k))
    out[np.arange(idx.size), idx] = 1.0
    return out


def interval_weights(probs: np.ndarray, order: Sequence[int], lo: float, hi: float) -> np.ndarray:
    """Exact outcome probabilities when p is uniform on [lo, hi]."""
    probs = np.asarray(probs, dtype=float)
    out = np.zeros(probs.size)
    if hi <= lo:
        return out
    start = 0.0
    for pos, k in enumerate(order):
        end = start + probs[k] if pos + 1 < len(order) else max(1.0, start + probs[k])
        out[k] = max(0.0, min(end, hi) - max(start, lo)) / (hi - lo)
        start = end
    return out


# ---------------------------------------------------------------------------
# Shared helpers for (state, p) models


def _standard_sets(model: OntologicalModel, d: int) -> None:
    model.preparations = {f"{j}": PureState.basis(d, j) for j in range(d)}
    fb = fourier_basis(d)
    model.preparations.update({f"x{k}": PureState(fb[:, k]) for k in range(d)})
    model.measurements = {
        "Z": ProjectiveMeasurement.computational(d),
        "X": ProjectiveMeasurement.from_basis(fb, "X"),
    }
    shift = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    model.transformations = {"I": np.eye(d, dtype=complex), "F": fb, "shift": shift}


def luders_rows(states: np.ndarray, outcomes: np.ndarray, measurement: ProjectiveMeasurement) -> np.ndarray:
    post = np.einsum("nij,nj->ni", measurement.matrices[outcomes], states)
    norms = np.linalg.norm(post, axis=1)
    if np.any(norms**2 <= 1e-12):
        raise ContractViolationError("η requested outside Supp ξ")
    return canonical_rows(post / norms[:, None])


def canonical_rows(states: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    first = np.argmax(np.abs(states) > tol, axis=1)
    a = states[np.arange(len(states)), first]
    return states * (np.abs(a) / a)[:, None]


def _repeat_state(state: PureState, size: int) -> np.ndarray:
    return np.broadcast_to(state.amplitudes, (size, state.d)).copy()


class BeltramettiBugajskiModel(OntologicalModel):
    """Λ = projective Hilbert space; everything follows the quantum rules."""

    name = "bb"
    psi_ontic = True

    def __init__(self, d: int) -> None:
        super().__init__()
        if d < 2:
            raise ValueError("dimension must be at least 2")
        self.d = d
        _standard_sets(self, d)
        self._eta = psi_ontic_update_rule(self)

    def describe(self):
        return {"name": self.name, "d": self.d}

    def sample_mu(self, state, rng, size):
        return _repeat_state(state, size)

    def sample_mu_each(self, states, rng):
        return np.asarray(states, dtype=complex)

    def state_vectors(self, batch):
        return batch

    def xi(self, batch, measurement):
        return np.clip(born_rows(batch, measurement), 0.0, 1.0)

    def sample_eta(self, batch, outcomes, measurement, rng):
        return self._eta.sample(batch, outcomes, measurement, rng)

    def apply_gamma(self, batch, unitary, rng):
        return canonical_rows(batch @ np.asarray(unitary).T)

    def point_at(self, batch, i):
        return PureState(batch[i])

    def to_batch(self, points):
        return np.array([p.amplitudes for p in points], dtype=complex).reshape(-1, self.d)

    def in_support(self, state, point):
        return state.same_ray(point)

    def indistinct(self, a, b):
        return a.same_ray(b)

    def overlap_points(self, a, b):
        return [a] if a.same_ray(b) else []

    def supporting_states(self, point):
        return [point]

    def ontic_state_vector(self, point):
        return point

    @property
    def has_exact(self) -> bool:
        return True

    def exact_sequential(self, state, measurements, outcomes, unitaries=None):
        lam = state.amplitudes[None, :]
        total = 1.0
        for i, (m, k) in enumerate(zip(measurements, outcomes)):
            if unitaries is not None and unitaries[i] is not None:
                lam = self.apply_gamma(lam, unitaries[i], None)
            total *= float(self.xi(lam, m)[0, k])
            if total <= 1e-12:
                return 0.0
            if i + 1 < len(measurements):
                lam = luders_rows(lam, np.array([k]), m)
        return total


class BellModel(OntologicalModel):
    """Λ = projective space × [0, 1]; outcome k when p falls in the k-th Born interval."""

    name = "bell"
    psi_ontic = True

    def __init__(self, d: int) -> None:
        super().__init__()
        if d < 2:
            raise ValueError("dimension must be at least 2")
        self.d = d
        _standard_sets(self, d)
        self._eta = psi_ontic_update_rule(self)

    def sample_mu(self, state, rng, size):
        return IntervalBatch(_repeat_state(state, size), rng.random(size))

    def sample_mu_each(self, states, rng):
        return IntervalBatch(np.asarray(states, dtype=complex), rng.random(len(states)))

    def state_vectors(self, batch):
        return batch.states

    def xi(self, batch, measurement):
        probs = born_rows(batch.states, measurement)
        return one_hot(interval_outcomes(probs, batch.p), len(measurement))

    def sample_eta(self, batch, outcomes, measurement, rng):
        return self._eta.sample(batch, outcomes, measurement, rng)

    def apply_gamma(self, batch, unitary, rng):
        return IntervalBatch(canonical_rows(batch.states @ np.asarray(unitary).T), batch.p.copy())

    def point_at(self, batch, i):
        return StateInterval(PureState(batch.states[i]), float(batch.p[i]))

    def to_batch(self, points):
        return IntervalBatch(
            np.array([p.state.amplitudes for p in points], dtype=complex).reshape(-1, self.d),
            np.array([p.p for p in points], dtype=float),
        )

    def in_support(self, state, point):
        return state.same_ray(point.state)

    def indistinct(self, a, b):
        return a.same_ray(b)

    def overlap_points(self, a, b):
        return [StateInterval(a, 0.5)] if a.same_ray(b) else []

    def supporting_states(self, point):
        return [point.state]

    def ontic_state_vector(self, point):
        return point.state

    @property
    def has_exact(self) -> bool:
        return True

    def outcome_weights(self, state: PureState, measurement: ProjectiveMeasurement) -> np.ndarray:
        """Exact ∫ ξ(k|(ψ, p)) dp over p uniform on [0, 1]."""
        probs = born_rows(state.amplitudes[None, :], measurement)[0]
        return interval_weights(probs, range(len(measurement)), 0.0, 1.0)

    def exact_sequential(self, state, measurements, outcomes, unitaries=None):
        cur = state
        total = 1.0
        for i, (m, k) in enumerate(zip(measurements, outcomes)):
            if unitaries is not None and unitaries[i] is not None:
                cur = cur.evolve(unitaries[i])
            total *= float(self.outcome_weights(cur, m)[k])
            if total <= 1e-12:
                return 0.0
            if i + 1 < len(measurements):
                # η: Lüders on the state coordinate, p re-drawn uniformly
                cur = PureState(luders_rows(cur.amplitudes[None, :], np.array([k]), m)[0])
        return total


def build_beltrametti_bugajski(d: int) -> BeltramettiBugajskiModel:
    return BeltramettiBugajskiModel(d)


def build_bell(d: int) -> BellModel:
    return BellModel(d)
