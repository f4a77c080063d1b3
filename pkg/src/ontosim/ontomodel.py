"""Ontological models (Λ, μ, Γ, ξ, η) and their verification against quantum theory.

A model exposes two faces:

* a *batched sampling* face used for Monte-Carlo verification: ``sample_mu``,
  ``xi``, ``sample_eta`` and ``apply_gamma`` operate on model-specific batches
  of ontic states;
* an *analytic* face used for overlap reasoning: ``in_support``,
  ``indistinct``, ``overlap_points`` and ``supporting_states`` operate on single
  :data:`OnticPoint` values and never look at samples.

Enumerable models (finite Λ) additionally expose exact tables and use integer
index arrays as their batches.
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable, Sequence, Union

import numpy as np
from scipy.linalg import block_diag

from . import qcore
from .errors import (
    ContractViolationError,
    DimensionMismatchError,
    NotPsiOnticError,
    UndecidableError,
    UnknownLabelError,
    UnsupportedOperationError,
    UpdateImpossibleError,
)
from .qcore import ProjectiveMeasurement, PureState

POSITIVITY_TOL = 1e-12
DEFAULT_Z = 4.0
DEFAULT_SAMPLES = 1_000_000
CHUNK = 1 << 17


# ---------------------------------------------------------------------------
# Ontic points


@dataclass(frozen=True, eq=False)
class SpherePoint:
    vector: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.vector, dtype=float)
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ValueError("sphere point must be a unit vector")
        object.__setattr__(self, "vector", v)


@dataclass(frozen=True, eq=False)
class MontinaPoint:
    x_plus: np.ndarray
    x_minus: np.ndarray
    r: int
    s: int

    def active(self) -> np.ndarray:
        return self.x_plus if self.r == 1 else self.x_minus


@dataclass(frozen=True, eq=False)
class StateInterval:
    state: PureState
    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("interval coordinate must lie in [0, 1]")


@dataclass(frozen=True)
class OutcomeTuple:
    outcomes: tuple[int, ...]


@dataclass(frozen=True)
class PhasePoint:
    x: tuple[int, ...]
    z: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class BranchPoint:
    """A point of one component of a disjoint-union ontic space."""

    branch: int
    point: Any


OnticPoint = Union[SpherePoint, MontinaPoint, StateInterval, OutcomeTuple, PhasePoint, BranchPoint]


# ---------------------------------------------------------------------------
# Batches


@dataclass
class ArrayBatch:
    """Struct-of-arrays batch; every field is an array indexed by sample."""

    def __len__(self) -> int:
        return len(getattr(self, fields(self)[0].name))

    def take(self, idx: np.ndarray) -> "ArrayBatch":
        return type(self)(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    @classmethod
    def merge(cls, pieces: Sequence[tuple[np.ndarray, "ArrayBatch"]], n: int) -> "ArrayBatch":
        first = pieces[0][1]
        out = {}
        for f in fields(first):
            ref = getattr(first, f.name)
            arr = np.empty((n,) + ref.shape[1:], dtype=ref.dtype)
            for idx, part in pieces:
                arr[idx] = getattr(part, f.name)
            out[f.name] = arr
        return cls(**out)


# ---------------------------------------------------------------------------
# Model base classes


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row of a (n, K) row-stochastic array."""
    u = rng.random(probs.shape[0])
    idx = (np.cumsum(probs, axis=1) < u[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


class OntologicalModel(ABC):
    """Common contract of every ontological model in the package."""

    name: str = "model"
    d: int
    enumerable: bool = False
    psi_ontic: bool = False
    full_theory: bool = True
    update_capable: bool = True
    nogo_theorem: int | None = None

    def __init__(self) -> None:
        self.preparations: dict[str, PureState] = {}
        self.measurements: dict[str, ProjectiveMeasurement] = {}
        self.transformations: dict[str, np.ndarray] = {}

    # -- declared sets ------------------------------------------------------

    def describe(self) -> dict[str, Any]:
        return {"name": self.name, "d": self.d}

    def resolve_preparation(self, prep: str | PureState) -> PureState:
        if isinstance(prep, str):
            try:
                return self.preparations[prep]
            except KeyError:
                raise UnknownLabelError(f"{self.name}: unknown preparation {prep!r}") from None
        if prep.d != self.d:
            raise DimensionMismatchError(f"{self.name}: state dimension {prep.d} != {self.d}")
        if not self.full_theory and not self.accepts_state(prep):
            raise UnknownLabelError(f"{self.name}: state is not a declared preparation")
        return prep

    def resolve_measurement(self, meas: str | ProjectiveMeasurement) -> ProjectiveMeasurement:
        if isinstance(meas, str):
            try:
                return self.measurements[meas]
            except KeyError:
                raise UnknownLabelError(f"{self.name}: unknown measurement {meas!r}") from None
        if meas.d != self.d:
            raise DimensionMismatchError(f"{self.name}: measurement dimension {meas.d} != {self.d}")
        return self.accepts_measurement(meas)

    def resolve_transformation(self, t: str | np.ndarray) -> np.ndarray:
        if not self.supports_transformations:
            raise UnsupportedOperationError(f"{self.name} does not represent transformations")
        if isinstance(t, str):
            try:
                return self.transformations[t]
            except KeyError:
                raise UnknownLabelError(f"{self.name}: unknown transformation {t!r}") from None
        t = np.asarray(t, dtype=complex)
        if t.shape != (self.d, self.d):
            raise DimensionMismatchError(f"{self.name}: unitary shape {t.shape}")
        return t

    def accepts_state(self, state: PureState) -> bool:
        return any(state.same_ray(s) for s in self.preparations.values())

    def accepts_measurement(self, meas: ProjectiveMeasurement) -> ProjectiveMeasurement:
        return meas

    @property
    def supports_transformations(self) -> bool:
        return True

    # -- sampling face -----------------------------------------------------

    @abstractmethod
    def sample_mu(self, state: PureState, rng: np.random.Generator, size: int) -> Any:
        ...

    @abstractmethod
    def xi(self, batch: Any, measurement: ProjectiveMeasurement) -> np.ndarray:
        """Response probabilities, shape (len(batch), num_outcomes)."""

    def sample_eta(
        self, batch: Any, outcomes: np.ndarray, measurement: ProjectiveMeasurement, rng: np.random.Generator
    ) -> Any:
        raise UnsupportedOperationError(f"{self.name} has no update rule")

    def apply_gamma(self, batch: Any, unitary: np.ndarray, rng: np.random.Generator) -> Any:
        raise UnsupportedOperationError(f"{self.name} does not represent transformations")

    @abstractmethod
    def point_at(self, batch: Any, i: int) -> OnticPoint:
        ...

    @abstractmethod
    def to_batch(self, points: Sequence[OnticPoint]) -> Any:
        ...

    def batch_size(self, batch: Any) -> int:
        return len(batch)

    def merge_batches(self, pieces: Sequence[tuple[np.ndarray, Any]], n: int) -> Any:
        """Scatter per-group batches back into one batch of size ``n``."""
        first = pieces[0][1]
        if isinstance(first, ArrayBatch):
            return type(first).merge(pieces, n)
        out = np.empty((n,) + first.shape[1:], dtype=first.dtype)
        for idx, part in pieces:
            out[idx] = part
        return out

    # -- analytic face -----------------------------------------------------

    def xi_point(self, point: OnticPoint, measurement: ProjectiveMeasurement) -> np.ndarray:
        return self.xi(self.to_batch([point]), measurement)[0]

    def in_support(self, state: PureState, point: OnticPoint) -> bool:
        raise UndecidableError(f"{self.name} has no analytic support predicate")

    def indistinct(self, a: PureState, b: PureState) -> bool:
        raise UndecidableError(f"{self.name} has no analytic overlap predicate")

    def overlap_points(self, a: PureState, b: PureState) -> list[OnticPoint]:
        """Explicit points of Δ_a ∩ Δ_b (empty when the states are distinct)."""
        raise UndecidableError(f"{self.name} cannot exhibit overlap points")

    def overlap_points_responding(
        self, a: PureState, b: PureState, measurement: ProjectiveMeasurement, k: int
    ) -> list[OnticPoint]:
        """Overlap points where outcome k of ``measurement`` has nonzero response."""
        pts = self.overlap_points(a, b)
        if not pts:
            return []
        xi = self.xi(self.to_batch(pts), measurement)[:, k]
        return [p for p, x in zip(pts, xi) if x > POSITIVITY_TOL]

    def supporting_states(self, point: OnticPoint) -> list[PureState]:
        """Distinct quantum states whose support contains ``point``."""
        raise UndecidableError(f"{self.name} cannot enumerate supporting states")

    def ontic_state_vector(self, point: OnticPoint) -> PureState:
        """The unique quantum state of a ψ-ontic point."""
        raise NotPsiOnticError(f"{self.name} is not ψ-ontic")

    def state_vectors(self, batch: Any) -> np.ndarray:
        """Row-stacked ψ_λ for a batch of ψ-ontic points."""
        n = self.batch_size(batch)
        return np.array([self.ontic_state_vector(self.point_at(batch, i)).amplitudes for i in range(n)])

    def sample_mu_each(self, states: np.ndarray, rng: np.random.Generator) -> Any:
        """One μ-sample per row state."""
        pieces = [(np.array([i]), self.sample_mu(PureState(v), rng, 1)) for i, v in enumerate(states)]
        return self.merge_batches(pieces, len(states))

    # -- exact face --------------------------------------------------------

    @property
    def has_exact(self) -> bool:
        return False

    def exact_sequential(
        self,
        state: PureState,
        measurements: Sequence[ProjectiveMeasurement],
        outcomes: Sequence[int],
        unitaries: Sequence[np.ndarray | None] | None = None,
    ) -> float:
        raise UnsupportedOperationError(f"{self.name} has no exact evaluation path")

    def update_witness(self) -> Any:
        """Witness explaining update incapability (``None`` when capable)."""
        return None

    def _refuse_update(self) -> None:
        raise UpdateImpossibleError(
            f"{self.name} cannot represent state update under measurement", self.update_witness()
        )


class EnumerableModel(OntologicalModel):
    """Finite ontic space; batches are integer index arrays."""

    enumerable = True

    @abstractmethod
    def ontic_points(self) -> list[OnticPoint]:
        ...

    @abstractmethod
    def mu_vector(self, state: PureState) -> np.ndarray:
        ...

    @abstractmethod
    def xi_table(self, measurement: ProjectiveMeasurement) -> np.ndarray:
        """Shape (N, num_outcomes)."""

    def eta_matrix(self, measurement: ProjectiveMeasurement, k: int) -> np.ndarray:
        """η(λ'|k, λ, M) as an (N, N) array; rows outside Supp ξ(k|·) are NaN."""
        self._refuse_update()
        raise AssertionError  # pragma: no cover

    def gamma_matrix(self, unitary: np.ndarray) -> np.ndarray:
        raise UnsupportedOperationError(f"{self.name} does not represent transformations")

    @property
    def size(self) -> int:
        return len(self.ontic_points())

    def index_of(self, point: OnticPoint) -> int:
        for i, q in enumerate(self.ontic_points()):
            if _points_equal(q, point):
                return i
        raise KeyError(point)

    # sampling face in terms of tables

    def sample_mu(self, state: PureState, rng: np.random.Generator, size: int) -> np.ndarray:
        mu = np.clip(self.mu_vector(state), 0.0, None)
        return rng.choice(mu.size, size=size, p=mu / mu.sum())

    def xi(self, batch: np.ndarray, measurement: ProjectiveMeasurement) -> np.ndarray:
        return self.xi_table(measurement)[np.asarray(batch, dtype=int)]

    def sample_eta(self, batch, outcomes, measurement, rng):
        batch = np.asarray(batch, dtype=int)
        out = np.empty_like(batch)
        for k in np.unique(outcomes):
            sel = np.flatnonzero(outcomes == k)
            rows = self.eta_matrix(measurement, int(k))[batch[sel]]
            if np.isnan(rows).any():
                raise ContractViolationError("η requested outside Supp ξ")
            out[sel] = sample_categorical(np.clip(rows, 0.0, None), rng)
        return out

    def apply_gamma(self, batch, unitary, rng):
        g = self.gamma_matrix(unitary)
        return sample_categorical(g[np.asarray(batch, dtype=int)], rng)

    def point_at(self, batch, i):
        return self.ontic_points()[int(batch[i])]

    def to_batch(self, points):
        return np.array([self.index_of(p) for p in points], dtype=int)

    # analytic face from supports

    def support_mask(self, state: PureState) -> np.ndarray:
        return self.mu_vector(state) > POSITIVITY_TOL

    def in_support(self, state, point):
        return bool(self.support_mask(state)[self.index_of(point)])

    def indistinct(self, a, b):
        return bool(np.any(self.support_mask(a) & self.support_mask(b)))

    def overlap_points(self, a, b):
        mask = self.support_mask(a) & self.support_mask(b)
        pts = self.ontic_points()
        return [pts[i] for i in np.flatnonzero(mask)]

    def supporting_states(self, point):
        i = self.index_of(point)
        found: list[PureState] = []
        for s in self.preparations.values():
            if self.support_mask(s)[i] and not any(s.same_ray(f) for f in found):
                found.append(s)
        return found

    @property
    def has_exact(self) -> bool:
        return True

    def exact_sequential(self, state, measurements, outcomes, unitaries=None):
        v = self.mu_vector(state).astype(float)
        for i, (m, k) in enumerate(zip(measurements, outcomes)):
            if unitaries is not None and unitaries[i] is not None:
                v = v @ self.gamma_matrix(unitaries[i])
            w = v * self.xi_table(m)[:, k]
            if i + 1 == len(measurements):
                return float(w.sum())
            if w.sum() <= POSITIVITY_TOL:
                return 0.0
            eta = np.nan_to_num(self.eta_matrix(m, k), nan=0.0)
            v = w @ eta
        raise ValueError("empty measurement sequence")


def _points_equal(a: OnticPoint, b: OnticPoint) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, BranchPoint):
        return a.branch == b.branch and _points_equal(a.point, b.point)
    if isinstance(a, (OutcomeTuple, PhasePoint)):
        return a == b
    if isinstance(a, SpherePoint):
        return bool(np.allclose(a.vector, b.vector))
    if isinstance(a, StateInterval):
        return a.state.same_ray(b.state) and abs(a.p - b.p) < 1e-12
    if isinstance(a, MontinaPoint):
        return (
            np.allclose(a.x_plus, b.x_plus) and np.allclose(a.x_minus, b.x_minus) and a.r == b.r and a.s == b.s
        )
    return a == b


# ---------------------------------------------------------------------------
# Verification


@dataclass(frozen=True)
class VerificationReport:
    """Model-vs-quantum comparison for one experiment and outcome string."""

    experiment: dict[str, Any]
    model_probability: float
    quantum_probability: float
    stderr: float
    samples: int = 0
    z: float = DEFAULT_Z

    @property
    def tolerance(self) -> float:
        return max(qcore.ATOL, self.z * self.stderr)

    @property
    def deviation(self) -> float:
        return abs(self.model_probability - self.quantum_probability)

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def as_row(self) -> dict[str, Any]:
        return {
            **self.experiment,
            "model_prob": self.model_probability,
            "quantum_prob": self.quantum_probability,
            "stderr": self.stderr,
            "samples": self.samples,
            "verdict": self.verdict,
        }


def _describe(obj: Any) -> Any:
    if isinstance(obj, str):
        return obj
    if isinstance(obj, ProjectiveMeasurement):
        return obj.label or f"measurement(ranks={list(obj.ranks)})"
    if isinstance(obj, PureState):
        return [[float(a.real), float(a.imag)] for a in obj.amplitudes]
    return "unitary"


def monte_carlo_tally(
    model: OntologicalModel,
    state: PureState,
    measurements: Sequence[ProjectiveMeasurement],
    rng: np.random.Generator,
    samples: int,
    unitaries: Sequence[np.ndarray | None] | None = None,
    chunk: int = CHUNK,
) -> np.ndarray:
    """Estimated joint outcome distribution over all outcome strings.

    Samples λ ~ μ, then for each measurement but the last draws k from ξ and
    λ' from η.  The last measurement contributes ξ itself rather than a draw.
    Work is split into chunks with independent child streams; the merged tally
    does not depend on chunk order.
    """
    shape = tuple(len(m) for m in measurements)
    nchunks = max(1, math.ceil(samples / chunk))
    streams = rng.spawn(nchunks)
    tally = np.zeros(shape)
    remaining = samples
    for stream in streams:
        n = min(chunk, remaining)
        remaining -= n
        batch = model.sample_mu(state, stream, n)
        prefix = np.zeros((n, 0), dtype=int)
        for i, m in enumerate(measurements):
            if unitaries is not None and unitaries[i] is not None:
                batch = model.apply_gamma(batch, unitaries[i], stream)
            probs = model.xi(batch, m)
            if i + 1 == len(measurements):
                flat = np.ravel_multi_index(prefix.T, shape[:-1]) if prefix.shape[1] else np.zeros(n, dtype=int)
                part = np.zeros((int(np.prod(shape[:-1], dtype=int)), shape[-1]))
                np.add.at(part, flat, probs)
                tally += part.reshape(shape)
            else:
                k = sample_categorical(probs, stream)
                prefix = np.column_stack([prefix, k])
                batch = model.sample_eta(batch, k, m, stream)
    return tally / samples


def _mc_stderr(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _check_chain(
    model: OntologicalModel,
    prep: str | PureState,
    measurements: Sequence[str | ProjectiveMeasurement],
    outcomes: Sequence[Sequence[int]] | None,
    transformation: str | np.ndarray | None,
    samples: int | None,
    rng: np.random.Generator | None,
    z: float,
    method: str,
) -> list[VerificationReport]:
    state = model.resolve_preparation(prep)
    meas = [model.resolve_measurement(m) for m in measurements]
    unitaries: list[np.ndarray | None] | None = None
    if transformation is not None:
        unitaries = [model.resolve_transformation(transformation)] + [None] * (len(meas) - 1)
    strings = list(outcomes) if outcomes is not None else list(qcore.outcome_strings(meas))
    base = {
        "preparation": _describe(prep),
        "transformation": None if transformation is None else _describe(transformation),
        "measurements": [_describe(m) for m in measurements],
    }
    use_exact = method == "exact" or (method == "auto" and model.has_exact)
    reports = []
    if use_exact:
        for ks in strings:
            pm = model.exact_sequential(state, meas, ks, unitaries)
            pq = qcore.sequential_probability(state, meas, ks, unitaries)
            reports.append(VerificationReport({**base, "outcomes": list(ks)}, pm, pq, 0.0, 0, z))
        return reports
    if samples is None or rng is None:
        raise ValueError("Monte-Carlo verification needs an explicit sample count and random stream")
    tally = monte_carlo_tally(model, state, meas, rng, samples, unitaries)
    for ks in strings:
        pq = qcore.sequential_probability(state, meas, ks, unitaries)
        reports.append(
            VerificationReport(
                {**base, "outcomes": list(ks)}, float(tally[tuple(ks)]), pq, _mc_stderr(pq, samples), samples, z
            )
        )
    return reports


def check_prepare_measure(
    model: OntologicalModel,
    prep: str | PureState,
    measurement: str | ProjectiveMeasurement,
    samples: int | None = None,
    rng: np.random.Generator | None = None,
    z: float = DEFAULT_Z,
    method: str = "auto",
) -> list[VerificationReport]:
    """One report per outcome of a prepare-and-measure-once experiment."""
    return _check_chain(model, prep, [measurement], None, None, samples, rng, z, method)


def check_prepare_transform_measure(
    model: OntologicalModel,
    prep: str | PureState,
    transformation: str | np.ndarray,
    measurement: str | ProjectiveMeasurement,
    samples: int | None = None,
    rng: np.random.Generator | None = None,
    z: float = DEFAULT_Z,
    method: str = "auto",
) -> list[VerificationReport]:
    if not model.supports_transformations:
        raise UnsupportedOperationError(f"{model.name} does not represent transformations")
    return _check_chain(model, prep, [measurement], None, transformation, samples, rng, z, method)


def check_sequential(
    model: OntologicalModel,
    prep: str | PureState,
    measurements: Sequence[str | ProjectiveMeasurement],
    outcomes: Sequence[int] | None = None,
    samples: int | None = None,
    rng: np.random.Generator | None = None,
    z: float = DEFAULT_Z,
    method: str = "auto",
) -> list[VerificationReport]:
    """Chained μ → ξ → η → ξ statistics vs. the quantum sequential probability.

    With ``outcomes=None`` every outcome string is reported.  Models without a
    valid update rule raise :class:`UpdateImpossibleError`.
    """
    if not model.update_capable:
        model._refuse_update()
    strings = None if outcomes is None else [tuple(outcomes)]
    return _check_chain(model, prep, measurements, strings, None, samples, rng, z, method)


# ---------------------------------------------------------------------------
# Generic update-rule constructions


class UpdateRule:
    """η as a sampler (and as a table for enumerable models)."""

    def __init__(
        self,
        sampler: Callable[[Any, np.ndarray, ProjectiveMeasurement, np.random.Generator], Any],
        matrix: Callable[[ProjectiveMeasurement, int], np.ndarray] | None = None,
    ) -> None:
        self._sampler = sampler
        self._matrix = matrix

    def sample(self, batch, outcomes, measurement, rng):
        return self._sampler(batch, outcomes, measurement, rng)

    def matrix(self, measurement: ProjectiveMeasurement, k: int) -> np.ndarray:
        if self._matrix is None:
            raise UnsupportedOperationError("update rule has no tabular form")
        return self._matrix(measurement, k)


def rank1_update_rule(model: OntologicalModel) -> UpdateRule:
    """Re-prepare the measured state: η(λ'|k, λ, M) = μ(λ'|P_{Π_k}) for rank-1 Π_k."""

    def check(measurement: ProjectiveMeasurement) -> list[PureState | None]:
        states: list[PureState | None] = []
        for p in measurement.projectors:
            if p.rank >= 2:
                raise UnsupportedOperationError("re-preparation update needs rank-1 projectors")
            if p.rank == 0:
                states.append(None)
            else:
                w, v = np.linalg.eigh(p.matrix)
                states.append(PureState(v[:, np.argmax(w)]))
        return states

    for m in model.measurements.values():
        check(m)

    def sampler(batch, outcomes, measurement, rng):
        states = check(measurement)
        n = model.batch_size(batch)
        pieces = []
        for k in np.unique(outcomes):
            idx = np.flatnonzero(outcomes == k)
            st = states[int(k)]
            if st is None:
                raise ContractViolationError("η requested outside Supp ξ")
            pieces.append((idx, model.sample_mu(st, rng, len(idx))))
        return model.merge_batches(pieces, n)

    def matrix(measurement, k):
        st = check(measurement)[k]
        xi = model.xi_table(measurement)[:, k]
        if st is None:
            return np.full((len(xi), len(xi)), np.nan)
        mu = model.mu_vector(st)
        out = np.tile(mu, (len(xi), 1))
        out[xi <= POSITIVITY_TOL] = np.nan
        return out

    return UpdateRule(sampler, matrix if model.enumerable else None)


def psi_ontic_update_rule(model: OntologicalModel) -> UpdateRule:
    """η(λ'|k, λ, M) = μ(λ'| Π_k|ψ_λ⟩ normalized) for ψ-ontic models."""
    if not model.psi_ontic:
        raise NotPsiOnticError(f"{model.name}: ontic states are compatible with several quantum states")

    def sampler(batch, outcomes, measurement, rng):
        vecs = model.state_vectors(batch)
        post = np.einsum("nij,nj->ni", measurement.matrices[outcomes], vecs)
        norms = np.linalg.norm(post, axis=1)
        if np.any(norms**2 <= POSITIVITY_TOL):
            raise ContractViolationError("η requested outside Supp ξ")
        post = post / norms[:, None]
        return model.sample_mu_each(post, rng)

    return UpdateRule(sampler)


# ---------------------------------------------------------------------------
# Convex combinations


@dataclass
class MixtureBatch:
    size: int
    parts: list[tuple[int, np.ndarray, Any]] = field(default_factory=list)

    def __len__(self) -> int:
        return self.size


class _MixtureMixin:
    components: list[OntologicalModel]
    weights: np.ndarray

    def _init_mixture(self, components, weights, name):
        OntologicalModel.__init__(self)  # type: ignore[arg-type]
        self.components = list(components)
        self.weights = np.asarray(weights, dtype=float)
        self.name = name
        first = self.components[0]
        self.d = first.d
        self.full_theory = first.full_theory
        self.psi_ontic = False
        self.update_capable = all(c.update_capable for c in self.components)
        for c in self.components:
            if c.d != self.d:
                raise DimensionMismatchError("mixture components differ in dimension")
            self.preparations.update(c.preparations)
            self.measurements.update(c.measurements)
            self.transformations.update(c.transformations)

    def describe(self):
        return {
            "name": self.name,
            "d": self.d,
            "weights": [float(w) for w in self.weights],
            "components": [c.describe() for c in self.components],
        }

    @property
    def supports_transformations(self) -> bool:
        return all(c.supports_transformations for c in self.components)

    def accepts_state(self, state):
        return all(c.accepts_state(state) for c in self.components)

    def accepts_measurement(self, meas):
        for c in self.components:
            meas = c.accepts_measurement(meas)
        return meas

    def _live(self):
        return [(b, c) for b, c in enumerate(self.components) if self.weights[b] > 0]

    def in_support(self, state, point):
        b = point.branch
        return bool(self.weights[b] > 0 and self.components[b].in_support(state, point.point))

    def indistinct(self, a, b):
        return any(c.indistinct(a, b) for _, c in self._live())

    def overlap_points(self, a, b):
        return [BranchPoint(i, q) for i, c in self._live() for q in c.overlap_points(a, b)]

    def supporting_states(self, point):
        return self.components[point.branch].supporting_states(point.point)

    def update_witness(self):
        """First component witness, lifted onto the mixture's branch-tagged points."""
        for b, c in enumerate(self.components):
            if not c.update_capable:
                w = c.update_witness()
                if w is None:
                    return None
                return replace(w, model_id=self.name, point=BranchPoint(b, w.point))
        return None

    @property
    def has_exact(self) -> bool:
        return all(c.has_exact for c in self.components)

    def exact_sequential(self, state, measurements, outcomes, unitaries=None):
        return float(
            sum(w * c.exact_sequential(state, measurements, outcomes, unitaries) for w, c in zip(self.weights, self.components) if w > 0)
        )


class SamplingMixture(_MixtureMixin, OntologicalModel):
    """Disjoint-union mixture of sampling models."""

    def __init__(self, components, weights, name="mixture"):
        self._init_mixture(components, weights, name)

    def sample_mu(self, state, rng, size):
        branch = rng.choice(len(self.components), size=size, p=self.weights)
        out = MixtureBatch(size)
        for b, c in self._live():
            idx = np.flatnonzero(branch == b)
            if idx.size:
                out.parts.append((b, idx, c.sample_mu(state, rng, idx.size)))
        return out

    def xi(self, batch, measurement):
        res = np.zeros((batch.size, len(measurement)))
        for b, idx, part in batch.parts:
            res[idx] = self.components[b].xi(part, measurement)
        return res

    def sample_eta(self, batch, outcomes, measurement, rng):
        if not self.update_capable:
            self._refuse_update()
        out = MixtureBatch(batch.size)
        for b, idx, part in batch.parts:
            out.parts.append((b, idx, self.components[b].sample_eta(part, outcomes[idx], measurement, rng)))
        return out

    def apply_gamma(self, batch, unitary, rng):
        out = MixtureBatch(batch.size)
        for b, idx, part in batch.parts:
            out.parts.append((b, idx, self.components[b].apply_gamma(part, unitary, rng)))
        return out

    def point_at(self, batch, i):
        for b, idx, part in batch.parts:
            pos = np.flatnonzero(idx == i)
            if pos.size:
                return BranchPoint(b, self.components[b].point_at(part, int(pos[0])))
        raise IndexError(i)

    def to_batch(self, points):
        out = MixtureBatch(len(points))
        for b, c in enumerate(self.components):
            idx = np.array([i for i, p in enumerate(points) if p.branch == b], dtype=int)
            if idx.size:
                out.parts.append((b, idx, c.to_batch([points[i].point for i in idx])))
        return out

    def merge_batches(self, pieces, n):
        raise UnsupportedOperationError("mixtures are resampled per component")


class EnumerableMixture(_MixtureMixin, EnumerableModel):
    """Disjoint-union mixture of enumerable models; η acts blockwise."""

    def __init__(self, components, weights, name="mixture"):
        self._init_mixture(components, weights, name)
        self._points = [BranchPoint(b, q) for b, c in enumerate(self.components) for q in c.ontic_points()]

    def ontic_points(self):
        return self._points

    def index_of(self, point):
        offset = sum(c.size for c in self.components[: point.branch])
        return offset + self.components[point.branch].index_of(point.point)

    def mu_vector(self, state):
        return np.concatenate([w * c.mu_vector(state) for w, c in zip(self.weights, self.components)])

    def support_mask(self, state):
        return np.concatenate(
            [(c.support_mask(state) if w > 0 else np.zeros(c.size, bool)) for w, c in zip(self.weights, self.components)]
        )

    def xi_table(self, measurement):
        return np.vstack([c.xi_table(measurement) for c in self.components])

    def eta_matrix(self, measurement, k):
        if not self.update_capable:
            self._refuse_update()
        blocks = [c.eta_matrix(measurement, k) for c in self.components]
        out = block_diag(*[np.nan_to_num(b, nan=0.0) for b in blocks])
        nan_rows = np.concatenate([np.isnan(b).any(axis=1) for b in blocks])
        out[nan_rows] = np.nan
        return out

    def gamma_matrix(self, unitary):
        return block_diag(*[c.gamma_matrix(unitary) for c in self.components])

    def supporting_states(self, point):
        return self.components[point.branch].supporting_states(point.point)

    def in_support(self, state, point):
        return _MixtureMixin.in_support(self, state, point)

    def indistinct(self, a, b):
        return _MixtureMixin.indistinct(self, a, b)

    def overlap_points(self, a, b):
        return _MixtureMixin.overlap_points(self, a, b)

    exact_sequential = EnumerableModel.exact_sequential

    @property
    def has_exact(self) -> bool:
        return True


def mixture(components: Sequence[OntologicalModel], weights: Sequence[float], name: str = "mixture") -> OntologicalModel:
    """n-ary disjoint-union mixture; equal to iterated :func:`convex_combination`."""
    w = np.asarray(weights, dtype=float)
    if len(w) != len(components) or not components:
        raise ValueError("one weight per component required")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    cls = EnumerableMixture if all(c.enumerable for c in components) else SamplingMixture
    return cls(components, w, name)


def convex_combination(model1: OntologicalModel, model2: OntologicalModel, p: float) -> OntologicalModel:
    """Λ₃ = Λ₁ ⊕ Λ₂, μ₃ = pμ₁ + (1−p)μ₂, with ξ₃ and η₃ acting on each branch."""
    if not 0.0 < p < 1.0:
        raise ValueError("mixing weight must lie strictly between 0 and 1")
    if model1.d != model2.d:
        raise DimensionMismatchError("models differ in dimension")
    return mixture([model1, model2], [p, 1.0 - p], name=f"({model1.name}+{model2.name})")


# ---------------------------------------------------------------------------
# Epistemicity


@dataclass(frozen=True)
class EpistemicityReport:
    psi_epistemic: bool
    witness_pair: tuple[int, int] | None
    pairwise: bool
    never_psi_ontic: bool
    states_checked: int
    points_checked: int

    @property
    def psi_ontic(self) -> bool:
        return not self.psi_epistemic

    def as_dict(self) -> dict[str, Any]:
        return {
            "psi_epistemic": self.psi_epistemic,
            "witness_pair": None if self.witness_pair is None else list(self.witness_pair),
            "pairwise_psi_epistemic": self.pairwise,
            "never_psi_ontic": self.never_psi_ontic,
            "states_checked": self.states_checked,
            "points_checked": self.points_checked,
        }


def classify_epistemicity(
    model: OntologicalModel,
    states: Sequence[PureState],
    exhaustive: bool = False,
    rng: np.random.Generator | None = None,
    samples_per_state: int = 64,
) -> EpistemicityReport:
    """Decide the epistemicity classes over a finite set of quantum states.

    Overlap is always decided by the model's analytic predicate.  For
    never-ψ-ontic, enumerable models check every point lying in some support
    (all points when ``exhaustive``); sampling models check μ-samples of the
    supplied states, asking the model for analytic supporting states of each.
    """
    witness = None
    pairwise = True
    for i, j in itertools.combinations(range(len(states)), 2):
        a, b = states[i], states[j]
        if a.same_ray(b):
            continue
        ind = model.indistinct(a, b)
        if ind and witness is None:
            witness = (i, j)
        if not ind and a.overlap(b) > POSITIVITY_TOL:
            pairwise = False

    if model.enumerable:
        pts_idx = range(model.size)
        if not exhaustive:
            reach = np.zeros(model.size, bool)
            for s in states:
                reach |= model.support_mask(s)
            pts_idx = np.flatnonzero(reach)
        points = [model.ontic_points()[i] for i in pts_idx]
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        points = []
        for s in states:
            batch = model.sample_mu(s, rng, samples_per_state)
            points.extend(model.point_at(batch, i) for i in range(samples_per_state))
    never_ontic = True
    for pt in points:
        sup = model.supporting_states(pt) if not model.enumerable else _enumerable_supporters(model, pt, states)
        sup = [s for s in sup if model.in_support(s, pt)]
        distinct: list[PureState] = []
        for s in sup:
            if not any(s.same_ray(t) for t in distinct):
                distinct.append(s)
        if len(distinct) < 2:
            never_ontic = False
            break
    return EpistemicityReport(witness is not None, witness, pairwise, never_ontic, len(states), len(points))


def _enumerable_supporters(model: EnumerableModel, point: OnticPoint, states: Sequence[PureState]) -> list[PureState]:
    pool = list(states) + list(model.preparations.values())
    return [s for s in pool if model.in_support(s, point)]
