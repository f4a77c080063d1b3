"""Finite-dimensional quantum mechanics used as ground truth.

Pure states, density matrices, projectors, projective measurements and
instruments, together with the Born rule, the Lüders update and chained
sequential-outcome probabilities.  Every object is immutable; every function
is pure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import unitary_group

from .errors import DimensionMismatchError, OutcomeIndexError, UndefinedUpdateError

ATOL = 1e-10
NORM_TOL = 1e-12
PHASE_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def canonical_phase(vec: np.ndarray, tol: float = PHASE_TOL) -> np.ndarray:
    """Rotate the global phase so the first nonzero amplitude is real positive."""
    vec = np.asarray(vec, dtype=complex)
    nz = np.flatnonzero(np.abs(vec) > tol)
    if nz.size == 0:
        return vec.copy()
    a = vec[nz[0]]
    return vec * (abs(a) / a)


@dataclass(frozen=True, eq=False)
class PureState:
    """A ray in C^d, stored normalized and phase-canonicalized."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.amplitudes, dtype=complex).ravel()
        if v.size == 0:
            raise ValueError("empty state vector")
        norm = np.linalg.norm(v)
        if norm < NORM_TOL:
            raise ValueError("zero vector is not a state")
        object.__setattr__(self, "amplitudes", _frozen(canonical_phase(v / norm)))

    @classmethod
    def basis(cls, d: int, j: int) -> PureState:
        v = np.zeros(d, dtype=complex)
        v[j] = 1.0
        return cls(v)

    @property
    def d(self) -> int:
        return self.amplitudes.size

    @cached_property
    def projector(self) -> np.ndarray:
        return _frozen(np.outer(self.amplitudes, self.amplitudes.conj()))

    def inner(self, other: PureState) -> complex:
        """<self|other>."""
        _check_dims(self.d, other.d)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def overlap(self, other: PureState) -> float:
        """|<self|other>|^2."""
        return abs(self.inner(other)) ** 2

    def same_ray(self, other: PureState, atol: float = ATOL) -> bool:
        return self.d == other.d and abs(1.0 - self.overlap(other)) <= atol

    def expectation(self, op: np.ndarray) -> float:
        return float(np.real(np.vdot(self.amplitudes, op @ self.amplitudes)))

    def density(self) -> DensityMatrix:
        return DensityMatrix(self.projector)

    def evolve(self, unitary: np.ndarray) -> PureState:
        _check_dims(self.d, unitary.shape[0])
        return PureState(unitary @ self.amplitudes)

    def __repr__(self) -> str:
        amps = np.array2string(self.amplitudes, precision=4, suppress_small=True)
        return f"PureState({amps})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if not np.allclose(m, m.conj().T, atol=NORM_TOL):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > NORM_TOL:
            raise ValueError(f"density matrix trace {np.trace(m).real} != 1")
        if np.linalg.eigvalsh(m).min() < -ATOL:
            raise ValueError("density matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def is_pure(self, atol: float = ATOL) -> bool:
        return abs(self.purity() - 1.0) <= atol

    def to_pure(self) -> PureState:
        if not self.is_pure():
            raise ValueError("density matrix is mixed")
        w, v = np.linalg.eigh(self.matrix)
        return PureState(v[:, np.argmax(w)])

    def close_to(self, other: DensityMatrix, atol: float = ATOL) -> bool:
        return np.allclose(self.matrix, other.matrix, atol=atol)


@dataclass(frozen=True, eq=False)
class Projector:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("projector must be square")
        if not np.allclose(m, m.conj().T, atol=NORM_TOL):
            raise ValueError("projector is not Hermitian")
        if not np.allclose(m @ m, m, atol=ATOL):
            raise ValueError("projector is not idempotent")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def onto(cls, *states: PureState | np.ndarray) -> Projector:
        """Projector onto the span of mutually orthogonal states."""
        vecs = [s.amplitudes if isinstance(s, PureState) else np.asarray(s, dtype=complex) for s in states]
        vecs = [v / np.linalg.norm(v) for v in vecs]
        return cls(sum(np.outer(v, v.conj()) for v in vecs))

    @classmethod
    def zero(cls, d: int) -> Projector:
        return cls(np.zeros((d, d), dtype=complex))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(round(float(np.real(np.trace(self.matrix)))))

    def complement(self) -> Projector:
        return Projector(np.eye(self.d) - self.matrix)


def _as_projector(p: Projector | np.ndarray) -> Projector:
    return p if isinstance(p, Projector) else Projector(p)


@dataclass(frozen=True, eq=False)
class ProjectiveMeasurement:
    """Ordered, complete set of orthogonal projectors.  Outcome k is index k."""

    projectors: tuple[Projector, ...]
    label: str = field(default="")

    def __post_init__(self) -> None:
        projs = tuple(_as_projector(p) for p in self.projectors)
        if not projs:
            raise ValueError("measurement needs at least one projector")
        d = projs[0].d
        for p in projs:
            _check_dims(d, p.d)
        for i in range(len(projs)):
            for j in range(i + 1, len(projs)):
                if np.linalg.norm(projs[i].matrix @ projs[j].matrix) > ATOL:
                    raise ValueError(f"projectors {i} and {j} are not orthogonal")
        total = sum(p.matrix for p in projs)
        if not np.allclose(total, np.eye(d), atol=ATOL):
            raise ValueError("projectors do not sum to the identity")
        object.__setattr__(self, "projectors", projs)

    @classmethod
    def from_basis(cls, vectors: np.ndarray | Sequence[PureState], label: str = "") -> ProjectiveMeasurement:
        """Rank-1 measurement; ``vectors`` is a unitary whose columns are the basis."""
        if isinstance(vectors, np.ndarray):
            cols = [vectors[:, k] for k in range(vectors.shape[1])]
        else:
            cols = [s.amplitudes for s in vectors]
        return cls(tuple(Projector.onto(c) for c in cols), label)

    @classmethod
    def computational(cls, d: int) -> ProjectiveMeasurement:
        return cls.from_basis(np.eye(d, dtype=complex), label="Z")

    @classmethod
    def binary(cls, projector: Projector | np.ndarray, label: str = "") -> ProjectiveMeasurement:
        """The two-outcome context {Π, 𝕀 − Π}."""
        p = _as_projector(projector)
        return cls((p, p.complement()), label)

    def padded(self, d: int | None = None) -> ProjectiveMeasurement:
        """Append zero projectors until there are ``d`` outcomes."""
        d = self.d if d is None else d
        extra = tuple(Projector.zero(self.d) for _ in range(d - len(self.projectors)))
        return ProjectiveMeasurement(self.projectors + extra, self.label)

    def coarse_grained(self, groups: Sequence[Sequence[int]], label: str = "") -> ProjectiveMeasurement:
        """Coherent coarse-graining: each group of outcomes becomes one projector."""
        return ProjectiveMeasurement(
            tuple(Projector(sum(self.projectors[i].matrix for i in g)) for g in groups), label
        )

    @property
    def d(self) -> int:
        return self.projectors[0].d

    @property
    def num_outcomes(self) -> int:
        return len(self.projectors)

    def __len__(self) -> int:
        return len(self.projectors)

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(range(len(self.projectors)))

    @cached_property
    def matrices(self) -> np.ndarray:
        return _frozen(np.stack([p.matrix for p in self.projectors]))

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(p.rank for p in self.projectors)

    def probabilities(self, state: PureState) -> np.ndarray:
        _check_dims(self.d, state.d)
        v = state.amplitudes
        return np.real(np.einsum("i,kij,j->k", v.conj(), self.matrices, v))

    def same_as(self, other: ProjectiveMeasurement, atol: float = 1e-8) -> bool:
        return (
            self.d == other.d
            and len(self) == len(other)
            and np.allclose(self.matrices, other.matrices, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class Instrument:
    """Outcome-indexed sets of Kraus operators."""

    kraus_sets: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self) -> None:
        sets = tuple(tuple(_frozen(k) for k in ks) for ks in self.kraus_sets)
        d = sets[0][0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for ks in sets:
            for k in ks:
                _check_dims(d, k.shape[0])
                total += k.conj().T @ k
        if not np.allclose(total, np.eye(d), atol=ATOL):
            raise ValueError("instrument is not trace preserving")
        object.__setattr__(self, "kraus_sets", sets)

    @property
    def d(self) -> int:
        return self.kraus_sets[0][0].shape[0]

    @property
    def num_outcomes(self) -> int:
        return len(self.kraus_sets)

    @classmethod
    def from_measurement(cls, measurement: ProjectiveMeasurement) -> Instrument:
        return cls(tuple((p.matrix,) for p in measurement.projectors))

    @classmethod
    def decoherent_merge(cls, measurement: ProjectiveMeasurement, groups: Sequence[Sequence[int]]) -> Instrument:
        """Measure finely, then forget which outcome inside each group occurred."""
        return cls(tuple(tuple(measurement.projectors[i].matrix for i in g) for g in groups))

    @classmethod
    def coherent_merge(cls, measurement: ProjectiveMeasurement, groups: Sequence[Sequence[int]]) -> Instrument:
        return cls.from_measurement(measurement.coarse_grained(groups))

    def effects(self) -> list[np.ndarray]:
        return [sum(k.conj().T @ k for k in ks) for ks in self.kraus_sets]


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatchError(f"dimension mismatch: {a} vs {b}")


def _check_outcome(measurement: ProjectiveMeasurement | Instrument, k: int) -> None:
    n = measurement.num_outcomes
    if not 0 <= k < n:
        raise OutcomeIndexError(f"outcome {k} out of range for {n}-outcome measurement")


def born_probability(state: PureState, measurement: ProjectiveMeasurement, k: int) -> float:
    _check_dims(state.d, measurement.d)
    _check_outcome(measurement, k)
    return state.expectation(measurement.projectors[k].matrix)


def luders_update(state: PureState, projector: Projector | np.ndarray) -> PureState:
    """Π|ψ⟩ / ‖Π|ψ⟩‖.  Raises :class:`UndefinedUpdateError` on a zero-probability branch."""
    pm = projector.matrix if isinstance(projector, Projector) else np.asarray(projector, dtype=complex)
    _check_dims(state.d, pm.shape[0])
    prob = state.expectation(pm)
    if prob <= NORM_TOL:
        raise UndefinedUpdateError(f"update undefined: outcome has probability {prob:.3g}")
    return PureState(pm @ state.amplitudes)


def sequential_probability(
    state: PureState,
    measurements: Sequence[ProjectiveMeasurement],
    outcomes: Sequence[int],
    unitaries: Sequence[np.ndarray | None] | None = None,
) -> float:
    """Pr(k_n, ..., k_1 | M_n, ..., M_1, P) by chaining Born and Lüders.

    ``unitaries[i]``, when given, is applied before ``measurements[i]``.
    """
    if len(measurements) != len(outcomes) or not measurements:
        raise ValueError("measurements and outcomes must be non-empty and of equal length")
    total = 1.0
    cur = state
    for i, (m, k) in enumerate(zip(measurements, outcomes)):
        if unitaries is not None and unitaries[i] is not None:
            cur = cur.evolve(unitaries[i])
        pk = born_probability(cur, m, k)
        total *= pk
        if total <= NORM_TOL:
            return 0.0
        if i + 1 < len(measurements):
            cur = luders_update(cur, m.projectors[k])
    return total


def apply_instrument(rho: DensityMatrix, instrument: Instrument, k: int) -> tuple[float, DensityMatrix]:
    _check_dims(rho.d, instrument.d)
    _check_outcome(instrument, k)
    out = sum(K @ rho.matrix @ K.conj().T for K in instrument.kraus_sets[k])
    prob = float(np.real(np.trace(out)))
    if prob <= NORM_TOL:
        raise UndefinedUpdateError(f"instrument outcome {k} has probability {prob:.3g}")
    out = out / prob
    return prob, DensityMatrix(0.5 * (out + out.conj().T))


def outcome_strings(measurements: Sequence[ProjectiveMeasurement]) -> Iterable[tuple[int, ...]]:
    return itertools.product(*(range(len(m)) for m in measurements))


def fourier_basis(d: int) -> np.ndarray:
    """Columns |X_k> = d^{-1/2} Σ_j ω^{jk} |j>, ω = e^{2πi/d}."""
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)


def haar_state(d: int, rng: np.random.Generator) -> PureState:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return PureState(v)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(d, random_state=rng)


def random_measurement(d: int, rng: np.random.Generator, coarse: bool = False) -> ProjectiveMeasurement:
    """Haar-random orthonormal basis; with ``coarse`` the first two vectors are merged."""
    m = ProjectiveMeasurement.from_basis(haar_unitary(d, rng))
    if coarse and d >= 3:
        groups = [[0, 1]] + [[i] for i in range(2, d)]
        m = m.coarse_grained(groups)
    return m
