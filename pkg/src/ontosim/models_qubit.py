"""Qubit models on the Bloch sphere: Kochen-Specker and Montina."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .ontomodel import (
    ArrayBatch,
    MontinaPoint,
    OntologicalModel,
    SpherePoint,
    rank1_update_rule,
)
from .qcore import ProjectiveMeasurement, PureState

PAULIS = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
N_AXIS = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class BlochVector:
    vector: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.vector, dtype=float)
        if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError("Bloch vector must be a unit 3-vector")
        object.__setattr__(self, "vector", v)

    @classmethod
    def from_state(cls, state: PureState) -> BlochVector:
        return cls(bloch_vector(state))

    def to_state(self) -> PureState:
        return state_from_bloch(self.vector)


def bloch_vector(state: PureState) -> np.ndarray:
    if state.d != 2:
        raise DimensionMismatchError("Bloch vectors exist only for qubits")
    v = np.real(np.einsum("i,kij,j->k", state.amplitudes.conj(), PAULIS, state.amplitudes))
    return v / np.linalg.norm(v)


def state_from_bloch(v: np.ndarray) -> PureState:
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    theta = np.arccos(np.clip(v[2], -1.0, 1.0))
    phi = np.arctan2(v[1], v[0])
    return PureState(np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)]))


def rotation_of(unitary: np.ndarray) -> np.ndarray:
    """SO(3) matrix R with R_ij = ½ tr(σ_i U σ_j U†)."""
    u = np.asarray(unitary, dtype=complex)
    if u.shape != (2, 2):
        raise DimensionMismatchError("qubit unitary expected")
    rot = 0.5 * np.real(np.einsum("iab,bc,jcd,ad->ij", PAULIS, u, PAULIS, u.conj()))
    return rot


def measurement_axis(measurement: ProjectiveMeasurement) -> np.ndarray | int:
    """Bloch direction of outcome 0 (k = +1), or the index of a trivial outcome."""
    if measurement.d != 2 or len(measurement) != 2:
        raise DimensionMismatchError("qubit measurements have two outcomes")
    ranks = measurement.ranks
    if ranks[0] == 2:
        return 0
    if ranks[1] == 2:
        return 1
    p0 = measurement.projectors[0].matrix
    v = np.real(np.einsum("ab,kba->k", p0, PAULIS))
    return v / np.linalg.norm(v)


def _orthonormal_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(axis, e1)


def _perpendicular(axis: np.ndarray) -> np.ndarray:
    return _orthonormal_frame(axis)[0]


def _sign(x: np.ndarray) -> np.ndarray:
    """Sign with ties broken toward +1."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def _uniform_sphere(rng: np.random.Generator, size: int) -> np.ndarray:
    v = rng.normal(size=(size, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _trivial_xi(size: int, which: int) -> np.ndarray:
    out = np.zeros((size, 2))
    out[:, which] = 1.0
    return out


def _standard_qubit_sets(model: OntologicalModel) -> None:
    s = 1 / np.sqrt(2)
    model.preparations = {
        "0": PureState([1, 0]),
        "1": PureState([0, 1]),
        "+": PureState([s, s]),
        "-": PureState([s, -s]),
        "+i": PureState([s, 1j * s]),
        "-i": PureState([s, -1j * s]),
    }
    model.measurements = {
        "Z": ProjectiveMeasurement.computational(2),
        "X": ProjectiveMeasurement.from_basis(np.array([[s, s], [s, -s]], dtype=complex), "X"),
        "Y": ProjectiveMeasurement.from_basis(np.array([[s, s], [1j * s, -1j * s]], dtype=complex), "Y"),
    }
    model.transformations = {
        "I": np.eye(2, dtype=complex),
        "H": np.array([[s, s], [s, -s]], dtype=complex),
        "S": np.diag([1, 1j]).astype(complex),
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
    }


class KochenSpeckerModel(OntologicalModel):
    """Λ = S², μ ∝ Θ(ψ·λ) ψ·λ, ξ a hemisphere indicator, η re-prepares."""

    name = "ks"

    def __init__(self) -> None:
        super().__init__()
        self.d = 2
        _standard_qubit_sets(self)
        self._eta = rank1_update_rule(self)

    @staticmethod
    def mu_density(state: PureState, point: SpherePoint) -> float:
        c = float(bloch_vector(state) @ point.vector)
        return c / np.pi if c > 0 else 0.0

    def sample_mu(self, state, rng, size):
        axis = bloch_vector(state)
        e1, e2 = _orthonormal_frame(axis)
        u = 1.0 - rng.random(size)
        cos_t = np.sqrt(u)
        sin_t = np.sqrt(1.0 - u)
        az = rng.uniform(0.0, 2 * np.pi, size)
        return (
            cos_t[:, None] * axis
            + (sin_t * np.cos(az))[:, None] * e1
            + (sin_t * np.sin(az))[:, None] * e2
        )

    def xi(self, batch, measurement):
        axis = measurement_axis(measurement)
        if isinstance(axis, int):
            return _trivial_xi(len(batch), axis)
        plus = (batch @ axis >= 0).astype(float)
        return np.column_stack([plus, 1.0 - plus])

    def sample_eta(self, batch, outcomes, measurement, rng):
        axis = measurement_axis(measurement)
        if isinstance(axis, int):
            return batch.copy()
        return self._eta.sample(batch, outcomes, measurement, rng)

    def apply_gamma(self, batch, unitary, rng):
        return batch @ rotation_of(unitary).T

    def point_at(self, batch, i):
        return SpherePoint(batch[i])

    def to_batch(self, points):
        return np.array([p.vector for p in points], dtype=float).reshape(-1, 3)

    def in_support(self, state, point):
        return bool(bloch_vector(state) @ point.vector > 0)

    def indistinct(self, a, b):
        return bool(bloch_vector(a) @ bloch_vector(b) > -1.0 + 1e-12)

    def overlap_points(self, a, b):
        if not self.indistinct(a, b):
            return []
        m = bloch_vector(a) + bloch_vector(b)
        return [SpherePoint(m / np.linalg.norm(m))]

    def supporting_states(self, point):
        v = point.vector
        tilt = (v + _perpendicular(v)) / np.sqrt(2)
        return [state_from_bloch(v), state_from_bloch(tilt)]


@dataclass
class MontinaBatch(ArrayBatch):
    x_plus: np.ndarray
    x_minus: np.ndarray
    r: np.ndarray
    s: np.ndarray

    def active(self) -> np.ndarray:
        return np.where((self.r == 1)[:, None], self.x_plus, self.x_minus)


class MontinaModel(OntologicalModel):
    """Two Bloch vectors plus an active-vector bit r and a standard-basis bit s."""

    name = "montina"

    def __init__(self) -> None:
        super().__init__()
        self.d = 2
        self.n = N_AXIS
        _standard_qubit_sets(self)

    @staticmethod
    def _choose(xp: np.ndarray, xm: np.ndarray, axis: np.ndarray) -> np.ndarray:
        return _sign((xp @ axis) ** 2 - (xm @ axis) ** 2)

    def sample_mu(self, state, rng, size):
        psi = bloch_vector(state)
        xp = _uniform_sphere(rng, size)
        xm = _uniform_sphere(rng, size)
        r = self._choose(xp, xm, psi)
        xr = np.where((r == 1)[:, None], xp, xm)
        s = _sign((xr @ psi) * (xr @ self.n))
        return MontinaBatch(xp, xm, r, s)

    def xi(self, batch, measurement):
        axis = measurement_axis(measurement)
        if isinstance(axis, int):
            return _trivial_xi(len(batch), axis)
        xr = batch.active()
        plus = (_sign(batch.s * (xr @ self.n) * (xr @ axis)) == 1).astype(float)
        return np.column_stack([plus, 1.0 - plus])

    def sample_eta(self, batch, outcomes, measurement, rng):
        axis = measurement_axis(measurement)
        if isinstance(axis, int):
            return batch.take(np.arange(len(batch)))
        xr = batch.active()
        r_new = self._choose(batch.x_plus, batch.x_minus, axis)
        xr_new = np.where((r_new == 1)[:, None], batch.x_plus, batch.x_minus)
        flip = _sign((xr @ self.n) * (xr @ axis) * (xr_new @ self.n) * (xr_new @ axis))
        return MontinaBatch(batch.x_plus, batch.x_minus, r_new, (batch.s * flip).astype(np.int8))

    def apply_gamma(self, batch, unitary, rng):
        rot = rotation_of(unitary)
        xp = batch.x_plus @ rot.T
        xm = batch.x_minus @ rot.T
        before = batch.active() @ self.n
        after = np.where((batch.r == 1)[:, None], xp, xm) @ self.n
        s = (batch.s * _sign(before * after)).astype(np.int8)
        return MontinaBatch(xp, xm, batch.r.copy(), s)

    def point_at(self, batch, i):
        return MontinaPoint(batch.x_plus[i].copy(), batch.x_minus[i].copy(), int(batch.r[i]), int(batch.s[i]))

    def to_batch(self, points):
        return MontinaBatch(
            np.array([p.x_plus for p in points], dtype=float).reshape(-1, 3),
            np.array([p.x_minus for p in points], dtype=float).reshape(-1, 3),
            np.array([p.r for p in points], dtype=np.int8),
            np.array([p.s for p in points], dtype=np.int8),
        )

    def in_support(self, state, point):
        psi = bloch_vector(state)
        gap = (point.x_plus @ psi) ** 2 - (point.x_minus @ psi) ** 2
        xr = point.active()
        return bool(point.r * gap > 0 and point.s * (xr @ psi) * (xr @ self.n) > 0)

    def indistinct(self, a, b):
        return bool(bloch_vector(a) @ bloch_vector(b) > -1.0 + 1e-12)

    def overlap_points(self, a, b):
        if not self.indistinct(a, b):
            return []
        va, vb = bloch_vector(a), bloch_vector(b)
        m = va + vb
        m /= np.linalg.norm(m)
        if abs(m @ self.n) < 1e-6:
            # tilt off the equator while staying inside both hemispheres
            m = m + 0.5 * min(m @ va, m @ vb) * self.n
            m /= np.linalg.norm(m)
        perp = np.cross(va, vb)
        if np.linalg.norm(perp) < 1e-9:
            perp = _perpendicular(va)
        perp /= np.linalg.norm(perp)
        s = int(_sign((m @ va) * (m @ self.n)))
        return [MontinaPoint(m, perp, 1, s)]

    def supporting_states(self, point):
        xr = point.active()
        base = point.s * (1 if xr @ self.n >= 0 else -1) * xr
        found = [state_from_bloch(base)]
        delta = 0.5
        perp = _perpendicular(base)
        for _ in range(60):
            tilted = state_from_bloch(np.cos(delta) * base + np.sin(delta) * perp)
            if self.in_support(tilted, point):
                found.append(tilted)
                break
            delta /= 2
        return found


def build_kochen_specker() -> KochenSpeckerModel:
    return KochenSpeckerModel()


def build_montina() -> MontinaModel:
    return MontinaModel()


__all__ = [
    "BlochVector",
    "KochenSpeckerModel",
    "MontinaModel",
    "MontinaBatch",
    "bloch_vector",
    "build_kochen_specker",
    "build_montina",
    "measurement_axis",
    "rotation_of",
    "state_from_bloch",
]
