"""Odd-prime qupit stabilizer subtheory and its discrete Wigner ontological model."""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ModelViolationError,
    NegativityError,
    ResourceLimitError,
    UnsupportedOperationError,
)
from .ontomodel import POSITIVITY_TOL, EnumerableModel, PhasePoint
from .qcore import ProjectiveMeasurement, Projector, PureState

MATCH_TOL = 1e-8
MAX_QUPITS = 2


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % q for q in range(2, int(p**0.5) + 1))


def _check_odd_prime(p: int) -> None:
    if p == 2 or p % 2 == 0:
        raise UnsupportedOperationError("only odd primes are supported")
    if not _is_prime(p):
        raise ValueError(f"{p} is not prime")


@dataclass(frozen=True)
class PauliLabel:
    x: tuple[int, ...]
    z: tuple[int, ...]

    def reduced(self, p: int) -> PauliLabel:
        return PauliLabel(tuple(v % p for v in self.x), tuple(v % p for v in self.z))

    def scaled(self, m: int, p: int) -> PauliLabel:
        return PauliLabel(tuple(m * v % p for v in self.x), tuple(m * v % p for v in self.z))

    @property
    def n(self) -> int:
        return len(self.x)

    def is_identity(self) -> bool:
        return not any(self.x) and not any(self.z)


def symplectic_product(a: PauliLabel | PhasePoint, b: PauliLabel | PhasePoint, p: int) -> int:
    """[a, b] = z·x' − x·z' mod p."""
    return int((np.dot(a.z, b.x) - np.dot(a.x, b.z)) % p)


def all_labels(p: int, n: int) -> list[PauliLabel]:
    vecs = list(itertools.product(range(p), repeat=n))
    return [PauliLabel(x, z) for x in vecs for z in vecs]


def pauli_matrix(label: PauliLabel, p: int, n: int | None = None) -> np.ndarray:
    """T_(x,z) = ⊗_j ω^{x_j z_j / 2} X^{x_j} Z^{z_j} with 1/2 the inverse of 2 mod p."""
    _check_odd_prime(p)
    n = label.n if n is None else n
    return _pauli_cached(label.reduced(p), p, n).copy()


@lru_cache(maxsize=None)
def _pauli_cached(label: PauliLabel, p: int, n: int) -> np.ndarray:
    omega = np.exp(2j * np.pi / p)
    half = pow(2, -1, p)
    x_op = np.roll(np.eye(p, dtype=complex), 1, axis=0)
    z_op = np.diag(omega ** np.arange(p))
    out = np.ones((1, 1), dtype=complex)
    for xj, zj in zip(label.x, label.z):
        factor = omega ** ((xj * zj * half) % p)
        site = factor * np.linalg.matrix_power(x_op, xj) @ np.linalg.matrix_power(z_op, zj)
        out = np.kron(out, site)
    out.setflags(write=False)
    return out


def phase_points(p: int, n: int) -> list[PhasePoint]:
    return [PhasePoint(lab.x, lab.z) for lab in all_labels(p, n)]


def phase_point_operator(point: PhasePoint, p: int, n: int | None = None) -> np.ndarray:
    """A_λ = p^{-n} Σ_λ' ω^{[λ, λ']} T_λ'."""
    _check_odd_prime(p)
    n = len(point.x) if n is None else n
    return _phase_table(p, n)[phase_points(p, n).index(PhasePoint(tuple(point.x), tuple(point.z)))].copy()


@lru_cache(maxsize=None)
def _phase_table(p: int, n: int) -> np.ndarray:
    omega = np.exp(2j * np.pi / p)
    labels = all_labels(p, n)
    ts = np.stack([_pauli_cached(lab, p, n) for lab in labels])
    table = []
    for lam in labels:
        phases = np.array([omega ** symplectic_product(lam, lab, p) for lab in labels])
        table.append(np.einsum("a,aij->ij", phases, ts) / p**n)
    out = np.stack(table)
    out.setflags(write=False)
    return out


def phase_point_table(p: int, n: int) -> np.ndarray:
    """All A_λ stacked in :func:`phase_points` order, shape (p^{2n}, p^n, p^n)."""
    _check_odd_prime(p)
    return _phase_table(p, n)


# ---------------------------------------------------------------------------
# Stabilizer states


@dataclass(frozen=True, eq=False)
class StabilizerState:
    """Generators (s, x, z) meaning ω^s T_(x,z) fixes the state, plus its dense vector."""

    p: int
    n: int
    generators: tuple[tuple[int, tuple[int, ...], tuple[int, ...]], ...]
    state: PureState

    def group(self) -> list[tuple[int, PauliLabel]]:
        """All p^n elements as (phase exponent, label)."""
        out = {}
        for coeffs in itertools.product(range(self.p), repeat=self.n):
            total = np.eye(self.p**self.n, dtype=complex)
            for c, (s, x, z) in zip(coeffs, self.generators):
                g = np.exp(2j * np.pi * s / self.p) * pauli_matrix(PauliLabel(x, z), self.p, self.n)
                total = total @ np.linalg.matrix_power(g, c)
            lab = PauliLabel(
                tuple(sum(c * g[1][i] for c, g in zip(coeffs, self.generators)) % self.p for i in range(self.n)),
                tuple(sum(c * g[2][i] for c, g in zip(coeffs, self.generators)) % self.p for i in range(self.n)),
            )
            t = pauli_matrix(lab, self.p, self.n)
            k = int(np.argmax(np.abs(t)))
            ratio = total.flat[k] / t.flat[k]
            s = int(round(np.angle(ratio) / (2 * np.pi) * self.p)) % self.p
            out[lab] = s
        return [(s, lab) for lab, s in out.items()]

    def to_dict(self) -> dict:
        return {"p": self.p, "n": self.n, "generators": [[s, list(x), list(z)] for s, x, z in self.generators]}

    @classmethod
    def from_generators(cls, p: int, n: int, generators: Sequence[tuple[int, Sequence[int], Sequence[int]]]) -> StabilizerState:
        gens = tuple((int(s) % p, tuple(int(v) % p for v in x), tuple(int(v) % p for v in z)) for s, x, z in generators)
        if len(gens) != n:
            raise ValueError("need exactly n generators")
        for a, b in itertools.combinations(gens, 2):
            if symplectic_product(PauliLabel(a[1], a[2]), PauliLabel(b[1], b[2]), p):
                raise ValueError("generators do not commute")
        d = p**n
        proj = np.eye(d, dtype=complex)
        omega = np.exp(2j * np.pi / p)
        for s, x, z in gens:
            g = omega**s * pauli_matrix(PauliLabel(x, z), p, n)
            proj = proj @ sum(np.linalg.matrix_power(g, m) for m in range(p)) / p
        col = int(np.argmax(np.linalg.norm(proj, axis=0)))
        v = proj[:, col]
        if np.linalg.norm(v) < 1e-6:
            raise ValueError("generators stabilize no state")
        return cls(p, n, gens, PureState(v))

    @classmethod
    def from_state(cls, state: PureState, p: int, n: int) -> StabilizerState:
        v = state.amplitudes
        found = []
        for lab in all_labels(p, n):
            if lab.is_identity():
                continue
            ev = v.conj() @ pauli_matrix(lab, p, n) @ v
            if abs(abs(ev) - 1.0) < 1e-8:
                s = int(round(-np.angle(ev) / (2 * np.pi) * p)) % p
                found.append((s, lab))
        gens: list[tuple[int, tuple[int, ...], tuple[int, ...]]] = []
        span: set[tuple[int, ...]] = {tuple([0] * 2 * n)}
        for s, lab in found:
            key = lab.x + lab.z
            if key in span:
                continue
            gens.append((s, lab.x, lab.z))
            span = {tuple((a + c * b) % p for a, b in zip(vec, key)) for vec in span for c in range(p)}
            if len(gens) == n:
                break
        if len(gens) != n:
            raise ValueError("state is not a stabilizer state")
        out = cls.from_generators(p, n, gens)
        if not out.state.same_ray(state):
            raise ModelViolationError("generator reconstruction does not reproduce the state")
        return out


def clifford_generators(p: int, n: int) -> dict[str, np.ndarray]:
    """Fourier, phase, shift and clock on each qupit, plus CSUM when n = 2."""
    _check_odd_prime(p)
    omega = np.exp(2j * np.pi / p)
    half = pow(2, -1, p)
    j = np.arange(p)
    local = {
        "F": np.exp(2j * np.pi * np.outer(j, j) / p) / np.sqrt(p),
        "P": np.diag(omega ** ((half * j * j) % p)),
        "X": np.roll(np.eye(p, dtype=complex), 1, axis=0),
        "Z": np.diag(omega**j),
    }
    out: dict[str, np.ndarray] = {}
    eye = np.eye(p, dtype=complex)
    for q in range(n):
        for name, g in local.items():
            op = np.ones((1, 1), dtype=complex)
            for site in range(n):
                op = np.kron(op, g if site == q else eye)
            out[f"{name}{q}" if n > 1 else name] = op
    if n == 2:
        csum = np.zeros((p * p, p * p), dtype=complex)
        for a in range(p):
            for b in range(p):
                csum[a * p + (a + b) % p, a * p + b] = 1.0
        out["CSUM"] = csum
    if n > 2:
        raise ResourceLimitError("Clifford generators are provided for at most two qupits")
    return out


def _state_key(v: np.ndarray) -> tuple:
    return tuple(np.round(np.concatenate([v.real, v.imag]), 8) + 0.0)


def stabilizer_count(p: int, n: int) -> int:
    count = p**n
    for k in range(1, n + 1):
        count *= p**k + 1
    return count


@lru_cache(maxsize=None)
def _enumerate(p: int, n: int) -> tuple[StabilizerState, ...]:
    gens = list(clifford_generators(p, n).values())
    start = PureState(np.eye(p**n)[0])
    seen = {_state_key(start.amplitudes): start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for g in gens:
            nxt = cur.evolve(g)
            key = _state_key(nxt.amplitudes)
            if key not in seen:
                seen[key] = nxt
                queue.append(nxt)
    states = sorted(seen.values(), key=lambda s: _state_key(s.amplitudes))
    return tuple(StabilizerState.from_state(s, p, n) for s in states)


def enumerate_stabilizer_states(p: int, n: int) -> list[StabilizerState]:
    """All pure stabilizer states, by Clifford-orbit closure of |0…0⟩."""
    _check_odd_prime(p)
    if n > MAX_QUPITS or p**n > 81:
        raise ResourceLimitError(f"enumeration limited to at most {MAX_QUPITS} qupits and dimension 81")
    return list(_enumerate(p, n))


def export_stabilizer_states(states: Iterable[StabilizerState]) -> str:
    return json.dumps([s.to_dict() for s in states])


def import_stabilizer_states(text: str) -> list[StabilizerState]:
    return [StabilizerState.from_generators(d["p"], d["n"], d["generators"]) for d in json.loads(text)]


# ---------------------------------------------------------------------------
# Pauli measurements


def canonical_pauli_labels(p: int, n: int) -> list[PauliLabel]:
    """One nonzero label per line through the origin (first nonzero entry 1)."""
    out = []
    for lab in all_labels(p, n):
        vec = lab.x + lab.z
        nz = [v for v in vec if v]
        if nz and nz[0] == 1:
            out.append(lab)
    return out


def pauli_measurement(label: PauliLabel, p: int, n: int) -> ProjectiveMeasurement:
    """Eigenprojectors of T_a: Π_k = p^{-1} Σ_m ω^{-km} T_{ma} (eigenvalue ω^k)."""
    omega = np.exp(2j * np.pi / p)
    projs = []
    for k in range(p):
        m = sum(omega ** (-k * mm) * pauli_matrix(label.scaled(mm, p), p, n) for mm in range(p)) / p
        projs.append(Projector(0.5 * (m + m.conj().T)))
    return ProjectiveMeasurement(tuple(projs), label=pauli_name(label))


def pauli_name(label: PauliLabel) -> str:
    return "P(" + "".join(map(str, label.x)) + ";" + "".join(map(str, label.z)) + ")"


def stabilizer_subtheory(p: int, n: int, extra: Sequence[ProjectiveMeasurement] = (), states: Sequence[PureState] | None = None):
    """Stabilizer states and canonical Pauli measurements as a Kitchen Sink subtheory."""
    from .models_epistemic import SubtheorySpec

    if states is None:
        states = [s.state for s in enumerate_stabilizer_states(p, n)]
    preps = {f"stab{i}": s for i, s in enumerate(states)}
    meas = [pauli_measurement(lab, p, n) for lab in canonical_pauli_labels(p, n)]
    return SubtheorySpec(preps, [*meas, *extra])


# ---------------------------------------------------------------------------
# Wigner model


class WignerModel(EnumerableModel):
    """μ = p^{-n} tr(A_λ ψ), ξ = tr(Π_k A_λ), η = p^{-n} tr(A_λ Π A_λ' Π)/tr(Π A_λ)."""

    name = "wigner"
    full_theory = False

    def __init__(self, p: int, n: int) -> None:
        super().__init__()
        _check_odd_prime(p)
        if n < 1 or n > MAX_QUPITS:
            raise ResourceLimitError(f"Wigner model provided for 1..{MAX_QUPITS} qupits")
        self.p, self.n = p, n
        self.d = p**n
        self._points = phase_points(p, n)
        self._index = {pt: i for i, pt in enumerate(self._points)}
        self.table = phase_point_table(p, n)
        self.stabilizer_states = enumerate_stabilizer_states(p, n)
        self.preparations = {f"stab{i}": s.state for i, s in enumerate(self.stabilizer_states)}
        for j, digits in enumerate(itertools.product(range(p), repeat=n)):
            self.preparations["".join(map(str, digits))] = PureState(np.eye(self.d)[j])
        self.measurements = {pauli_name(lab): pauli_measurement(lab, p, n) for lab in canonical_pauli_labels(p, n)}
        if n == 1:
            self.measurements["Z"] = self.measurements[pauli_name(PauliLabel((0,), (1,)))]
            self.measurements["X"] = self.measurements[pauli_name(PauliLabel((1,), (0,)))]
        self.transformations = {"I": np.eye(self.d, dtype=complex), **clifford_generators(p, n)}
        self._eta_cache: dict[tuple[bytes, int], np.ndarray] = {}

    def describe(self):
        return {"name": self.name, "p": self.p, "n": self.n, "d": self.d}

    def accepts_state(self, state):
        return True

    def ontic_points(self):
        return self._points

    @property
    def size(self) -> int:
        return len(self._points)

    def index_of(self, point):
        return self._index[PhasePoint(tuple(point.x), tuple(point.z))]

    # raw quasi-probabilities

    def wigner_function(self, state: PureState) -> np.ndarray:
        v = state.amplitudes
        return np.real(np.einsum("i,aij,j->a", v.conj(), self.table, v)) / self.d

    def xi_values(self, measurement: ProjectiveMeasurement) -> np.ndarray:
        return np.real(np.einsum("kij,aji->ak", measurement.matrices, self.table))

    def eta_values(self, measurement: ProjectiveMeasurement, k: int) -> np.ndarray:
        """Raw η rows; NaN where tr(Π_k A_λ) ≤ 1e-12."""
        key = (measurement.matrices.tobytes(), k)
        if key not in self._eta_cache:
            proj = measurement.matrices[k]
            sandwiched = np.einsum("ij,ajk,kl->ail", proj, self.table, proj)
            num = np.real(np.einsum("aij,bji->ab", sandwiched, self.table)) / self.d
            xi = self.xi_values(measurement)[:, k]
            with np.errstate(invalid="ignore", divide="ignore"):
                out = num / xi[:, None]
            out[xi <= POSITIVITY_TOL] = np.nan
            out.setflags(write=False)
            self._eta_cache[key] = out
        return self._eta_cache[key]

    # checked model functions

    def _require_nonnegative(self, values: np.ndarray, what: str) -> None:
        finite = np.where(np.isnan(values), 0.0, values)
        flat = int(np.argmin(finite))
        low = float(finite.flat[flat])
        if low < -POSITIVITY_TOL:
            idx = np.unravel_index(flat, values.shape)[0]
            raise NegativityError(f"{what} is negative ({low:.3g}) outside the stabilizer subtheory", self._points[idx], low)

    def mu_vector(self, state):
        w = self.wigner_function(state)
        self._require_nonnegative(w, "preparation quasi-probability")
        return np.clip(w, 0.0, None)

    def xi_table(self, measurement):
        x = self.xi_values(measurement)
        self._require_nonnegative(x, "response function")
        return np.clip(x, 0.0, 1.0)

    def eta_matrix(self, measurement, k):
        e = self.eta_values(measurement, k)
        self._require_nonnegative(e, "update rule")
        out = np.clip(e, 0.0, None)
        out[np.isnan(e)] = np.nan
        return out

    def phase_space_map(self, unitary: np.ndarray) -> np.ndarray:
        """f_U as an index array: U A_λ U† = A_{f_U(λ)}."""
        u = np.asarray(unitary, dtype=complex)
        flat = self.table.reshape(self.size, -1)
        out = np.empty(self.size, dtype=int)
        for i, a in enumerate(self.table):
            rotated = (u @ a @ u.conj().T).ravel()
            dist = np.max(np.abs(flat - rotated), axis=1)
            hit = int(np.argmin(dist))
            if dist[hit] > MATCH_TOL:
                raise ModelViolationError("transformation does not permute the phase-point operators")
            out[i] = hit
        if len(set(out.tolist())) != self.size:
            raise ModelViolationError("phase-space map is not a bijection")
        return out

    def gamma_matrix(self, unitary):
        f = self.phase_space_map(unitary)
        g = np.zeros((self.size, self.size))
        g[np.arange(self.size), f] = 1.0
        return g


def build_wigner_model(p: int, n: int) -> WignerModel:
    return WignerModel(p, n)
