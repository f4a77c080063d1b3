"""Ontological models as hidden Markov models of a stationary causal channel.

Each action a (prepare, transform or measure) is an input symbol; the channel
emits an outcome k and moves the hidden state λ → λ′ with joint probability
Pr(k, λ′ | λ, a).  Preparations and transformations always emit k = 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import (
    ActionOrderError,
    ContractViolationError,
    UndefinedUpdateError,
    UpdateImpossibleError,
    UnsupportedOperationError,
)
from .ontomodel import POSITIVITY_TOL, EnumerableModel, OntologicalModel, sample_categorical

# ---------------------------------------------------------------------------
# Actions


@dataclass(frozen=True)
class Prepare:
    label: str
    kind = "P"


@dataclass(frozen=True)
class Transform:
    label: str
    kind = "T"


@dataclass(frozen=True)
class Measure:
    label: str
    kind = "M"


Action = Prepare | Transform | Measure
_KINDS = {"P": Prepare, "T": Transform, "M": Measure}


def parse_actions(text: str) -> list[Action]:
    """Parse one ``P|T|M <label>`` per line; blank lines and ``#`` comments are skipped."""
    out: list[Action] = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2 or parts[0] not in _KINDS:
            raise ValueError(f"line {n}: expected 'P|T|M <label>', got {raw!r}")
        out.append(_KINDS[parts[0]](parts[1].strip()))
    return out


def format_actions(actions: Iterable[Action]) -> str:
    return "".join(f"{a.kind} {a.label}\n" for a in actions)


def _check_order(actions: Sequence[Action]) -> None:
    if not actions:
        raise ActionOrderError("empty action sequence")
    if not isinstance(actions[0], Prepare):
        raise ActionOrderError(f"sequence must begin with a preparation, got {actions[0]!r}")


def measured_steps(actions: Sequence[Action]) -> list[int]:
    return [t for t, a in enumerate(actions) if isinstance(a, Measure)]


# ---------------------------------------------------------------------------
# Joint kernel


@dataclass(frozen=True)
class KernelHole:
    """Measure slice that the model cannot supply; keeps the refusal and its witness."""

    reason: str
    witness: Any = None


@dataclass(frozen=True, eq=False)
class JointKernel:
    """Pr(k, λ′ | λ, a) as (N, K_a, N) arrays keyed by action."""

    model: OntologicalModel
    size: int
    slices: dict[Action, np.ndarray | KernelHole]
    xi: dict[str, np.ndarray] = field(default_factory=dict)

    def slice(self, action: Action) -> np.ndarray:
        try:
            s = self.slices[action]
        except KeyError:
            raise UnsupportedOperationError(f"kernel has no slice for {action!r}") from None
        if isinstance(s, KernelHole):
            raise UpdateImpossibleError(s.reason, s.witness)
        return s

    def final_slice(self, action: Action) -> np.ndarray:
        """Slice for a last step: a measurement hole falls back to ξ with λ′ = λ."""
        if isinstance(action, Measure) and isinstance(self.slices.get(action), KernelHole):
            xi = self.xi[action.label]
            out = np.zeros((self.size, xi.shape[1], self.size))
            idx = np.arange(self.size)
            out[idx, :, idx] = xi
            return out
        return self.slice(action)

    def holes(self) -> list[Action]:
        return [a for a, s in self.slices.items() if isinstance(s, KernelHole)]

    def row_sums(self) -> dict[Action, np.ndarray]:
        return {a: s.sum(axis=(1, 2)) for a, s in self.slices.items() if not isinstance(s, KernelHole)}


def _require_enumerable(model: OntologicalModel) -> EnumerableModel:
    if not isinstance(model, EnumerableModel):
        raise UnsupportedOperationError(f"{model.name} has no finite ontic space; use the sampler path")
    return model


def build_joint_kernel(model: OntologicalModel) -> JointKernel:
    """Tabulate every declared action of an enumerable model."""
    em = _require_enumerable(model)
    n = em.size
    slices: dict[Action, np.ndarray | KernelHole] = {}
    for label, state in em.preparations.items():
        mu = em.mu_vector(state)
        slices[Prepare(label)] = np.broadcast_to(mu, (n, 1, n))
    if em.supports_transformations:
        for label, u in em.transformations.items():
            try:
                g = em.gamma_matrix(u)
            except UnsupportedOperationError:
                continue
            slices[Transform(label)] = g[:, None, :]
    xis: dict[str, np.ndarray] = {}
    for label, meas in em.measurements.items():
        xi = em.xi_table(meas)
        xis[label] = xi
        try:
            etas = [em.eta_matrix(meas, k) for k in range(xi.shape[1])]
        except UpdateImpossibleError as exc:
            slices[Measure(label)] = KernelHole(str(exc), exc.witness)
            continue
        s = np.stack([xi[:, k, None] * np.nan_to_num(e, nan=0.0) for k, e in enumerate(etas)], axis=1)
        slices[Measure(label)] = s
    return JointKernel(em, n, slices, xis)


@dataclass(frozen=True, eq=False)
class RecoveredUpdate:
    """η obtained from a kernel by dividing out ξ."""

    kernel: JointKernel

    def matrix(self, label: str, k: int) -> np.ndarray:
        """(N, N) η(λ′|k, λ, M); rows where ξ(k|λ, M) = 0 are NaN."""
        s = self.kernel.slice(Measure(label))[:, k, :]
        xi = self.kernel.xi[label][:, k]
        out = np.full_like(s, np.nan)
        live = xi > POSITIVITY_TOL
        out[live] = s[live] / xi[live, None]
        return out

    def row(self, label: str, k: int, i: int) -> np.ndarray:
        xi = float(self.kernel.xi[label][i, k])
        if xi <= POSITIVITY_TOL:
            raise UndefinedUpdateError(f"ξ({k}|λ{i}, {label}) = 0; η is undefined there")
        return self.kernel.slice(Measure(label))[i, k, :] / xi


def recover_eta(kernel: JointKernel) -> RecoveredUpdate:
    return RecoveredUpdate(kernel)


# ---------------------------------------------------------------------------
# Exact propagation


def exact_output_distribution(kernel: JointKernel, actions: Sequence[Action]) -> dict[tuple[int, ...], float]:
    """Pr(outcomes of the Measure steps) by forward propagation over λ."""
    _check_order(actions)
    branches: dict[tuple[int, ...], np.ndarray] = {}
    for t, a in enumerate(actions):
        s = kernel.final_slice(a) if t + 1 == len(actions) else kernel.slice(a)
        if isinstance(a, Prepare):
            branches = {h: v.sum() * s[0, 0] for h, v in branches.items()} or {(): s[0, 0].copy()}
            continue
        nxt: dict[tuple[int, ...], np.ndarray] = {}
        for h, v in branches.items():
            for k in range(s.shape[1]):
                w = v @ s[:, k, :]
                if isinstance(a, Transform):
                    nxt[h] = w
                elif w.sum() > 0:
                    nxt[h + (k,)] = w
        branches = nxt
    return {h: float(v.sum()) for h, v in branches.items()}


# ---------------------------------------------------------------------------
# Simulation


@dataclass(frozen=True, eq=False)
class ChannelRun:
    outputs: np.ndarray  # (runs, T) emitted symbols
    trajectory: np.ndarray | None  # (runs, T) λ index after each step, enumerable path only

    def measured(self, actions: Sequence[Action]) -> np.ndarray:
        return self.outputs[:, measured_steps(actions)]

    def frequencies(self, actions: Sequence[Action]) -> dict[tuple[int, ...], float]:
        m = self.measured(actions)
        keys, counts = np.unique(m, axis=0, return_counts=True)
        return {tuple(int(x) for x in k): float(c) / len(m) for k, c in zip(keys, counts)}


def _kernel_path(kernel: JointKernel, actions: Sequence[Action], rng: np.random.Generator, runs: int) -> ChannelRun:
    n = kernel.size
    lam = np.zeros(runs, dtype=int)
    outs = np.zeros((runs, len(actions)), dtype=int)
    traj = np.zeros((runs, len(actions)), dtype=int)
    for t, a in enumerate(actions):
        s = kernel.final_slice(a) if t + 1 == len(actions) else kernel.slice(a)
        k_count = s.shape[1]
        flat = s[lam].reshape(runs, k_count * n)
        draw = sample_categorical(flat, rng)
        outs[:, t], lam = np.divmod(draw, n)
        traj[:, t] = lam
    return ChannelRun(outs, traj)


def _sampler_path(model: OntologicalModel, actions: Sequence[Action], rng: np.random.Generator, runs: int) -> ChannelRun:
    outs = np.zeros((runs, len(actions)), dtype=int)
    batch: Any = None
    for t, a in enumerate(actions):
        if isinstance(a, Prepare):
            batch = model.sample_mu(model.resolve_preparation(a.label), rng, runs)
        elif isinstance(a, Transform):
            batch = model.apply_gamma(batch, model.resolve_transformation(a.label), rng)
        else:
            meas = model.accepts_measurement(model.resolve_measurement(a.label))
            k = sample_categorical(model.xi(batch, meas), rng)
            outs[:, t] = k
            if t + 1 < len(actions):
                if not model.update_capable:
                    model._refuse_update()
                batch = model.sample_eta(batch, k, meas, rng)
    return ChannelRun(outs, None)


def run_channel(
    model: OntologicalModel | JointKernel,
    actions: Sequence[Action],
    rng: np.random.Generator,
    runs: int = 1,
) -> ChannelRun:
    """Feed ``actions`` through the channel ``runs`` times in parallel."""
    _check_order(actions)
    if runs < 1:
        raise ValueError("runs must be positive")
    if isinstance(model, JointKernel):
        return _kernel_path(model, actions, rng, runs)
    if isinstance(model, EnumerableModel):
        return _kernel_path(build_joint_kernel(model), actions, rng, runs)
    return _sampler_path(model, actions, rng, runs)


# ---------------------------------------------------------------------------
# Structural checks


def markov_reference(kernel: JointKernel, actions: Sequence[Action], rng: np.random.Generator, runs: int) -> np.ndarray:
    """Independent per-run loop that only ever looks at (λ_t, a_t)."""
    _check_order(actions)
    n = kernel.size
    outs = np.zeros((runs, len(actions)), dtype=int)
    lam = [0] * runs
    for t, a in enumerate(actions):
        s = kernel.final_slice(a) if t + 1 == len(actions) else kernel.slice(a)
        u = rng.random(runs)
        for r in range(runs):
            cdf = np.cumsum(s[lam[r]].reshape(-1))
            draw = min(int(np.searchsorted(cdf, u[r], side="left")), cdf.size - 1)
            outs[r, t], lam[r] = divmod(draw, n)
    return outs


def lambda_mediation_check(kernel: JointKernel, actions: Sequence[Action], seed: int, runs: int = 200) -> bool:
    """run_channel agrees bitwise with the memoryless reference on the same stream."""
    a = run_channel(kernel, actions, np.random.default_rng(seed), runs).outputs
    b = markov_reference(kernel, actions, np.random.default_rng(seed), runs)
    return bool(np.array_equal(a, b))


def causality_check(
    model: OntologicalModel | JointKernel,
    actions: Sequence[Action],
    edited: Sequence[Action],
    seed: int,
    runs: int = 200,
) -> bool:
    """Outputs before the first edited step are identical under a shared seed."""
    t = next((i for i, (x, y) in enumerate(zip(actions, edited)) if x != y), min(len(actions), len(edited)))
    a = run_channel(model, actions, np.random.default_rng(seed), runs).outputs[:, :t]
    b = run_channel(model, edited, np.random.default_rng(seed), runs).outputs[:, :t]
    return bool(np.array_equal(a, b))


def stationarity_check(kernel: JointKernel, prefix: Sequence[Action], actions: Sequence[Action], atol: float = 1e-12) -> bool:
    """A prefix ending before a fresh preparation leaves the suffix statistics unchanged."""
    if not isinstance(actions[0], Prepare):
        raise ActionOrderError("suffix must begin with a preparation")
    full = exact_output_distribution(kernel, [*prefix, *actions])
    alone = exact_output_distribution(kernel, actions)
    skip = len(measured_steps(prefix))
    marg: dict[tuple[int, ...], float] = {}
    for h, p in full.items():
        marg[h[skip:]] = marg.get(h[skip:], 0.0) + p
    keys = set(marg) | set(alone)
    return all(abs(marg.get(h, 0.0) - alone.get(h, 0.0)) <= atol for h in keys)


def kernel_check(kernel: JointKernel, atol: float = 1e-12) -> dict[str, bool]:
    """Row normalization, λ-independent preparation, trivial outputs, ξ marginals."""
    out = {"rows_normalized": True, "prepare_constant": True, "trivial_outputs": True, "xi_marginal": True}
    for a, s in kernel.slices.items():
        if isinstance(s, KernelHole):
            continue
        sums = s.sum(axis=(1, 2))
        if isinstance(a, Measure):
            live = kernel.xi[a.label].sum(axis=1) > 0
            out["rows_normalized"] &= bool(np.allclose(sums[live], 1.0, atol=atol))
            out["xi_marginal"] &= bool(np.allclose(s.sum(axis=2), kernel.xi[a.label], atol=atol))
        else:
            out["rows_normalized"] &= bool(np.allclose(sums, 1.0, atol=atol))
            out["trivial_outputs"] &= s.shape[1] == 1
        if isinstance(a, Prepare):
            out["prepare_constant"] &= bool(np.all(s == s[0]))
    return out


def all_outcome_strings(kernel: JointKernel, actions: Sequence[Action]) -> list[tuple[int, ...]]:
    sizes = [kernel.xi[a.label].shape[1] for a in actions if isinstance(a, Measure)]
    return list(itertools.product(*[range(k) for k in sizes]))


def compare_to_exact(
    run: ChannelRun, kernel: JointKernel, actions: Sequence[Action], z: float = 4.0
) -> list[tuple[tuple[int, ...], float, float, float, bool]]:
    """(outcome string, frequency, exact, stderr, within z·stderr) per outcome string."""
    if run.outputs.shape[0] < 2:
        raise ContractViolationError("need at least two runs for a statistical comparison")
    exact = exact_output_distribution(kernel, actions)
    freq = run.frequencies(actions)
    n = run.outputs.shape[0]
    rows = []
    for h in all_outcome_strings(kernel, actions):
        p = exact.get(h, 0.0)
        f = freq.get(h, 0.0)
        se = float(np.sqrt(max(p * (1 - p), 0.0) / n))
        rows.append((h, f, p, se, abs(f - p) <= max(1e-10, z * se)))
    return rows
