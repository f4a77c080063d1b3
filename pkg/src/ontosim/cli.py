"""Command-line experiment runner.

Builds a named model, runs one task against it and writes ``report.json``
(timestamp in a header, deterministic body embedding the config) plus a flat
``summary.csv`` with one row per experiment and outcome string.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import hmmchannel, nogo
from .errors import OntosimError, UpdateImpossibleError
from .models_epistemic import (
    SubtheorySpec,
    build_abcl0,
    build_abcl1_finite,
    build_kitchen_sink,
    build_ljbr,
    qutrit_contradiction_subtheory,
    random_nonorthogonal_pair,
    decode_complex,
)
from .models_ontic import build_bell, build_beltrametti_bugajski
from .models_qubit import build_kochen_specker, build_montina
from .ontomodel import (
    OntologicalModel,
    VerificationReport,
    check_prepare_measure,
    check_prepare_transform_measure,
    check_sequential,
    classify_epistemicity,
)
from .qcore import PureState, sequential_probability
from .stabilizer import build_wigner_model

MODELS = ("ks", "montina", "bb", "bell", "ljbr", "abcl0", "abcl1", "kitchen-sink", "wigner")
TASKS = ("verify", "verify-seq", "classify", "nogo", "hmm-check")
BROKEN = ("ljbr", "abcl0", "abcl1", "kitchen-sink")
OUT_ENV = "ONTOSIM_OUT"
DEFAULT_SAMPLES = 100_000
MAX_COMBOS = 500
CSV_COLUMNS = ("model", "task", "experiment-id", "outcome-string", "model-prob", "quantum-prob", "stderr", "verdict")

# (ψ-epistemic, pairwise, never-ψ-ontic); None means no claim is checked
EXPECTED_CLASS: dict[str, tuple[bool, bool | None, bool | None]] = {
    "ks": (True, True, True),
    "montina": (True, True, True),
    "bb": (False, False, False),
    "bell": (False, False, False),
    "ljbr": (True, False, None),
    "abcl0": (True, False, None),
    "abcl1": (True, False, None),
    "kitchen-sink": (True, True, None),
    "wigner": (True, True, True),
}


class UsageError(Exception):
    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"invalid config key {key!r}: {message}")
        self.key = key


@dataclass
class Row:
    experiment: str
    outcome: str
    model_prob: float | None
    quantum_prob: float | None
    stderr: float | None
    verdict: str

    def as_list(self, model: str, task: str) -> list[Any]:
        return [model, task, self.experiment, self.outcome, _num(self.model_prob), _num(self.quantum_prob), _num(self.stderr), self.verdict]


def _num(x: float | None) -> str:
    return "" if x is None else repr(float(x))


@dataclass
class TaskResult:
    rows: list[Row] = field(default_factory=list)
    details: list[dict[str, Any]] = field(default_factory=list)
    ok: bool = True


# ---------------------------------------------------------------------------
# Config and model construction


def _load_states(path: str | None) -> dict[str, PureState]:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, list):
        doc = {f"s{i}": v for i, v in enumerate(doc)}
    return {k: PureState(decode_complex(v)) for k, v in doc.items()}


def normalize_config(cfg: dict[str, Any]) -> dict[str, Any]:
    """Validate and fill defaults; raises :class:`UsageError` naming the bad key."""
    cfg = dict(cfg)
    if cfg.get("model") not in MODELS:
        raise UsageError("model", f"expected one of {', '.join(MODELS)}")
    if cfg.get("task") not in TASKS:
        raise UsageError("task", f"expected one of {', '.join(TASKS)}")
    model = cfg["model"]
    if model in ("ks", "montina"):
        if cfg.get("d") not in (None, 2):
            raise UsageError("d", f"{model} is a qubit model")
        cfg["d"] = 2
    elif model == "wigner":
        cfg["p"] = 3 if cfg.get("p") is None else cfg["p"]
        cfg["n"] = 1 if cfg.get("n") is None else cfg["n"]
        if cfg["n"] not in (1, 2):
            raise UsageError("n", "the Wigner model is provided for 1 or 2 qupits")
        if cfg["p"] < 3 or any(cfg["p"] % q == 0 for q in range(2, cfg["p"])):
            raise UsageError("p", "must be an odd prime")
        cfg["d"] = cfg["p"] ** cfg["n"]
    elif model != "kitchen-sink":
        cfg["d"] = 3 if cfg.get("d") is None else cfg["d"]
        low = 3 if model in ("abcl0", "abcl1") or (model == "ljbr" and cfg["task"] == "nogo") else 2
        if cfg["d"] < low:
            raise UsageError("d", f"must be at least {low} for {model}")
    if cfg.get("samples") is not None and cfg["samples"] < 2:
        raise UsageError("samples", "must be at least 2")
    cfg["subtheory_doc"] = None
    if cfg.get("subtheory"):
        if model != "kitchen-sink":
            raise UsageError("subtheory", "only the kitchen-sink model takes a subtheory")
        try:
            cfg["subtheory_doc"] = json.loads(Path(cfg["subtheory"]).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError("subtheory", str(exc)) from None
    cfg["states_doc"] = None
    if cfg.get("states"):
        try:
            cfg["states_doc"] = json.loads(Path(cfg["states"]).read_text())
            _load_states(cfg["states"])
        except (OSError, ValueError) as exc:
            raise UsageError("states", str(exc)) from None
    return cfg


def build_model(cfg: dict[str, Any]) -> OntologicalModel:
    model = cfg["model"]
    pair_rng = np.random.default_rng([cfg.get("seed") or 0, 1])
    if model == "ks":
        return build_kochen_specker()
    if model == "montina":
        return build_montina()
    if model == "bb":
        return build_beltrametti_bugajski(cfg["d"])
    if model == "bell":
        return build_bell(cfg["d"])
    if model == "ljbr":
        return build_ljbr(cfg["d"])
    if model == "abcl0":
        return build_abcl0(*random_nonorthogonal_pair(cfg["d"], pair_rng))
    if model == "abcl1":
        pairs = [random_nonorthogonal_pair(cfg["d"], pair_rng) for _ in range(3)]
        return build_abcl1_finite(pairs, [0.2, 0.3, 0.5])
    if model == "kitchen-sink":
        if cfg.get("subtheory_doc") is not None:
            sub = SubtheorySpec.from_json(json.dumps(cfg["subtheory_doc"]))
        else:
            sub = qutrit_contradiction_subtheory()
        cfg["d"] = sub.d
        return build_kitchen_sink(sub)
    return build_wigner_model(cfg["p"], cfg["n"])


def _needs_seed(model: OntologicalModel, task: str) -> bool:
    if task == "hmm-check":
        return True
    if task in ("verify", "verify-seq"):
        return not model.has_exact
    return task == "classify" and not model.enumerable


def _rng(cfg: dict[str, Any], stream: int) -> np.random.Generator:
    return np.random.default_rng([cfg.get("seed") or 0, stream])


# ---------------------------------------------------------------------------
# Tasks


def _report_rows(exp_id: str, reports: Sequence[VerificationReport]) -> list[Row]:
    return [
        Row(exp_id, ",".join(map(str, r.experiment["outcomes"])), r.model_probability, r.quantum_probability, r.stderr, r.verdict)
        for r in reports
    ]


def _preps(model: OntologicalModel, cfg: dict[str, Any]) -> dict[str, Any]:
    preps: dict[str, Any] = {k: k for k in model.preparations}
    for k, s in _load_states(cfg.get("states")).items():
        if s.d == model.d and (model.full_theory or model.accepts_state(s)):
            preps[f"file:{k}"] = s
    return preps


def _subsample(combos: list, cfg: dict[str, Any]) -> list:
    if len(combos) <= MAX_COMBOS:
        return combos
    idx = _rng(cfg, 99).choice(len(combos), size=MAX_COMBOS, replace=False)
    return [combos[i] for i in sorted(idx)]


def task_verify(model: OntologicalModel, cfg: dict[str, Any]) -> TaskResult:
    res = TaskResult()
    rng = _rng(cfg, 0)
    n = cfg.get("samples") or DEFAULT_SAMPLES
    combos: list[tuple[str, Any, str | None, str]] = []
    for pl, prep in _preps(model, cfg).items():
        for ml in model.measurements:
            combos.append((pl, prep, None, ml))
            if model.supports_transformations:
                for tl in model.transformations:
                    if tl != "I":
                        combos.append((pl, prep, tl, ml))
    for pl, prep, tl, ml in _subsample(combos, cfg):
        if tl is None:
            reps = check_prepare_measure(model, prep, ml, n, rng)
            exp = f"P={pl};M={ml}"
        else:
            reps = check_prepare_transform_measure(model, prep, tl, ml, n, rng)
            exp = f"P={pl};T={tl};M={ml}"
        res.rows.extend(_report_rows(exp, reps))
    res.ok = all(r.verdict == "pass" for r in res.rows)
    return res


def task_verify_seq(model: OntologicalModel, cfg: dict[str, Any]) -> TaskResult:
    res = TaskResult()
    rng = _rng(cfg, 0)
    n = cfg.get("samples") or DEFAULT_SAMPLES
    labels = list(model.measurements)
    combos = [(pl, prep, m1, m2) for pl, prep in _preps(model, cfg).items() for m1 in labels for m2 in labels]
    for pl, prep, m1, m2 in _subsample(combos, cfg):
        exp = f"P={pl};M={m1},{m2}"
        try:
            reps = check_sequential(model, prep, [m1, m2], None, n, rng)
        except UpdateImpossibleError as exc:
            w = exc.witness
            res.rows.append(Row(exp, "", None, None, None, "update-impossible"))
            res.details.append({"experiment": exp, "refusal": str(exc), "witness": None if w is None else w.as_dict()})
            res.ok = w is not None and w.validate(model)
            return res
        res.rows.extend(_report_rows(exp, reps))
    res.ok = all(r.verdict == "pass" for r in res.rows)
    return res


def task_classify(model: OntologicalModel, cfg: dict[str, Any]) -> TaskResult:
    res = TaskResult()
    states = list(model.preparations.values()) + list(_load_states(cfg.get("states")).values())
    if cfg["model"] == "ljbr" and model.d >= 3:
        # two states sharing the cap around |0⟩
        states += list(nogo.ljbr_witness(model.d, 0, model=model)[2:4])
    uniq: list[PureState] = []
    for s in states:
        if s.d == model.d and not any(s.same_ray(u) for u in uniq):
            uniq.append(s)
    rep = classify_epistemicity(model, uniq, rng=_rng(cfg, 0))
    got = (rep.psi_epistemic, rep.pairwise, rep.never_psi_ontic)
    exp = EXPECTED_CLASS[cfg["model"]]
    names = ("psi_epistemic", "pairwise_psi_epistemic", "never_psi_ontic")
    for name, g, e in zip(names, got, exp):
        verdict = "pass" if e is None or g == e else "fail"
        res.rows.append(Row(name, "", float(g), None if e is None else float(e), None, verdict))
    res.details.append({"classification": rep.as_dict(), "expected": dict(zip(names, exp))})
    res.ok = all(r.verdict == "pass" for r in res.rows)
    return res


def _witness_row(exp: str, w: nogo.ContradictionWitness | nogo.ConsistentVerdict, model: OntologicalModel) -> Row:
    if w.is_witness:
        ok = w.validate(model)
        return Row(exp, str(w.outcome), w.xi_value, 0.0, None, "witness" if ok else "invalid-witness")
    return Row(exp, "", None, None, None, "consistent")


def _consistency_scan(model: OntologicalModel, cfg: dict[str, Any]) -> list[tuple[str, Any]]:
    states = list(model.preparations.items())
    combos = []
    for (la, a), (lb, b) in itertools.combinations(states, 2):
        if a.same_ray(b):
            continue
        for ml, m in model.measurements.items():
            for k in range(len(m)):
                combos.append((la, a, lb, b, ml, m, k))
    out = []
    for la, a, lb, b, ml, m, k in _subsample(combos, cfg):
        proj = m.projectors[k]
        if proj.rank == 0:
            continue
        out.append((f"alpha={la};beta={lb};M={ml}", nogo.theorem1_check(model, proj, m, a, b)))
    return out


def task_nogo(model: OntologicalModel, cfg: dict[str, Any]) -> TaskResult:
    res = TaskResult()
    name = cfg["model"]
    found: list[tuple[str, Any]] = []
    if name == "ljbr":
        found = [(f"j={j}", nogo.ljbr_witness(model.d, j, model=model)[-1]) for j in range(model.d)]
    elif name == "abcl0":
        found = [("alpha,beta", nogo.abcl0_witness(model.alpha, model.beta, model=model)[-1])]
    elif name == "abcl1":
        found = [(f"component={i}", w) for i, w in enumerate(nogo.mixture_witnesses(model))]
    elif name == "kitchen-sink":
        w = nogo.kitchen_sink_search(model)
        found = [("search", w if w is not None else nogo.ConsistentVerdict("no configuration found"))]
    else:
        found = _consistency_scan(model, cfg)
    for exp, w in found:
        row = _witness_row(exp, w, model)
        res.rows.append(row)
        res.details.append({"experiment": exp, **w.as_dict()})
    if name in BROKEN:
        res.ok = bool(res.rows) and all(r.verdict == "witness" for r in res.rows)
    else:
        res.ok = all(r.verdict == "consistent" for r in res.rows)
    return res


def task_hmm_check(model: OntologicalModel, cfg: dict[str, Any]) -> TaskResult:
    res = TaskResult()
    runs = cfg.get("samples") or 20_000
    rng = _rng(cfg, 0)
    A = hmmchannel
    preps = list(model.preparations)
    meas = list(model.measurements)
    two_step = model.update_capable
    seqs = [
        [A.Prepare(p), A.Measure(m1), *([A.Measure(m2)] if two_step else [])]
        for p in preps
        for m1 in meas
        for m2 in (meas if two_step else meas[:1])
    ]
    seqs = _subsample(seqs, cfg)[:20]
    if model.enumerable:
        kernel = A.build_joint_kernel(model)
        checks = A.kernel_check(kernel)
        for key, ok in checks.items():
            res.rows.append(Row(f"kernel:{key}", "", None, None, None, "pass" if ok else "fail"))
        if model.update_capable:
            rec = A.recover_eta(kernel)
            err = 0.0
            for ml, m in model.measurements.items():
                for k in range(len(m)):
                    want = model.eta_matrix(m, k)
                    got = rec.matrix(ml, k)
                    live = ~np.isnan(want).any(axis=1)
                    if np.any(np.isnan(got).any(axis=1) != ~live):
                        err = np.inf
                    elif live.any():
                        err = max(err, float(np.abs(got[live] - want[live]).max()))
            res.rows.append(Row("recover-eta", "", err, 0.0, None, "pass" if err <= 1e-10 else "fail"))
        else:
            holes = kernel.holes()
            res.details.append({"holes": [f"{a.kind} {a.label}" for a in holes]})
            res.rows.append(Row("recover-eta", "", None, None, None, "update-impossible"))
        for seq in seqs:
            exp = "|".join(f"{a.kind} {a.label}" for a in seq)
            run = A.run_channel(kernel, seq, rng, runs)
            for h, f, p, se, ok in A.compare_to_exact(run, kernel, seq):
                res.rows.append(Row(exp, ",".join(map(str, h)), f, p, se, "pass" if ok else "fail"))
        seq = seqs[0]
        edited = [*seq[:-1], A.Measure(meas[-1])]
        structural = {
            "lambda-mediation": A.lambda_mediation_check(kernel, seq, cfg.get("seed") or 0),
            "causality": A.causality_check(kernel, seq, edited, cfg.get("seed") or 0),
            "stationarity": A.stationarity_check(kernel, [A.Prepare(preps[-1]), *([A.Measure(meas[0])] if two_step else [])], seq),
        }
    else:
        for seq in seqs:
            exp = "|".join(f"{a.kind} {a.label}" for a in seq)
            run = A.run_channel(model, seq, rng, runs)
            freq = run.frequencies(seq)
            state = model.resolve_preparation(seq[0].label)
            ms = [model.resolve_measurement(a.label) for a in seq[1:]]
            for h in itertools.product(*[range(len(m)) for m in ms]):
                p = sequential_probability(state, ms, h)
                se = float(np.sqrt(max(p * (1 - p), 0.0) / runs))
                f = freq.get(h, 0.0)
                ok = abs(f - p) <= max(1e-10, 4 * se)
                res.rows.append(Row(exp, ",".join(map(str, h)), f, p, se, "pass" if ok else "fail"))
        seq = seqs[0]
        edited = [*seq[:-1], A.Measure(meas[-1])]
        structural = {"causality": A.causality_check(model, seq, edited, cfg.get("seed") or 0, runs=min(runs, 1000))}
    for key, ok in structural.items():
        res.rows.append(Row(key, "", None, None, None, "pass" if ok else "fail"))
    res.ok = all(r.verdict in ("pass", "update-impossible") for r in res.rows)
    return res


TASK_RUNNERS = {
    "verify": task_verify,
    "verify-seq": task_verify_seq,
    "classify": task_classify,
    "nogo": task_nogo,
    "hmm-check": task_hmm_check,
}


# ---------------------------------------------------------------------------
# Entry points


def run(cfg: dict[str, Any]) -> tuple[dict[str, Any], list[list[Any]], int]:
    """Execute one config; returns (report document, CSV rows, exit status)."""
    cfg = normalize_config(cfg)
    model = build_model(cfg)
    if _needs_seed(model, cfg["task"]) and cfg.get("seed") is None:
        raise UsageError("seed", f"task {cfg['task']} on {cfg['model']} is Monte-Carlo and needs an explicit seed")
    result = TASK_RUNNERS[cfg["task"]](model, cfg)
    replay = {k: cfg.get(k) for k in ("model", "task", "d", "p", "n", "samples", "seed", "states_doc", "subtheory_doc")}
    verdicts: dict[str, int] = {}
    for r in result.rows:
        verdicts[r.verdict] = verdicts.get(r.verdict, 0) + 1
    body = {
        "config": replay,
        "model": model.describe(),
        "expectation_met": result.ok,
        "verdict_counts": dict(sorted(verdicts.items())),
        "rows": [r.__dict__ for r in result.rows],
        "details": result.details,
    }
    csv_rows = [r.as_list(cfg["model"], cfg["task"]) for r in result.rows]
    return body, csv_rows, 0 if result.ok else 1


def write_outputs(out_dir: Path, body: dict[str, Any], csv_rows: list[list[Any]]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    from . import __version__

    doc = {
        "header": {"generated": datetime.now(timezone.utc).isoformat(), "version": __version__},
        "body": body,
    }
    (out_dir / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=True, default=float) + "\n")
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        w.writerows(csv_rows)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ontosim", description="Run verification and no-go suites on ontological models.")
    ap.add_argument("--model", required=True, choices=MODELS)
    ap.add_argument("--task", required=True, choices=TASKS)
    ap.add_argument("--d", type=int, help="Hilbert-space dimension")
    ap.add_argument("--p", type=int, help="odd prime for the Wigner model")
    ap.add_argument("--n", type=int, help="number of qupits for the Wigner model")
    ap.add_argument("--samples", type=int, help="Monte-Carlo samples or channel runs per experiment")
    ap.add_argument("--seed", type=int, help="seed; required for Monte-Carlo tasks")
    ap.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./ontosim-out)")
    ap.add_argument("--states", help="JSON file of extra states as [re, im] arrays")
    ap.add_argument("--subtheory", help="JSON subtheory file for the kitchen-sink model")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    cfg = {k: v for k, v in vars(args).items() if k != "out"}
    try:
        body, rows, status = run(cfg)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"ontosim: error: {exc}", file=sys.stderr)
        return 2
    except OntosimError as exc:
        print(f"ontosim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out or os.environ.get(OUT_ENV) or "ontosim-out")
    write_outputs(out, body, rows)
    counts = ", ".join(f"{k}={v}" for k, v in body["verdict_counts"].items())
    print(f"{cfg['model']} {cfg['task']}: {counts}; expectation {'met' if status == 0 else 'NOT met'} -> {out}")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
