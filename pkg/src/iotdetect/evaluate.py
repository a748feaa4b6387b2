"""Train/test evaluation of the classifier suite.

The entry point is evaluate_dataset: one seeded 85/15 split, the five
classifiers trained on the training side, per class precision/recall/F1 on
the held out side, an always-attack baseline for scale, Gini feature
importance, and an ablation comparing the stateless-only feature set
against the full one on the identical split.

Reports carry no timestamps or environment details, so rendering one is a
pure function of the data, the seed and the config: two runs with the same
inputs emit identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSplit, LengthMismatch, GateViolation
from .features import FEATURE_NAMES, STATELESS_COUNT
from .classifiers import ModelKind, Hyperparameters, train_model

TRAIN_FRACTION = 0.85
MODEL_ORDER = (ModelKind.KN, ModelKind.LSVM, ModelKind.DT, ModelKind.RF, ModelKind.NN)
BASELINE_NAME = "always_attack"


def split_train_test(y, train_fraction: float = TRAIN_FRACTION, seed: int = 0):
    """Seeded permutation split; both sides must contain both classes."""
    y = np.asarray(y)
    n = y.shape[0]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    perm = rng.permutation(n)
    cut = int(np.floor(n * train_fraction))
    train_idx, test_idx = perm[:cut], perm[cut:]
    for name, part in (("train", train_idx), ("test", test_idx)):
        if part.size == 0 or np.unique(y[part]).size < 2:
            raise DegenerateSplit(f"{name} side of the split lacks both classes")
    return train_idx, test_idx


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    degenerate: tuple = ()


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    normal: ClassMetrics
    attack: ClassMetrics
    confusion: tuple  # ((tn, fp), (fn, tp))


def _prf(tp, fp, fn, prefix):
    flags = []
    if tp + fp == 0:
        precision = 0.0
        flags.append(f"{prefix}_precision")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append(f"{prefix}_recall")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        f1 = 0.0
        flags.append(f"{prefix}_f1")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ClassMetrics(precision, recall, f1, tuple(flags))


def metrics(y_true, y_pred) -> MetricReport:
    """Accuracy plus per class precision/recall/F1, attack class positive.

    Zero denominator cases yield 0.0 and are named in the degenerate field
    rather than raising.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape[0] != y_pred.shape[0]:
        raise LengthMismatch(f"{y_true.shape[0]} truths vs {y_pred.shape[0]} predictions")
    t = y_true > 0
    p = y_pred > 0
    tp = int(np.sum(t & p))
    tn = int(np.sum(~t & ~p))
    fp = int(np.sum(~t & p))
    fn = int(np.sum(t & ~p))
    acc = (tp + tn) / max(1, y_true.shape[0])
    return MetricReport(
        accuracy=acc,
        normal=_prf(tn, fn, fp, "normal"),
        attack=_prf(tp, fp, fn, "attack"),
        confusion=((tn, fp), (fn, tp)),
    )


@dataclass(frozen=True)
class EvalReport:
    seed: int
    features_mode: str
    feature_names: tuple
    train_rows: int
    test_rows: int
    baseline_accuracy: float
    models: dict  # kind value -> MetricReport
    feature_importance: tuple
    importance_source: str
    ablation: dict | None  # kind value -> {"stateless": f1, "all": f1} on F1(normal)
    config_digest: str | None = None

    def to_dict(self) -> dict:
        def cm(m: ClassMetrics):
            return {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "degenerate": list(m.degenerate),
            }

        return {
            "seed": self.seed,
            "features_mode": self.features_mode,
            "feature_names": list(self.feature_names),
            "train_rows": self.train_rows,
            "test_rows": self.test_rows,
            "baseline": {"name": BASELINE_NAME, "accuracy": self.baseline_accuracy},
            "models": {
                k: {
                    "accuracy": m.accuracy,
                    "normal": cm(m.normal),
                    "attack": cm(m.attack),
                    "confusion": [list(r) for r in m.confusion],
                }
                for k, m in self.models.items()
            },
            "feature_importance": {
                "source": self.importance_source,
                "weights": {n: w for n, w in zip(self.feature_names, self.feature_importance)},
            },
            "ablation": self.ablation,
            "config_digest": self.config_digest,
        }


def evaluate_dataset(
    X,
    y,
    hp: Hyperparameters = Hyperparameters(),
    seed: int = 0,
    features_mode: str = "all",
    with_ablation: bool = True,
    config_digest: str | None = None,
) -> EvalReport:
    """Full benchmark over one dataset. See the module docstring."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if features_mode == "stateless":
        cols = np.arange(STATELESS_COUNT)
        with_ablation = False
    elif features_mode == "all":
        cols = np.arange(X.shape[1])
    else:
        raise ValueError(f"unknown features mode {features_mode!r}")
    names = tuple(FEATURE_NAMES[int(c)] for c in cols)

    train_idx, test_idx = split_train_test(y, TRAIN_FRACTION, seed)
    Xtr_full, Xte_full = X[train_idx], X[test_idx]
    ytr, yte = y[train_idx], y[test_idx]
    Xtr, Xte = Xtr_full[:, cols], Xte_full[:, cols]

    child_seeds = np.random.SeedSequence(seed).spawn(2 * len(MODEL_ORDER))
    derived = [int(s.generate_state(1)[0]) for s in child_seeds]

    results: dict[str, MetricReport] = {}
    rf_model = None
    f1_normal_all: dict[str, float] = {}
    for i, kind in enumerate(MODEL_ORDER):
        model = train_model(kind, Xtr, ytr, hp, derived[i])
        rep = metrics(yte, model.predict(Xte))
        results[kind.value] = rep
        f1_normal_all[kind.value] = rep.normal.f1
        if kind is ModelKind.RF:
            rf_model = model

    baseline_accuracy = float(np.mean(np.asarray(yte) > 0))
    importance = tuple(float(v) for v in rf_model.feature_importances())

    ablation = None
    if with_ablation:
        ablation = {}
        Xtr_s = Xtr_full[:, :STATELESS_COUNT]
        Xte_s = Xte_full[:, :STATELESS_COUNT]
        for i, kind in enumerate(MODEL_ORDER):
            model = train_model(kind, Xtr_s, ytr, hp, derived[len(MODEL_ORDER) + i])
            rep = metrics(yte, model.predict(Xte_s))
            ablation[kind.value] = {
                "stateless": rep.normal.f1,
                "all": f1_normal_all[kind.value],
            }

    return EvalReport(
        seed=seed,
        features_mode=features_mode,
        feature_names=names,
        train_rows=int(train_idx.size),
        test_rows=int(test_idx.size),
        baseline_accuracy=baseline_accuracy,
        models=results,
        feature_importance=importance,
        importance_source="rf",
        ablation=ablation,
        config_digest=config_digest,
    )


# ---------------------------------------------------------------------------
# rendering

def render_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def render_csv(report: EvalReport) -> str:
    lines = ["section,name,metric,value"]
    d = report.to_dict()
    lines.append(f"meta,seed,,{d['seed']}")
    lines.append(f"meta,features_mode,,{d['features_mode']}")
    lines.append(f"meta,train_rows,,{d['train_rows']}")
    lines.append(f"meta,test_rows,,{d['test_rows']}")
    if d["config_digest"]:
        lines.append(f"meta,config_digest,,{d['config_digest']}")
    lines.append(f"baseline,{BASELINE_NAME},accuracy,{d['baseline']['accuracy']!r}")
    for kind, m in sorted(d["models"].items()):
        lines.append(f"model,{kind},accuracy,{m['accuracy']!r}")
        for cls in ("normal", "attack"):
            for metric in ("precision", "recall", "f1"):
                lines.append(f"model,{kind},{cls}_{metric},{m[cls][metric]!r}")
    for name, w in d["feature_importance"]["weights"].items():
        lines.append(f"importance,{name},weight,{w!r}")
    if d["ablation"]:
        for kind, pair in sorted(d["ablation"].items()):
            lines.append(f"ablation,{kind},f1_normal_stateless,{pair['stateless']!r}")
            lines.append(f"ablation,{kind},f1_normal_all,{pair['all']!r}")
    return "\n".join(lines) + "\n"


def render_text(report: EvalReport) -> str:
    d = report.to_dict()
    out = []
    out.append(f"dataset: {d['train_rows']} train / {d['test_rows']} test rows"
               f" (seed {d['seed']}, features {d['features_mode']})")
    if d["config_digest"]:
        out.append(f"config digest: {d['config_digest']}")
    out.append(f"baseline ({BASELINE_NAME}): accuracy {d['baseline']['accuracy']:.4f}")
    out.append("")
    out.append(f"{'model':<6} {'acc':>7} {'P(n)':>7} {'R(n)':>7} {'F1(n)':>7} {'P(a)':>7} {'R(a)':>7} {'F1(a)':>7}")
    for kind in (k.value for k in MODEL_ORDER):
        m = d["models"][kind]
        out.append(
            f"{kind:<6} {m['accuracy']:>7.4f}"
            f" {m['normal']['precision']:>7.4f} {m['normal']['recall']:>7.4f} {m['normal']['f1']:>7.4f}"
            f" {m['attack']['precision']:>7.4f} {m['attack']['recall']:>7.4f} {m['attack']['f1']:>7.4f}"
        )
    out.append("")
    out.append(f"feature importance ({d['feature_importance']['source']} impurity decrease):")
    weights = d["feature_importance"]["weights"]
    for name in sorted(weights, key=lambda k: -weights[k]):
        out.append(f"  {name:<20} {weights[name]:.4f}")
    if d["ablation"]:
        out.append("")
        out.append("F1(normal), stateless features vs all features:")
        for kind in (k.value for k in MODEL_ORDER):
            pair = d["ablation"][kind]
            out.append(f"  {kind:<6} {pair['stateless']:.4f} -> {pair['all']:.4f}")
    return "\n".join(out) + "\n"


def render_report(report: EvalReport, fmt: str) -> str:
    if fmt == "json":
        return render_json(report)
    if fmt == "csv":
        return render_csv(report)
    if fmt == "text":
        return render_text(report)
    raise ValueError(f"unknown report format {fmt!r}")


# ---------------------------------------------------------------------------
# metric gates

def check_gates(report: EvalReport, gates: dict) -> list[str]:
    """Compare report values against {dotted.path: [lo, hi]} ranges.

    Returns a list of violation descriptions, empty when all pass. Paths
    resolve into the report's dict form, e.g. "models.rf.accuracy".
    """
    d = report.to_dict()
    problems = []
    for path, bounds in sorted(gates.items()):
        lo, hi = float(bounds[0]), float(bounds[1])
        node = d
        try:
            for part in path.split("."):
                node = node[part]
            val = float(node)
        except (KeyError, TypeError, ValueError):
            problems.append(f"{path}: no such metric")
            continue
        if not (lo <= val <= hi):
            problems.append(f"{path}: {val!r} outside [{lo!r}, {hi!r}]")
    return problems


def enforce_gates(report: EvalReport, gates: dict) -> None:
    problems = check_gates(report, gates)
    if problems:
        raise GateViolation("; ".join(problems))
