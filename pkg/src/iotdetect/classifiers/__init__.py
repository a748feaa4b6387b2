"""The five classifiers, a shared training entry point, and persistence.

All models expose fit(X, y), predict(X) -> int8 labels (1 = attack) and
predict_score(X) -> float scores in [0, 1]. Distance and gradient based
models (kn, lsvm, nn) standardize features internally using training set
statistics; the tree models consume raw features. Callers therefore always
pass raw feature matrices.
"""

from __future__ import annotations

import enum
import io
import json
import zipfile
from dataclasses import dataclass, asdict

import numpy as np

from ..errors import IotDetectError
from ..features import Scaler
from .knn import KNeighborsClassifier, linear_scan_neighbors
from .linear_svm import LinearSVMClassifier
from .tree import DecisionTreeClassifier, gini_impurity
from .forest import RandomForestClassifier
from .neural import NeuralNetClassifier, gradient_check


class ModelKind(enum.Enum):
    KN = "kn"
    LSVM = "lsvm"
    DT = "dt"
    RF = "rf"
    NN = "nn"


@dataclass(frozen=True)
class Hyperparameters:
    kn_neighbors: int = 5
    svm_c: float = 1.0
    svm_epochs: int = 20
    rf_trees: int = 10
    rf_features_per_split: int = 3
    rf_bootstrap: bool = True
    nn_width: int = 11
    nn_epochs: int = 100
    nn_batch: int = 32
    nn_lr: float = 0.001

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparameters":
        return cls(**d)


def train_model(kind: ModelKind, X, y, hp: Hyperparameters = Hyperparameters(), seed: int = 0):
    """Fit one classifier of the requested kind and return it."""
    if kind is ModelKind.KN:
        return KNeighborsClassifier(k=hp.kn_neighbors).fit(X, y)
    if kind is ModelKind.LSVM:
        return LinearSVMClassifier(c=hp.svm_c, epochs=hp.svm_epochs, seed=seed).fit(X, y)
    if kind is ModelKind.DT:
        return DecisionTreeClassifier().fit(X, y)
    if kind is ModelKind.RF:
        return RandomForestClassifier(
            n_trees=hp.rf_trees,
            features_per_split=hp.rf_features_per_split,
            bootstrap=hp.rf_bootstrap,
            seed=seed,
        ).fit(X, y)
    if kind is ModelKind.NN:
        return NeuralNetClassifier(
            epochs=hp.nn_epochs, batch=hp.nn_batch, lr=hp.nn_lr, width=hp.nn_width, seed=seed
        ).fit(X, y)
    raise IotDetectError(f"unknown model kind {kind!r}")


def model_arity(model) -> int:
    """Number of feature columns the fitted model consumes."""
    if isinstance(model, KNeighborsClassifier):
        return model._X.shape[1]
    if isinstance(model, LinearSVMClassifier):
        return model.w.shape[0]
    if isinstance(model, (DecisionTreeClassifier, RandomForestClassifier)):
        return model.n_features
    if isinstance(model, NeuralNetClassifier):
        return model.d0
    raise IotDetectError(f"unknown model type {type(model).__name__}")


MODEL_FORMAT_VERSION = 1


def save_model(model, path: str, extra_meta: dict | None = None) -> None:
    """Serialize a fitted model to a single npz file.

    The file holds a JSON metadata entry (kind, format version, scaler,
    anything the caller adds) plus the kind specific arrays. Loading gives
    back a model with identical predictions.
    """
    meta = {"format_version": MODEL_FORMAT_VERSION, "kind": model.kind}
    if extra_meta:
        meta.update(extra_meta)
    arrays: dict[str, np.ndarray] = {}

    if isinstance(model, KNeighborsClassifier):
        meta["k"] = model.k
        meta["scaler"] = model.scaler.to_dict()
        arrays["train_x"] = model._X
        arrays["train_y"] = model._y
    elif isinstance(model, LinearSVMClassifier):
        meta["c"] = model.c
        meta["epochs"] = model.epochs
        meta["seed"] = model.seed
        meta["b"] = model.b
        meta["scaler"] = model.scaler.to_dict()
        arrays["w"] = model.w
        arrays["loss_history"] = model.loss_history
    elif isinstance(model, DecisionTreeClassifier):
        meta["n_features"] = model.n_features
        arrays.update(_tree_arrays(model, ""))
    elif isinstance(model, RandomForestClassifier):
        meta["n_features"] = model.n_features
        meta["n_trees"] = model.n_trees
        meta["features_per_split"] = model.features_per_split
        meta["bootstrap"] = model.bootstrap
        meta["seed"] = model.seed
        for i, tree in enumerate(model.trees):
            arrays.update(_tree_arrays(tree, f"t{i}_"))
    elif isinstance(model, NeuralNetClassifier):
        meta["epochs"] = model.epochs
        meta["batch"] = model.batch
        meta["lr"] = model.lr
        meta["width"] = model.width
        meta["seed"] = model.seed
        meta["d0"] = model.d0
        meta["scaler"] = model.scaler.to_dict()
        arrays["theta"] = model.theta
    else:
        raise IotDetectError(f"cannot serialize {type(model).__name__}")

    arrays["meta_json"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    _write_npz(path, arrays)


def _write_npz(path, arrays: dict) -> None:
    # np.savez stamps wall clock times into the zip entries, which breaks
    # byte reproducibility; write the same layout with a frozen date instead
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED, allowZip64=True) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asanyarray(arr), allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_STORED
            zf.writestr(info, buf.getvalue())


def _tree_arrays(tree: DecisionTreeClassifier, prefix: str) -> dict:
    return {
        prefix + "feature": tree.feature,
        prefix + "threshold": tree.threshold,
        prefix + "left": tree.left,
        prefix + "right": tree.right,
        prefix + "value": tree.value,
        prefix + "node_samples": tree.node_samples,
        prefix + "importance_raw": tree._importance_raw,
    }


def _tree_from_arrays(data, prefix: str, n_features: int) -> DecisionTreeClassifier:
    tree = DecisionTreeClassifier()
    tree.n_features = n_features
    tree.feature = data[prefix + "feature"]
    tree.threshold = data[prefix + "threshold"]
    tree.left = data[prefix + "left"]
    tree.right = data[prefix + "right"]
    tree.value = data[prefix + "value"]
    tree.node_samples = data[prefix + "node_samples"]
    tree._importance_raw = data[prefix + "importance_raw"]
    return tree


def load_model(path: str):
    """Load a model written by save_model. Returns (model, meta)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta_json"]).decode())
        if meta.get("format_version") != MODEL_FORMAT_VERSION:
            raise IotDetectError(f"unsupported model format {meta.get('format_version')!r}")
        kind = meta["kind"]
        if kind == "kn":
            model = KNeighborsClassifier(k=meta["k"])
            model.fit_scaled_arrays(data["train_x"], data["train_y"], Scaler.from_dict(meta["scaler"]))
        elif kind == "lsvm":
            model = LinearSVMClassifier(c=meta["c"], epochs=meta["epochs"], seed=meta["seed"])
            model.scaler = Scaler.from_dict(meta["scaler"])
            model.w = data["w"]
            model.b = float(meta["b"])
            model.loss_history = data["loss_history"]
        elif kind == "dt":
            model = _tree_from_arrays(data, "", meta["n_features"])
        elif kind == "rf":
            model = RandomForestClassifier(
                n_trees=meta["n_trees"],
                features_per_split=meta["features_per_split"],
                bootstrap=meta["bootstrap"],
                seed=meta["seed"],
            )
            model.n_features = meta["n_features"]
            model.trees = [
                _tree_from_arrays(data, f"t{i}_", meta["n_features"]) for i in range(meta["n_trees"])
            ]
        elif kind == "nn":
            model = NeuralNetClassifier(
                epochs=meta["epochs"], batch=meta["batch"], lr=meta["lr"],
                width=meta["width"], seed=meta["seed"],
            )
            model.scaler = Scaler.from_dict(meta["scaler"])
            model.theta = data["theta"]
            model.d0 = meta["d0"]
        else:
            raise IotDetectError(f"unknown model kind {kind!r} in {path}")
    return model, meta


__all__ = [
    "ModelKind",
    "Hyperparameters",
    "train_model",
    "save_model",
    "load_model",
    "KNeighborsClassifier",
    "LinearSVMClassifier",
    "DecisionTreeClassifier",
    "RandomForestClassifier",
    "NeuralNetClassifier",
    "gini_impurity",
    "gradient_check",
    "linear_scan_neighbors",
]
