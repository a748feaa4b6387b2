"""Flow-feature DDoS detection for consumer IoT traffic.

The package covers the whole experiment loop: simulate a small home
network under SYN / UDP / HTTP GET floods, extract per packet features
(stateless plus windowed stateful), train five classifiers built from
first principles, evaluate them against an always-attack baseline, and
replay captures through a trained model for window level verdicts.

Typical use:

    from iotdetect import simulate, features, evaluate

    result = simulate.overlay_scenario(simulate.default_scenario_config())
    ds = features.extract_features(result.records)
    report = evaluate.evaluate_dataset(ds.X, ds.y, seed=7)
"""

from .packets import (
    PacketRecord,
    DeviceStream,
    TimeWindow,
    ProtocolClass,
    ClassLabel,
    classify_protocol,
    protocol_one_hot,
    validate_stream,
)
from .features import FEATURE_NAMES, LabeledDataset, extract_features, fit_scaler, Scaler
from .classifiers import (
    ModelKind,
    Hyperparameters,
    train_model,
    save_model,
    load_model,
)
from .evaluate import evaluate_dataset, metrics, split_train_test
from .detect import replay_verdicts, WindowVerdict

__version__ = "0.1.0"

__all__ = [
    "PacketRecord",
    "DeviceStream",
    "TimeWindow",
    "ProtocolClass",
    "ClassLabel",
    "classify_protocol",
    "protocol_one_hot",
    "validate_stream",
    "FEATURE_NAMES",
    "LabeledDataset",
    "extract_features",
    "fit_scaler",
    "Scaler",
    "ModelKind",
    "Hyperparameters",
    "train_model",
    "save_model",
    "load_model",
    "evaluate_dataset",
    "metrics",
    "split_train_test",
    "replay_verdicts",
    "WindowVerdict",
    "__version__",
]
