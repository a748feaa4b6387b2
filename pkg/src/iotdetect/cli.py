"""Command line front end.

Five subcommands cover the pipeline end to end:

    iotdetect simulate --config scenario.json --out capture.pcap
    iotdetect extract  --in capture.pcap --out features.csv
    iotdetect train    --in features.csv --model rf --out model.npz
    iotdetect evaluate --in features.csv --format text
    iotdetect detect   --in capture.pcap --model-file model.npz

Exit codes: 0 success, 2 usage or configuration problems, 3 malformed
input data, 4 evaluation gate violations, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import capture as cap
from . import simulate as sim
from .detect import replay_verdicts, render_verdicts, DEFAULT_THRESHOLD
from .errors import CaptureError, GateViolation, IotDetectError, MissingLabel, UnsortedInput
from .evaluate import evaluate_dataset, render_report, enforce_gates
from .features import (
    DEFAULT_WINDOW,
    STATELESS_COUNT,
    LABEL_ATTACK,
    LabeledDataset,
    extract_features,
    load_dataset,
    save_dataset,
)
from .classifiers import Hyperparameters, ModelKind, train_model, save_model, load_model

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BAD_DATA = 3
EXIT_GATE = 4


def _run_digest(params: dict) -> str:
    canon = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_simulate(args) -> int:
    if args.config:
        config = sim.load_config(args.config)
    else:
        config = sim.default_scenario_config()
    if args.seed is not None:
        config = sim.ScenarioConfig(
            seed=args.seed,
            capture_length=config.capture_length,
            devices=config.devices,
            victim_ip=config.victim_ip,
            attack_kinds=config.attack_kinds,
            attack_rates=config.attack_rates,
        )

    result = sim.overlay_scenario(config)
    fmt = cap.detect_format(args.out)
    cap.write_capture(result.records, args.out, fmt)
    if fmt is cap.CaptureFormat.PCAP:
        cap.write_label_sidecar(result.records, args.out + ".labels.csv")

    n_attack = sum(1 for p in result.records if p.label is not None and p.label.value == "Attack")
    meta = {
        "config_digest": sim.config_digest(config),
        "seed": config.seed,
        "capture": args.out,
        "format": fmt.value,
        "packets": len(result.records),
        "attack_packets": n_attack,
        "benign_packets": len(result.records) - n_attack,
        "schedule": [
            {"device_ip": s.device_ip, "kind": s.kind.value, "start": s.start, "duration": s.duration}
            for s in result.schedule
        ],
    }
    with open(args.out + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(result.records)} packets to {args.out} ({n_attack} attack)", file=sys.stderr)
    return EXIT_OK


def _load_labeled_capture(path: str, labels_path: str | None):
    fmt = cap.detect_format(path)
    result = cap.read_capture(path, fmt)
    records = result.records
    if fmt is cap.CaptureFormat.PCAP:
        sidecar = labels_path or path + ".labels.csv"
        try:
            labels = cap.read_label_sidecar(sidecar)
        except FileNotFoundError:
            labels = None
        if labels:
            records = cap.apply_labels(records, labels)
    return records, result.skipped


def cmd_extract(args) -> int:
    records, skipped = _load_labeled_capture(args.input, args.labels)
    ds = extract_features(records, width=args.window, require_labels=not args.allow_unlabeled)
    save_dataset(ds, args.out) if args.out and args.out != "-" else save_dataset(ds, sys.stdout)
    if skipped:
        print(f"skipped {skipped} unparseable frames", file=sys.stderr)
    print(f"extracted {ds.X.shape[0]} rows x {ds.X.shape[1]} features", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    ds = load_dataset(args.input)
    if ds.y is None:
        raise IotDetectError("training needs a labeled dataset (no label column found)")
    X = ds.X[:, :STATELESS_COUNT] if args.features == "stateless" else ds.X
    hp = Hyperparameters()
    kind = ModelKind(args.model)
    model = train_model(kind, X, ds.y, hp, args.seed)
    digest = _run_digest(
        {"command": "train", "input_sha256": _file_digest(args.input), "model": args.model,
         "seed": args.seed, "features": args.features}
    )
    save_model(
        model,
        args.out,
        extra_meta={
            "seed": args.seed,
            "features_mode": args.features,
            "hyperparameters": hp.to_dict(),
            "config_digest": digest,
        },
    )
    print(f"trained {args.model} on {X.shape[0]} rows, saved to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ds = load_dataset(args.input)
    if ds.y is None:
        raise IotDetectError("evaluation needs a labeled dataset (no label column found)")
    digest = _run_digest(
        {"command": "evaluate", "input_sha256": _file_digest(args.input),
         "seed": args.seed, "features": args.features}
    )
    report = evaluate_dataset(
        ds.X, ds.y, Hyperparameters(), seed=args.seed,
        features_mode=args.features, config_digest=digest,
    )
    _write_text(args.out, render_report(report, args.format))
    if args.gate:
        with open(args.gate) as fh:
            gates = json.load(fh)
        enforce_gates(report, gates)
    return EXIT_OK


def cmd_detect(args) -> int:
    records, skipped = _load_labeled_capture(args.input, None)
    model, _ = load_model(args.model_file)
    verdicts = replay_verdicts(records, model, width=args.window, threshold=args.threshold)
    _write_text(args.out, render_verdicts(verdicts))
    if skipped:
        print(f"skipped {skipped} unparseable frames", file=sys.stderr)
    flagged = sum(1 for v in verdicts if v.flagged)
    print(f"{flagged} of {len(verdicts)} windows flagged", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iotdetect", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic capture from a scenario config")
    p.add_argument("--config", help="scenario config JSON (omit for the built-in default scenario)")
    p.add_argument("--seed", type=int, default=None, help="override the config's seed")
    p.add_argument("--out", required=True, help="output capture path (.pcap or .csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="turn a capture into a feature matrix CSV")
    p.add_argument("--in", dest="input", required=True, help="input capture (.pcap or .csv)")
    p.add_argument("--out", default="-", help="output dataset CSV (default stdout)")
    p.add_argument("--window", type=float, default=DEFAULT_WINDOW, help="window width in seconds")
    p.add_argument("--labels", help="label sidecar CSV (default <in>.labels.csv for pcap)")
    p.add_argument("--allow-unlabeled", action="store_true", help="permit captures without labels")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit one classifier on an extracted dataset")
    p.add_argument("--in", dest="input", required=True, help="labeled dataset CSV")
    p.add_argument("--model", required=True, choices=[k.value for k in ModelKind])
    p.add_argument("--out", required=True, help="output model file (npz)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--features", choices=["all", "stateless"], default="all")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="benchmark all five classifiers on a dataset")
    p.add_argument("--in", dest="input", required=True, help="labeled dataset CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p.add_argument("--out", default="-", help="report path (default stdout)")
    p.add_argument("--features", choices=["all", "stateless"], default="all")
    p.add_argument("--gate", help="JSON file of {metric.path: [lo, hi]} ranges; exit 4 on violation")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("detect", help="replay a capture through a trained model")
    p.add_argument("--in", dest="input", required=True, help="input capture (.pcap or .csv)")
    p.add_argument("--model-file", required=True, help="model npz written by train")
    p.add_argument("--window", type=float, default=DEFAULT_WINDOW)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="flag a window when its attack packet fraction exceeds this")
    p.add_argument("--out", default="-", help="verdict CSV path (default stdout)")
    p.set_defaults(func=cmd_detect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GateViolation as exc:
        print(f"gate violation: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (CaptureError, UnsortedInput, MissingLabel) as exc:
        print(f"bad input data: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IotDetectError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
