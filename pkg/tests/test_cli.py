"""End to end command line tests, run in process through main()."""

import hashlib
import json

import numpy as np
import pytest

from iotdetect.cli import main
from iotdetect.features import load_dataset, save_dataset, LabeledDataset, FEATURE_NAMES
from iotdetect.simulate import (
    AttackKind,
    ScenarioConfig,
    default_devices,
    save_config,
)


def small_scenario(seed=11, length=360.0, kinds=tuple(AttackKind)):
    # low flood rates keep the datasets small enough for quick fits
    return ScenarioConfig(
        seed=seed,
        capture_length=length,
        devices=default_devices(),
        attack_kinds=kinds,
        attack_rates=(
            (AttackKind.SYN_FLOOD, 80.0),
            (AttackKind.UDP_FLOOD, 90.0),
            (AttackKind.HTTP_GET_FLOOD, 70.0),
        ),
    )


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """Workspace with one simulated capture run through extract and train."""
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "scenario.json"
    save_config(small_scenario(), cfg_path)

    capture = root / "cap.csv"
    assert main(["simulate", "--config", str(cfg_path), "--out", str(capture)]) == 0

    dataset = root / "data.csv"
    assert main(["extract", "--in", str(capture), "--out", str(dataset)]) == 0

    model = root / "dt.npz"
    assert main(["train", "--in", str(dataset), "--model", "dt", "--out", str(model)]) == 0
    return {"root": root, "config": cfg_path, "capture": capture, "dataset": dataset, "model": model}


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestSimulate:
    def test_metadata_sidecar(self, ws):
        meta = json.loads((ws["root"] / "cap.csv.meta.json").read_text())
        assert meta["packets"] == meta["attack_packets"] + meta["benign_packets"]
        assert len(meta["schedule"]) == 9  # three kinds on each of three devices
        assert len(meta["config_digest"]) == 16
        assert meta["seed"] == 11

    def test_identical_invocations_produce_identical_bytes(self, ws, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--config", str(ws["config"]), "--out", str(a)]) == 0
        assert main(["simulate", "--config", str(ws["config"]), "--out", str(b)]) == 0
        assert sha(a) == sha(b)
        assert sha(a) == sha(ws["capture"])

    def test_seed_override_changes_bytes(self, ws, tmp_path):
        out = tmp_path / "c.csv"
        assert main(["simulate", "--config", str(ws["config"]), "--seed", "99", "--out", str(out)]) == 0
        assert sha(out) != sha(ws["capture"])
        meta = json.loads((str(out) + ".meta.json") and open(str(out) + ".meta.json").read())
        assert meta["seed"] == 99

    def test_pcap_output_gets_label_sidecar(self, tmp_path):
        cfg = tmp_path / "s.json"
        save_config(small_scenario(seed=12, length=120.0, kinds=()), cfg)
        out = tmp_path / "benign.pcap"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        assert (tmp_path / "benign.pcap.labels.csv").exists()

    def test_missing_config_is_usage_error(self, tmp_path):
        rc = main(["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x.csv")])
        assert rc == 2


class TestExtract:
    def test_row_per_packet(self, ws):
        meta = json.loads((ws["root"] / "cap.csv.meta.json").read_text())
        ds = load_dataset(ws["dataset"])
        assert ds.X.shape == (meta["packets"], 11)
        assert int(ds.y.sum()) == meta["attack_packets"]

    def test_window_width_passthrough(self, ws, tmp_path):
        out = tmp_path / "w5.csv"
        assert main(["extract", "--in", str(ws["capture"]), "--out", str(out), "--window", "5"]) == 0
        narrow = load_dataset(out)
        wide = load_dataset(ws["dataset"])
        assert narrow.X.shape == wide.X.shape
        assert not np.array_equal(narrow.X[:, 8], wide.X[:, 8])

    def test_pcap_round_trip_through_sidecar(self, ws, tmp_path):
        pcap = tmp_path / "cap.pcap"
        assert main(["simulate", "--config", str(ws["config"]), "--out", str(pcap)]) == 0
        out = tmp_path / "from_pcap.csv"
        assert main(["extract", "--in", str(pcap), "--out", str(out)]) == 0
        ds = load_dataset(out)
        wide = load_dataset(ws["dataset"])
        assert ds.X.shape == wide.X.shape
        assert np.array_equal(ds.y, wide.y)

    def test_corrupt_pcap_is_bad_data(self, tmp_path, capsys):
        bad = tmp_path / "junk.pcap"
        bad.write_bytes(b"\x00" * 40)
        rc = main(["extract", "--in", str(bad), "--out", str(tmp_path / "x.csv")])
        assert rc == 3
        assert "offset" in capsys.readouterr().err

    def test_missing_input_is_usage_error(self, tmp_path):
        rc = main(["extract", "--in", str(tmp_path / "ghost.csv"), "--out", "-"])
        assert rc == 2

    def test_unlabeled_capture_needs_opt_in(self, ws, tmp_path, capsys):
        pcap = tmp_path / "nolabels.pcap"
        assert main(["simulate", "--config", str(ws["config"]), "--out", str(pcap)]) == 0
        (tmp_path / "nolabels.pcap.labels.csv").unlink()
        rc = main(["extract", "--in", str(pcap), "--out", str(tmp_path / "x.csv")])
        assert rc == 3
        capsys.readouterr()
        rc = main(["extract", "--in", str(pcap), "--out", str(tmp_path / "x.csv"), "--allow-unlabeled"])
        assert rc == 0


def crafted_dataset(path, seed=0, n=400):
    rng = np.random.default_rng(seed)
    y = (rng.uniform(size=n) < 0.6).astype(np.int64)
    X = np.zeros((n, 11))
    X[:, 0] = np.where(y == 1, rng.uniform(54, 90, n), rng.uniform(100, 1500, n))
    X[:, 1] = np.where(y == 1, rng.uniform(0, 0.01, n), rng.uniform(0.05, 5.0, n))
    X[:, 4] = 1.0
    X[:, 8] = np.where(y == 1, rng.uniform(3e4, 5e4, n), rng.uniform(0, 1e4, n))
    X[:, 9] = 1.0
    save_dataset(LabeledDataset(X=X, y=y, feature_names=FEATURE_NAMES), path)


class TestTrainAndEvaluate:
    def test_train_rejects_bad_model_name(self, ws, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["train", "--in", str(ws["dataset"]), "--model", "xgboost", "--out", str(tmp_path / "m.npz")])
        assert err.value.code == 2

    def test_stateless_training_consumes_eight_columns(self, ws, tmp_path):
        out = tmp_path / "dt8.npz"
        assert main(["train", "--in", str(ws["dataset"]), "--model", "dt", "--out", str(out), "--features", "stateless"]) == 0
        from iotdetect.classifiers import load_model, model_arity

        model, meta = load_model(out)
        assert model_arity(model) == 8
        assert meta["features_mode"] == "stateless"

    def test_evaluate_json_report(self, tmp_path):
        data = tmp_path / "crafted.csv"
        crafted_dataset(data)
        out = tmp_path / "report.json"
        assert main(["evaluate", "--in", str(data), "--format", "json", "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert set(report["models"]) == {"kn", "lsvm", "dt", "rf", "nn"}
        assert report["features_mode"] == "all"

    def test_evaluate_stateless_mode(self, tmp_path):
        data = tmp_path / "crafted.csv"
        crafted_dataset(data, seed=1)
        out = tmp_path / "report.json"
        assert main(["evaluate", "--in", str(data), "--features", "stateless", "--format", "json", "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert len(report["feature_names"]) == 8
        assert report["ablation"] is None

    def test_gate_violation_exit_code(self, tmp_path, capsys):
        data = tmp_path / "crafted.csv"
        crafted_dataset(data, seed=2)
        gates = tmp_path / "gates.json"
        gates.write_text(json.dumps({"models.dt.accuracy": [1.01, 2.0]}))
        rc = main(["evaluate", "--in", str(data), "--gate", str(gates), "--out", str(tmp_path / "r.txt")])
        assert rc == 4
        assert "gate violation" in capsys.readouterr().err

    def test_passing_gates_exit_zero(self, tmp_path):
        data = tmp_path / "crafted.csv"
        crafted_dataset(data, seed=3)
        gates = tmp_path / "gates.json"
        gates.write_text(json.dumps({"models.dt.accuracy": [0.5, 1.0]}))
        assert main(["evaluate", "--in", str(data), "--gate", str(gates), "--out", str(tmp_path / "r.txt")]) == 0


class TestDetect:
    def test_flags_follow_the_attack_schedule(self, ws, tmp_path):
        out = tmp_path / "verdicts.csv"
        assert main(["detect", "--in", str(ws["capture"]), "--model-file", str(ws["model"]), "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "device_ip,window_index,packets,attack_fraction,flagged"
        meta = json.loads((ws["root"] / "cap.csv.meta.json").read_text())
        spans = {}
        for s in meta["schedule"]:
            spans.setdefault(s["device_ip"], []).append((s["start"], s["start"] + s["duration"]))
        flagged = 0
        for ln in lines[1:]:
            dev, widx, _, _, verdict = ln.split(",")
            assert verdict in ("FLAGGED", "ok")
            if verdict == "FLAGGED":
                flagged += 1
                # a flagged window must overlap an attack, one window of slack
                lo = int(widx) * 10.0
                hi = lo + 10.0
                ok = any(lo < e + 10.0 and hi > s - 10.0 for s, e in spans[dev])
                assert ok, f"window {widx} on {dev} flagged outside every attack"
        assert flagged > 0

    def test_benign_capture_raises_no_flags(self, ws, tmp_path):
        cfg = tmp_path / "benign.json"
        save_config(small_scenario(seed=13, length=150.0, kinds=()), cfg)
        capture = tmp_path / "benign.csv"
        assert main(["simulate", "--config", str(cfg), "--out", str(capture)]) == 0
        out = tmp_path / "verdicts.csv"
        assert main(["detect", "--in", str(capture), "--model-file", str(ws["model"]), "--out", str(out)]) == 0
        assert "FLAGGED" not in out.read_text()

    def test_threshold_is_respected(self, ws, tmp_path):
        out = tmp_path / "all_ok.csv"
        assert main(["detect", "--in", str(ws["capture"]), "--model-file", str(ws["model"]),
                     "--threshold", "1.0", "--out", str(out)]) == 0
        assert "FLAGGED" not in out.read_text()
