"""Release gate: nine checks the shipped pipeline must clear on the default
scenario, each reporting one PASS/FAIL line. Run with pytest; the pipeline
fixture is computed once per session.
"""

import hashlib
import json
import struct
import time

import numpy as np
import pytest

from iotdetect.classifiers import (
    DecisionTreeClassifier,
    Hyperparameters,
    KNeighborsClassifier,
    NeuralNetClassifier,
    RandomForestClassifier,
    gradient_check,
    train_model,
    ModelKind,
)
from iotdetect.cli import main
from iotdetect.detect import replay_verdicts
from iotdetect.evaluate import evaluate_dataset, split_train_test
from iotdetect.features import extract_features
from iotdetect.packets import PacketRecord
from iotdetect.simulate import (
    AttackKind,
    ScenarioConfig,
    default_devices,
    default_scenario_config,
    overlay_scenario,
    save_config,
)

WINDOW = 10.0


@pytest.fixture(scope="session")
def pipeline():
    """Simulate, extract and benchmark the default scenario once."""
    out = {}
    t0 = time.perf_counter()
    config = default_scenario_config(seed=42)
    result = overlay_scenario(config)
    out["simulate_s"] = time.perf_counter() - t0
    out["records"] = result.records
    out["schedule"] = result.schedule

    t1 = time.perf_counter()
    ds = extract_features(result.records, WINDOW)
    out["extract_s"] = time.perf_counter() - t1
    out["ds"] = ds

    t2 = time.perf_counter()
    out["report"] = evaluate_dataset(ds.X, ds.y, Hyperparameters(), seed=42)
    out["evaluate_s"] = time.perf_counter() - t2

    # the split and derived seeds evaluate_dataset uses internally, so the
    # oracle checks below exercise models equivalent to the benchmarked ones
    train_idx, test_idx = split_train_test(ds.y, seed=42)
    out["train_idx"], out["test_idx"] = train_idx, test_idx
    derived = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(42).spawn(10)]
    out["derived"] = derived
    return out


def announce(capsys, tag, ok, detail):
    with capsys.disabled():
        print(f"\n[{tag}] {'PASS' if ok else 'FAIL'} - {detail}")


def test_gate_1_class_imbalance_baseline(pipeline, capsys):
    records = pipeline["records"]
    attack = sum(1 for p in records if p.label is not None and p.label.value == "Attack")
    frac = attack / len(records)
    took = pipeline["simulate_s"]
    ok = 0.90 <= frac <= 0.96 and took < 60.0
    announce(
        capsys,
        "gate 1/9 baseline imbalance",
        ok,
        f"always-attack accuracy {frac:.4f} in [0.90, 0.96], simulate {took:.1f}s < 60s",
    )
    assert 0.90 <= frac <= 0.96
    assert took < 60.0


def test_gate_2_benchmark_accuracy(pipeline, capsys):
    rep = pipeline["report"]
    took = pipeline["simulate_s"] + pipeline["extract_s"] + pipeline["evaluate_s"]
    accs = {k: m.accuracy for k, m in rep.models.items()}
    f1a = {k: m.attack.f1 for k, m in rep.models.items()}
    rn = {k: m.normal.recall for k, m in rep.models.items()}
    strong = all(accs[k] >= 0.99 and f1a[k] >= 0.99 for k in ("kn", "dt", "rf", "nn"))
    svm_ok = accs["lsvm"] >= 0.97
    svm_lowest = all(rn["lsvm"] < rn[k] for k in ("kn", "dt", "rf", "nn"))
    ok = strong and svm_ok and svm_lowest and took < 300.0
    announce(
        capsys,
        "gate 2/9 benchmark accuracy",
        ok,
        "acc " + " ".join(f"{k}={accs[k]:.4f}" for k in ("kn", "lsvm", "dt", "rf", "nn"))
        + f", lsvm normal recall {rn['lsvm']:.4f} strictly lowest, pipeline {took:.0f}s < 300s",
    )
    assert strong, f"accuracies {accs}, attack f1 {f1a}"
    assert svm_ok, f"lsvm accuracy {accs['lsvm']}"
    assert svm_lowest, f"normal recalls {rn}"
    assert took < 300.0


def test_gate_3_feature_importance_ranking(pipeline, capsys):
    rep = pipeline["report"]
    names = list(rep.feature_names)
    weights = np.array(rep.feature_importance)
    order = list(np.argsort(-weights))
    ranked = [names[i] for i in order]
    top_ok = ranked[0] == "packet_size" and weights[names.index("packet_size")] > 0.3
    stateful = ("bandwidth", "dest_count", "dest_delta")
    ranks = {n: ranked.index(n) for n in stateful}
    bottom_ok = all(r >= len(names) - 5 for r in ranks.values())
    ok = top_ok and bottom_ok
    announce(
        capsys,
        "gate 3/9 importance ranking",
        ok,
        f"packet_size weight {weights[0]:.3f} on top, stateful ranks "
        + " ".join(f"{n}={ranks[n] + 1}" for n in stateful)
        + " of 11",
    )
    assert top_ok, f"ranking {ranked}, weights {dict(zip(names, weights.round(4)))}"
    assert bottom_ok, f"stateful ranks {ranks}"


def test_gate_4_stateful_ablation(pipeline, capsys):
    ab = pipeline["report"].ablation
    gains = {k: v["all"] - v["stateless"] for k, v in ab.items()}
    improved = sum(1 for g in gains.values() if g >= 0)
    rf_gain = gains["rf"]
    ok = improved >= 3 and rf_gain >= 0.005
    announce(
        capsys,
        "gate 4/9 windowed feature ablation",
        ok,
        f"normal F1 gains {' '.join(f'{k}=+{g:.4f}' for k, g in gains.items())}, "
        f"{improved}/5 non-negative, rf +{rf_gain:.4f} >= 0.005",
    )
    assert improved >= 3, f"gains {gains}"
    assert rf_gain >= 0.005, f"rf gain {rf_gain}"


def test_gate_5_traffic_marginals(pipeline, capsys):
    records = pipeline["records"]
    attack = [p for p in records if p.label.value == "Attack"]
    benign = [p for p in records if p.label.value == "Normal"]
    small = sum(1 for p in attack if p.size < 100) / len(attack)
    b_udp = sum(1 for p in benign if p.proto_number == 17)
    b_tcp = sum(1 for p in benign if p.proto_number == 6)
    a_udp = sum(1 for p in attack if p.proto_number == 17)
    a_tcp = sum(1 for p in attack if p.proto_number == 6)
    ok = small >= 0.9 and b_udp > b_tcp and a_tcp > a_udp
    announce(
        capsys,
        "gate 5/9 traffic marginals",
        ok,
        f"attack P(size<100B)={small:.3f}, benign udp:tcp={b_udp / b_tcp:.2f}, "
        f"attack tcp:udp={a_tcp / a_udp:.2f}",
    )
    assert small >= 0.9
    assert b_udp > b_tcp
    assert a_tcp > a_udp


def walk_tree(tree, x):
    node = 0
    while tree.feature[node] >= 0:
        node = tree.left[node] if x[tree.feature[node]] < tree.threshold[node] else tree.right[node]
    return 1 if tree.value[node] > 0.5 else 0


def test_gate_6_exact_prediction_oracles(pipeline, capsys):
    ds = pipeline["ds"]
    Xtr = ds.X[pipeline["train_idx"]]
    ytr = ds.y[pipeline["train_idx"]]
    Xte = ds.X[pipeline["test_idx"]]

    rng = np.random.default_rng(2026)
    Q = Xte[rng.choice(Xte.shape[0], size=500, replace=False)]
    kn = KNeighborsClassifier(k=5).fit(Xtr, ytr)
    kd_equal = np.array_equal(kn.predict(Q), kn.predict_linear(Q)) and np.array_equal(
        kn.neighbors(Q), kn.neighbors_linear(Q)
    )

    dt = DecisionTreeClassifier().fit(Xtr, ytr)
    W = Xte[rng.choice(Xte.shape[0], size=2000, replace=False)]
    walker_equal = dt.predict(W).tolist() == [walk_tree(dt, x) for x in W]

    forest_equal = True
    for seed in (0, 1, 2):
        r2 = np.random.default_rng(seed)
        Xs = r2.normal(size=(400, 6))
        ys = (Xs[:, 0] + 0.5 * Xs[:, 3] > 0).astype(np.int64)
        rf1 = RandomForestClassifier(n_trees=1, features_per_split=6, bootstrap=False, seed=seed).fit(Xs, ys)
        dt1 = DecisionTreeClassifier().fit(Xs, ys)
        Qs = r2.normal(size=(300, 6))
        forest_equal &= np.array_equal(rf1.predict(Qs), dt1.predict(Qs))
        forest_equal &= np.array_equal(rf1.trees[0].feature, dt1.feature)

    ok = kd_equal and walker_equal and forest_equal
    announce(
        capsys,
        "gate 6/9 prediction oracles",
        ok,
        f"kd-tree vs linear scan on 500 queries: {kd_equal}, "
        f"tree vs reference walker on 2000 rows: {walker_equal}, "
        f"single-tree forest vs cart on 3 seeds: {forest_equal}",
    )
    assert kd_equal
    assert walker_equal
    assert forest_equal


def test_gate_7_gradient_fidelity(pipeline, capsys):
    ds = pipeline["ds"]
    rng = np.random.default_rng(77)
    idx = rng.choice(pipeline["train_idx"], size=256, replace=False)
    X, y = ds.X[idx], ds.y[idx]
    if len(np.unique(y)) < 2:  # pragma: no cover - seed keeps both classes
        y = y.copy()
        y[0] = 1 - y[0]

    nn = NeuralNetClassifier(seed=7)
    nn.initialize(X, y)
    batches = [rng.choice(256, size=8, replace=False) for _ in range(3)]
    before = [gradient_check(nn, X[b], y[b]) for b in batches]
    nn.train_steps(X, y, 10)
    after = [gradient_check(nn, X[b], y[b]) for b in batches]
    worst = max(before + after)
    ok = worst < 1e-4
    announce(
        capsys,
        "gate 7/9 gradient fidelity",
        ok,
        f"max relative error over 3 batches of 8: before {max(before):.2e}, "
        f"after 10 steps {max(after):.2e}, bound 1e-4",
    )
    assert worst < 1e-4, f"before {before}, after {after}"


def reduced_config():
    # two devices and gentle rates: enough signal, far less data
    return ScenarioConfig(
        seed=2024,
        capture_length=360.0,
        devices=default_devices()[1:],
        attack_rates=(
            (AttackKind.SYN_FLOOD, 50.0),
            (AttackKind.UDP_FLOOD, 55.0),
            (AttackKind.HTTP_GET_FLOOD, 45.0),
        ),
    )


def run_cli_pipeline(root):
    root.mkdir(parents=True, exist_ok=True)
    cfg = root / "scenario.json"
    save_config(reduced_config(), cfg)
    capture = root / "cap.csv"
    dataset = root / "data.csv"
    model = root / "dt.npz"
    report = root / "report.json"
    assert main(["simulate", "--config", str(cfg), "--out", str(capture)]) == 0
    assert main(["extract", "--in", str(capture), "--out", str(dataset)]) == 0
    assert main(["train", "--in", str(dataset), "--model", "dt", "--out", str(model)]) == 0
    assert main(["evaluate", "--in", str(dataset), "--seed", "5", "--format", "json", "--out", str(report)]) == 0
    digest = lambda p: hashlib.sha256(p.read_bytes()).hexdigest()
    return {"capture": digest(capture), "model": digest(model), "report": digest(report)}


def random_capture(n, seed):
    rng = np.random.default_rng(seed)
    ts_us = np.cumsum(rng.integers(0, 1_000_000, size=n))
    ts_us[0] = 0
    out = []
    for i in range(n):
        kind = rng.integers(0, 3)
        if kind == 2:
            proto, sport, dport = 1, 0, 0
        else:
            proto = 6 if kind == 0 else 17
            sport, dport = int(rng.integers(1, 65536)), int(rng.integers(1, 65536))
        out.append(
            PacketRecord(
                ts_us[i] / 1e6,
                f"10.1.{rng.integers(0, 4)}.{rng.integers(1, 255)}",
                f"172.16.{rng.integers(0, 4)}.{rng.integers(1, 255)}",
                sport,
                dport,
                proto,
                int(rng.integers(1, 1501)),
            )
        )
    return out


def test_gate_8_pipeline_determinism(tmp_path, capsys):
    runs = [run_cli_pipeline(tmp_path / f"run{i}") for i in (1, 2)]
    bytes_equal = runs[0] == runs[1]

    from iotdetect.capture import read_pcap, write_pcap

    pkts = random_capture(1000, seed=88)
    path = tmp_path / "rt.pcap"
    write_pcap(pkts, path)
    got = read_pcap(path).records
    field = lambda p: (p.timestamp, p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.proto_number, p.size)
    round_trip = [field(p) for p in got] == [field(p) for p in pkts]

    ok = bytes_equal and round_trip
    announce(
        capsys,
        "gate 8/9 determinism",
        ok,
        f"two seeded pipeline runs byte-identical: {bytes_equal} "
        f"(report sha {runs[0]['report'][:12]}), 1000-packet pcap round trip exact: {round_trip}",
    )
    assert bytes_equal, f"run digests differ: {runs}"
    assert round_trip


def test_gate_9_detection_replay(pipeline, capsys):
    ds = pipeline["ds"]
    Xtr = ds.X[pipeline["train_idx"]]
    ytr = ds.y[pipeline["train_idx"]]
    rf = train_model(ModelKind.RF, Xtr, ytr, Hyperparameters(), pipeline["derived"][3])

    records = pipeline["records"]
    verdicts = replay_verdicts(records, rf, WINDOW)

    anchors = {}
    for p in records:
        if p.src_ip not in anchors:
            anchors[p.src_ip] = p.timestamp
    spans = {}
    for s in pipeline["schedule"]:
        spans.setdefault(s.device_ip, []).append((s.start, s.end))

    missed, stray = [], []
    for v in verdicts:
        lo = anchors[v.device_ip] + v.window_index * WINDOW
        hi = lo + WINDOW
        required = any(lo >= s + WINDOW and hi <= e - WINDOW for s, e in spans.get(v.device_ip, ()))
        allowed = any(lo < e + WINDOW and hi > s - WINDOW for s, e in spans.get(v.device_ip, ()))
        if required and not v.flagged:
            missed.append((v.device_ip, v.window_index))
        if v.flagged and not allowed:
            stray.append((v.device_ip, v.window_index))

    benign_cfg = ScenarioConfig(
        seed=4242, capture_length=300.0, devices=default_devices(), attack_kinds=()
    )
    benign = overlay_scenario(benign_cfg)
    benign_flags = [v for v in replay_verdicts(benign.records, rf, WINDOW) if v.flagged]

    ok = not missed and not stray and not benign_flags
    announce(
        capsys,
        "gate 9/9 detection replay",
        ok,
        f"attack windows flagged with one-window slack: {len(missed)} missed, "
        f"{len(stray)} stray flags, benign-only capture flags: {len(benign_flags)}",
    )
    assert not missed, f"unflagged attack windows {missed[:10]}"
    assert not stray, f"flags outside any attack {stray[:10]}"
    assert not benign_flags, f"{len(benign_flags)} windows flagged on benign traffic"
