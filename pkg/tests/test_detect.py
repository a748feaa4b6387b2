"""Replay verdict tests at the library level."""

import numpy as np
import pytest

from iotdetect.classifiers import DecisionTreeClassifier
from iotdetect.detect import render_verdicts, replay_verdicts
from iotdetect.errors import ArityMismatch
from iotdetect.packets import PacketRecord


def mk(t, size, src="10.0.0.1"):
    return PacketRecord(t, src, "10.0.0.9", 40000, 443, 6, size)


@pytest.fixture(scope="module")
def size_model():
    """Tree that calls small packets attack, ignoring all other columns."""
    rng = np.random.default_rng(0)
    X = np.zeros((200, 11))
    X[:, 0] = np.concatenate([rng.uniform(54, 90, 100), rng.uniform(200, 1500, 100)])
    y = np.concatenate([np.ones(100, dtype=np.int64), np.zeros(100, dtype=np.int64)])
    return DecisionTreeClassifier().fit(X, y)


class TestReplay:
    def test_majority_small_window_is_flagged(self, size_model):
        pkts = [mk(float(i), 60) for i in range(8)] + [mk(8.5, 1400), mk(12.0, 1400)]
        verdicts = replay_verdicts(pkts, size_model)
        assert verdicts[0].flagged
        assert verdicts[0].attack_fraction == pytest.approx(8 / 9)
        assert not verdicts[1].flagged

    def test_tie_is_not_flagged(self, size_model):
        pkts = [mk(0.0, 60), mk(1.0, 1400)]
        v = replay_verdicts(pkts, size_model)
        assert v[0].attack_fraction == pytest.approx(0.5)
        assert not v[0].flagged  # strict majority only

    def test_empty_capture(self, size_model):
        assert replay_verdicts([], size_model) == []

    def test_gap_windows_report_zero_fraction(self, size_model):
        pkts = [mk(0.0, 60), mk(25.0, 60)]
        v = replay_verdicts(pkts, size_model)
        assert [w.packets for w in v] == [1, 0, 1]
        assert v[1].attack_fraction == 0.0
        assert not v[1].flagged

    def test_devices_are_scored_separately(self, size_model):
        pkts = sorted(
            [mk(float(i), 60, src="10.0.0.1") for i in range(5)]
            + [mk(float(i) + 0.5, 1400, src="10.0.0.2") for i in range(5)],
            key=lambda p: p.timestamp,
        )
        v = replay_verdicts(pkts, size_model)
        by_dev = {w.device_ip: w.flagged for w in v}
        assert by_dev == {"10.0.0.1": True, "10.0.0.2": False}

    def test_wide_model_on_narrow_data_is_rejected(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(50, 14))
        y = (X[:, 0] > 0.5).astype(np.int64)
        wide = DecisionTreeClassifier().fit(X, y)
        with pytest.raises(ArityMismatch):
            replay_verdicts([mk(0.0, 60)], wide)

    def test_threshold_widens_or_narrows_flags(self, size_model):
        pkts = [mk(float(i), 60) for i in range(6)] + [mk(6.5, 1400) for _ in range(4)]
        strict = replay_verdicts(pkts, size_model, threshold=0.9)
        lax = replay_verdicts(pkts, size_model, threshold=0.1)
        assert not strict[0].flagged
        assert lax[0].flagged


class TestRender:
    def test_csv_layout(self, size_model):
        pkts = [mk(float(i), 60) for i in range(4)]
        text = render_verdicts(replay_verdicts(pkts, size_model))
        lines = text.strip().splitlines()
        assert lines[0] == "device_ip,window_index,packets,attack_fraction,flagged"
        assert lines[1] == "10.0.0.1,0,4,1.000000,FLAGGED"
