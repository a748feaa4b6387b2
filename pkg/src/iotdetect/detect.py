"""Window level attack verdicts from a trained model.

Replays a capture through feature extraction and a classifier, then folds
the per packet predictions back onto each device's window sequence: a
window is flagged when the fraction of its packets predicted as attack
exceeds the threshold. Windows with no packets are reported too (fraction
zero), so the verdict stream always covers the device's whole timeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifiers import model_arity
from .errors import ArityMismatch
from .features import extract_features, DEFAULT_WINDOW

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class WindowVerdict:
    device_ip: str
    window_index: int
    packets: int
    attack_fraction: float
    flagged: bool


def replay_verdicts(records, model, width: float = DEFAULT_WINDOW,
                    threshold: float = DEFAULT_THRESHOLD) -> list[WindowVerdict]:
    """Score a capture and aggregate predictions per device window."""
    ds = extract_features(records, width=width, require_labels=False)
    if ds.X.shape[0] == 0:
        return []
    cols = model_arity(model)
    if cols > ds.X.shape[1]:
        raise ArityMismatch(f"model wants {cols} features, capture yields {ds.X.shape[1]}")
    # stateless-only models consume the leading columns of the canonical order
    pred = model.predict(ds.X[:, :cols]).astype(np.float64)

    out: list[WindowVerdict] = []
    for dev_i, ip in enumerate(ds.device_ips):
        mask = ds.device_index == dev_i
        widx = ds.window_index[mask]
        votes = pred[mask]
        nwin = int(widx.max()) + 1
        counts = np.bincount(widx, minlength=nwin)
        hits = np.bincount(widx, weights=votes, minlength=nwin)
        for w in range(nwin):
            c = int(counts[w])
            frac = float(hits[w] / c) if c else 0.0
            out.append(WindowVerdict(ip, w, c, frac, frac > threshold))
    return out


def render_verdicts(verdicts) -> str:
    lines = ["device_ip,window_index,packets,attack_fraction,flagged"]
    for v in verdicts:
        lines.append(
            f"{v.device_ip},{v.window_index},{v.packets},{v.attack_fraction:.6f},"
            f"{'FLAGGED' if v.flagged else 'ok'}"
        )
    return "\n".join(lines) + "\n"
