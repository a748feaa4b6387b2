"""Per packet feature extraction.

Eleven features per packet, in a fixed column order. The first eight are
stateless (computable from the packet and its two predecessors in the same
device stream); the last three summarize the 10 second window the packet
falls in, so they need bounded per device state but no global view.

    0  packet_size        wire length in bytes
    1  inter_arrival      seconds since the previous packet of the device
    2  inter_arrival_diff first difference of inter_arrival
    3  inter_arrival_diff2 second difference of inter_arrival
    4  is_tcp             protocol one hot...
    5  is_udp
    6  is_http            (TCP with port 80/8080 on either side)
    7  is_other
    8  bandwidth          window bytes / window width
    9  dest_count         distinct destination IPs in the window
    10 dest_delta         dest_count minus the previous window's

Difference features are zero padded at stream starts: inter_arrival is 0
for the first packet, its first difference is 0 for the first two, the
second difference for the first three. dest_delta is 0 in a stream's first
window. Windows with no packets still advance the window sequence, so a
quiet gap pulls dest_delta negative at the next activity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingLabel, TooFewRows, UnsortedInput, DimensionMismatch
from .packets import (
    ClassLabel,
    DeviceStream,
    TimeWindow,
    HTTP_PORTS,
    TCP_PROTO,
    UDP_PROTO,
)

FEATURE_NAMES = (
    "packet_size",
    "inter_arrival",
    "inter_arrival_diff",
    "inter_arrival_diff2",
    "is_tcp",
    "is_udp",
    "is_http",
    "is_other",
    "bandwidth",
    "dest_count",
    "dest_delta",
)

STATELESS_COUNT = 8
DEFAULT_WINDOW = 10.0

LABEL_ATTACK = 1
LABEL_NORMAL = 0


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus labels and row provenance.

    Rows are in global timestamp order. y is 1 for Attack, 0 for Normal,
    or None for unlabeled captures. device_index/window_index/stream_pos
    say which device stream, which window of it, and which position in it
    each row came from; they are None when the dataset was loaded from a
    flat CSV.
    """

    X: np.ndarray
    y: np.ndarray | None
    feature_names: tuple = FEATURE_NAMES
    device_ips: tuple = ()
    device_index: np.ndarray | None = None
    window_index: np.ndarray | None = None
    stream_pos: np.ndarray | None = None

    def row_provenance(self, i: int) -> tuple:
        if self.device_index is None:
            raise ValueError("dataset carries no provenance")
        return (
            self.device_ips[int(self.device_index[i])],
            int(self.window_index[i]),
            int(self.stream_pos[i]),
        )


def split_by_device(records) -> list[DeviceStream]:
    """Group a timestamp ordered capture into per device streams.

    Streams are keyed by src_ip and returned sorted by address. The global
    ordering is checked on the way through.
    """
    groups: dict[str, list] = {}
    prev = None
    for i, pkt in enumerate(records):
        if prev is not None and pkt.timestamp < prev:
            raise UnsortedInput(f"packet {i} at {pkt.timestamp:.6f} comes before {prev:.6f}")
        prev = pkt.timestamp
        groups.setdefault(pkt.src_ip, []).append(pkt)
    return [DeviceStream(ip, tuple(groups[ip])) for ip in sorted(groups)]


def window_indices(timestamps: np.ndarray, width: float) -> np.ndarray:
    """Window index of each timestamp, anchored at the first one.

    Integer microsecond arithmetic so results do not depend on float
    rounding at window edges.
    """
    if width <= 0:
        raise ValueError(f"window width must be positive, got {width}")
    if timestamps.size == 0:
        return np.zeros(0, dtype=np.int64)
    us = np.round(timestamps * 1e6).astype(np.int64)
    width_us = int(round(width * 1e6))
    return (us - us[0]) // width_us


def window_partition(stream: DeviceStream, width: float = DEFAULT_WINDOW) -> list[TimeWindow]:
    """Cut one device stream into contiguous windows, empties included."""
    ts = np.array([p.timestamp for p in stream.packets], dtype=np.float64)
    idx = window_indices(ts, width)
    if idx.size == 0:
        return []
    anchor = stream.packets[0].timestamp
    nwin = int(idx[-1]) + 1
    bounds = np.searchsorted(idx, np.arange(nwin + 1))
    out = []
    for w in range(nwin):
        pkts = stream.packets[bounds[w] : bounds[w + 1]]
        out.append(TimeWindow(stream.device_ip, w, anchor + w * width, width, pkts))
    return out


def _stream_arrays(stream: DeviceStream):
    n = len(stream.packets)
    t = np.empty(n, dtype=np.float64)
    size = np.empty(n, dtype=np.float64)
    proto = np.empty(n, dtype=np.int32)
    sport = np.empty(n, dtype=np.int32)
    dport = np.empty(n, dtype=np.int32)
    y = np.empty(n, dtype=np.int8)
    dst_code = np.empty(n, dtype=np.int64)
    codes: dict[str, int] = {}
    for i, p in enumerate(stream.packets):
        t[i] = p.timestamp
        size[i] = p.size
        proto[i] = p.proto_number
        sport[i] = p.src_port
        dport[i] = p.dst_port
        if p.label is None:
            y[i] = -1
        else:
            y[i] = LABEL_ATTACK if p.label is ClassLabel.ATTACK else LABEL_NORMAL
        code = codes.get(p.dst_ip)
        if code is None:
            code = len(codes)
            codes[p.dst_ip] = code
        dst_code[i] = code
    return t, size, proto, sport, dport, dst_code, y


def _one_hot_cols(proto, sport, dport):
    is_tcpish = proto == TCP_PROTO
    http_port = np.isin(sport, HTTP_PORTS) | np.isin(dport, HTTP_PORTS)
    is_http = is_tcpish & http_port
    is_tcp = is_tcpish & ~is_http
    is_udp = proto == UDP_PROTO
    is_other = ~(is_tcp | is_udp | is_http)
    return is_tcp, is_udp, is_http, is_other


def stateless_features(stream: DeviceStream) -> np.ndarray:
    """The eight per packet features of one device stream, as (n, 8)."""
    t, size, proto, sport, dport, _, _ = _stream_arrays(stream)
    return _stateless_from_arrays(t, size, proto, sport, dport)


def _stateless_from_arrays(t, size, proto, sport, dport) -> np.ndarray:
    n = t.size
    X = np.zeros((n, STATELESS_COUNT), dtype=np.float64)
    X[:, 0] = size
    if n > 1:
        X[1:, 1] = t[1:] - t[:-1]
    if n > 2:
        X[2:, 2] = X[2:, 1] - X[1:-1, 1]
    if n > 3:
        X[3:, 3] = X[3:, 2] - X[2:-1, 2]
    is_tcp, is_udp, is_http, is_other = _one_hot_cols(proto, sport, dport)
    X[:, 4] = is_tcp
    X[:, 5] = is_udp
    X[:, 6] = is_http
    X[:, 7] = is_other
    return X


def stateful_features(windows: list[TimeWindow]) -> np.ndarray:
    """Window summary features, one row per window, as (n_windows, 3)."""
    nwin = len(windows)
    out = np.zeros((nwin, 3), dtype=np.float64)
    prev_count = 0
    for w, win in enumerate(windows):
        total = sum(p.size for p in win.packets)
        count = len({p.dst_ip for p in win.packets})
        out[w, 0] = total / win.width
        out[w, 1] = count
        out[w, 2] = 0 if w == 0 else count - prev_count
        prev_count = count
    return out


def _stateful_from_arrays(size, dst_code, widx, width):
    nwin = int(widx[-1]) + 1 if widx.size else 0
    win_bytes = np.bincount(widx, weights=size, minlength=nwin)
    ncodes = int(dst_code.max()) + 1 if dst_code.size else 1
    pair = widx * ncodes + dst_code
    uniq = np.unique(pair)
    win_dests = np.bincount((uniq // ncodes).astype(np.int64), minlength=nwin)
    delta = np.zeros(nwin, dtype=np.float64)
    if nwin > 1:
        delta[1:] = win_dests[1:].astype(np.float64) - win_dests[:-1]
    return win_bytes / width, win_dests.astype(np.float64), delta


def assemble(streams, width: float = DEFAULT_WINDOW, require_labels: bool = True) -> LabeledDataset:
    """Build the full feature matrix from per device streams.

    One row per packet, rows ordered by (timestamp, device, position), so
    the matrix lines up with the original capture order. Labels are taken
    from the packets; raises MissingLabel when require_labels is set and
    any packet has none.
    """
    parts = []
    for dev_i, stream in enumerate(streams):
        t, size, proto, sport, dport, dst_code, y = _stream_arrays(stream)
        X = np.zeros((t.size, len(FEATURE_NAMES)), dtype=np.float64)
        X[:, :STATELESS_COUNT] = _stateless_from_arrays(t, size, proto, sport, dport)
        widx = window_indices(t, width)
        if t.size:
            bw, dests, delta = _stateful_from_arrays(size, dst_code, widx, width)
            X[:, 8] = bw[widx]
            X[:, 9] = dests[widx]
            X[:, 10] = delta[widx]
        if require_labels and np.any(y < 0):
            bad = int(np.argmax(y < 0))
            raise MissingLabel(f"packet {bad} of device {stream.device_ip} has no label")
        parts.append((t, X, y, widx, np.full(t.size, dev_i, dtype=np.int32)))

    if not parts:
        empty = np.zeros((0, len(FEATURE_NAMES)))
        return LabeledDataset(empty, np.zeros(0, dtype=np.int8), FEATURE_NAMES, ())

    t_all = np.concatenate([p[0] for p in parts])
    X_all = np.vstack([p[1] for p in parts])
    y_all = np.concatenate([p[2] for p in parts])
    w_all = np.concatenate([p[3] for p in parts])
    d_all = np.concatenate([p[4] for p in parts])
    pos_all = np.concatenate([np.arange(p[0].size, dtype=np.int64) for p in parts])

    order = np.lexsort((pos_all, d_all, t_all))
    y_out = y_all[order]
    return LabeledDataset(
        X=X_all[order],
        y=None if np.any(y_out < 0) else y_out,
        feature_names=FEATURE_NAMES,
        device_ips=tuple(s.device_ip for s in streams),
        device_index=d_all[order],
        window_index=w_all[order],
        stream_pos=pos_all[order],
    )


def extract_features(records, width: float = DEFAULT_WINDOW, require_labels: bool = True) -> LabeledDataset:
    """Capture to feature matrix in one call."""
    return assemble(split_by_device(records), width=width, require_labels=require_labels)


# ---------------------------------------------------------------------------
# feature scaling

@dataclass(frozen=True)
class Scaler:
    """Column standardization fitted on training rows only.

    Constant columns (std 0) map to 0 rather than dividing by zero.
    """

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != self.mean.size:
            raise DimensionMismatch(f"scaler fitted on {self.mean.size} columns, got {X.shape[1]}")
        safe = np.where(self.std > 0, self.std, 1.0)
        out = (X - self.mean) / safe
        out[:, self.std == 0] = 0.0
        return out

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def fit_scaler(X: np.ndarray) -> Scaler:
    if X.shape[0] < 2:
        raise TooFewRows(f"need at least 2 rows to standardize, got {X.shape[0]}")
    return Scaler(X.mean(axis=0), X.std(axis=0))


# ---------------------------------------------------------------------------
# dataset file round trip

def save_dataset(ds: LabeledDataset, path_or_file) -> None:
    """Write features (and labels when present) as CSV.

    Floats are written with repr, which round trips float64 exactly.
    """

    def _emit(fh):
        cols = list(ds.feature_names) + (["label"] if ds.y is not None else [])
        fh.write(",".join(cols) + "\n")
        y = ds.y
        for i in range(ds.X.shape[0]):
            row = [repr(float(v)) for v in ds.X[i]]
            if y is not None:
                row.append(ClassLabel.ATTACK.value if y[i] == LABEL_ATTACK else ClassLabel.NORMAL.value)
            fh.write(",".join(row) + "\n")

    if hasattr(path_or_file, "write"):
        _emit(path_or_file)
    else:
        with open(path_or_file, "w") as fh:
            _emit(fh)


def load_dataset(path_or_file) -> LabeledDataset:
    if hasattr(path_or_file, "read"):
        return _load_dataset_stream(path_or_file)
    with open(path_or_file) as fh:
        return _load_dataset_stream(fh)


def _load_dataset_stream(fh) -> LabeledDataset:
    header = fh.readline().strip()
    cols = tuple(header.split(",")) if header else ()
    has_label = cols and cols[-1] == "label"
    names = cols[:-1] if has_label else cols
    if names != FEATURE_NAMES:
        raise ValueError(f"unexpected dataset columns {cols!r}")
    rows = []
    labels = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        rows.append([float(v) for v in fields[: len(FEATURE_NAMES)]])
        if has_label:
            labels.append(LABEL_ATTACK if fields[-1] == ClassLabel.ATTACK.value else LABEL_NORMAL)
    X = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(FEATURE_NAMES)))
    y = np.array(labels, dtype=np.int8) if has_label else None
    return LabeledDataset(X=X, y=y, feature_names=FEATURE_NAMES)
