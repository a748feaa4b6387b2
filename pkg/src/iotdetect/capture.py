"""Reading and writing packet captures.

Two on-disk formats are supported: classic pcap (Ethernet link layer, the
usual 24 byte global header followed by 16 byte record headers) and a flat
CSV with one packet per row. pcap is what real capture tools produce; the
CSV exists so datasets can be inspected and diffed with ordinary tools and
can carry class labels inline, which pcap cannot.

pcap specifics:
  * magic 0xa1b2c3d4, written little endian; byte swapped files are accepted
  * version must be 2.4 and the link type must be 1 (Ethernet)
  * timestamps are rebased so the first packet reads as time zero
  * frames are synthesized on write (Ethernet + IPv4 + TCP/UDP headers, zero
    padding up to the recorded size); transport checksums are not computed
    and not validated
  * non IPv4 frames, and frames too short to reach the transport ports, are
    skipped on read and reported in the skipped count
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from enum import Enum

from .errors import MalformedHeader, MalformedRecord, TruncatedRecord, UnsortedInput, CaptureError
from .packets import PacketRecord, ClassLabel, TCP_PROTO, UDP_PROTO

PCAP_MAGIC = 0xA1B2C3D4
PCAP_VERSION = (2, 4)
LINKTYPE_ETHERNET = 1
SNAPLEN = 65535

# synthetic captures are stamped relative to this epoch so files look sane
# in external tools; readers rebase to the first packet so the value cancels
EPOCH_BASE = 1_500_000_000

_GLOBAL_HDR = struct.Struct("<IHHiIII")
_REC_HDR = struct.Struct("<IIII")
_ETH_IP = struct.Struct("!6s6sH BBHHHBBH4s4s")  # Ethernet header + IPv4 header (IHL 5)


class CaptureFormat(Enum):
    PCAP = "pcap"
    CSV = "csv"


CSV_COLUMNS = ("timestamp", "src_ip", "dst_ip", "src_port", "dst_port", "proto_number", "size")
CSV_LABEL_COLUMN = "label"


@dataclass(frozen=True)
class ReadResult:
    """Parsed records plus how many frames were skipped as unparseable."""

    records: list
    skipped: int


def detect_format(path: str) -> CaptureFormat:
    lower = str(path).lower()
    if lower.endswith((".pcap", ".cap")):
        return CaptureFormat.PCAP
    if lower.endswith(".csv"):
        return CaptureFormat.CSV
    raise CaptureError(f"cannot infer capture format from {path!r}; pass one explicitly")


def _pack_ip(ip: str) -> bytes:
    parts = ip.split(".")
    if len(parts) != 4:
        raise MalformedRecord(f"{ip!r} is not a dotted quad IPv4 address")
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise MalformedRecord(f"{ip!r} is not a dotted quad IPv4 address") from None
    if any(v < 0 or v > 255 for v in vals):
        raise MalformedRecord(f"{ip!r} is not a dotted quad IPv4 address")
    return bytes(vals)


def _unpack_ip(raw: bytes) -> str:
    return ".".join(str(b) for b in raw)


def _mac_for(ip_bytes: bytes) -> bytes:
    # locally administered MAC derived from the IPv4 address, purely cosmetic
    return bytes((0x02, 0x00)) + ip_bytes


def _ip_checksum(header: bytes) -> int:
    total = 0
    for i in range(0, len(header), 2):
        total += (header[i] << 8) | header[i + 1]
    while total > 0xFFFF:
        total = (total & 0xFFFF) + (total >> 16)
    return (~total) & 0xFFFF


def _synthesize_frame(pkt: PacketRecord, ident: int) -> bytes:
    """Build an Ethernet frame carrying the record's addressing fields."""
    src = _pack_ip(pkt.src_ip)
    dst = _pack_ip(pkt.dst_ip)
    if pkt.proto_number == TCP_PROTO:
        transport = struct.pack("!HHIIBBHHH", pkt.src_port, pkt.dst_port, 0, 0, 5 << 4, 0x10, 8192, 0, 0)
    elif pkt.proto_number == UDP_PROTO:
        transport = struct.pack("!HHHH", pkt.src_port, pkt.dst_port, 0, 0)
    else:
        transport = b""

    stack_len = 14 + 20 + len(transport)
    frame_len = max(pkt.size, stack_len)
    ip_total = frame_len - 14
    if pkt.proto_number == UDP_PROTO:
        transport = struct.pack("!HHHH", pkt.src_port, pkt.dst_port, ip_total - 20, 0)

    ip_hdr = struct.pack(
        "!BBHHHBBH4s4s",
        0x45, 0, ip_total, ident & 0xFFFF, 0, 64, pkt.proto_number, 0, src, dst,
    )
    checksum = _ip_checksum(ip_hdr)
    ip_hdr = ip_hdr[:10] + struct.pack("!H", checksum) + ip_hdr[12:]

    eth = _mac_for(dst) + _mac_for(src) + struct.pack("!H", 0x0800)
    frame = eth + ip_hdr + transport
    if len(frame) < frame_len:
        frame += bytes(frame_len - len(frame))
    return frame


def _check_sorted(records) -> None:
    prev = None
    for i, pkt in enumerate(records):
        if prev is not None and pkt.timestamp < prev:
            raise UnsortedInput(f"packet {i} at {pkt.timestamp:.6f} comes before {prev:.6f}")
        prev = pkt.timestamp


def write_pcap(records, path: str) -> None:
    """Write records as a classic little endian pcap file.

    Records must already be in timestamp order. Timestamps are shifted by
    EPOCH_BASE so the file carries plausible absolute times.
    """
    _check_sorted(records)
    buf = bytearray()
    buf += _GLOBAL_HDR.pack(PCAP_MAGIC, PCAP_VERSION[0], PCAP_VERSION[1], 0, 0, SNAPLEN, LINKTYPE_ETHERNET)
    for i, pkt in enumerate(records):
        total_us = round(pkt.timestamp * 1e6)
        ts_sec = EPOCH_BASE + total_us // 1_000_000
        ts_usec = total_us % 1_000_000
        frame = _synthesize_frame(pkt, i)
        buf += _REC_HDR.pack(ts_sec, ts_usec, len(frame), pkt.size)
        buf += frame
    with open(path, "wb") as fh:
        fh.write(buf)


def read_pcap(path: str) -> ReadResult:
    """Parse a classic pcap file into PacketRecord values.

    The first packet defines time zero. Frames that are not IPv4 over
    Ethernet, or are cut before the transport ports, are counted in
    skipped rather than raising. Labels are always None; pcap has nowhere
    to put them (see the CSV sidecar written by the simulator).
    """
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) < _GLOBAL_HDR.size:
        raise MalformedHeader("file too short for a pcap global header", offset=0)
    magic = struct.unpack_from("<I", data, 0)[0]
    if magic == PCAP_MAGIC:
        endian = "<"
    elif magic == struct.unpack(">I", struct.pack("<I", PCAP_MAGIC))[0]:
        endian = ">"
    else:
        raise MalformedHeader(f"unrecognized magic 0x{magic:08x}", offset=0)

    ver_major, ver_minor = struct.unpack_from(endian + "HH", data, 4)
    if (ver_major, ver_minor) != PCAP_VERSION:
        raise MalformedHeader(f"unsupported pcap version {ver_major}.{ver_minor}", offset=4)
    linktype = struct.unpack_from(endian + "I", data, 20)[0]
    if linktype != LINKTYPE_ETHERNET:
        raise MalformedHeader(f"unsupported link type {linktype}", offset=20)

    rec_hdr = struct.Struct(endian + "IIII")
    records: list[PacketRecord] = []
    skipped = 0
    base_us = None
    offset = _GLOBAL_HDR.size
    n = len(data)
    index = 0
    while offset < n:
        if offset + rec_hdr.size > n:
            raise TruncatedRecord("record header cut short", offset=offset)
        ts_sec, ts_usec, incl_len, orig_len = rec_hdr.unpack_from(data, offset)
        offset += rec_hdr.size
        if offset + incl_len > n:
            raise TruncatedRecord("frame data cut short", offset=offset)
        frame = data[offset : offset + incl_len]
        offset += incl_len
        index += 1

        abs_us = ts_sec * 1_000_000 + ts_usec
        if base_us is None:
            base_us = abs_us
        rel_us = abs_us - base_us
        if rel_us < 0:
            raise UnsortedInput(f"record {index - 1} predates the first record")

        parsed = _parse_frame(frame, orig_len, rel_us / 1e6)
        if parsed is None:
            skipped += 1
        else:
            records.append(parsed)
    return ReadResult(records, skipped)


def _parse_frame(frame: bytes, orig_len: int, timestamp: float):
    if len(frame) < 34:  # Ethernet + minimal IPv4
        return None
    ethertype = (frame[12] << 8) | frame[13]
    if ethertype != 0x0800:
        return None
    version = frame[14] >> 4
    ihl = frame[14] & 0x0F
    if version != 4 or ihl < 5 or len(frame) < 14 + ihl * 4:
        return None
    proto_number = frame[23]
    src_ip = _unpack_ip(frame[26:30])
    dst_ip = _unpack_ip(frame[30:34])
    src_port = dst_port = 0
    if proto_number in (TCP_PROTO, UDP_PROTO):
        t_off = 14 + ihl * 4
        if len(frame) < t_off + 4:
            return None
        src_port = (frame[t_off] << 8) | frame[t_off + 1]
        dst_port = (frame[t_off + 2] << 8) | frame[t_off + 3]
    try:
        return PacketRecord(
            timestamp=timestamp,
            src_ip=src_ip,
            dst_ip=dst_ip,
            src_port=src_port,
            dst_port=dst_port,
            proto_number=proto_number,
            size=orig_len,
        )
    except ValueError:
        return None


def write_csv(records, path_or_file) -> None:
    """Write records as CSV, keeping absolute timestamps.

    A label column is included when any record carries a label; unlabeled
    records leave the cell empty.
    """
    _check_sorted(records)
    with_labels = any(p.label is not None for p in records)

    def _emit(fh):
        writer = csv.writer(fh, lineterminator="\n")
        header = list(CSV_COLUMNS) + ([CSV_LABEL_COLUMN] if with_labels else [])
        writer.writerow(header)
        for p in records:
            row = [
                f"{p.timestamp:.6f}", p.src_ip, p.dst_ip,
                str(p.src_port), str(p.dst_port), str(p.proto_number), str(p.size),
            ]
            if with_labels:
                row.append("" if p.label is None else p.label.value)
            writer.writerow(row)

    if hasattr(path_or_file, "write"):
        _emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _emit(fh)


def read_csv(path_or_file) -> ReadResult:
    """Parse the CSV capture format. Timestamps are taken as stored."""
    if hasattr(path_or_file, "read"):
        return _read_csv_stream(path_or_file)
    with open(path_or_file, "r", newline="") as fh:
        return _read_csv_stream(fh)


def _read_csv_stream(fh) -> ReadResult:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedHeader("empty CSV capture", offset=0) from None
    if tuple(header[: len(CSV_COLUMNS)]) != CSV_COLUMNS:
        raise MalformedHeader(f"unexpected CSV header {header!r}", offset=0)
    has_label = len(header) > len(CSV_COLUMNS) and header[len(CSV_COLUMNS)] == CSV_LABEL_COLUMN
    if len(header) > len(CSV_COLUMNS) and not has_label:
        raise MalformedHeader(f"unexpected trailing columns {header[len(CSV_COLUMNS):]!r}", offset=0)

    records = []
    want = len(CSV_COLUMNS) + (1 if has_label else 0)
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != want:
            raise MalformedRecord(f"line {lineno}: expected {want} fields, got {len(row)}")
        try:
            label = None
            if has_label and row[7]:
                label = ClassLabel(row[7])
            records.append(
                PacketRecord(
                    timestamp=float(row[0]),
                    src_ip=row[1],
                    dst_ip=row[2],
                    src_port=int(row[3]),
                    dst_port=int(row[4]),
                    proto_number=int(row[5]),
                    size=int(row[6]),
                    label=label,
                )
            )
        except ValueError as exc:
            raise MalformedRecord(f"line {lineno}: {exc}") from None
    return ReadResult(records, 0)


def read_capture(path: str, fmt: CaptureFormat | None = None) -> ReadResult:
    if fmt is None:
        fmt = detect_format(path)
    if fmt is CaptureFormat.PCAP:
        return read_pcap(path)
    return read_csv(path)


def write_capture(records, path: str, fmt: CaptureFormat | None = None) -> None:
    if fmt is None:
        fmt = detect_format(path)
    if fmt is CaptureFormat.PCAP:
        write_pcap(records, path)
    else:
        write_csv(records, path)


def filter_devices(records, device_ips) -> tuple[list, int]:
    """Keep packets originating from the allowlisted devices.

    Returns (kept, dropped_count). Order is preserved.
    """
    allowed = frozenset(device_ips)
    kept = [p for p in records if p.src_ip in allowed]
    return kept, len(records) - len(kept)


def write_label_sidecar(records, path: str) -> None:
    """Write per packet labels keyed by packet index.

    Companion file for pcap captures, which cannot carry labels inline.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("packet_index", "label"))
        for i, p in enumerate(records):
            writer.writerow((i, "" if p.label is None else p.label.value))


def read_label_sidecar(path: str) -> dict[int, ClassLabel]:
    out: dict[int, ClassLabel] = {}
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["packet_index", "label"]:
            raise MalformedHeader(f"unexpected sidecar header {header!r}", offset=0)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise MalformedRecord(f"line {lineno}: expected 2 fields")
            if row[1]:
                out[int(row[0])] = ClassLabel(row[1])
    return out


def apply_labels(records, labels: dict[int, ClassLabel]) -> list:
    """Return records with sidecar labels attached by index."""
    out = []
    for i, p in enumerate(records):
        lab = labels.get(i)
        if lab is not None and p.label is None:
            p = PacketRecord(p.timestamp, p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.proto_number, p.size, lab)
        out.append(p)
    return out
