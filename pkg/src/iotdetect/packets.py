"""Packet domain model.

A capture is a sequence of PacketRecord values in timestamp order. Records
are immutable; every later stage (feature extraction, simulation, replay)
works on these and never mutates them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

HTTP_PORTS = (80, 8080)

TCP_PROTO = 6
UDP_PROTO = 17


class ProtocolClass(enum.Enum):
    TCP = "TCP"
    UDP = "UDP"
    HTTP = "HTTP"
    OTHER = "OTHER"


class ClassLabel(enum.Enum):
    NORMAL = "Normal"
    ATTACK = "Attack"


def classify_protocol(proto_number: int, src_port: int, dst_port: int) -> ProtocolClass:
    """Map an IP protocol number plus ports onto the four traffic classes.

    HTTP is TCP with either port in HTTP_PORTS and takes precedence over
    plain TCP, so the four classes are mutually exclusive.
    """
    if proto_number == TCP_PROTO:
        if src_port in HTTP_PORTS or dst_port in HTTP_PORTS:
            return ProtocolClass.HTTP
        return ProtocolClass.TCP
    if proto_number == UDP_PROTO:
        return ProtocolClass.UDP
    return ProtocolClass.OTHER


def protocol_one_hot(proto: ProtocolClass) -> tuple[int, int, int, int]:
    """One-hot encoding in the fixed order (TCP, UDP, HTTP, OTHER)."""
    return (
        int(proto is ProtocolClass.TCP),
        int(proto is ProtocolClass.UDP),
        int(proto is ProtocolClass.HTTP),
        int(proto is ProtocolClass.OTHER),
    )


@dataclass(frozen=True, slots=True)
class PacketRecord:
    """One observed packet, reduced to the fields the pipeline consumes.

    timestamp is seconds since capture start (or epoch, for synthetic
    traffic), quantized to whole microseconds so that file round trips are
    exact. size is the original wire length in bytes. proto must agree with
    classify_protocol over (proto_number, ports); ports are zero exactly
    when proto is OTHER.
    """

    timestamp: float
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    proto_number: int
    size: int
    label: ClassLabel | None = field(default=None)

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")
        if self.size < 1:
            raise ValueError(f"packet size must be positive, got {self.size}")
        if not (0 <= self.src_port <= 65535 and 0 <= self.dst_port <= 65535):
            raise ValueError(f"port out of range: {self.src_port}, {self.dst_port}")
        if self.proto_number in (TCP_PROTO, UDP_PROTO):
            if self.src_port == 0 or self.dst_port == 0:
                raise ValueError("TCP/UDP packets need nonzero ports")
        else:
            if self.src_port != 0 or self.dst_port != 0:
                raise ValueError("ports must be zero when the protocol has none")

    @property
    def proto(self) -> ProtocolClass:
        return classify_protocol(self.proto_number, self.src_port, self.dst_port)


@dataclass(frozen=True, slots=True)
class DeviceStream:
    """All packets with a common src_ip, still in timestamp order."""

    device_ip: str
    packets: tuple[PacketRecord, ...]


@dataclass(frozen=True, slots=True)
class Violation:
    """One invariant breach found by validate_stream."""

    index: int
    problem: str


def validate_stream(stream: DeviceStream) -> list[Violation]:
    """Check a stream's invariants, returning every breach found.

    An empty list means the stream is well formed. Checked: timestamps never
    decrease, and every packet's src_ip matches the stream's device_ip.
    """
    out = []
    prev = None
    for i, pkt in enumerate(stream.packets):
        if pkt.src_ip != stream.device_ip:
            out.append(Violation(i, f"src_ip {pkt.src_ip} does not belong to {stream.device_ip}"))
        if prev is not None and pkt.timestamp < prev:
            out.append(Violation(i, f"timestamp {pkt.timestamp:.6f} before {prev:.6f}"))
        prev = pkt.timestamp
    return out


@dataclass(frozen=True, slots=True)
class TimeWindow:
    """A half-open slice [start, start + width) of one device's stream.

    Windows tile the stream from its first packet onward; gaps in traffic
    still produce (empty) windows so window indices stay contiguous.
    """

    device_ip: str
    index: int
    start: float
    width: float
    packets: tuple[PacketRecord, ...]

    def contains(self, timestamp: float) -> bool:
        return self.start <= timestamp < self.start + self.width


def quantize_us(t: float) -> float:
    """Snap a time in seconds to the microsecond grid used everywhere here."""
    return round(t * 1e6) / 1e6
