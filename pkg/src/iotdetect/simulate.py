"""Synthetic consumer IoT traffic with overlaid flooding attacks.

The generator models a small home network: a handful of devices, each
described by a few recurring behaviors (keepalives, streaming, periodic
burst updates), plus a scenario layer that compromises every device and
launches each configured flood kind once, at a random position inside the
capture, with the device's own address as the source.

Everything is driven by numpy Generators seeded from the scenario seed, so
a config reproduces its capture byte for byte.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SchedulingInfeasible, IotDetectError
from .packets import PacketRecord, ClassLabel, TCP_PROTO, UDP_PROTO, quantize_us


class BehaviorKind(enum.Enum):
    KEEPALIVE = "KEEPALIVE"        # sparse periodic heartbeats
    STREAM = "STREAM"              # steady jittered packet flow
    BURST_UPDATE = "BURST_UPDATE"  # quiet, then a tight packet burst
    PACED_TICKS = "PACED_TICKS"    # clock-paced trains: exact 1/rate spacing


class AttackKind(enum.Enum):
    SYN_FLOOD = "SYN_FLOOD"
    UDP_FLOOD = "UDP_FLOOD"
    HTTP_GET_FLOOD = "HTTP_GET_FLOOD"


@dataclass(frozen=True)
class Behavior:
    """One recurring traffic pattern of a device.

    period applies to KEEPALIVE (seconds between packets) and BURST_UPDATE
    or PACED_TICKS (seconds between burst starts). rate is packets per
    second, sustained for STREAM and within a burst otherwise. BURST_UPDATE
    bursts are software-paced (jittered gaps); PACED_TICKS trains come off
    a hardware timer, so their in-train spacing is exactly 1/rate.
    """

    kind: BehaviorKind
    proto_number: int
    size_range: tuple[int, int]
    dst_ip: str
    dst_port: int
    period: float = 0.0
    rate: float = 0.0
    burst_size: int = 0


@dataclass(frozen=True)
class DeviceProfile:
    device_ip: str
    behaviors: tuple[Behavior, ...]


@dataclass(frozen=True)
class AttackSpec:
    """A single flood: what to send, at whom, how fast, for how long."""

    kind: AttackKind
    victim_ip: str
    victim_port: int
    rate: float
    duration: float
    size_range: tuple[int, int]


@dataclass(frozen=True)
class ScheduledAttack:
    """An attack placed on the timeline of one compromised device."""

    device_ip: str
    kind: AttackKind
    start: float
    duration: float

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class SimulationResult:
    records: list
    schedule: tuple[ScheduledAttack, ...]


# per attack kind: victim port, default rate (packets/s), size range (bytes)
ATTACK_DEFAULTS = {
    AttackKind.SYN_FLOOD: (443, 650.0, (54, 74)),
    AttackKind.UDP_FLOOD: (53, 720.0, (54, 95)),
    AttackKind.HTTP_GET_FLOOD: (80, 560.0, (54, 95)),
}

ATTACK_DURATION_RANGE = (90.0, 110.0)

# floods are not flat: intensity swings around the nominal rate with this
# relative depth and period, like a saturating sender seeing back-pressure
FLOOD_WOBBLE_DEPTH = 0.90
FLOOD_WOBBLE_PERIOD = 27.0

# every flood winds down with a few seconds of sparse stragglers
FLOOD_TAIL_RATE = 2.5
FLOOD_TAIL_RANGE = (8.0, 11.0)

# benign streams drift too, just slower and shallower than floods
STREAM_WOBBLE_DEPTH = 0.8
STREAM_WOBBLE_PERIOD = 45.0

DEFAULT_VICTIM_IP = "203.0.113.9"
DEFAULT_CAPTURE_LENGTH = 600.0

_EPHEMERAL = (49152, 65535)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    capture_length: float = DEFAULT_CAPTURE_LENGTH
    devices: tuple[DeviceProfile, ...] = ()
    victim_ip: str = DEFAULT_VICTIM_IP
    attack_kinds: tuple[AttackKind, ...] = tuple(AttackKind)
    # rate overrides by kind; kinds not listed use ATTACK_DEFAULTS
    attack_rates: tuple[tuple[AttackKind, float], ...] = ()

    def rate_for(self, kind: AttackKind) -> float:
        for k, r in self.attack_rates:
            if k == kind:
                return r
        return ATTACK_DEFAULTS[kind][1]


def default_devices() -> tuple[DeviceProfile, ...]:
    """Three devices loosely modeled on common home IoT gear.

    The camera dominates benign volume with a video stream that alternates
    between a steady rate and periodic high-bitrate segments; the plug is
    mostly idle except for keepalives and short TCP ack bursts; the monitor
    sends telemetry and a bulky sync upload once a minute.
    """
    camera = DeviceProfile(
        "192.168.1.10",
        (
            Behavior(BehaviorKind.STREAM, UDP_PROTO, (1000, 1400), "34.107.8.20", 9000, rate=25.0),
            Behavior(BehaviorKind.STREAM, UDP_PROTO, (300, 700), "34.107.8.20", 9002, rate=12.0),
            Behavior(BehaviorKind.BURST_UPDATE, UDP_PROTO, (1300, 1500), "34.107.8.20", 9001,
                     period=75.0, rate=24.0, burst_size=900),
            Behavior(BehaviorKind.STREAM, TCP_PROTO, (100, 240), "34.107.8.21", 8883, rate=10.0),
            Behavior(BehaviorKind.KEEPALIVE, TCP_PROTO, (125, 185), "34.107.8.21", 8883, period=10.0),
            Behavior(BehaviorKind.PACED_TICKS, TCP_PROTO, (54, 74), "34.107.8.21", 8883,
                     period=40.0, rate=2000.0, burst_size=32),
            Behavior(BehaviorKind.KEEPALIVE, TCP_PROTO, (135, 220), "34.107.8.28", 8883, period=8.0),
            Behavior(BehaviorKind.KEEPALIVE, TCP_PROTO, (150, 300), "34.107.8.28", 443, period=35.0),
            Behavior(BehaviorKind.KEEPALIVE, UDP_PROTO, (130, 250), "34.107.8.20", 123, period=55.0),
            Behavior(BehaviorKind.KEEPALIVE, 1, (60, 90), "34.107.8.20", 0, period=0.8),
            Behavior(BehaviorKind.KEEPALIVE, TCP_PROTO, (125, 190), "34.107.8.29", 8883, period=27.0),
        ),
    )
    plug = DeviceProfile(
        "192.168.1.11",
        (
            Behavior(BehaviorKind.KEEPALIVE, TCP_PROTO, (125, 180), "34.107.8.22", 8883, period=5.0),
            Behavior(BehaviorKind.KEEPALIVE, UDP_PROTO, (125, 185), "192.168.1.1", 53, period=1.2),
            Behavior(BehaviorKind.KEEPALIVE, TCP_PROTO, (125, 180), "34.107.8.22", 8883, period=2.2),
            Behavior(BehaviorKind.BURST_UPDATE, TCP_PROTO, (54, 74), "34.107.8.22", 443,
                     period=17.0, rate=650.0, burst_size=24),
            Behavior(BehaviorKind.KEEPALIVE, UDP_PROTO, (125, 200), "34.107.8.22", 123, period=40.0),
            Behavior(BehaviorKind.KEEPALIVE, TCP_PROTO, (130, 300), "192.168.1.1", 80, period=45.0),
            Behavior(BehaviorKind.KEEPALIVE, 1, (60, 90), "192.168.1.1", 0, period=8.0),
        ),
    )
    monitor = DeviceProfile(
        "192.168.1.12",
        (
            Behavior(BehaviorKind.KEEPALIVE, TCP_PROTO, (125, 180), "34.107.8.24", 8883, period=2.8),
            Behavior(BehaviorKind.STREAM, UDP_PROTO, (1300, 1500), "34.107.8.24", 5683, rate=13.0),
            Behavior(BehaviorKind.BURST_UPDATE, TCP_PROTO, (1200, 1500), "34.107.8.24", 443,
                     period=60.0, rate=40.0, burst_size=180),
            Behavior(BehaviorKind.KEEPALIVE, TCP_PROTO, (135, 220), "34.107.8.28", 8883, period=8.0),
            Behavior(BehaviorKind.KEEPALIVE, TCP_PROTO, (150, 300), "34.107.8.25", 8883, period=7.0),
            Behavior(BehaviorKind.KEEPALIVE, UDP_PROTO, (125, 200), "34.107.8.25", 123, period=65.0),
            Behavior(BehaviorKind.KEEPALIVE, 1, (60, 90), "34.107.8.24", 0, period=1.0),
            Behavior(BehaviorKind.KEEPALIVE, TCP_PROTO, (125, 190), "34.107.8.29", 8883, period=31.0),
        ),
    )
    return (camera, plug, monitor)


def default_scenario_config(seed: int = 42) -> ScenarioConfig:
    return ScenarioConfig(seed=seed, devices=default_devices())


def _behavior_rng_sizes(rng, behavior, n):
    lo, hi = behavior.size_range
    return rng.integers(lo, hi + 1, size=n)


def _emit(behavior, src_ip, src_port, times, sizes):
    dst_port = behavior.dst_port
    proto = behavior.proto_number
    if proto not in (TCP_PROTO, UDP_PROTO):
        src_port = 0
        dst_port = 0
    dst_ip = behavior.dst_ip
    label = ClassLabel.NORMAL
    return [
        PacketRecord(t, src_ip, dst_ip, src_port, dst_port, proto, int(s), label)
        for t, s in zip(times, sizes)
    ]


def _wobbly_poisson(
    rng: np.random.Generator,
    rate: float,
    depth: float,
    period: float,
    start: float,
    end: float,
) -> np.ndarray:
    """Arrival times of an inhomogeneous Poisson stream on [start, end).

    The instantaneous rate swings sinusoidally around `rate` with relative
    amplitude `depth` and a random phase; generated by thinning a
    homogeneous stream at the peak rate, so the mean rate stays at `rate`.
    """
    phase = rng.uniform(0.0, 2.0 * np.pi)
    peak = rate * (1.0 + depth)
    mean_gap = 1.0 / peak
    stamps = []
    t = start + rng.exponential(mean_gap)
    while t < end:
        gaps = rng.exponential(mean_gap, size=8192)
        block = t + np.cumsum(gaps)
        keep = block[block < end]
        stamps.append(t)
        if keep.size < gaps.size:
            stamps.extend(keep.tolist())
            break
        stamps.extend(keep[:-1].tolist())
        t = keep[-1]

    cand = np.array(stamps, dtype=np.float64)
    cand = cand[cand < end]
    local = rate * (1.0 + depth * np.sin(2.0 * np.pi * (cand - start) / period + phase))
    return cand[rng.uniform(size=cand.size) * peak < local]


def gen_benign(profile: DeviceProfile, length: float, rng: np.random.Generator) -> list:
    """Generate the benign stream of one device over [0, length).

    Packets come out in timestamp order with label Normal. All timing is
    jittered around each behavior's nominal period or rate so streams do
    not beat against each other; STREAM rates drift slowly (a video encoder
    chasing scene complexity) rather than holding flat.
    """
    packets = []
    for behavior in profile.behaviors:
        src_port = int(rng.integers(*_EPHEMERAL))
        times = []
        if behavior.kind is BehaviorKind.KEEPALIVE:
            t = rng.uniform(0.0, behavior.period)
            while t < length:
                times.append(t)
                t += behavior.period * rng.uniform(0.9, 1.1)
        elif behavior.kind is BehaviorKind.STREAM:
            times = _wobbly_poisson(
                rng, behavior.rate, STREAM_WOBBLE_DEPTH, STREAM_WOBBLE_PERIOD, 0.0, length
            ).tolist()
        elif behavior.kind is BehaviorKind.PACED_TICKS:
            s = rng.uniform(0.0, behavior.period)
            while s < length:
                train = s + np.arange(behavior.burst_size) / behavior.rate
                times.extend(train[train < length].tolist())
                s += behavior.period * rng.uniform(0.9, 1.1)
        else:  # BURST_UPDATE
            s = rng.uniform(0.0, behavior.period)
            while s < length:
                t = s
                for _ in range(behavior.burst_size):
                    if t >= length:
                        break
                    times.append(t)
                    t += rng.exponential(1.0 / behavior.rate)
                s += behavior.period * rng.uniform(0.9, 1.1)

        times = np.array(sorted(times), dtype=np.float64)
        times = np.round(times * 1e6) / 1e6
        sizes = _behavior_rng_sizes(rng, behavior, times.size)
        packets.extend(_emit(behavior, profile.device_ip, src_port, times, sizes))

    packets.sort(key=lambda p: p.timestamp)
    return packets


def gen_attack(spec: AttackSpec, start_time: float, src_ip: str, rng: np.random.Generator) -> list:
    """Generate one flood's packets over [start_time, start_time + duration).

    The flood is an inhomogeneous Poisson stream: gaps are exponential at
    the instantaneous rate, which wobbles around spec.rate (see
    FLOOD_WOBBLE_DEPTH/PERIOD) with a random phase, so per second volume
    rises and falls over the flood's life while the mean rate stays at
    spec.rate. The first and last few seconds are sparse stragglers
    (FLOOD_TAIL_*): probe packets while the tool spins up, then a decaying
    trickle as the sender winds down. Source ports are drawn fresh per
    packet, sizes are uniform over the spec's range, and every packet is
    labeled Attack.
    """
    end = start_time + spec.duration
    tail = min(rng.uniform(*FLOOD_TAIL_RANGE), 0.25 * spec.duration)
    ramp = min(rng.uniform(*FLOOD_TAIL_RANGE), 0.25 * spec.duration)
    main_start = start_time + ramp
    main_end = end - tail
    cand = _wobbly_poisson(rng, spec.rate, FLOOD_WOBBLE_DEPTH, FLOOD_WOBBLE_PERIOD, main_start, main_end)

    stragglers = []
    t = start_time + rng.exponential(1.0 / FLOOD_TAIL_RATE)
    while t < main_start:
        stragglers.append(t)
        t += rng.exponential(1.0 / FLOOD_TAIL_RATE)
    t = main_end + rng.exponential(1.0 / FLOOD_TAIL_RATE)
    while t < end:
        stragglers.append(t)
        t += rng.exponential(1.0 / FLOOD_TAIL_RATE)
    if stragglers:
        cand = np.concatenate([cand, np.array(stragglers, dtype=np.float64)])

    times = np.round(cand * 1e6) / 1e6
    n = times.size
    lo, hi = spec.size_range
    sizes = rng.integers(lo, hi + 1, size=n)
    sports = rng.integers(1024, 65536, size=n)
    proto = UDP_PROTO if spec.kind is AttackKind.UDP_FLOOD else TCP_PROTO
    label = ClassLabel.ATTACK
    victim = spec.victim_ip
    vport = spec.victim_port
    return [
        PacketRecord(float(t), src_ip, victim, int(sp), vport, proto, int(sz), label)
        for t, sp, sz in zip(times, sports, sizes)
    ]


def _device_rng(seed: int, device_index: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, device_index, stream))))


def schedule_attacks(config: ScenarioConfig) -> tuple[ScheduledAttack, ...]:
    """Place each attack kind once per device, non overlapping, random order.

    Durations are drawn uniformly from ATTACK_DURATION_RANGE. Raises
    SchedulingInfeasible when the drawn durations cannot fit inside the
    capture length.
    """
    out = []
    kinds = config.attack_kinds
    for i, profile in enumerate(config.devices):
        rng = _device_rng(config.seed, i, 1)
        order = rng.permutation(len(kinds))
        durations = rng.uniform(*ATTACK_DURATION_RANGE, size=len(kinds))
        total = float(np.sum(durations))
        free = config.capture_length - total
        if free < 0:
            raise SchedulingInfeasible(
                f"{total:.1f}s of attacks cannot fit a {config.capture_length:.1f}s capture"
            )
        offsets = np.sort(rng.uniform(0.0, free, size=len(kinds)))
        elapsed = 0.0
        for j in range(len(kinds)):
            kind = kinds[int(order[j])]
            start = quantize_us(float(offsets[j]) + elapsed)
            dur = quantize_us(float(durations[j]))
            out.append(ScheduledAttack(profile.device_ip, kind, start, dur))
            elapsed += float(durations[j])
    return tuple(out)


def overlay_scenario(config: ScenarioConfig) -> SimulationResult:
    """Run the full scenario: benign baselines plus scheduled floods.

    Returns the merged, timestamp sorted packet list together with the
    attack schedule (the ground truth for detection tests). Running the
    same config twice yields identical results.
    """
    if not config.devices:
        raise IotDetectError("scenario has no devices")
    schedule = schedule_attacks(config)
    per_device = {p.device_ip: [] for p in config.devices}

    for i, profile in enumerate(config.devices):
        rng_b = _device_rng(config.seed, i, 0)
        per_device[profile.device_ip].extend(gen_benign(profile, config.capture_length, rng_b))

    for j, sched in enumerate(schedule):
        port, _, sizes = ATTACK_DEFAULTS[sched.kind]
        spec = AttackSpec(
            kind=sched.kind,
            victim_ip=config.victim_ip,
            victim_port=port,
            rate=config.rate_for(sched.kind),
            duration=sched.duration,
            size_range=sizes,
        )
        rng_a = _device_rng(config.seed, j, 2)
        per_device[sched.device_ip].extend(gen_attack(spec, sched.start, sched.device_ip, rng_a))

    merged = []
    for profile in config.devices:
        stream = per_device[profile.device_ip]
        stream.sort(key=lambda p: p.timestamp)
        merged.extend(stream)
    merged.sort(key=lambda p: (p.timestamp, p.src_ip))
    return SimulationResult(merged, schedule)


# ---------------------------------------------------------------------------
# config (de)serialization

def config_to_dict(config: ScenarioConfig) -> dict:
    return {
        "seed": config.seed,
        "capture_length": config.capture_length,
        "victim_ip": config.victim_ip,
        "attack_kinds": [k.value for k in config.attack_kinds],
        "attack_rates": {k.value: r for k, r in config.attack_rates},
        "devices": [
            {
                "device_ip": p.device_ip,
                "behaviors": [
                    {
                        "kind": b.kind.value,
                        "proto_number": b.proto_number,
                        "size_range": list(b.size_range),
                        "dst_ip": b.dst_ip,
                        "dst_port": b.dst_port,
                        "period": b.period,
                        "rate": b.rate,
                        "burst_size": b.burst_size,
                    }
                    for b in p.behaviors
                ],
            }
            for p in config.devices
        ],
    }


def config_from_dict(data: dict) -> ScenarioConfig:
    try:
        devices = tuple(
            DeviceProfile(
                d["device_ip"],
                tuple(
                    Behavior(
                        kind=BehaviorKind(b["kind"]),
                        proto_number=int(b["proto_number"]),
                        size_range=(int(b["size_range"][0]), int(b["size_range"][1])),
                        dst_ip=b["dst_ip"],
                        dst_port=int(b["dst_port"]),
                        period=float(b.get("period", 0.0)),
                        rate=float(b.get("rate", 0.0)),
                        burst_size=int(b.get("burst_size", 0)),
                    )
                    for b in d["behaviors"]
                ),
            )
            for d in data["devices"]
        )
        return ScenarioConfig(
            seed=int(data["seed"]),
            capture_length=float(data.get("capture_length", DEFAULT_CAPTURE_LENGTH)),
            devices=devices,
            victim_ip=data.get("victim_ip", DEFAULT_VICTIM_IP),
            attack_kinds=tuple(AttackKind(k) for k in data.get("attack_kinds", [k.value for k in AttackKind])),
            attack_rates=tuple(
                (AttackKind(k), float(r)) for k, r in sorted(data.get("attack_rates", {}).items())
            ),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise IotDetectError(f"bad scenario config: {exc}") from exc


def save_config(config: ScenarioConfig, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path: str) -> ScenarioConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def config_digest(config: ScenarioConfig) -> str:
    """Short stable digest identifying a scenario config."""
    canon = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
