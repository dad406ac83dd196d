"""Authenticated primary/backup telemetry transport.

Ground-to-drone pose data rides two independent channels, each with its
own latency, jitter, and loss. Every frame is sealed with a keyed tag
so corruption and replays are rejected rather than consumed; the
receiver picks the freshest verified frame across channels and flags
it stale when both links go quiet.

Wire layout, big-endian: magic u16 0x4D4C, version u8, seq u32,
timestamp u64 (microseconds), payload length u16, payload, 16-byte tag
(HMAC-SHA256 truncated). The tag covers seq, timestamp, and payload.
"""

from __future__ import annotations

import hashlib
import hmac
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import Replayed, Tampered

log = logging.getLogger(__name__)

MAGIC = 0x4D4C
WIRE_VERSION = 1
TAG_LEN = 16
_HEADER = struct.Struct(">HBIQH")  # magic, version, seq, timestamp_us, len
MAX_PAYLOAD = 0xFFFF


def _tag(key: bytes, seq: int, timestamp_us: int, payload: bytes) -> bytes:
    msg = struct.pack(">IQ", seq, timestamp_us) + payload
    return hmac.new(key, msg, hashlib.sha256).digest()[:TAG_LEN]


def seal_frame(payload: bytes, key: bytes, seq: int, timestamp_us: int) -> bytes:
    """Serialize and authenticate one frame."""
    if not key:
        raise ValueError("key must be non-empty")
    if len(payload) > MAX_PAYLOAD:
        raise ValueError("payload too large for a u16 length")
    if not 0 <= seq <= 0xFFFFFFFF:
        raise ValueError("seq out of u32 range")
    head = _HEADER.pack(MAGIC, WIRE_VERSION, seq, timestamp_us, len(payload))
    return head + payload + _tag(key, seq, timestamp_us, payload)


def open_frame(data: bytes, key: bytes,
               last_seq: int | None) -> tuple[int, int, bytes]:
    """Verify and unpack a frame: (seq, timestamp_us, payload).

    The tag is checked before anything else is trusted, in constant
    time; only then is the replay rule applied (seq must exceed
    last_seq).
    """
    if len(data) < _HEADER.size + TAG_LEN:
        raise Tampered("frame shorter than header plus tag")
    magic, version, seq, timestamp_us, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise Tampered(f"bad magic 0x{magic:04X}")
    if version != WIRE_VERSION:
        raise Tampered(f"unsupported wire version {version}")
    if len(data) != _HEADER.size + n + TAG_LEN:
        raise Tampered("frame length does not match payload length field")
    payload = data[_HEADER.size:_HEADER.size + n]
    tag = data[_HEADER.size + n:]
    if not hmac.compare_digest(tag, _tag(key, seq, timestamp_us, payload)):
        raise Tampered("authentication tag mismatch")
    if last_seq is not None and seq <= last_seq:
        raise Replayed(f"seq {seq} not beyond {last_seq}")
    return seq, timestamp_us, payload


@dataclass(frozen=True)
class ChannelConfig:
    latency_mean: float = 0.02  # s
    latency_jitter: float = 0.0  # s, uniform extra in [0, jitter]
    drop_prob: float = 0.0
    max_rate_hz: float | None = None  # accepted sends per second cap

    def __post_init__(self) -> None:
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError("drop_prob must be in [0, 1]")
        if self.latency_mean < 0 or self.latency_jitter < 0:
            raise ValueError("latency must be >= 0")


class Channel:
    """One lossy, delayed link driven by the simulation clock."""

    def __init__(self, config: ChannelConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self._in_flight: list[tuple[float, bytes]] = []
        self._last_accepted: float | None = None

    def transmit(self, data: bytes, now: float) -> None:
        c = self.config
        if c.max_rate_hz is not None and self._last_accepted is not None:
            if now - self._last_accepted < 1.0 / c.max_rate_hz - 1e-12:
                return  # over the bandwidth cap: dropped at the radio
        self._last_accepted = now
        if self.rng.random() < c.drop_prob:
            return
        arrival = now + c.latency_mean
        if c.latency_jitter > 0:
            arrival += self.rng.uniform(0.0, c.latency_jitter)
        self._in_flight.append((arrival, data))

    def receive(self, now: float) -> list[bytes]:
        """Frames that have arrived by now, in arrival order."""
        due = sorted((a, d) for a, d in self._in_flight if a <= now)
        self._in_flight = [(a, d) for a, d in self._in_flight if a > now]
        return [d for _, d in due]


class LinkReceiver:
    """Per-channel authentication and replay tracking."""

    def __init__(self, key: bytes, name: str = "link"):
        self.key = key
        self.name = name
        self.last_seq: int | None = None
        self.rejected = 0

    def feed(self, data: bytes) -> tuple[int, int, bytes] | None:
        """Verified (seq, timestamp_us, payload), or None when rejected."""
        try:
            seq, ts, payload = open_frame(data, self.key, self.last_seq)
        except (Tampered, Replayed) as exc:
            self.rejected += 1
            log.debug("%s rejected frame: %s", self.name, exc)
            return None
        self.last_seq = seq
        return seq, ts, payload


@dataclass
class Selection:
    payload: bytes | None
    seq: int | None
    timestamp_us: int | None
    stale: bool
    fresh: bool  # carries a seq not delivered before
    source: str | None


@dataclass
class FailoverSelector:
    """Freshest-across-channels pose selection with monotone output.

    The same sequence numbering rides both channels, so a frame that
    arrives twice is delivered once (fresh=False the second time). The
    output timestamp never moves backwards even when a slow channel
    delivers old frames late.
    """

    timeout_us: int = 200_000
    _best: tuple[int, int, bytes, str] | None = field(default=None, repr=False)
    _delivered: set = field(default_factory=set, repr=False)

    def select(self, candidates: list[tuple[int, int, bytes, str]],
               now_us: int) -> Selection:
        """candidates: verified (seq, timestamp_us, payload, source)."""
        fresh = False
        for seq, ts, payload, source in candidates:
            if self._best is None or ts > self._best[1]:
                self._best = (seq, ts, payload, source)
            if seq not in self._delivered:
                self._delivered.add(seq)
                fresh = True
        if self._best is None:
            return Selection(None, None, None, True, False, None)
        seq, ts, payload, source = self._best
        stale = now_us - ts > self.timeout_us
        return Selection(payload, seq, ts, stale, fresh, source)
