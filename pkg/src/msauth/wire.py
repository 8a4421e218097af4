"""Fixed-layout login frames and a scripted, event-driven open channel.

Request layout (84 bytes): AID(8) G(32) I(8) J(32) T1(4).
Response layout (44 bytes): K(8) M(32) T2(4).
No headers or length prefixes; the frame kind is known from context.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .core import DIGEST_WIDTH, ID_WIDTH, NONCE_WIDTH, TIMESTAMP_MAX, TIMESTAMP_WIDTH
from .errors import MalformedFrame, WidthViolation

REQUEST_SIZE = ID_WIDTH + DIGEST_WIDTH + NONCE_WIDTH + DIGEST_WIDTH + TIMESTAMP_WIDTH
RESPONSE_SIZE = NONCE_WIDTH + DIGEST_WIDTH + TIMESTAMP_WIDTH


def _check(name: str, value: bytes, width: int) -> None:
    if len(value) != width:
        raise WidthViolation(f"{name} must be {width} bytes, got {len(value)}")


@dataclass(frozen=True)
class LoginRequest:
    aid: bytes
    g: bytes
    i: bytes
    j: bytes
    t1: int

    kind = "request"

    def encode(self) -> bytes:
        _check("AID", self.aid, ID_WIDTH)
        _check("G", self.g, DIGEST_WIDTH)
        _check("I", self.i, NONCE_WIDTH)
        _check("J", self.j, DIGEST_WIDTH)
        if not 0 <= self.t1 <= TIMESTAMP_MAX:
            raise WidthViolation("T1 out of range")
        return self.aid + self.g + self.i + self.j + self.t1.to_bytes(TIMESTAMP_WIDTH, "big")

    @classmethod
    def decode(cls, frame: bytes) -> "LoginRequest":
        if len(frame) != REQUEST_SIZE:
            raise MalformedFrame(f"request frame must be {REQUEST_SIZE} bytes, got {len(frame)}")
        return cls(
            aid=frame[0:8],
            g=frame[8:40],
            i=frame[40:48],
            j=frame[48:80],
            t1=int.from_bytes(frame[80:84], "big"),
        )


@dataclass(frozen=True)
class LoginResponse:
    k: bytes
    m: bytes
    t2: int

    kind = "response"

    def encode(self) -> bytes:
        _check("K", self.k, NONCE_WIDTH)
        _check("M", self.m, DIGEST_WIDTH)
        if not 0 <= self.t2 <= TIMESTAMP_MAX:
            raise WidthViolation("T2 out of range")
        return self.k + self.m + self.t2.to_bytes(TIMESTAMP_WIDTH, "big")

    @classmethod
    def decode(cls, frame: bytes) -> "LoginResponse":
        if len(frame) != RESPONSE_SIZE:
            raise MalformedFrame(f"response frame must be {RESPONSE_SIZE} bytes, got {len(frame)}")
        return cls(k=frame[0:8], m=frame[8:40], t2=int.from_bytes(frame[40:44], "big"))


Message = Union[LoginRequest, LoginResponse]
_KINDS = {"request": LoginRequest, "response": LoginResponse}


def encode(msg: Message) -> bytes:
    return msg.encode()


def decode(frame: bytes, kind: str) -> Message:
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown frame kind {kind!r}") from None
    return cls.decode(frame)


# Channel script actions


@dataclass(frozen=True)
class Deliver:
    pass


@dataclass(frozen=True)
class Delay:
    seconds: int


@dataclass(frozen=True)
class Drop:
    pass


@dataclass(frozen=True)
class Duplicate:
    pass


@dataclass(frozen=True)
class Replace:
    frame: bytes


@dataclass(frozen=True)
class Record:
    pass


Action = Union[Deliver, Delay, Drop, Duplicate, Replace, Record]
HONEST = (Deliver(),)


class SimClock:
    """Single logical clock in whole seconds, with per-actor skew."""

    def __init__(self, start: int = 1_700_000_000):
        self.now = start
        self.skew: dict[str, int] = {}

    def read(self, actor: str = "") -> int:
        return self.now + self.skew.get(actor, 0)

    def advance(self, seconds: int) -> None:
        if seconds < 0:
            raise ValueError("clock cannot run backwards")
        self.now += seconds

    def advance_to(self, t: int) -> None:
        self.now = max(self.now, t)


@dataclass(frozen=True)
class Delivery:
    time: int
    seq: int
    recipient: str
    kind: str
    frame: bytes


@dataclass
class TranscriptRecord:
    direction: str
    channel: str
    frame: bytes
    time: int

    def to_json(self) -> dict:
        return {
            "direction": self.direction,
            "channel": self.channel,
            "frame": self.frame.hex(),
            "time": self.time,
        }


@dataclass
class Network:
    """Event queue over a shared ``SimClock``.

    Every open-channel frame is logged in ``transcript``; the ``Record``
    action additionally copies the (possibly replaced) frame into
    ``captured``, which is the adversary's view.
    """

    clock: SimClock
    latency: int = 0
    transcript: list[TranscriptRecord] = field(default_factory=list)
    captured: list[tuple[str, bytes]] = field(default_factory=list)
    _queue: list = field(default_factory=list)
    _seq: int = 0

    def transmit(
        self,
        sender: str,
        recipient: str,
        msg: Message | bytes,
        script: Iterable[Action] = HONEST,
        kind: Optional[str] = None,
    ) -> list[Delivery]:
        frame = msg if isinstance(msg, bytes) else msg.encode()
        kind = kind or msg.kind
        self.transcript.append(
            TranscriptRecord(f"{sender}->{recipient}", "open", frame, self.clock.now)
        )
        events = []
        delay = 0
        for action in script:
            if isinstance(action, Record):
                self.captured.append((kind, frame))
            elif isinstance(action, Delay):
                delay += action.seconds
            elif isinstance(action, Replace):
                frame = action.frame
            elif isinstance(action, Drop):
                break
            elif isinstance(action, (Deliver, Duplicate)):
                events.append(self._schedule(self.clock.now + self.latency + delay, recipient, kind, frame))
            else:
                raise TypeError(f"unknown channel action {action!r}")
        return events

    def inject(self, recipient: str, kind: str, frame: bytes, at: Optional[int] = None) -> Delivery:
        """Adversary-originated frame (e.g. a replay)."""
        t = self.clock.now if at is None else at
        self.transcript.append(TranscriptRecord(f"adversary->{recipient}", "open", frame, t))
        return self._schedule(t, recipient, kind, frame)

    def log_secure(self, sender: str, recipient: str, payload: bytes) -> None:
        self.transcript.append(
            TranscriptRecord(f"{sender}->{recipient}", "secure", payload, self.clock.now)
        )

    def _schedule(self, t: int, recipient: str, kind: str, frame: bytes) -> Delivery:
        d = Delivery(t, self._seq, recipient, kind, frame)
        self._seq += 1
        heapq.heappush(self._queue, (d.time, d.seq, d))
        return d

    def pending(self) -> int:
        return len(self._queue)

    def next_delivery(self) -> Optional[Delivery]:
        """Pop the earliest delivery and move the clock to its time."""
        if not self._queue:
            return None
        _, _, d = heapq.heappop(self._queue)
        self.clock.advance_to(d.time)
        return d

    def open_bytes(self, since: int = 0) -> int:
        return sum(len(r.frame) for r in self.transcript[since:] if r.channel == "open")

    def dump(self) -> str:
        return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in self.transcript)


def load_transcript(text: str) -> list[TranscriptRecord]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        out.append(
            TranscriptRecord(rec["direction"], rec["channel"], bytes.fromhex(rec["frame"]), rec["time"])
        )
    return out
