"""Primitives: SHA-256, left-aligned XOR, truncation, concatenation, randomness.

Protocol values are plain ``bytes``; the width of a value is its length.
Identities and nonces are 8 bytes, timestamps 4, digests 32.  XOR of
operands of different widths right-pads the shorter one with zeros, so
recovering a narrow value from a wide combination takes its *first* bytes.
"""

from __future__ import annotations

import hashlib
import random
import secrets
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import WidthViolation

ID_WIDTH = 8
NONCE_WIDTH = 8
TIMESTAMP_WIDTH = 4
DIGEST_WIDTH = 32
TIMESTAMP_MAX = 2**32 - 1


@dataclass
class HashCounter:
    """Per-run tally of hash invocations, optionally split by label."""

    count: int = 0
    by_label: Counter = field(default_factory=Counter)

    def tick(self, label: str = "") -> None:
        self.count += 1
        self.by_label[label] += 1

    def reset(self) -> None:
        self.count = 0
        self.by_label.clear()


def h(data: bytes, counter: Optional[HashCounter] = None, label: str = "") -> bytes:
    """SHA-256 of ``data``. Ticks ``counter`` when one is given."""
    if not data:
        raise ValueError("hash input must be non-empty")
    if counter is not None:
        counter.tick(label)
    return hashlib.sha256(data).digest()


def hash_parts(*parts: bytes, counter: Optional[HashCounter] = None, label: str = "") -> bytes:
    return h(concat(parts), counter, label)


def pad(v: bytes, width: int = DIGEST_WIDTH) -> bytes:
    if len(v) > width:
        raise WidthViolation(f"cannot pad {len(v)}-byte value to {width}")
    return v + bytes(width - len(v))


def xor(*values: bytes) -> bytes:
    """XOR any number of values; result width is the widest operand."""
    width = max((len(v) for v in values), default=0)
    acc = bytearray(width)
    for v in values:
        for i, b in enumerate(v):
            acc[i] ^= b
    return bytes(acc)


def truncate(v: bytes, width: int) -> bytes:
    if width > len(v):
        raise WidthViolation(f"cannot truncate {len(v)}-byte value to {width}")
    return v[:width]


def concat(parts: Iterable[bytes]) -> bytes:
    parts = list(parts)
    if not parts:
        raise ValueError("concat needs at least one part")
    return b"".join(parts)


def encode_timestamp(seconds: int) -> bytes:
    if not 0 <= seconds <= TIMESTAMP_MAX:
        raise WidthViolation(f"timestamp {seconds} does not fit in 32 bits")
    return seconds.to_bytes(TIMESTAMP_WIDTH, "big")


def decode_timestamp(raw: bytes) -> int:
    if len(raw) != TIMESTAMP_WIDTH:
        raise WidthViolation(f"timestamp must be {TIMESTAMP_WIDTH} bytes, got {len(raw)}")
    return int.from_bytes(raw, "big")


class RandomSource:
    """Byte source. Unseeded draws come from ``secrets``; seeded ones are reproducible."""

    def __init__(self, seed: Optional[int | str | bytes] = None):
        self.seed = seed
        self._rng = None if seed is None else random.Random(seed)

    def bytes(self, n: int) -> bytes:
        if self._rng is None:
            return secrets.token_bytes(n)
        return self._rng.randbytes(n)


def random_value(source: RandomSource, width: int = NONCE_WIDTH) -> bytes:
    if width != NONCE_WIDTH:
        raise WidthViolation(f"random values are {NONCE_WIDTH} bytes, not {width}")
    return source.bytes(width)


def identity(name: str | bytes) -> bytes:
    """Map a human-readable name (or 16 hex chars) to an 8-byte identity."""
    if isinstance(name, bytes):
        raw = name
    elif len(name) == 2 * ID_WIDTH and all(c in "0123456789abcdefABCDEF" for c in name):
        raw = bytes.fromhex(name)
    else:
        raw = name.encode("utf-8")
    if len(raw) > ID_WIDTH:
        raise WidthViolation(f"identity {name!r} longer than {ID_WIDTH} bytes")
    return pad(raw, ID_WIDTH)
