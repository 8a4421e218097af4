"""Registration authority: server and user enrolment, smart-card issuance.

The secure channel between RA, users and servers is an in-process call.
``h(q || x)`` is the only thing derived from the per-user nonce ``q`` that
anyone uses later, so ``q`` is dropped as soon as the card is issued.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .core import (
    DIGEST_WIDTH,
    ID_WIDTH,
    HashCounter,
    RandomSource,
    hash_parts,
    pad,
    random_value,
    xor,
)
from .errors import DuplicateServerIdentity, DuplicateUserIdentity, EmptyPassword, WidthViolation

STATE_VERSION = 1


@dataclass(frozen=True)
class ServerProvisionRecord:
    id: bytes
    alpha: bytes
    beta: bytes


@dataclass
class SmartCard:
    """Card contents. Never holds p, q, the password or h(q||x)."""

    A: bytes
    D: bytes
    E: bytes
    server_ids: list[bytes] = field(default_factory=list)

    def to_bytes(self) -> bytes:
        """Raw storage image: A || D || E || server ids."""
        return self.A + self.D + self.E + b"".join(self.server_ids)

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": STATE_VERSION,
                "A": self.A.hex(),
                "D": self.D.hex(),
                "E": self.E.hex(),
                "server_ids": [s.hex() for s in self.server_ids],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SmartCard":
        d = json.loads(text)
        if d.get("version") != STATE_VERSION:
            raise ValueError(f"unsupported card file version {d.get('version')!r}")
        return cls(
            A=bytes.fromhex(d["A"]),
            D=bytes.fromhex(d["D"]),
            E=bytes.fromhex(d["E"]),
            server_ids=[bytes.fromhex(s) for s in d["server_ids"]],
        )


@dataclass(frozen=True)
class RegistrationRequest:
    """What the user sends the RA. ``p`` stays with the user."""

    id: bytes
    A: bytes
    B: bytes


@dataclass(frozen=True)
class Issuance:
    """Everything ``register_user`` produced, for audit and tests.

    ``hqx`` is h(q || x); ``q`` itself is not kept.
    """

    card: SmartCard
    C: bytes
    F: bytes
    hqx: bytes


class FValueSink(Protocol):
    def provision_user(self, user_id: bytes, f_value: bytes) -> None: ...


def server_prepare_registration(
    server_id: bytes,
    password: bytes,
    source: RandomSource,
    counter: Optional[HashCounter] = None,
) -> bytes:
    """alpha = h(ID_S || PWD_S || x_j) with a fresh 8-byte x_j."""
    if not password:
        raise EmptyPassword("server password must be non-empty")
    xj = random_value(source)
    return hash_parts(server_id, password, xj, counter=counter, label="server.alpha")


def user_prepare_registration(
    user_id: bytes,
    password: bytes,
    source: RandomSource,
    counter: Optional[HashCounter] = None,
) -> tuple[RegistrationRequest, bytes]:
    """Returns the request for the RA and the user's nonce p."""
    if not password:
        raise EmptyPassword("password must be non-empty")
    if len(user_id) != ID_WIDTH:
        raise WidthViolation(f"user identity must be {ID_WIDTH} bytes")
    p = random_value(source)
    A = xor(pad(p), hash_parts(user_id, password, counter=counter, label="user.h(ID||PW)"))
    B = hash_parts(password, p, counter=counter, label="user.h(PW||p)")
    return RegistrationRequest(user_id, A, B), p


class RegistrationAuthority:
    def __init__(
        self,
        source: RandomSource,
        x: Optional[bytes] = None,
        counter: Optional[HashCounter] = None,
        x_width: int = 8,
    ):
        self._source = source
        self._x = x if x is not None else source.bytes(x_width)
        self.counter = counter
        self.servers: dict[bytes, ServerProvisionRecord] = {}
        self.users: dict[bytes, bytes] = {}  # ID_i -> F_i
        self._sinks: dict[bytes, FValueSink] = {}

    def register_server(
        self, server_id: bytes, alpha: bytes, storage: Optional[FValueSink] = None
    ) -> ServerProvisionRecord:
        if len(server_id) != ID_WIDTH:
            raise WidthViolation(f"server identity must be {ID_WIDTH} bytes")
        if len(alpha) != DIGEST_WIDTH:
            raise WidthViolation("alpha must be a 32-byte digest")
        if server_id in self.servers:
            raise DuplicateServerIdentity(server_id.hex())
        rec = ServerProvisionRecord(server_id, alpha, xor(alpha, pad(server_id)))
        self.servers[server_id] = rec
        if storage is not None:
            self._sinks[server_id] = storage
            for uid, f in self.users.items():
                storage.provision_user(uid, f)
        return rec

    def attach(self, server_id: bytes, storage: FValueSink) -> None:
        """Re-connect the secure channel to an already registered server."""
        self._sinks[server_id] = storage

    def register_user(self, req: RegistrationRequest) -> Issuance:
        if req.id in self.users:
            raise DuplicateUserIdentity(req.id.hex())
        q = random_value(self._source)
        hqx = hash_parts(q, self._x, counter=self.counter, label="ra.h(q||x)")
        C = xor(req.A, hqx)
        D = xor(C, req.B, pad(req.id))
        E = xor(req.A, req.B, hqx)
        F = xor(pad(req.id), req.A, C)
        self.users[req.id] = F
        for sink in self._sinks.values():
            sink.provision_user(req.id, F)
        card = SmartCard(A=req.A, D=D, E=E, server_ids=list(self.servers))
        return Issuance(card=card, C=C, F=F, hqx=hqx)

    def to_json(self, include_secret: bool = True) -> str:
        """RA state. With ``include_secret=False`` the master secret is left
        out and must be supplied again to ``from_json``."""
        d = {
            "version": STATE_VERSION,
            "servers": [
                {"id": r.id.hex(), "alpha": r.alpha.hex(), "beta": r.beta.hex()}
                for r in self.servers.values()
            ],
            "users": [{"id": u.hex(), "F": f.hex()} for u, f in self.users.items()],
        }
        if include_secret:
            d["x"] = self._x.hex()
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(
        cls, text: str, source: RandomSource, counter: Optional[HashCounter] = None,
        x: Optional[bytes] = None,
    ) -> "RegistrationAuthority":
        d = json.loads(text)
        if d.get("version") != STATE_VERSION:
            raise ValueError(f"unsupported RA file version {d.get('version')!r}")
        if "x" in d:
            x = bytes.fromhex(d["x"])
        if x is None:
            raise ValueError("RA state has no master secret and none was supplied")
        ra = cls(source, x=x, counter=counter)
        for s in d["servers"]:
            rec = ServerProvisionRecord(
                bytes.fromhex(s["id"]), bytes.fromhex(s["alpha"]), bytes.fromhex(s["beta"])
            )
            ra.servers[rec.id] = rec
        for u in d["users"]:
            ra.users[bytes.fromhex(u["id"])] = bytes.fromhex(u["F"])
        return ra

