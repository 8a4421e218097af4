"""Server side of login: request verification, response, session key."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .card import SessionKey, session_key_input
from .core import (
    ID_WIDTH,
    HashCounter,
    RandomSource,
    encode_timestamp,
    hash_parts,
    pad,
    random_value,
    truncate,
    xor,
)
from .errors import RequestForgery, StaleRequest, UnknownUser
from .ra import STATE_VERSION, ServerProvisionRecord
from .wire import LoginRequest, LoginResponse


@dataclass
class ServerState:
    id: bytes
    alpha: bytes
    beta: bytes
    delta1: int
    user_ids: set[bytes] = field(default_factory=set)
    f_table: dict[bytes, bytes] = field(default_factory=dict)
    sessions: dict[bytes, SessionKey] = field(default_factory=dict)
    strict_replay: bool = False
    seen: set[tuple[bytes, int]] = field(default_factory=set)
    session_lifetime: Optional[int] = None

    @classmethod
    def from_record(cls, rec: ServerProvisionRecord, delta1: int, **kw) -> "ServerState":
        return cls(id=rec.id, alpha=rec.alpha, beta=rec.beta, delta1=delta1, **kw)

    def provision_user(self, user_id: bytes, f_value: bytes) -> None:
        self.user_ids.add(user_id)
        self.f_table[user_id] = f_value

    @property
    def lifetime(self) -> int:
        return self.session_lifetime if self.session_lifetime is not None else 10 * self.delta1

    def active_session(self, user_id: bytes, now: int) -> Optional[SessionKey]:
        sk = self.sessions.get(user_id)
        if sk is None or now - sk.established_at > self.lifetime:
            return None
        return sk

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": STATE_VERSION,
                "id": self.id.hex(),
                "alpha": self.alpha.hex(),
                "beta": self.beta.hex(),
                "users": [{"id": u.hex(), "F": f.hex()} for u, f in sorted(self.f_table.items())],
                "delta1_secs": self.delta1,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ServerState":
        d = json.loads(text)
        if d.get("version") != STATE_VERSION:
            raise ValueError(f"unsupported server file version {d.get('version')!r}")
        st = cls(
            id=bytes.fromhex(d["id"]),
            alpha=bytes.fromhex(d["alpha"]),
            beta=bytes.fromhex(d["beta"]),
            delta1=int(d["delta1_secs"]),
        )
        for u in d["users"]:
            st.provision_user(bytes.fromhex(u["id"]), bytes.fromhex(u["F"]))
        return st


@dataclass(frozen=True)
class PendingAuth:
    user_id: bytes
    n_i: bytes
    p: bytes
    j: bytes
    h_i: bytes
    t1: int


def verify_login(
    state: ServerState,
    req: LoginRequest,
    now: int,
    counter: Optional[HashCounter] = None,
    check_j: bool = True,
    check_freshness: bool = True,
) -> PendingAuth:
    """Pure in (state, req, now); never mutates ``state``.

    ``check_j``/``check_freshness`` exist only for fault injection.
    """
    if check_freshness and not 0 <= now - req.t1 <= state.delta1:
        raise StaleRequest(f"request age {now - req.t1}s outside [0, {state.delta1}]")
    if state.strict_replay and (req.j, req.t1) in state.seen:
        raise StaleRequest("request already seen")
    uid = truncate(xor(state.alpha, pad(req.aid), state.beta), ID_WIDTH)
    f = state.f_table.get(uid)
    if f is None:
        raise UnknownUser(uid.hex())
    t1 = encode_timestamp(req.t1)
    n_i = truncate(xor(f, req.g, pad(uid)), ID_WIDTH)
    h_i = xor(req.g, hash_parts(state.id, n_i, t1, counter=counter, label="server.h(SID||N||T1)"))
    p = xor(n_i, uid, req.i)
    j = hash_parts(req.g, h_i, req.i, p, t1, counter=counter, label="server.J")
    if check_j and j != req.j:
        raise RequestForgery("J mismatch")
    return PendingAuth(user_id=uid, n_i=n_i, p=p, j=j, h_i=h_i, t1=req.t1)


def build_response_and_derive_key(
    state: ServerState,
    pending: PendingAuth,
    now: int,
    source: RandomSource,
    counter: Optional[HashCounter] = None,
) -> tuple[LoginResponse, SessionKey]:
    n_j = random_value(source)
    k = xor(pending.n_i, n_j, pending.p)
    m = hash_parts(k, pending.n_i, n_j, pending.j, encode_timestamp(now), counter=counter, label="server.M")
    key = hash_parts(
        session_key_input(pending.user_id, state.id, pending.n_i, n_j, pending.p, pending.h_i, state.delta1),
        counter=counter,
        label="server.SK",
    )
    sk = SessionKey(key=key, established_at=now, peer=pending.user_id)
    state.sessions[pending.user_id] = sk
    if state.strict_replay:
        state.seen.add((pending.j, pending.t1))
    return LoginResponse(k=k, m=m, t2=now), sk
