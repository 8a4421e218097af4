"""Smart-card reader side: local check, login request, response check, password change.

Note on ``local_verify``: by construction D xor E == pad(ID), so the
recomputed E' equals E for *any* password once the identity is right.  A
wrong password is caught by the server (J mismatch), not here.  The check is
kept exactly as the protocol defines it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

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
from .errors import (
    CredentialMismatch,
    NoPendingLogin,
    ResponseForgery,
    StaleResponse,
    UnknownServer,
    WeakPassword,
)
from .ra import SmartCard
from .wire import LoginRequest, LoginResponse


@dataclass(frozen=True)
class Derived:
    p: bytes  # p'_i, 8 bytes
    B: bytes
    C: bytes
    hqx: bytes  # h(q_i || x)


@dataclass(frozen=True)
class Pending:
    n_i: bytes
    h_i: bytes
    j_i: bytes
    t1: int
    target: bytes


@dataclass(frozen=True)
class SessionKey:
    key: bytes
    established_at: int
    peer: bytes


@dataclass
class CardSession:
    card: SmartCard
    user_id: bytes
    derived: Derived
    pending: Optional[Pending] = None


def local_verify(
    card: SmartCard, user_id: bytes, password: bytes, counter: Optional[HashCounter] = None
) -> CardSession:
    p = truncate(xor(hash_parts(user_id, password, counter=counter, label="card.h(ID||PW)"), card.A), ID_WIDTH)
    B = hash_parts(password, p, counter=counter, label="card.h(PW||p)")
    C = xor(B, card.D, pad(user_id))
    hqx = xor(C, card.A)
    E = xor(card.A, B, hqx)
    if E != card.E:
        raise CredentialMismatch("identity or password rejected")
    return CardSession(card, user_id, Derived(p=p, B=B, C=C, hqx=hqx))


def session_key_input(
    user_id: bytes, server_id: bytes, n_i: bytes, n_j: bytes, p: bytes, h_i: bytes, delta1: int
) -> bytes:
    return b"".join((user_id, server_id, n_i, n_j, p, h_i, encode_timestamp(delta1)))


def build_login_request(
    session: CardSession,
    target: bytes,
    now: int,
    source: RandomSource,
    counter: Optional[HashCounter] = None,
) -> LoginRequest:
    if target not in session.card.server_ids:
        raise UnknownServer(target.hex())
    d = session.derived
    uid = session.user_id
    t1 = encode_timestamp(now)
    n_i = random_value(source)
    aid = xor(uid, target)
    g = xor(pad(n_i), d.C, session.card.A)
    h_i = xor(g, hash_parts(target, n_i, t1, counter=counter, label="card.h(SID||N||T1)"))
    i = xor(n_i, d.p, uid)
    j = hash_parts(g, h_i, i, d.p, t1, counter=counter, label="card.J")
    session.pending = Pending(n_i=n_i, h_i=h_i, j_i=j, t1=now, target=target)
    return LoginRequest(aid=aid, g=g, i=i, j=j, t1=now)


def verify_response_and_derive_key(
    session: CardSession,
    resp: LoginResponse,
    now: int,
    delta2: int,
    delta1: int,
    counter: Optional[HashCounter] = None,
    check_m: bool = True,
    check_freshness: bool = True,
) -> SessionKey:
    """``check_m``/``check_freshness`` exist only for fault injection."""
    pend = session.pending
    if pend is None:
        raise NoPendingLogin("no login in flight")
    session.pending = None
    if check_freshness and not 0 <= now - resp.t2 <= delta2:
        raise StaleResponse(f"response age {now - resp.t2}s outside [0, {delta2}]")
    p = session.derived.p
    n_j = xor(pend.n_i, resp.k, p)
    m = hash_parts(resp.k, pend.n_i, n_j, pend.j_i, encode_timestamp(resp.t2), counter=counter, label="card.M")
    if check_m and m != resp.m:
        raise ResponseForgery("M mismatch")
    key = hash_parts(
        session_key_input(session.user_id, pend.target, pend.n_i, n_j, p, pend.h_i, delta1),
        counter=counter,
        label="card.SK",
    )
    return SessionKey(key=key, established_at=now, peer=pend.target)


def update_password(
    card: SmartCard,
    user_id: bytes,
    old_password: bytes,
    new_password: bytes,
    counter: Optional[HashCounter] = None,
) -> SmartCard:
    """Replace A, D, E in place. No message leaves the reader."""
    if not new_password:
        raise WeakPassword("new password must be non-empty")
    s = local_verify(card, user_id, old_password, counter)
    p, hqx = s.derived.p, s.derived.hqx
    A = xor(hash_parts(user_id, new_password, counter=counter, label="card.h(ID||PWnew)"), pad(p))
    B = hash_parts(new_password, p, counter=counter, label="card.h(PWnew||p)")
    C = xor(A, hqx)
    card.A = A
    card.D = xor(B, pad(user_id), C)
    card.E = xor(A, hqx, B)
    return card
