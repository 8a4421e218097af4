"""Deterministic world: one RA, several servers and users, a scripted network.

Everything random is drawn from one seeded ``RandomSource`` in a fixed order,
so a world built and driven the same way twice is byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import card as card_ops
from . import server as server_ops
from .card import CardSession, SessionKey
from .core import HashCounter, RandomSource, identity
from .errors import ProtocolError, Rejected
from .ra import Issuance, RegistrationAuthority, SmartCard, server_prepare_registration, user_prepare_registration
from .server import PendingAuth, ServerState
from .wire import HONEST, Action, LoginRequest, LoginResponse, Network, SimClock


@dataclass(frozen=True)
class Faults:
    """Deliberately broken verifiers, for mutation testing of the attack harness."""

    skip_j_check: bool = False
    skip_m_check: bool = False
    skip_freshness: bool = False


@dataclass
class User:
    name: str
    id: bytes
    password: bytes
    card: SmartCard
    issuance: Issuance  # audit copy; never persisted


@dataclass
class LoginOutcome:
    """What happened on one login attempt.

    ``request``/``response`` are the honest frames as emitted; ``card_key``
    and ``server_key`` are None when that side did not establish a key.
    """

    user: bytes
    server: bytes
    request: Optional[LoginRequest] = None
    response: Optional[LoginResponse] = None
    card_key: Optional[SessionKey] = None
    server_key: Optional[SessionKey] = None
    card_error: Optional[ProtocolError] = None
    server_errors: list[ProtocolError] = field(default_factory=list)
    server_accepts: int = 0
    card_session: Optional[CardSession] = None
    server_pending: Optional[PendingAuth] = None
    n_i: Optional[bytes] = None
    transcript_start: int = 0
    transcript_end: int = 0

    @property
    def established(self) -> bool:
        return (
            self.card_key is not None
            and self.server_key is not None
            and self.card_key.key == self.server_key.key
        )


class World:
    def __init__(
        self,
        seed: int | str = 0,
        delta1: int = 5,
        delta2: int = 5,
        start_time: int = 1_700_000_000,
        latency: int = 1,
        faults: Faults = Faults(),
        strict_replay: bool = False,
        counter: Optional[HashCounter] = None,
    ):
        self.rng = RandomSource(seed)
        self.counter = counter if counter is not None else HashCounter()
        self.clock = SimClock(start_time)
        self.network = Network(self.clock, latency=latency)
        self.delta1 = delta1
        self.delta2 = delta2
        self.faults = faults
        self.strict_replay = strict_replay
        self.ra = RegistrationAuthority(self.rng, counter=self.counter)
        self.servers: dict[bytes, ServerState] = {}
        self.users: dict[bytes, User] = {}

    def add_server(self, name: str | bytes, password: bytes = b"server-pw") -> ServerState:
        sid = identity(name)
        alpha = server_prepare_registration(sid, password, self.rng, self.counter)
        self.network.log_secure(f"S:{sid.hex()}", "RA", sid + alpha)
        state = ServerState(id=sid, alpha=b"", beta=b"", delta1=self.delta1, strict_replay=self.strict_replay)
        rec = self.ra.register_server(sid, alpha, storage=state)
        state.alpha, state.beta = rec.alpha, rec.beta
        self.servers[sid] = state
        return state

    def add_user(self, name: str | bytes, password: bytes) -> User:
        uid = identity(name)
        req, _p = user_prepare_registration(uid, password, self.rng, self.counter)
        self.network.log_secure(f"U:{uid.hex()}", "RA", req.id + req.A + req.B)
        iss = self.ra.register_user(req)
        self.network.log_secure("RA", f"U:{uid.hex()}", iss.card.to_bytes())
        user = User(str(name), uid, password, iss.card, iss)
        self.users[uid] = user
        return user

    def login(
        self,
        user: User | bytes,
        server: ServerState | bytes,
        password: Optional[bytes] = None,
        request_script: Iterable[Action] = HONEST,
        response_script: Iterable[Action] = HONEST,
    ) -> LoginOutcome:
        """Run one login/authentication exchange through the scripted channel.

        Raises ``CredentialMismatch``/``UnknownServer`` before anything is sent.
        Verifier rejections are collected on the outcome, not raised.
        """
        u = user if isinstance(user, User) else self.users[user]
        s = server if isinstance(server, ServerState) else self.servers[server]
        pw = u.password if password is None else password
        out = LoginOutcome(u.id, s.id, transcript_start=len(self.network.transcript))

        session = card_ops.local_verify(u.card, u.id, pw, self.counter)
        out.card_session = session
        req = card_ops.build_login_request(session, s.id, self.clock.read("card"), self.rng, self.counter)
        out.request = req
        out.n_i = session.pending.n_i
        self.network.transmit("card", "server", req, request_script)
        self.drain(out, session, s, response_script)
        out.transcript_end = len(self.network.transcript)
        return out

    def deliver_to_server(self, out: LoginOutcome, s: ServerState, frame: bytes,
                          response_script: Iterable[Action] = HONEST) -> None:
        """Server handling of one request frame; response goes back on the network."""
        f = self.faults
        try:
            req = LoginRequest.decode(frame)
            pend = server_ops.verify_login(
                s, req, self.clock.read("server"), self.counter,
                check_j=not f.skip_j_check, check_freshness=not f.skip_freshness,
            )
        except ProtocolError as e:
            out.server_errors.append(e)
            return
        out.server_pending = pend
        resp, sk = server_ops.build_response_and_derive_key(s, pend, self.clock.read("server"), self.rng, self.counter)
        out.server_accepts += 1
        out.server_key = sk
        out.response = out.response or resp
        self.network.transmit("server", "card", resp, response_script)

    def deliver_to_card(self, out: LoginOutcome, session: CardSession, frame: bytes) -> None:
        f = self.faults
        try:
            resp = LoginResponse.decode(frame)
            key = card_ops.verify_response_and_derive_key(
                session, resp, self.clock.read("card"), self.delta2, self.delta1, self.counter,
                check_m=not f.skip_m_check, check_freshness=not f.skip_freshness,
            )
        except ProtocolError as e:
            if out.card_key is None:
                out.card_error = e
            return
        out.card_key = key

    def drain(self, out: LoginOutcome, session: CardSession, s: ServerState,
              response_script: Iterable[Action] = HONEST) -> None:
        """Process queued deliveries until the network is quiet."""
        response_script = tuple(response_script)
        while True:
            d = self.network.next_delivery()
            if d is None:
                return
            if d.recipient == "server":
                self.deliver_to_server(out, s, d.frame, response_script)
            else:
                self.deliver_to_card(out, session, d.frame)

    def update_password(self, user: User | bytes, old: bytes, new: bytes) -> SmartCard:
        u = user if isinstance(user, User) else self.users[user]
        card_ops.update_password(u.card, u.id, old, new, self.counter)
        u.password = new
        return u.card

    def snapshot(self) -> dict:
        """Serialized state of every actor, for byte-identity checks."""
        return {
            "ra": self.ra.to_json(),
            "servers": {k.hex(): v.to_json() for k, v in sorted(self.servers.items())},
            "cards": {k.hex(): v.card.to_json() for k, v in sorted(self.users.items())},
            "transcript": self.network.dump(),
        }
