"""Scripted attacks A1-A7 against a live world, each backed by a symbolic check.

A scenario is ``prevented`` only when every concrete attack attempt is
rejected by the honest verifier *and* every goal term is underivable from
the scenario's knowledge set (and, for password guessing, no test separates
the true password from a wrong one).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

from .. import card as card_ops
from ..core import encode_timestamp, hash_parts, pad, truncate, xor
from ..errors import CredentialMismatch
from ..sim import Faults, LoginOutcome, User, World
from ..wire import Deliver, Drop, LoginRequest, LoginResponse, Record
from .knowledge import DEFAULT_DEPTH, Fact, KnowledgeSet, consistent_guesses, guess_is_verifiable
from .model import (
    RunTerms,
    UserTerms,
    bind_run,
    bind_user,
    card_facts,
    run_terms,
    transcript_facts,
    user_terms,
)
from .terms import Binding, Term, h, name, trunc

TITLES = {
    "A1": "smart card lost",
    "A2": "user impersonation",
    "A3": "password guessing",
    "A4": "replay",
    "A5": "session key disclosure",
    "A6": "man-in-the-middle",
    "A7": "insider",
}

RECORD = (Record(), Deliver())
CAPTURE_AND_DROP = (Record(), Drop())


@dataclass
class Fixture:
    world: World
    server_id: bytes
    victim: User
    insider: User
    honest: LoginOutcome
    insider_run: LoginOutcome
    ut: UserTerms
    ut_insider: UserTerms
    rt: RunTerms
    rt_insider: RunTerms
    binding: Binding
    fresh_t1: Term = field(default_factory=lambda: name("T1*", 4))


def build_fixture(
    seed: int | str = 0,
    faults: Faults = Faults(),
    strict_replay: bool = False,
    delta1: int = 5,
    delta2: int = 5,
    victim_password: bytes = b"correct horse",
    insider_password: bytes = b"insider pass",
) -> Fixture:
    w = World(seed=seed, delta1=delta1, delta2=delta2, faults=faults, strict_replay=strict_replay)
    s = w.add_server("S1")
    w.add_server("S2")
    victim = w.add_user("victim", victim_password)
    insider = w.add_user("insider", insider_password)
    honest = w.login(victim, s, request_script=RECORD, response_script=RECORD)
    insider_run = w.login(insider, s, request_script=RECORD, response_script=RECORD)

    ut = user_terms("i", len(victim_password))
    ut_a = user_terms("A", len(insider_password))
    rt = run_terms(ut, "i")
    rt_a = run_terms(ut_a, "A")
    names: dict = {}
    fixed: dict = {}
    bind_user(names, fixed, ut, victim)
    bind_user(names, fixed, ut_a, insider)
    p_i = names["p_i"]
    p_a = names["p_A"]
    bind_run(names, rt, w, honest, p_i)
    bind_run(names, rt_a, w, insider_run, p_a)
    names["T1*"] = encode_timestamp(w.clock.now)
    return Fixture(w, s.id, victim, insider, honest, insider_run, ut, ut_a, rt, rt_a, Binding(names, fixed))


@dataclass
class Attempt:
    name: str
    breached: bool
    detail: str


@dataclass
class GoalResult:
    label: str
    term: str
    derivable: bool


@dataclass
class ScenarioResult:
    scenario: str
    title: str
    verdict: str
    goals: list[GoalResult]
    attempts: list[Attempt]
    findings: list[str]
    stats: dict
    transcript_ref: str
    knowledge: list[str]

    @property
    def prevented(self) -> bool:
        return self.verdict == "prevented"

    def to_json(self) -> dict:
        d = asdict(self)
        d["goals"] = [{"term": g.term, "label": g.label, "derivable": g.derivable} for g in self.goals]
        return d


# -- knowledge construction


def public_facts(fx: Fixture, identities_public: bool, sid_public: bool) -> list[Fact]:
    b = fx.binding
    facts = [
        Fact("DT1", fx.rt.DT, b.value(fx.rt.DT)),
        Fact("T1*", fx.fresh_t1, b.value(fx.fresh_t1)),
    ]
    if sid_public:
        facts.append(Fact("SID", fx.rt.SID, b.value(fx.rt.SID)))
    if identities_public:
        facts.append(Fact("ID_i", fx.ut.ID, b.value(fx.ut.ID)))
    return facts


def _facts(rows) -> list[Fact]:
    return [Fact(label, term, value) for label, term, value in rows]


def victim_goals(fx: Fixture) -> dict[str, Term]:
    rt, ut = fx.rt, fx.ut
    t1 = fx.fresh_t1
    fresh_j = h(rt.G, rt.G ^ h(rt.SID, rt.N, t1), rt.I, ut.p, t1)
    return {
        "SK": rt.SK,
        "p_i": ut.p,
        "N_i": rt.N,
        "h(q||x)": ut.hqx,
        # The server strips trunc(h(q||x)) off any G it receives; without it no
        # attacker-chosen G yields a nonce the attacker knows, so no J verifies.
        "forged request (nonce mask)": trunc(ut.hqx),
        "forged request (J at fresh T1)": fresh_j,
    }


def probe_terms(fx: Fixture) -> dict[str, Term]:
    """Intermediate values that are not goals; derivability is reported, not judged."""
    return {"N_j": fx.rt.Nj, "H_i": fx.rt.H, "ID_i": fx.ut.ID, "N_i ^ p_i": fx.rt.N ^ fx.ut.p}


def evaluate_goals(ks: KnowledgeSet, goals: dict[str, Term], binding: Binding) -> tuple[list[GoalResult], int]:
    results = []
    checked = 0
    for label, t in goals.items():
        d = ks.derivable(t)
        if d:
            # soundness: the replayed derivation must give the real bytes
            got = ks.attacker_value(t)
            if got is not None and got != binding.value(t):
                raise AssertionError(f"unsound derivation for {label}")
            checked += 1
        results.append(GoalResult(label, str(t), d))
    return results, checked


# -- concrete helpers


def _flip(b: bytes, byte: int = 0, bit: int = 0) -> bytes:
    out = bytearray(b)
    out[byte] ^= 1 << bit
    return bytes(out)


def server_accepts(fx: Fixture, frame: bytes) -> tuple[bool, str]:
    w = fx.world
    s = w.servers[fx.server_id]
    out = LoginOutcome(fx.victim.id, s.id)
    w.network.inject("server", "request", frame)
    d = w.network.next_delivery()
    w.deliver_to_server(out, s, d.frame, response_script=(Drop(),))
    w.drain(out, None, s)
    if out.server_accepts:
        return True, "server accepted and answered"
    return False, out.server_errors[0].code if out.server_errors else "no answer"


def card_accepts_tampered(fx: Fixture, tamper: Callable[[LoginResponse], LoginResponse]) -> tuple[bool, str]:
    """Honest login whose response is intercepted, altered and forwarded."""
    w = fx.world
    s = w.servers[fx.server_id]
    out = w.login(fx.victim, s, response_script=CAPTURE_AND_DROP)
    _, frame = w.network.captured[-1]
    forged = tamper(LoginResponse.decode(frame))
    w.network.inject("card", "response", forged.encode())
    w.drain(out, out.card_session, s)
    if out.card_key is not None:
        return True, "card accepted altered response"
    return False, out.card_error.code if out.card_error else "no answer"


def refreshed_request(fx: Fixture) -> LoginRequest:
    req = fx.honest.request
    return LoginRequest(req.aid, req.g, req.i, req.j, fx.world.clock.read("adversary"))


# -- scenarios


def _a1(fx: Fixture, ks_opts: dict):
    attempts, findings = [], []
    w = fx.world
    s = w.servers[fx.server_id]
    out = w.login(fx.victim, s, password=b"guess-0001")
    findings.append(
        "local card check accepted a wrong password (D xor E == ID makes E' == E for any "
        "password); rejection came from the server"
    )
    attempts.append(Attempt("stolen card with guessed password", out.server_accepts > 0,
                            out.server_errors[0].code if out.server_errors else "accepted"))
    ok, why = server_accepts(fx, refreshed_request(fx).encode())
    attempts.append(Attempt("captured request with refreshed T1", ok, why))
    facts = public_facts(fx, **ks_opts) + _facts(transcript_facts(fx.rt, fx.honest)) + _facts(card_facts(fx.ut, fx.victim))
    return attempts, findings, facts, victim_goals(fx)


def _a2(fx: Fixture, ks_opts: dict):
    attempts = []
    ok, why = server_accepts(fx, refreshed_request(fx).encode())
    attempts.append(Attempt("captured request with refreshed T1", ok, why))
    # attacker guesses N and p, keeps the captured G and I
    req = fx.honest.request
    t1 = fx.world.clock.read("adversary")
    t1b = encode_timestamp(t1)
    n_guess, p_guess = fx.world.rng.bytes(8), fx.world.rng.bytes(8)
    hh = xor(req.g, hash_parts(fx.server_id, n_guess, t1b))
    j = hash_parts(req.g, hh, req.i, p_guess, t1b)
    ok, why = server_accepts(fx, LoginRequest(req.aid, req.g, req.i, j, t1).encode())
    attempts.append(Attempt("request with guessed N and p", ok, why))
    ok, why = server_accepts(fx, LoginRequest(req.aid, req.g, req.i, fx.world.rng.bytes(32), t1).encode())
    attempts.append(Attempt("request with random J", ok, why))
    facts = public_facts(fx, **ks_opts) + _facts(transcript_facts(fx.rt, fx.honest))
    return attempts, [], facts, victim_goals(fx)


def dictionary(fx: Fixture, decoys: int = 1024) -> list[bytes]:
    words = [b"guess-%05d" % k for k in range(decoys)]
    pos = int.from_bytes(hashlib.sha256(b"dict" + fx.victim.id).digest()[:4], "big") % (decoys + 1)
    words.insert(pos, fx.victim.password)
    return words


def _a3(fx: Fixture, ks_opts: dict, with_card: bool = True, decoys: int = 1024,
        depth: int = DEFAULT_DEPTH):
    facts = public_facts(fx, **ks_opts) + _facts(transcript_facts(fx.rt, fx.honest))
    if with_card:
        facts += _facts(card_facts(fx.ut, fx.victim))
    ks = KnowledgeSet(facts, depth=depth)
    g = ks.add_guess("PW guess", fx.ut.PW)
    verifiable = guess_is_verifiable(ks, g, name("PW_wrong", len(fx.victim.password)))
    words = dictionary(fx, decoys)
    survivors = consistent_guesses(ks, g, words)
    attempts = [
        Attempt(
            f"offline dictionary ({len(words)} candidates)",
            len(survivors) < len(words),
            f"{len(survivors)} candidate(s) consistent with everything observed",
        )
    ]
    findings = []
    if verifiable:
        findings.append("a guessed password can be checked offline against the captured values")
    if survivors == [fx.victim.password]:
        findings.append("dictionary attack isolated the true password")
    return attempts, findings, facts, victim_goals(fx), verifiable


def _a4(fx: Fixture, ks_opts: dict):
    attempts, findings = [], []
    w = fx.world
    s = w.servers[fx.server_id]
    frame = fx.honest.request.encode()
    marker = len(w.network.transcript)
    # inside the window the timestamp check alone lets a verbatim copy through
    ok, why = server_accepts(fx, frame)
    replay_resp = _last_frame(w, "server->card", since=marker) if ok else None
    if ok:
        findings.append(
            "verbatim replay inside the freshness window was accepted by the server "
            "(no nonce cache); the card holds no pending login, so no key is shared"
        )
    # not a breach on its own: the goals below decide whether it leads anywhere
    attempts.append(Attempt("verbatim replay inside window", False, why))
    w.clock.advance_to(fx.honest.request.t1 + w.delta1 + 1)
    ok, why = server_accepts(fx, frame)
    attempts.append(Attempt("verbatim replay after window", ok, why))
    out = w.login(fx.victim, s, response_script=(Drop(),))
    w.network.inject("card", "response", fx.honest.response.encode())
    w.drain(out, out.card_session, s)
    attempts.append(Attempt("old response replayed to a new login", out.card_key is not None,
                            out.card_error.code if out.card_error else "accepted"))
    facts = public_facts(fx, **ks_opts) + _facts(transcript_facts(fx.rt, fx.honest))
    goals = victim_goals(fx)
    if replay_resp is not None:
        r = LoginResponse.decode(replay_resp)
        nj2, t2 = name("Nj_replay"), name("T2_replay", 4)
        k2 = fx.rt.N ^ nj2 ^ fx.ut.p
        facts += [
            Fact("K_replay", k2, r.k),
            Fact("M_replay", h(k2, fx.rt.N, nj2, fx.rt.J, t2), r.m),
            Fact("T2_replay", t2, encode_timestamp(r.t2)),
        ]
        goals["SK of replayed session"] = h(fx.ut.ID, fx.rt.SID, fx.rt.N, nj2, fx.ut.p, fx.rt.H, fx.rt.DT)
    return attempts, findings, facts, goals


def _last_frame(w: World, direction: str, since: int = 0) -> Optional[bytes]:
    for rec in reversed(w.network.transcript[since:]):
        if rec.direction == direction:
            return rec.frame
    return None


def _a5(fx: Fixture, ks_opts: dict):
    req, resp = fx.honest.request, fx.honest.response
    # best effort: substitute observable values for the unknown ones
    guess = hash_parts(
        fx.victim.id, fx.server_id, req.g[:8], resp.k, req.i, req.g, encode_timestamp(fx.world.delta1)
    )
    real = fx.honest.server_key.key
    attempts = [Attempt("session key from observable substitutes", guess == real, "key mismatch" if guess != real else "match")]
    facts = public_facts(fx, **ks_opts) + _facts(transcript_facts(fx.rt, fx.honest))
    return attempts, [], facts, victim_goals(fx)


def _a6(fx: Fixture, ks_opts: dict):
    attempts = []
    req = fx.honest.request
    t1 = fx.world.clock.read("adversary")
    for label, forged in [
        ("request with G bit flipped", LoginRequest(req.aid, _flip(req.g), req.i, req.j, t1)),
        ("request with I bit flipped", LoginRequest(req.aid, req.g, _flip(req.i), req.j, t1)),
        ("request with AID bit flipped", LoginRequest(_flip(req.aid, 7), req.g, req.i, req.j, t1)),
    ]:
        ok, why = server_accepts(fx, forged.encode())
        attempts.append(Attempt(label, ok, why))
    for label, tamper in [
        ("response with K bit flipped", lambda r: LoginResponse(_flip(r.k), r.m, r.t2)),
        ("response with M bit flipped", lambda r: LoginResponse(r.k, _flip(r.m), r.t2)),
        ("response with T2 shifted", lambda r: LoginResponse(r.k, r.m, r.t2 - 1)),
    ]:
        ok, why = card_accepts_tampered(fx, tamper)
        attempts.append(Attempt(label, ok, why))
    facts = public_facts(fx, **ks_opts) + _facts(transcript_facts(fx.rt, fx.honest))
    return attempts, [], facts, victim_goals(fx)


def _a7(fx: Fixture, ks_opts: dict):
    attempts = []
    w = fx.world
    ins, vic = fx.insider, fx.victim
    try:
        card_ops.local_verify(ins.card, vic.id, ins.password)
        attempts.append(Attempt("own card with victim identity at reader", False, "passed local check"))
    except CredentialMismatch as e:
        attempts.append(Attempt("own card with victim identity at reader", False, e.code))
    # bypass the reader: build a request for the victim from the insider's own secrets
    sess = card_ops.local_verify(ins.card, ins.id, ins.password)
    t1 = w.clock.read("adversary")
    t1b = encode_timestamp(t1)
    n = w.rng.bytes(8)
    g = xor(pad(n), sess.derived.hqx)
    hh = xor(g, hash_parts(fx.server_id, n, t1b))
    i = xor(n, sess.derived.p, vic.id)
    j = hash_parts(g, hh, i, sess.derived.p, t1b)
    ok, why = server_accepts(fx, LoginRequest(xor(vic.id, fx.server_id), g, i, j, t1).encode())
    attempts.append(Attempt("request for victim built from insider secrets", ok, why))
    uta = fx.ut_insider
    facts = (
        public_facts(fx, **ks_opts)
        + _facts(transcript_facts(fx.rt, fx.honest))
        + _facts(transcript_facts(fx.rt_insider, fx.insider_run))
        + _facts(card_facts(uta, ins))
        + [
            Fact("ID_A", uta.ID, ins.id),
            Fact("PW_A", uta.PW, ins.password),
        ]
    )
    return attempts, [], facts, victim_goals(fx)


_RUNNERS = {"A1": _a1, "A2": _a2, "A4": _a4, "A5": _a5, "A6": _a6, "A7": _a7}


def run_scenario(
    scenario: str,
    fx: Optional[Fixture] = None,
    *,
    seed: int | str = 0,
    faults: Faults = Faults(),
    strict_replay: bool = False,
    depth: int = DEFAULT_DEPTH,
    identities_public: bool = True,
    sid_public: bool = True,
    a3_with_card: bool = True,
) -> ScenarioResult:
    """Run one scenario in its own world (unless ``fx`` is given).

    ``a3_with_card`` grants the password-guessing attacker the stolen card on
    top of the transcript; False restricts it to eavesdropped values only.
    """
    if scenario not in TITLES:
        raise KeyError(f"unknown scenario {scenario!r}; expected one of {sorted(TITLES)}")
    fx = fx or build_fixture(seed=seed, faults=faults, strict_replay=strict_replay)
    opts = {"identities_public": identities_public, "sid_public": sid_public}
    verifiable = False
    if scenario == "A3":
        attempts, findings, facts, goals, verifiable = _a3(fx, opts, with_card=a3_with_card, depth=depth)
    else:
        attempts, findings, facts, goals = _RUNNERS[scenario](fx, opts)
    ks = KnowledgeSet(facts, depth=depth, goals=goals.values())
    ks.saturate()
    goal_results, checked = evaluate_goals(ks, goals, fx.binding)
    granted = {f.term for f in facts}
    for label, t in probe_terms(fx).items():
        if label not in goals and t not in granted and ks.derivable(t):
            findings.append(f"{label} is derivable from the scenario knowledge (not a goal term)")
    breached = any(a.breached for a in attempts)
    derived = any(g.derivable for g in goal_results)
    verdict = "succeeded" if (breached or derived or verifiable) else "prevented"
    stats = ks.stats() | {"soundness_checked": checked}
    ref = hashlib.sha256(fx.world.network.dump().encode()).hexdigest()[:16]
    return ScenarioResult(
        scenario=scenario,
        title=TITLES[scenario],
        verdict=verdict,
        goals=goal_results,
        attempts=attempts,
        findings=findings,
        stats=stats,
        transcript_ref=ref,
        knowledge=[f.label for f in facts],
    )


def run_all(**kw) -> list[ScenarioResult]:
    return [run_scenario(s, **kw) for s in TITLES]


def results_json(results: list[ScenarioResult]) -> str:
    return json.dumps([r.to_json() for r in results], indent=2, sort_keys=True)
