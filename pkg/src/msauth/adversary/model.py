"""Symbolic mirror of the protocol, plus ground bindings taken from a live world."""

from __future__ import annotations

from dataclasses import dataclass

from ..core import encode_timestamp, hash_parts, truncate, xor
from ..sim import LoginOutcome, User, World
from .terms import Binding, Hash, Name, Term, h, name, xor_terms


@dataclass(frozen=True)
class UserTerms:
    tag: str
    ID: Term
    PW: Term
    p: Term
    hqx: Term  # h(q || x)
    A: Term
    B: Term
    C: Term
    D: Term
    E: Term
    F: Term


@dataclass(frozen=True)
class RunTerms:
    tag: str
    SID: Term
    N: Term
    Nj: Term
    T1: Term
    T2: Term
    DT: Term
    AID: Term
    G: Term
    H: Term
    I: Term
    J: Term
    K: Term
    M: Term
    SK: Term
    nonce_mask: Term  # what the server XORs off G to get N


def user_terms(tag: str, pw_width: int) -> UserTerms:
    ID = name(f"ID_{tag}")
    PW = name(f"PW_{tag}", pw_width)
    p = name(f"p_{tag}")
    hqx = h(name(f"q_{tag}"), name("x"))
    A = p ^ h(ID, PW)
    B = h(PW, p)
    C = A ^ hqx
    D = xor_terms(C, B, ID)
    E = xor_terms(A, B, hqx)
    F = xor_terms(ID, A, C)
    return UserTerms(tag, ID, PW, p, hqx, A, B, C, D, E, F)


def run_terms(u: UserTerms, tag: str, sid_label: str = "SID") -> RunTerms:
    SID = name(sid_label)
    N = name(f"N_{tag}")
    Nj = name(f"Nj_{tag}")
    T1 = name(f"T1_{tag}", 4)
    T2 = name(f"T2_{tag}", 4)
    DT = name("DT1", 4)
    AID = u.ID ^ SID
    G = xor_terms(N, u.C, u.A)
    H = G ^ h(SID, N, T1)
    I = xor_terms(N, u.p, u.ID)
    J = h(G, H, I, u.p, T1)
    K = xor_terms(N, Nj, u.p)
    M = h(K, N, Nj, J, T2)
    SK = h(u.ID, SID, N, Nj, u.p, H, DT)
    return RunTerms(tag, SID, N, Nj, T1, T2, DT, AID, G, H, I, J, K, M, SK, u.hqx)


def _only(t: Term):
    (a,) = t.atoms
    return a


def bind_user(names: dict, fixed: dict, ut: UserTerms, user: User) -> None:
    """Ground values for a user's atoms. h(q||x) is pinned since q is gone."""
    p = truncate(xor(user.card.A, hash_parts(user.id, user.password)), 8)
    names[_only(ut.ID).label] = user.id
    names[_only(ut.PW).label] = user.password
    names[_only(ut.p).label] = p
    fixed[_only(ut.hqx)] = user.issuance.hqx


def bind_run(names: dict, rt: RunTerms, world: World, out: LoginOutcome, p: bytes) -> None:
    req, resp = out.request, out.response
    n_i = out.n_i
    names[_only(rt.SID).label] = out.server
    names[_only(rt.N).label] = n_i
    names[_only(rt.Nj).label] = xor(resp.k, n_i, p)
    names[_only(rt.T1).label] = encode_timestamp(req.t1)
    names[_only(rt.T2).label] = encode_timestamp(resp.t2)
    names[_only(rt.DT).label] = encode_timestamp(world.delta1)


def transcript_facts(rt: RunTerms, out: LoginOutcome):
    """Open-channel values of one run as (label, term, bytes)."""
    req, resp = out.request, out.response
    return [
        (f"AID_{rt.tag}", rt.AID, req.aid),
        (f"G_{rt.tag}", rt.G, req.g),
        (f"I_{rt.tag}", rt.I, req.i),
        (f"J_{rt.tag}", rt.J, req.j),
        (f"T1_{rt.tag}", rt.T1, encode_timestamp(req.t1)),
        (f"K_{rt.tag}", rt.K, resp.k),
        (f"M_{rt.tag}", rt.M, resp.m),
        (f"T2_{rt.tag}", rt.T2, encode_timestamp(resp.t2)),
    ]


def card_facts(ut: UserTerms, user: User):
    c = user.card
    return [(f"A_{ut.tag}", ut.A, c.A), (f"D_{ut.tag}", ut.D, c.D), (f"E_{ut.tag}", ut.E, c.E)]


__all__ = [
    "Binding",
    "Hash",
    "Name",
    "RunTerms",
    "UserTerms",
    "bind_run",
    "bind_user",
    "card_facts",
    "run_terms",
    "transcript_facts",
    "user_terms",
]
