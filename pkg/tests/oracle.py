"""Straight-line recomputation of the protocol with hashlib only.

Used as an independent check on the package: nothing here imports msauth.
"""

import hashlib


def H(*parts: bytes) -> bytes:
    return hashlib.sha256(b"".join(parts)).digest()


def X(*vals: bytes) -> bytes:
    width = max(len(v) for v in vals)
    out = bytearray(width)
    for v in vals:
        for k, b in enumerate(v):
            out[k] ^= b
    return bytes(out)


def P(v: bytes, width: int = 32) -> bytes:
    return v + bytes(width - len(v))


def ts(t: int) -> bytes:
    return t.to_bytes(4, "big")


def registration(uid: bytes, pw: bytes, p: bytes, hqx: bytes) -> dict:
    A = X(P(p), H(uid, pw))
    B = H(pw, p)
    C = X(A, hqx)
    D = X(C, B, P(uid))
    E = X(A, B, hqx)
    F = X(P(uid), A, C)
    return dict(A=A, B=B, C=C, D=D, E=E, F=F)


def request(uid: bytes, sid: bytes, p: bytes, hqx: bytes, n: bytes, t1: int) -> dict:
    G = X(P(n), hqx)
    Hi = X(G, H(sid, n, ts(t1)))
    I = X(n, p, uid)
    J = H(G, Hi, I, p, ts(t1))
    return dict(AID=X(uid, sid), G=G, H=Hi, I=I, J=J)


def response(n: bytes, nj: bytes, p: bytes, j: bytes, t2: int) -> dict:
    K = X(n, nj, p)
    return dict(K=K, M=H(K, n, nj, j, ts(t2)))


def session_key(uid, sid, n, nj, p, hi, delta1: int) -> bytes:
    return H(uid, sid, n, nj, p, hi, ts(delta1))
