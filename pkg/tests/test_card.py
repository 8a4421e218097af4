import pytest

from msauth import card as card_ops
from msauth.core import HashCounter, RandomSource, identity, pad, truncate, xor
from msauth.errors import CredentialMismatch, NoPendingLogin, ResponseForgery, StaleResponse, UnknownServer, WeakPassword
from msauth.sim import World
from msauth.wire import LoginResponse, REQUEST_SIZE

from oracle import H, request, response, session_key

T0 = 1_700_000_000


@pytest.fixture
def world():
    w = World(seed=5)
    w.add_server("S1")
    w.add_server("S2")
    return w


@pytest.fixture
def alice(world):
    return world.add_user("alice", b"correct horse")


def test_local_verify_recovers_registration_values(alice):
    c = HashCounter()
    s = card_ops.local_verify(alice.card, alice.id, b"correct horse", c)
    assert c.count == 2
    assert s.derived.hqx == alice.issuance.hqx
    assert s.derived.C == alice.issuance.C
    mask = xor(alice.card.A, H(alice.id, b"correct horse"))
    assert mask == pad(s.derived.p)  # A = pad(p) ^ h(ID||PW): zero tail
    assert s.derived.B == H(b"correct horse", s.derived.p)


def test_wrong_identity_rejected_locally(alice):
    with pytest.raises(CredentialMismatch):
        card_ops.local_verify(alice.card, identity("mallory"), b"correct horse")


def test_local_check_is_independent_of_password(alice):
    # E' = A ^ B' ^ (B' ^ D ^ ID ^ A) = D ^ ID = E whatever the password
    assert xor(alice.card.D, pad(alice.id)) == alice.card.E
    s = card_ops.local_verify(alice.card, alice.id, b"correct horsf")
    assert s.derived.p != card_ops.local_verify(alice.card, alice.id, b"correct horse").derived.p


def test_wrong_password_is_caught_by_server(world, alice):
    out = world.login(alice, identity("S1"), password=b"correct horsf")
    assert out.server_errors[0].code == "request-forgery"
    assert not out.established


def test_request_matches_oracle(alice):
    s = card_ops.local_verify(alice.card, alice.id, b"correct horse")
    c = HashCounter()
    sid = identity("S2")
    req = card_ops.build_login_request(s, sid, T0, RandomSource(9), c)
    assert c.count == 2
    n = s.pending.n_i
    want = request(alice.id, sid, s.derived.p, alice.issuance.hqx, n, T0)
    assert (req.aid, req.g, req.i, req.j) == (want["AID"], want["G"], want["I"], want["J"])
    assert s.pending.h_i == want["H"]
    assert len(req.encode()) == REQUEST_SIZE
    assert truncate(xor(req.i, n, alice.id), 8) == s.derived.p


def test_request_to_unlisted_server_rejected(alice):
    s = card_ops.local_verify(alice.card, alice.id, b"correct horse")
    with pytest.raises(UnknownServer):
        card_ops.build_login_request(s, identity("S9"), T0, RandomSource(0))


def _pending_session(alice, t1=T0):
    s = card_ops.local_verify(alice.card, alice.id, b"correct horse")
    card_ops.build_login_request(s, identity("S1"), t1, RandomSource(1))
    return s


def _honest_response(s, nj, t2):
    r = response(s.pending.n_i, nj, s.derived.p, s.pending.j_i, t2)
    return LoginResponse(r["K"], r["M"], t2)


def test_response_accepted_and_key_matches_oracle(alice):
    s = _pending_session(alice)
    pend = s.pending
    nj = bytes(range(8))
    c = HashCounter()
    key = card_ops.verify_response_and_derive_key(s, _honest_response(s, nj, T0 + 1), T0 + 2, 5, 5, c)
    assert c.count == 2
    want = session_key(alice.id, identity("S1"), pend.n_i, nj, s.derived.p, pend.h_i, 5)
    assert key.key == want
    assert s.pending is None


def test_response_freshness_bounds(alice):
    s = _pending_session(alice)
    resp = _honest_response(s, b"\x01" * 8, T0 + 1)
    card_ops.verify_response_and_derive_key(s, resp, T0 + 6, 5, 5)  # age exactly delta2
    s = _pending_session(alice)
    with pytest.raises(StaleResponse):
        card_ops.verify_response_and_derive_key(s, _honest_response(s, b"\x01" * 8, T0 + 1), T0 + 7, 5, 5)
    s = _pending_session(alice)
    with pytest.raises(StaleResponse):
        card_ops.verify_response_and_derive_key(s, _honest_response(s, b"\x01" * 8, T0 + 3), T0 + 2, 5, 5)


def test_forged_response_rejected_and_pending_cleared(alice):
    s = _pending_session(alice)
    r = _honest_response(s, b"\x02" * 8, T0)
    bad = LoginResponse(xor(r.k, b"\x80"), r.m, r.t2)
    with pytest.raises(ResponseForgery):
        card_ops.verify_response_and_derive_key(s, bad, T0, 5, 5)
    with pytest.raises(NoPendingLogin):
        card_ops.verify_response_and_derive_key(s, r, T0, 5, 5)


def test_password_update(world, alice):
    p_before = card_ops.local_verify(alice.card, alice.id, b"correct horse").derived.p
    c = HashCounter()
    card_ops.update_password(alice.card, alice.id, b"correct horse", b"battery staple", c)
    assert c.count == 4
    s = card_ops.local_verify(alice.card, alice.id, b"battery staple")
    assert s.derived.p == p_before
    assert s.derived.hqx == alice.issuance.hqx
    alice.password = b"battery staple"
    assert world.login(alice, identity("S1")).established


def test_password_update_rejects_empty_new_password(alice):
    with pytest.raises(WeakPassword):
        card_ops.update_password(alice.card, alice.id, b"correct horse", b"")


def test_update_with_wrong_old_password_corrupts_card(world, alice):
    # the vacuous local check lets this through; the card then fails at the server
    card_ops.update_password(alice.card, alice.id, b"not my password", b"new one")
    alice.password = b"new one"
    out = world.login(alice, identity("S1"))
    assert not out.established
    assert out.server_errors[0].code == "request-forgery"
