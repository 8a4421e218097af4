import pytest

from msauth import card as card_ops
from msauth import server as server_ops
from msauth.core import HashCounter, RandomSource, identity, xor
from msauth.errors import RequestForgery, StaleRequest, UnknownUser
from msauth.server import ServerState
from msauth.sim import World
from msauth.wire import LoginRequest

from oracle import response, session_key

T0 = 1_700_000_000


@pytest.fixture
def setup():
    w = World(seed=11)
    s = w.add_server("S1")
    u = w.add_user("alice", b"pw-alice")
    sess = card_ops.local_verify(u.card, u.id, b"pw-alice")
    req = card_ops.build_login_request(sess, s.id, T0, RandomSource(2))
    return w, s, u, sess, req


def test_verify_login_recovers_card_values(setup):
    _, s, u, sess, req = setup
    c = HashCounter()
    pend = server_ops.verify_login(s, req, T0 + 1, c)
    assert c.count == 2
    assert pend.user_id == u.id
    assert pend.n_i == sess.pending.n_i
    assert pend.p == sess.derived.p
    assert pend.h_i == sess.pending.h_i
    assert pend.j == req.j


def test_verify_login_is_pure(setup):
    _, s, _, _, req = setup
    before = (s.to_json(), dict(s.sessions), set(s.seen))
    server_ops.verify_login(s, req, T0 + 1)
    assert (s.to_json(), dict(s.sessions), set(s.seen)) == before


@pytest.mark.parametrize("age,ok", [(0, True), (5, True), (6, False), (-1, False)])
def test_request_freshness_window(setup, age, ok):
    _, s, _, _, req = setup
    if ok:
        server_ops.verify_login(s, req, T0 + age)
    else:
        with pytest.raises(StaleRequest):
            server_ops.verify_login(s, req, T0 + age)


def test_unknown_user_and_forgery(setup):
    _, s, _, _, req = setup
    with pytest.raises(UnknownUser):
        server_ops.verify_login(s, LoginRequest(xor(req.aid, b"\x01"), req.g, req.i, req.j, req.t1), T0)
    with pytest.raises(RequestForgery):
        server_ops.verify_login(s, LoginRequest(req.aid, req.g, xor(req.i, b"\x01"), req.j, req.t1), T0)
    with pytest.raises(RequestForgery):
        server_ops.verify_login(s, LoginRequest(req.aid, req.g, req.i, req.j, req.t1 + 1), T0 + 1)


def test_response_and_key_match_oracle(setup):
    _, s, u, sess, req = setup
    pend = server_ops.verify_login(s, req, T0 + 1)
    c = HashCounter()
    resp, sk = server_ops.build_response_and_derive_key(s, pend, T0 + 1, RandomSource(4), c)
    assert c.count == 2
    nj = xor(resp.k, pend.n_i, pend.p)
    want = response(pend.n_i, nj, pend.p, pend.j, T0 + 1)
    assert (resp.k, resp.m, resp.t2) == (want["K"], want["M"], T0 + 1)
    assert sk.key == session_key(u.id, s.id, pend.n_i, nj, pend.p, pend.h_i, 5)
    assert s.active_session(u.id, T0 + 1) == sk
    assert s.active_session(u.id, T0 + 1 + s.lifetime + 1) is None


def test_strict_replay_cache(setup):
    _, s, _, _, req = setup
    s.strict_replay = True
    pend = server_ops.verify_login(s, req, T0 + 1)
    server_ops.build_response_and_derive_key(s, pend, T0 + 1, RandomSource(0))
    with pytest.raises(StaleRequest):
        server_ops.verify_login(s, req, T0 + 2)


def test_state_round_trip(setup):
    _, s, _, _, _ = setup
    again = ServerState.from_json(s.to_json())
    assert again.to_json() == s.to_json()
    assert again.f_table == s.f_table
