import json

import pytest

from msauth.core import HashCounter, RandomSource, identity, pad, xor
from msauth.errors import DuplicateServerIdentity, DuplicateUserIdentity, EmptyPassword, WidthViolation
from msauth.ra import RegistrationAuthority, SmartCard, server_prepare_registration, user_prepare_registration
from msauth.server import ServerState

from oracle import H, P, X, registration

UID = identity("alice")
PW = b"correct horse"


def make_ra(seed=1):
    src = RandomSource(seed)
    return RegistrationAuthority(src), src


def add_server(ra, src, name):
    sid = identity(name)
    alpha = server_prepare_registration(sid, b"spw", src)
    st = ServerState(id=sid, alpha=b"", beta=b"", delta1=5)
    rec = ra.register_server(sid, alpha, storage=st)
    st.alpha, st.beta = rec.alpha, rec.beta
    return st


def test_user_request_matches_oracle():
    req, p = user_prepare_registration(UID, PW, RandomSource(3))
    assert req.A == X(P(p), H(UID, PW))
    assert req.B == H(PW, p)


def test_issued_values_match_oracle():
    ra, src = make_ra()
    req, p = user_prepare_registration(UID, PW, src)
    iss = ra.register_user(req)
    want = registration(UID, PW, p, iss.hqx)
    assert iss.card.A == want["A"]
    assert iss.C == want["C"]
    assert iss.card.D == want["D"]
    assert iss.card.E == want["E"]
    assert iss.F == want["F"]
    # F collapses to ID ^ h(q||x)
    assert iss.F == xor(pad(UID), iss.hqx)


def test_registration_costs_three_hashes():
    c = HashCounter()
    src = RandomSource(0)
    ra = RegistrationAuthority(src, counter=c)
    req, _ = user_prepare_registration(UID, PW, src, c)
    ra.register_user(req)
    assert c.count == 3
    assert c.by_label["ra.h(q||x)"] == 1


def test_server_record_beta():
    ra, src = make_ra()
    st = add_server(ra, src, "S1")
    assert st.beta == xor(st.alpha, pad(st.id))


def test_duplicates_rejected():
    ra, src = make_ra()
    add_server(ra, src, "S1")
    with pytest.raises(DuplicateServerIdentity):
        add_server(ra, src, "S1")
    req, _ = user_prepare_registration(UID, PW, src)
    ra.register_user(req)
    with pytest.raises(DuplicateUserIdentity):
        ra.register_user(req)


def test_empty_password_and_bad_width():
    with pytest.raises(EmptyPassword):
        user_prepare_registration(UID, b"", RandomSource(0))
    with pytest.raises(EmptyPassword):
        server_prepare_registration(identity("S1"), b"", RandomSource(0))
    with pytest.raises(WidthViolation):
        user_prepare_registration(b"short", PW, RandomSource(0))


def test_f_values_reach_every_server_including_late_ones():
    ra, src = make_ra()
    s1 = add_server(ra, src, "S1")
    req, _ = user_prepare_registration(UID, PW, src)
    iss = ra.register_user(req)
    s2 = add_server(ra, src, "S2")
    assert s1.f_table[UID] == iss.F
    assert s2.f_table[UID] == iss.F
    assert UID in s1.user_ids and UID in s2.user_ids


def test_card_lists_registered_servers_and_never_holds_password():
    ra, src = make_ra()
    add_server(ra, src, "S1")
    add_server(ra, src, "S2")
    req, p = user_prepare_registration(UID, PW, src)
    iss = ra.register_user(req)
    assert iss.card.server_ids == [identity("S1"), identity("S2")]
    blob = iss.card.to_bytes() + iss.card.to_json().encode()
    assert PW not in blob and PW.hex().encode() not in blob
    assert len(iss.card.to_bytes()) == 3 * 32 + 8 * 2


def test_card_json_round_trip_and_version():
    card = SmartCard(A=b"a" * 32, D=b"d" * 32, E=b"e" * 32, server_ids=[identity("S1")])
    assert SmartCard.from_json(card.to_json()) == card
    bad = json.loads(card.to_json())
    bad["version"] = 99
    with pytest.raises(ValueError):
        SmartCard.from_json(json.dumps(bad))


def test_ra_state_round_trip_with_and_without_secret():
    ra, src = make_ra()
    add_server(ra, src, "S1")
    req, _ = user_prepare_registration(UID, PW, src)
    ra.register_user(req)
    full = ra.to_json()
    assert "x" in json.loads(full)
    assert RegistrationAuthority.from_json(full, RandomSource(0)).to_json() == full

    public = ra.to_json(include_secret=False)
    assert "x" not in json.loads(public)
    with pytest.raises(ValueError):
        RegistrationAuthority.from_json(public, RandomSource(0))
    again = RegistrationAuthority.from_json(public, RandomSource(0), x=ra._x)
    assert again.to_json() == full
