import json
import time

import pytest

from msauth.adversary import (
    Fact,
    KnowledgeSet,
    build_fixture,
    consistent_guesses,
    derivable,
    guess_is_verifiable,
    h,
    name,
    run_scenario,
    saturate,
    trunc,
    xor_terms,
)
from msauth.adversary.model import card_facts, transcript_facts
from msauth.adversary.scenarios import TITLES, victim_goals
from msauth.errors import ResourceBudgetExceeded
from msauth.sim import Faults

a, b, c = name("a"), name("b"), name("c")


def ks_of(*terms, **kw):
    return KnowledgeSet([Fact(str(t), t) for t in terms], **kw)


# -- term algebra


def test_xor_normal_form_cancels_and_is_order_free():
    assert xor_terms(a, b, a) == b
    assert xor_terms(a, b) == xor_terms(b, a)
    assert str(xor_terms(b, a)) == "a ^ b"
    assert not (a ^ a)


def test_trunc_is_linear():
    w1, w2 = name("w1", 32), name("w2", 32)
    assert trunc(w1 ^ w2) == trunc(w1) ^ trunc(w2)
    assert trunc(a) == a


# -- saturation


def test_xor_of_known_terms():
    assert derivable(saturate(ks_of(a, b)), a ^ b)


def test_cancellation():
    assert derivable(saturate(ks_of(a ^ b, b)), a)


def test_hash_rule_and_depth_bound():
    t = a
    for _ in range(4):
        t = h(t)
    assert derivable(ks_of(a, depth=4), t)
    assert not derivable(ks_of(a, depth=3), t)
    assert derivable(ks_of(a, depth=3), h(h(h(a))))


def test_hash_of_unknown_argument_not_derivable():
    ks = ks_of(a)
    assert not ks.derivable(h(a, b))
    assert ks.derivable(h(a, a ^ a ^ a))


def test_hash_known_only_through_xor():
    ks = ks_of(h(a) ^ b, b)
    assert ks.derivable(h(a))
    assert not ks.derivable(a)


def test_truncation_rule():
    w = name("w", 32)
    assert ks_of(w).derivable(trunc(w))
    assert ks_of(w ^ a, a).derivable(trunc(w))


def test_budget_and_depth_validation():
    with pytest.raises(ResourceBudgetExceeded):
        ks_of(*(name(f"n{k}") for k in range(10)), cap=5)
    with pytest.raises(ValueError):
        KnowledgeSet(depth=0)
    with pytest.raises(ValueError):
        saturate(ks_of(a), depth=0)


def test_saturation_is_deterministic():
    def run():
        ks = ks_of(a ^ h(b), b, h(a, c) ^ c, c)
        ks.saturate()
        return [str(g.term) for g in ks.generators], ks.stats()

    assert run() == run()


# -- protocol model against live bytes


@pytest.fixture(scope="module")
def fx():
    return build_fixture(seed=3)


def test_symbolic_terms_evaluate_to_protocol_bytes(fx):
    rows = transcript_facts(fx.rt, fx.honest) + card_facts(fx.ut, fx.victim)
    rows += transcript_facts(fx.rt_insider, fx.insider_run) + card_facts(fx.ut_insider, fx.insider)
    for label, term, value in rows:
        assert fx.binding.value(term) == value, label
    assert fx.binding.value(fx.rt.SK) == fx.honest.server_key.key
    assert fx.binding.value(fx.rt.H) == fx.honest.server_pending.h_i


def test_session_key_term_matches_both_sides(fx):
    assert fx.binding.value(fx.rt.SK) == fx.honest.card_key.key == fx.honest.server_key.key


def _transcript_ks(fx, depth=3, card=False, sid=True):
    facts = [Fact(l, t, v) for l, t, v in transcript_facts(fx.rt, fx.honest)]
    facts.append(Fact("DT1", fx.rt.DT, fx.binding.value(fx.rt.DT)))
    if sid:
        facts.append(Fact("SID", fx.rt.SID, fx.binding.value(fx.rt.SID)))
    if card:
        facts += [Fact(l, t, v) for l, t, v in card_facts(fx.ut, fx.victim)]
    return KnowledgeSet(facts, depth=depth)


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_transcript_does_not_yield_secrets(fx, depth):
    ks = _transcript_ks(fx, depth)
    for goal in (fx.rt.SK, fx.rt.N, fx.ut.p, fx.ut.hqx):
        assert not ks.derivable(goal), goal


def test_stolen_card_does_not_yield_p(fx):
    ks = _transcript_ks(fx, card=True)
    assert not ks.derivable(fx.ut.p)
    assert not ks.derivable(trunc(fx.ut.hqx))


def test_identity_visible_only_with_public_server_id(fx):
    assert _transcript_ks(fx).derivable(fx.ut.ID)
    assert not _transcript_ks(fx, sid=False).derivable(fx.ut.ID)


def test_derivations_are_sound(fx):
    ks = _transcript_ks(fx, card=True)
    probes = [fx.ut.ID, fx.rt.Nj, fx.rt.N ^ fx.ut.p, fx.ut.A ^ fx.ut.hqx ^ fx.ut.C, fx.rt.G ^ fx.rt.I]
    hits = 0
    for t in probes:
        if ks.derivable(t):
            hits += 1
            assert ks.attacker_value(t) == fx.binding.value(t), t
    assert hits >= 3
    assert ks.attacker_value(fx.rt.SK) is None


# -- offline guessing


def test_card_plus_transcript_lets_a_guess_be_checked(fx):
    ks = _transcript_ks(fx, card=True)
    g = ks.add_guess("PW", fx.ut.PW)
    assert guess_is_verifiable(ks, g, name("PW_wrong", fx.ut.PW.width))
    words = [b"guess-%05d" % k for k in range(200)] + [fx.victim.password]
    assert consistent_guesses(ks, g, words) == [fx.victim.password]


def test_transcript_alone_gives_no_password_test(fx):
    ks = _transcript_ks(fx)
    g = ks.add_guess("PW", fx.ut.PW)
    assert not guess_is_verifiable(ks, g, name("PW_wrong", fx.ut.PW.width))
    words = [b"guess-%05d" % k for k in range(50)] + [fx.victim.password]
    assert consistent_guesses(ks, g, words) == words


# -- scenarios


@pytest.mark.parametrize("scenario", ["A1", "A2", "A4", "A5", "A6", "A7"])
def test_scenario_prevented(scenario):
    r = run_scenario(scenario, seed=1)
    assert r.verdict == "prevented", (r.attempts, r.goals)
    assert not any(g.derivable for g in r.goals)
    assert not any(a.breached for a in r.attempts)


def test_password_guessing_with_stolen_card_succeeds():
    r = run_scenario("A3", seed=1)
    assert r.verdict == "succeeded"
    assert r.attempts[0].breached
    assert any("isolated the true password" in f for f in r.findings)


def test_password_guessing_from_transcript_alone_is_prevented():
    assert run_scenario("A3", seed=1, a3_with_card=False).prevented


def test_replay_inside_window_is_reported():
    r = run_scenario("A4", seed=2)
    assert any("inside the freshness window was accepted" in f for f in r.findings)
    assert any(g.label == "SK of replayed session" and not g.derivable for g in r.goals)
    strict = run_scenario("A4", seed=2, strict_replay=True)
    assert strict.prevented
    assert not any("was accepted" in f for f in strict.findings)


@pytest.mark.parametrize(
    "faults,flipped",
    [
        (Faults(skip_j_check=True), {"A1", "A2", "A6", "A7"}),
        (Faults(skip_m_check=True), {"A6"}),
        (Faults(skip_freshness=True), {"A4"}),
    ],
)
def test_mutations_are_detected(faults, flipped):
    got = {s for s in TITLES if s != "A3" and not run_scenario(s, seed=1, faults=faults).prevented}
    assert flipped <= got


def test_private_identities_keep_goals_underivable():
    r = run_scenario("A2", seed=1, sid_public=False, identities_public=False)
    assert r.prevented


def test_result_json_shape_and_determinism():
    r1 = run_scenario("A6", seed=4).to_json()
    r2 = run_scenario("A6", seed=4).to_json()
    assert r1 == r2
    assert set(r1) >= {"scenario", "verdict", "goals", "transcript_ref"}
    assert all(set(g) >= {"term", "derivable"} for g in r1["goals"])
    json.dumps(r1)


def test_goal_set_covers_required_terms(fx):
    labels = set(victim_goals(fx))
    assert {"SK", "p_i", "N_i", "h(q||x)"} <= labels
    assert any(l.startswith("forged request") for l in labels)


def test_suite_runtime():
    t = time.perf_counter()
    for s in TITLES:
        run_scenario(s, seed=0)
    assert time.perf_counter() - t < 30
