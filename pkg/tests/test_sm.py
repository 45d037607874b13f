import random

import pytest
from hypothesis import given, settings, strategies as st

from instikit.env import EnvSignature, EnvStructure
from instikit.sm import (
    Completion,
    Configuration,
    Event,
    Pool,
    SmMorphism,
    SmSentence,
    SmSignature,
    SmStructure,
    SmTransition,
    Step,
    canonical_structure,
    reachable,
    reduct_sm,
    satisfies_sm,
    step,
    translate_sm_sentence,
)

from oracles import naive_delta

ATM_INIT = (0, 0, 0)  # trialsNum, cardId, pin


@pytest.fixture(scope="module")
def atm(atm_model):
    return atm_model.machines["ATM"]


@pytest.fixture(scope="module")
def atm_theta(atm):
    return canonical_structure(atm.env, atm.sig, atm.sentence, 1)


def card_transition(atm, c=1):
    return next(t for t in atm.sentence.transitions if t.trigger == Event(f"card({c})"))


def renaming(sig, events=None, states=None):
    ev = {e: e for e in sig.events} | (events or {})
    stt = {s: s for s in sig.states} | (states or {})
    return SmMorphism(sig, SmSignature(frozenset(ev.values()), frozenset(stt.values())), ev, stt)


def test_translate_identity(atm):
    assert translate_sm_sentence(SmMorphism.identity(atm.sig), atm.sentence) == atm.sentence


def test_translate_renames_first_transition(atm):
    m = renaming(atm.sig, {"card(1)": "card'(1)"}, {"Idle": "Idle'"})
    out = translate_sm_sentence(m, atm.sentence)
    assert out.initial == "Idle'"
    assert SmTransition("Idle'", Event("card'(1)"), "true", "cardId := 1", "CardEntered") in out.transitions


def test_completion_triggers_map_through_states(atm):
    m = renaming(atm.sig, states={"PINEntered": "P"})
    out = translate_sm_sentence(m, atm.sentence)
    assert any(t.trigger == Completion("P") for t in out.transitions)
    assert not any(t.trigger == Completion("PINEntered") for t in out.transitions)


def test_morphisms_must_be_injective():
    sig = SmSignature({"a", "b"}, {"s"})
    with pytest.raises(Exception):
        SmMorphism(sig, SmSignature({"x"}, {"s"}), {"a": "x", "b": "x"}, {"s": "s"})


def tiny():
    env_sig = EnvSignature({"t"}, {"n"}, set())
    env = EnvStructure(env_sig, {0}, {"t": frozenset({0})}, {})
    sig = SmSignature({"e"}, {"A", "B"})
    s = SmSentence("A", {SmTransition("A", Event("e"), "t", "n", "B")})
    return env, sig, s


def test_reduct_identity():
    env, sig, s = tiny()
    theta = canonical_structure(env, sig, s, 2)
    assert reduct_sm(SmMorphism.identity(sig), theta) == theta


def test_reduct_drops_configurations_with_extra_state():
    env, sig, s = tiny()
    big = SmSignature(sig.events, sig.states | {"Z"})
    theta = canonical_structure(env, big, s, 1)
    m = SmMorphism(sig, big, {"e": "e"}, {"A": "A", "B": "B"})
    red = reduct_sm(m, theta)
    assert red.transitions
    for t in red.transitions:
        for c in (t.source, t.target):
            assert c.control != "Z" and "Z" not in c.pool.completions
    assert len(red.transitions) < len(theta.transitions)


def test_reduct_respects_lanes():
    env, sig, s = tiny()
    big = SmSignature({"e2"}, {"A2", "B2"})
    m = SmMorphism(sig, big, {"e": "e2"}, {"A": "A2", "B": "B2"})
    theta = canonical_structure(env, big, translate_sm_sentence(m, s), 1)
    red = reduct_sm(m, theta)
    for t in red.transitions:
        assert set(t.source.pool.events) <= {"e"} and set(t.source.pool.completions) <= {"A", "B"}


def test_firing_clause(atm):
    c = Configuration(ATM_INIT, Pool.of([Event("card(1)")]), "Idle")
    assert step(c, atm.sentence, atm.env, atm.sig) == [
        (frozenset(), Configuration((0, 1, 0), Pool.of([Completion("CardEntered")]), "CardEntered"))
    ]


def test_discard_clause(atm):
    c = Configuration(ATM_INIT, Pool.of([Event("PIN(0)")]), "Idle")
    assert step(c, atm.sentence, atm.env, atm.sig) == [(frozenset(), Configuration(ATM_INIT, Pool(), "Idle"))]


def test_completion_has_priority(atm):
    c = Configuration((0, 1, 2), Pool(("PINEntered",), ("reenterPIN",)), "PINEntered")
    [(emitted, target)] = step(c, atm.sentence, atm.env, atm.sig)
    assert emitted == {"bankCom.verify(1,2)"}
    assert target.control == "Verifying"
    assert target.pool == Pool(("Verifying",), ("reenterPIN",))


def test_empty_pool_has_no_step(atm):
    assert step(Configuration(ATM_INIT, Pool(), "Idle"), atm.sentence, atm.env, atm.sig) == []


def test_canonical_satisfies_its_sentence(atm, atm_theta):
    assert satisfies_sm(atm_theta, atm.sentence, atm.env, atm.sig, 1)


def test_removing_a_firing_step_breaks_satisfaction(atm, atm_theta):
    firing = next(t for t in atm_theta.sorted_transitions() if t.target.control != t.source.control)
    assert not satisfies_sm(atm_theta.without(firing), atm.sentence, atm.env, atm.sig, 1)


def test_mutated_guard_is_detected(atm, atm_theta):
    t = next(t for t in atm.sentence.transitions if t.guard == "trialsNum < 2")
    mutant = SmSentence(atm.sentence.initial, (atm.sentence.transitions - {t}) | {t._replace(guard="true")})
    assert not satisfies_sm(atm_theta, mutant, atm.env, atm.sig, 1)


def test_wrong_initial_state_fails(atm, atm_theta):
    other = SmStructure((atm_theta.initial[0], "Verifying"), atm_theta.transitions)
    assert not satisfies_sm(other, atm.sentence, atm.env, atm.sig, 1)


def test_reachable_without_injection_is_initial_only(atm):
    r = reachable([], atm.sentence, atm.env, atm.sig, 4, initial_data=atm.initial_data)
    assert r.configurations == (Configuration(ATM_INIT, Pool(), "Idle"),)
    assert r.complete


def test_reachable_reaches_verifying(atm):
    r = reachable([Event("card(1)"), Event("PIN(2)")], atm.sentence, atm.env, atm.sig, 4, initial_data=atm.initial_data)
    hits = [
        (c, m) for c, m in r.transitions
        if m.consumed == Completion("PINEntered") and m.target.control == "Verifying"
    ]
    assert hits and all(m.emitted == {"bankCom.verify(1,2)"} for _, m in hits)


def test_budget_one_is_flagged(atm):
    r = reachable([Event("card(1)")], atm.sentence, atm.env, atm.sig, 4, max_configs=1, initial_data=atm.initial_data)
    assert len(r.configurations) == 1 and not r.complete


def test_reachable_is_deterministic(atm):
    args = ([Event("card(2)"), Event("PIN(1)")], atm.sentence, atm.env, atm.sig, 3)
    assert reachable(*args) == reachable(*args)


def test_only_events_can_be_injected(atm):
    with pytest.raises(Exception):
        reachable([Completion("Idle")], atm.sentence, atm.env, atm.sig)


def test_overflow_is_marked_not_raised():
    # two self-accepted events into an event lane of capacity 1
    env_sig = EnvSignature({"t"}, {"send"}, {"e", "f"})
    env = EnvStructure(env_sig, {0}, {"t": frozenset({0})}, {"send": {0: (0, frozenset({"e", "f"}))}})
    sig = SmSignature({"e", "f"}, {"A"})
    s = SmSentence("A", {SmTransition("A", Event("e"), "t", "send", "A")})
    theta = canonical_structure(env, sig, s, 1)
    assert any(t.overflow for t in theta.transitions)


# -- properties over random small machines -----------------------------------

@st.composite
def machines(draw):
    n = draw(st.integers(1, 3))
    carrier = list(range(n))
    msgs = draw(st.lists(st.sampled_from(["e0", "e1", "out"]), max_size=3, unique=True))
    env_sig = EnvSignature({"g0", "g1"}, {"a0", "a1"}, set(msgs))
    gi = {g: frozenset(draw(st.sets(st.sampled_from(carrier)))) for g in ("g0", "g1")}
    ai = {
        a: {w: (draw(st.sampled_from(carrier)), frozenset(draw(st.sets(st.sampled_from(msgs))) if msgs else ())) for w in carrier}
        for a in ("a0", "a1")
    }
    env = EnvStructure(env_sig, frozenset(carrier), gi, ai)
    states = ["S0", "S1", "S2"][: draw(st.integers(1, 3))]
    events = ["e0", "e1"][: draw(st.integers(0, 2))]
    sig = SmSignature(set(events), set(states))
    triggers = [Event(e) for e in events] + [Completion(s) for s in states]
    ts = draw(st.sets(
        st.builds(SmTransition, st.sampled_from(states), st.sampled_from(triggers), st.sampled_from(["g0", "g1"]),
                  st.sampled_from(["a0", "a1"]), st.sampled_from(states)),
        max_size=4,
    ))
    return env, sig, SmSentence(states[0], ts), draw(st.integers(1, 2))


@settings(max_examples=150, deadline=None)
@given(machines())
def test_canonical_matches_direct_construction(case):
    env, sig, s, cap = case
    assert canonical_structure(env, sig, s, cap).transitions == naive_delta(env, sig, s, cap)


@settings(max_examples=100, deadline=None)
@given(machines())
def test_step_properties(case):
    env, sig, s, cap = case
    theta = canonical_structure(env, sig, s, cap)
    sources = {t.source for t in theta.transitions}
    for t in theta.transitions:
        assert not (t.emitted & sig.events)
    for c in sources:
        assert not c.pool.is_empty()
    for t in theta.transitions:
        rest = t.source.pool.select()[1]
        fired_pool = t.target.pool
        if t.target == Configuration(t.source.data, rest, t.source.control) and not t.emitted:
            continue  # discard, or a firing that happens to look like one
        if not t.overflow:
            assert len(fired_pool.completions) == len(rest.completions) + 1
            assert fired_pool.completions[-1] == t.target.control
