import pytest

from instikit import corpus
from instikit.checks import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    RunOptions,
    build_system,
    check_connector,
    check_hoare_chain,
    check_interaction,
    check_invariant,
    check_pre_post,
    run_system_checks,
    static_instance_check,
    static_interface_check,
)
from instikit.dsl import parse_expr, parse_model, resolve
from instikit.dsl.ast import Pattern, PortRef
from instikit.env import EnvSentence, EnvSignature, EnvStructure
from instikit.psm import ErrorAt, monitor_trace
from instikit.sm import EVENT
from instikit.system import FIRE, replay

from conftest import double_verify, mutate, widened
from oracles import is_subsequence, naive_system_reachable, port_observations

E = parse_expr


def load(text):
    model = resolve(parse_model(text))
    return model, model.systems["AtmSystem"]


@pytest.fixture(scope="module")
def plain(atm_model, atm_system):
    return build_system(atm_model, atm_system, 4)


def naive_view(system, locals_):
    return {f"{i.name}.{v}": x for i, l in zip(system.instances, locals_) for v, x in zip(i.variables, l.data)}


def violates(system, inv, locals_):
    from instikit.concrete import eval_guard

    return not eval_guard(inv, naive_view(system, locals_))


# -- static checks -------------------------------------------------------------

def test_static_checks_pass_on_corpus(atm_model, atm_system):
    assert static_instance_check(atm_model, atm_system).verdict == PASS
    assert static_interface_check(atm_model, atm_system).verdict == PASS


def test_undeclared_send_is_named():
    model, sysm = load(mutate(corpus.text(), "send userCom.keepCard();", "send userCom.swallowCard();"))
    r = static_interface_check(model, sysm)
    assert r.verdict == FAIL
    assert any("userCom.swallowCard" in n for n in r.notes)


def test_connector_arity_mismatch():
    text = mutate(corpus.text(), "event markInvalid(0..3);\n  on verify", "event markInvalid;\n  on verify")
    text = mutate(text, "on markInvalid(c) from Idle to Idle;", "on markInvalid from Idle to Idle;")
    model, sysm = load(text)
    r = static_interface_check(model, sysm)
    assert r.verdict == FAIL
    assert any("markInvalid" in n for n in r.notes)


def test_undeclared_type():
    text = mutate(corpus.text(), "inst bank: Bank;", "inst bank: Banc;")
    model, sysm = load(text)
    r = static_instance_check(model, sysm)
    assert r.verdict == FAIL and any("Banc" in n for n in r.notes)


def test_undeclared_port():
    text = mutate(corpus.text(), "connect atm.bankCom -- bank.atmCom;", "connect atm.bankCom -- bank.atmCon;")
    model, sysm = load(text)
    r = static_instance_check(model, sysm)
    assert r.verdict == FAIL and any("atmCon" in n for n in r.notes)


def test_dynamic_checks_are_skipped_after_static_failure():
    model, sysm = load(mutate(corpus.text(), "inst bank: Bank;", "inst bank: Banc;"))
    reports = run_system_checks(model, sysm)
    dynamic = [r for r in reports if not r.id.split("/")[1].startswith("static")]
    assert dynamic and all(r.verdict == FAIL and "skipped: static checks failed" in r.notes for r in dynamic)


# -- invariants ----------------------------------------------------------------

def test_invariant_holds(plain):
    r = check_invariant(plain, E("atm.trialsNum <= 3"))
    assert r.verdict == PASS and r.stats["complete"]


def test_false_fails_on_initial(plain):
    r = check_invariant(plain, E("false"))
    assert r.verdict == FAIL
    start, path = r.trace
    assert path == () and len(r.witness) == 1


def test_two_reentries(plain):
    inv = E("atm.trialsNum <= 1")
    r = check_invariant(plain, inv)
    assert r.verdict == FAIL
    start, path = r.trace
    reentries = [m for m in path if m.kind == FIRE and m.consumed.name == "reenterPIN"]
    assert len(reentries) == 2
    end = replay(plain, start, path)
    assert violates(plain, inv, end.locals)


@pytest.mark.parametrize(
    "expr",
    ["atm.trialsNum <= 3", "atm.trialsNum <= 1", "atm.trialsNum < 1", "atm.pin != 2", "atm.pin != 3",
     "bank.secret != 1 or atm.cardId == 0", "atm.cardId + atm.pin < 4", "true"],
)
def test_invariant_agrees_with_naive_enumeration(plain, expr):
    inv = E(expr)
    depth = naive_system_reachable(plain)
    assert len(depth) <= 200
    bad = [d for (locs, _), d in depth.items() if violates(plain, inv, locs)]
    r = check_invariant(plain, inv)
    assert (r.verdict == PASS) == (not bad)
    if bad:
        assert len(r.trace[1]) == min(bad)


def test_budget_exhaustion_is_inconclusive(plain):
    r = check_invariant(plain, E("atm.trialsNum <= 3"), budget=5)
    assert r.verdict == INCONCLUSIVE and r.witness is None


def test_widened_mutant_fails_with_shortest_witness():
    model, sysm = load(widened(corpus.text()))
    system = build_system(model, sysm, 4)
    inv = E("atm.trialsNum <= 3")
    r = check_invariant(system, inv)
    assert r.verdict == FAIL
    start, path = r.trace
    assert violates(system, inv, replay(system, start, path).locals)
    depth = naive_system_reachable(system)
    assert len(path) == min(d for (locs, _), d in depth.items() if violates(system, inv, locs))


# -- pre/post ------------------------------------------------------------------

def test_card_sets_card_id(plain):
    assert check_pre_post(plain, "atm", "card", ("c",), E("true"), E("atm.cardId == c")).verdict == PASS


def test_false_pre_is_vacuous(plain):
    assert check_pre_post(plain, "atm", "card", ("c",), E("false"), E("false")).verdict == PASS


def test_false_post_fails(plain):
    r = check_pre_post(plain, "atm", "card", ("c",), E("true"), E("false"))
    assert r.verdict == FAIL
    start, path = r.trace
    assert path[-1].consumed.name == "card(1)"
    replay(plain, start, path)


# -- connectors ----------------------------------------------------------------

ENDS = (PortRef("atm", "bankCom"), PortRef("bank", "atmCom"))


def monitored(model, sysm, capacity=4):
    return build_system(model, sysm, capacity, ENDS)


def test_bundled_protocols_fit(atm_model, atm_system):
    r = check_connector(monitored(atm_model, atm_system))
    assert r.verdict == PASS and r.stats["complete"]


def test_zero_capacity_overflows(atm_model, atm_system):
    r = check_connector(monitored(atm_model, atm_system, capacity=0), errors=False, deadlock=False)
    assert r.verdict == FAIL and "violation: overflow" in r.notes


def test_double_verify_reaches_protocol_error():
    model, sysm = load(double_verify(corpus.text()))
    system = monitored(model, sysm)
    r = check_connector(system)
    assert r.verdict == FAIL and "violation: protocol-error" in r.notes
    start, path = r.trace
    assert system.in_error(replay(system, start, path))
    proto = model.machines["BankCom"]
    alphabet = proto.sentence.alphabet
    verdicts = [
        monitor_trace(port_observations(path, i, p, alphabet), proto.sentence, proto.env)
        for i, p in (("atm", "bankCom"), ("bank", "atmCom"))
    ]
    assert any(isinstance(v, ErrorAt) for v in verdicts)


def test_connector_properties_toggle(atm_model, atm_system):
    r = check_connector(monitored(atm_model, atm_system), errors=False, deadlock=False, overflow=False)
    assert r.stats["properties"] == [] and r.verdict == PASS


def test_protocol_instances_can_deadlock():
    # a protocol instance that rejects nothing but never consumes: error on any event
    text = corpus.text().replace("inst bank: Bank;", "inst bank: BankCom;")
    model, sysm = load(text)
    system = build_system(model, sysm, 4)
    r = check_connector(system)
    assert r.verdict in (PASS, FAIL)
    assert not any("impossible" in n for n in r.notes)


# -- interactions --------------------------------------------------------------

RETRY_SEQ = [Pattern("atm", "bankCom", "verify"), Pattern("bank", "atmCom", "reenterPIN"),
        Pattern("atm", "bankCom", "verify"), Pattern("bank", "atmCom", "verified")]


def _delivered(path):
    return [(d.sender, *d.message.split(".", 1)) for m in path for d in m.internal]


@pytest.mark.parametrize("mode", ["strict", "loose"])
def test_retry_sequence_is_realizable(plain, mode):
    r = check_interaction(plain, RETRY_SEQ, mode)
    assert r.verdict == PASS
    start, path = r.trace
    replay(plain, start, path)
    names = [(s, p, x.split("(")[0]) for s, p, x in _delivered(path)]
    target = [(p.instance, p.port, p.name) for p in RETRY_SEQ]
    assert names == target if mode == "strict" else is_subsequence(target, names)


@pytest.mark.parametrize("mode", ["strict", "loose"])
def test_empty_sequence_passes(plain, mode):
    r = check_interaction(plain, [], mode)
    assert r.verdict == PASS and r.trace[1] == ()


def test_reordered_sequence_fails_strict(plain):
    assert check_interaction(plain, [RETRY_SEQ[3], RETRY_SEQ[0]], "strict").verdict == FAIL


def test_arguments_narrow_patterns(plain):
    # stimuli queue up in order, so the first verification uses PIN 1
    assert check_interaction(plain, [Pattern("atm", "bankCom", "verify", (1, 1))], "strict").verdict == PASS
    assert check_interaction(plain, [Pattern("atm", "bankCom", "verify", (1, 2))], "strict").verdict == FAIL
    assert check_interaction(plain, [Pattern("atm", "bankCom", "verify", (1, 2))], "loose").verdict == PASS
    assert check_interaction(plain, [Pattern("atm", "bankCom", "verify", (0, 0))], "loose").verdict == FAIL


def test_unknown_mode(plain):
    with pytest.raises(ValueError):
        check_interaction(plain, [], "sloppy")


# -- Hoare chains --------------------------------------------------------------

def chain_env(with_action=True):
    sig = EnvSignature({"p", "q"}, {"a", "noop"} if with_action else {"noop"})
    actions = {"a": {0: (1, frozenset()), 1: (1, frozenset())}} if with_action else {}
    return EnvStructure(sig, {0, 1}, {"p": frozenset({0}), "q": frozenset({1})}, actions)


def test_equal_guards_chain_strictly():
    env = chain_env()
    s = EnvSentence("p", "noop", (), "p")
    assert check_hoare_chain(env, s, s, "strict").verdict == PASS


def test_connecting_action_helps_only_loosely():
    env = chain_env()
    s1, s2 = EnvSentence("q", "noop", (), "p"), EnvSentence("q", "noop", (), "q")
    assert check_hoare_chain(env, s1, s2, "strict").verdict == FAIL
    assert check_hoare_chain(env, s1, s2, "loose").verdict == PASS


def test_disconnected_guards_fail_both():
    env = chain_env(with_action=False)
    s1, s2 = EnvSentence("q", "noop", (), "p"), EnvSentence("q", "noop", (), "q")
    assert check_hoare_chain(env, s1, s2, "strict").verdict == FAIL
    assert check_hoare_chain(env, s1, s2, "loose").verdict == FAIL


# -- driver ----------------------------------------------------------------------

def test_ids_and_selection(atm_model, atm_system):
    ids = [r.id for r in run_system_checks(atm_model, atm_system)]
    assert ids == [
        "AtmSystem/static-instance", "AtmSystem/static-interface", "AtmSystem/invariant-1",
        "AtmSystem/prepost-1", "AtmSystem/connector-1", "AtmSystem/interaction-1",
    ]
    only = run_system_checks(atm_model, atm_system, RunOptions(selected=("invariant", "AtmSystem/connector-1")))
    assert [r.id for r in only] == ["AtmSystem/invariant-1", "AtmSystem/connector-1"]
    short = run_system_checks(atm_model, atm_system, RunOptions(selected=("prepost-1",)))
    assert [r.id for r in short] == ["AtmSystem/prepost-1"]


def test_every_failure_witness_replays():
    for text in (widened(corpus.text()), double_verify(corpus.text())):
        model, sysm = load(text)
        for r in run_system_checks(model, sysm):
            if r.verdict == FAIL and r.trace:
                ends = (PortRef("atm", "bankCom"), PortRef("bank", "atmCom")) if r.kind == "connector" else ()
                system = build_system(model, sysm, 4, ends)
                replay(system, *r.trace)
                assert r.witness[0]["step"] == 0 and len(r.witness) == len(r.trace[1]) + 1
