import pytest
from hypothesis import given, strategies as st

from instikit.concrete import (
    Assign,
    Binary,
    MessageDecl,
    ModelTooLarge,
    Name,
    Num,
    Send,
    VarDecl,
    build_env_structure,
    eval_guard,
    exec_action,
    ground_events,
    split_ground,
    ground_name,
)
from instikit.concrete import EventDecl
from instikit.dsl import parse_expr

ATM_VARS = [VarDecl("trialsNum", 0, 3, 0), VarDecl("cardId", 0, 3, 0), VarDecl("pin", 0, 3, 0)]


def stmts(*text):
    out = []
    for t in text:
        if t.startswith("send "):
            port, rest = t[5:].split(".", 1)
            name, args = rest.split("(", 1)
            args = [parse_expr(a) for a in args.rstrip(")").split(",") if a.strip()]
            out.append(Send(port, name, tuple(args)))
        else:
            var, expr = t.split(":=")
            out.append(Assign(var.strip(), parse_expr(expr)))
    return tuple(out)


@pytest.mark.parametrize(
    "text, store, expected",
    [
        ("trialsNum < 2", {"trialsNum": 1}, True),
        ("true", {}, True),
        ("trialsNum == 0 and pin != 0", {"trialsNum": 0, "pin": 7}, True),
        ("not (a < b) or a * 2 == b + 1", {"a": 3, "b": 5}, True),
        ("not (a < b) and a * 2 == b + 1", {"a": 3, "b": 5}, False),
        ("-a + 2 * b == 7", {"a": 1, "b": 4}, True),
    ],
)
def test_eval_guard(text, store, expected):
    assert eval_guard(parse_expr(text), store) is expected


def test_params_shadow_nothing_but_are_visible():
    assert eval_guard(parse_expr("cardId == c"), {"cardId": 2}, {"c": 2})


def test_increment():
    after, sent = exec_action(stmts("trialsNum := trialsNum + 1"), {"trialsNum": 1}, None, ATM_VARS)
    assert after["trialsNum"] == 2 and sent == frozenset()


def test_increment_clamps_at_bound():
    after, sent = exec_action(stmts("trialsNum := trialsNum + 1"), {"trialsNum": 3}, None, ATM_VARS)
    assert after["trialsNum"] == 3 and sent == frozenset()


def test_send_evaluates_arguments_at_send_time():
    prog = stmts("send bank.verify(cardId, pin)")
    after, sent = exec_action(prog, {"cardId": 5, "pin": 9})
    assert after == {"cardId": 5, "pin": 9}
    assert sent == {"bank.verify(5,9)"}
    prog = stmts("pin := 1", "send bank.verify(cardId, pin)", "pin := 2")
    _, sent = exec_action(prog, {"cardId": 0, "pin": 0})
    assert sent == {"bank.verify(0,1)"}


def test_small_carrier():
    sig, omega = build_env_structure([VarDecl("b", 0, 1)], [("b == 1", parse_expr("b == 1"))], [], [])
    assert len(omega.carrier) == 2
    assert len(omega.guard_interp["b == 1"]) == 1


def test_atm_carrier_size():
    _, omega = build_env_structure(ATM_VARS, [], [], [])
    assert len(omega.carrier) == 64


def test_message_expansion():
    sig, _ = build_env_structure([], [], [], [MessageDecl("bank", "verify", ((0, 1), (0, 1)))])
    assert sig.messages == {"bank.verify(0,0)", "bank.verify(0,1)", "bank.verify(1,0)", "bank.verify(1,1)"}


def test_carrier_cap():
    with pytest.raises(ModelTooLarge):
        build_env_structure([VarDecl("x", 0, 999), VarDecl("y", 0, 999)], [], [], [], cap=10_000)


def test_ground_events():
    assert ground_events(EventDecl("card", ((0, 3),))) == {"card(0)", "card(1)", "card(2)", "card(3)"}
    assert ground_events(EventDecl("reenterPIN")) == {"reenterPIN"}
    assert ground_events(EventDecl("PIN", ((0, 1),))) == {"PIN(0)", "PIN(1)"}


@given(st.text(alphabet="abcXY_", min_size=1, max_size=6), st.lists(st.integers(-5, 50), max_size=3))
def test_ground_name_round_trip(base, args):
    assert split_ground(ground_name(base, args)) == (base, tuple(args))


@given(st.integers(-10, 10), st.integers(0, 3), st.integers(0, 3))
def test_assignment_always_stays_in_range(delta, lo, width):
    decl = VarDecl("x", lo, lo + width)
    prog = (Assign("x", Binary("+", Name("x"), Num(delta))),)
    for x in range(lo, lo + width + 1):
        after, _ = exec_action(prog, {"x": x}, None, [decl])
        assert lo <= after["x"] <= lo + width


def test_actions_are_total_and_deterministic():
    prog = stmts("trialsNum := trialsNum * 3 - 1", "send user.ejectCard()")
    sig, omega = build_env_structure(ATM_VARS, [], [("p", prog)], [MessageDecl("user", "ejectCard")])
    assert set(omega.action_interp["p"]) == set(omega.carrier)
    for w, (nxt, sent) in omega.action_interp["p"].items():
        assert nxt in omega.carrier
        assert sent == {"user.ejectCard"}
