import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instikit import corpus
from instikit.concrete import Binary, Name, Num, Unary, format_expr
from instikit.dsl import DslError, parse_expr, parse_model, parse_with_diagnostics, print_model, resolve, tokenize
from instikit.dsl.ast import InteractionCheck, Pattern, StimulusNode, TransitionNode
from instikit.dsl.lexer import EOF, IDENT, INT, KEYWORD, SYMBOL
from instikit.dsl.resolve import resolve_with_diagnostics

from strategies import exprs, fuzz, fuzz_once, models


# -- lexer ---------------------------------------------------------------------

def test_maximal_munch_and_positions():
    toks, diags = tokenize("a:=b..3 -- x\n  // note\n  <= on")
    assert not diags
    assert [(t.kind, t.text) for t in toks] == [
        (IDENT, "a"), (SYMBOL, ":="), (IDENT, "b"), (SYMBOL, ".."), (INT, "3"), (SYMBOL, "--"),
        (IDENT, "x"), (SYMBOL, "<="), (KEYWORD, "on"), (EOF, ""),
    ]
    assert tuple(toks[7].span) == (3, 3, 2)
    assert toks[-1].span.line == 3


def test_bad_characters_are_reported_and_skipped():
    toks, diags = tokenize("a # b\n  é")
    assert [t.text for t in toks if t.kind == IDENT] == ["a", "b"]
    assert [(d.span.line, d.span.column) for d in diags] == [(1, 3), (2, 3)]


def test_overlong_integer():
    _, diags = tokenize("1" * 19)
    assert diags and "too long" in diags[0].message


# -- expressions -----------------------------------------------------------------

@pytest.mark.parametrize(
    "text, canon",
    [
        ("a + b * c", "a + b * c"),
        ("(a + b) * c", "(a + b) * c"),
        ("a - (b - c)", "a - (b - c)"),
        ("(a - b) - c", "a - b - c"),
        ("not a == 1 and b", "not a == 1 and b"),
        ("not (a and b)", "not (a and b)"),
        ("a or b and c", "a or b and c"),
        ("(a or b) and c", "(a or b) and c"),
        ("- -x", "-(-x)"),
        ("a - -1", "a - (-1)"),
        ("atm.trialsNum <= 3", "atm.trialsNum <= 3"),
    ],
)
def test_expression_canonical_form(text, canon):
    e = parse_expr(text)
    assert format_expr(e) == canon
    assert parse_expr(canon) == e


def test_precedence_structure():
    assert parse_expr("1 + 2 * x") == Binary("+", Num(1), Binary("*", Num(2), Name("x")))
    assert parse_expr("-x * 2") == Binary("*", Unary("-", Name("x")), Num(2))


def test_comparisons_do_not_chain():
    with pytest.raises(DslError):
        parse_expr("a < b < c")


def test_deep_nesting_is_a_diagnostic():
    with pytest.raises(DslError) as exc:
        parse_expr("(" * 500 + "1" + ")" * 500)
    assert "nests too deeply" in str(exc.value)
    with pytest.raises(DslError):
        parse_expr("not " * 500 + "true")


@settings(max_examples=300, deadline=None)
@given(exprs())
def test_expression_round_trip(e):
    assert parse_expr(format_expr(e)) == e


# -- parser ----------------------------------------------------------------------

def test_corpus_parses_without_diagnostics():
    tree, diags = parse_with_diagnostics(corpus.text())
    assert not diags
    assert [type(b).__name__ for b in tree.blocks] == [
        "EnvBlock", "MachineBlock", "EnvBlock", "MachineBlock", "ProtocolBlock", "SystemBlock",
    ]


def test_completion_and_stimulus_nodes():
    tree = parse_model(corpus.text())
    atm = tree.blocks[1]
    completions = [t for t in atm.items if isinstance(t, TransitionNode) and t.trigger is None]
    assert [(t.source, t.target) for t in completions] == [("PINEntered", "Verifying"), ("PINVerified", "Idle")]
    system = tree.blocks[-1]
    assert StimulusNode("atm", "PIN", (2,)) in system.items
    inter = [i for i in system.items if isinstance(i, InteractionCheck)][0]
    assert inter.mode == "loose" and inter.patterns[1] == Pattern("bank", "atmCom", "reenterPIN")


def test_guard_may_precede_states():
    a = parse_model("machine M over E { on e when x > 0 from A to B; }")
    b = parse_model("machine M over E { on e from A to B when x > 0; }")
    assert a == b


def test_recovery_reports_several_errors():
    text = "env E {\n  var x 0..1;\n  msg p.m();\n  var y: 3..1;\n}\nmachine M over E { init ; }\n"
    _, diags = parse_with_diagnostics(text)
    lines = sorted(d.span.line for d in diags)
    assert lines == [2, 4, 6]
    tree, _ = parse_with_diagnostics(text)
    assert len(tree.blocks[0].items) == 1


def test_parse_model_raises_with_positions():
    with pytest.raises(DslError) as exc:
        parse_model("system S { inst a M; }")
    d = exc.value.diagnostics[0]
    assert (d.span.line, d.span.column) == (1, 19) and "expected ':'" in d.message


def test_unterminated_block():
    _, diags = parse_with_diagnostics("env E { var x: 0..1;")
    assert any("end of input" in d.message for d in diags)


# -- printer -----------------------------------------------------------------------

def test_corpus_is_a_formatting_fixpoint():
    text = corpus.text()
    assert print_model(parse_model(text)) == text


def test_printing_normalizes_layout():
    messy = "env   E{var x:0..3=1;msg p.m ( 0..1 , 2..3 ) ;}"
    assert print_model(parse_model(messy)) == "env E {\n  var x: 0..3 = 1;\n  msg p.m(0..1, 2..3);\n}\n"


def test_skip_bodies():
    out = print_model(parse_model("machine M over E { on e from A to A do { skip; }; }"))
    assert "do skip;" in out


@settings(max_examples=200, deadline=None)
@given(models)
def test_model_round_trip(m):
    text = print_model(m)
    assert parse_model(text) == m
    assert print_model(parse_model(text)) == text


# -- resolver ------------------------------------------------------------------------

def test_corpus_resolves():
    model = resolve(parse_model(corpus.text()))
    assert set(model.machines) == {"ATM", "Bank", "BankCom"}
    assert set(model.systems) == {"AtmSystem"}


@pytest.mark.parametrize(
    "old, new, fragment",
    [
        ("machine ATM over AtmEnv", "machine ATM over AtnEnv", "AtnEnv"),
        ("init Idle;\n  state Idle, CardEntered", "init Nowhere;\n  state Idle, CardEntered", "Nowhere"),
        ("do cardId := c;", "do cardId := d;", "'d'"),
        ("var pin: 0..3 = 0;", "var pin: 0..3 = 7;", "pin"),
        ("protocol BankCom {", "machine Bank over BankEnv {", "duplicate"),
    ],
)
def test_resolution_errors(old, new, fragment):
    text = corpus.text()
    assert old in text
    with pytest.raises(DslError) as exc:
        resolve(parse_model(text.replace(old, new, 1)))
    assert any(fragment in d.message for d in exc.value.diagnostics)
    assert all(d.span is not None for d in exc.value.diagnostics)


def test_carrier_cap_is_a_diagnostic():
    text = "env E { var x: 0..999; var y: 0..999; }\nmachine M over E { init A; state A; }\n"
    _, diags = resolve_with_diagnostics(parse_model(text), cap=10**4)
    assert diags and "cap" in diags[0].message
    _, diags = resolve_with_diagnostics(parse_model(text), cap=10**6)
    assert not diags


# -- fuzzing -----------------------------------------------------------------------------

@pytest.mark.parametrize(
    "data",
    [b"", b"\xff\xfe\x00", b"env", b"env E {", b"}}}}", b"system S { check interaction strict [a.b.c(",
     b"machine M over E { on complete from A to B do { send p.m(1,; } }", b"(" * 200],
)
def test_hostile_inputs_give_diagnostics(data):
    for d in fuzz_once(data):
        assert d.severity == "error"


def test_random_bytes_never_crash():
    fuzz(5000, seed=7, seeds=[corpus.text().encode()[:400]])


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=200))
def test_hypothesis_bytes(data):
    fuzz_once(data)
