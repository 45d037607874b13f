"""Finite concrete environments.

Integer variables with declared ranges generate the carrier; guard
expressions and small imperative action programs give the interpretation.
Stores are tuples of ints in variable declaration order.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .env import EnvSignature, EnvStructure

DEFAULT_CARRIER_CAP = 10**6


class ModelTooLarge(ValueError):
    pass


class ResolutionError(ValueError):
    """An identifier in an expression or program does not resolve."""


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: int
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Bool:
    value: bool
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Name:
    name: str
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    op: str  # "not" | "-"
    operand: object
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object
    span: object = field(default=None, compare=False, repr=False)


Expr = Num | Bool | Name | Unary | Binary

COMPARISONS = ("==", "!=", "<", "<=", ">", ">=")
ARITH = ("+", "-", "*")
PRECEDENCE = {"or": 1, "and": 2, "not": 3, **{op: 4 for op in COMPARISONS}, "+": 5, "-": 5, "*": 6}
NEG_PREC = 7
ATOM_PREC = 8

TRUE = Bool(True)


def _prec(e) -> int:
    if isinstance(e, Binary):
        return PRECEDENCE[e.op]
    if isinstance(e, Unary):
        return PRECEDENCE["not"] if e.op == "not" else NEG_PREC
    return ATOM_PREC


def format_expr(e) -> str:
    """Canonical text with parentheses only where precedence demands them."""
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Bool):
        return "true" if e.value else "false"
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Unary):
        inner = format_expr(e.operand)
        if e.op == "not":
            return "not " + (inner if _prec(e.operand) >= PRECEDENCE["not"] else f"({inner})")
        return "-" + (inner if _prec(e.operand) == ATOM_PREC else f"({inner})")
    p = PRECEDENCE[e.op]
    left, right = format_expr(e.left), format_expr(e.right)
    lp, rp = _prec(e.left), _prec(e.right)
    if lp < p or (lp == p and e.op in COMPARISONS):
        left = f"({left})"
    # right operands of a left-associative operator need parens at equal
    # precedence; a negation on the right is wrapped so "a - -b" never prints
    if rp <= p or (isinstance(e.right, Unary) and e.right.op == "-"):
        right = f"({right})"
    return f"{left} {e.op} {right}"


def free_names(e) -> set[str]:
    if isinstance(e, Name):
        return {e.name}
    if isinstance(e, Unary):
        return free_names(e.operand)
    if isinstance(e, Binary):
        return free_names(e.left) | free_names(e.right)
    return set()


def substitute(e, values: Mapping[str, int]):
    """Replace names bound in ``values`` by integer literals."""
    if isinstance(e, Name):
        return Num(values[e.name]) if e.name in values else e
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.operand, values))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, values), substitute(e.right, values))
    return e


def infer_type(e, names: Mapping[str, str]) -> str:
    """Return "int" or "bool"; raise ResolutionError on unbound names or type clashes."""
    if isinstance(e, Num):
        return "int"
    if isinstance(e, Bool):
        return "bool"
    if isinstance(e, Name):
        if e.name not in names:
            raise ResolutionError(f"unbound identifier {e.name!r}")
        return names[e.name]
    if isinstance(e, Unary):
        want = "bool" if e.op == "not" else "int"
        if infer_type(e.operand, names) != want:
            raise ResolutionError(f"operand of {e.op!r} must be {want}")
        return want
    lt, rt = infer_type(e.left, names), infer_type(e.right, names)
    if e.op in ("and", "or"):
        if lt != "bool" or rt != "bool":
            raise ResolutionError(f"operands of {e.op!r} must be bool")
        return "bool"
    if lt != "int" or rt != "int":
        raise ResolutionError(f"operands of {e.op!r} must be int")
    return "bool" if e.op in COMPARISONS else "int"


def _eval(e, env: Mapping[str, int]):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Bool):
        return e.value
    if isinstance(e, Name):
        return env[e.name]
    if isinstance(e, Unary):
        v = _eval(e.operand, env)
        return (not v) if e.op == "not" else -v
    op = e.op
    if op == "and":
        return bool(_eval(e.left, env)) and bool(_eval(e.right, env))
    if op == "or":
        return bool(_eval(e.left, env)) or bool(_eval(e.right, env))
    a, b = _eval(e.left, env), _eval(e.right, env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def eval_guard(g, store: Mapping[str, int], params: Mapping[str, int] | None = None) -> bool:
    env = dict(store)
    if params:
        env.update(params)
    unbound = free_names(g) - env.keys()
    if unbound:
        raise ResolutionError(f"unbound identifiers {sorted(unbound)}")
    return bool(_eval(g, env))


def eval_term(t, store: Mapping[str, int], params: Mapping[str, int] | None = None) -> int:
    env = dict(store)
    if params:
        env.update(params)
    return int(_eval(t, env))


# -- action programs ---------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    var: str
    expr: object
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Send:
    port: str
    name: str
    args: tuple = ()
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CallAction:
    """Reference to a named action of the environment."""

    name: str
    span: object = field(default=None, compare=False, repr=False)


def format_stmt(s) -> str:
    if isinstance(s, Assign):
        return f"{s.var} := {format_expr(s.expr)}"
    if isinstance(s, Send):
        return f"send {s.port}.{s.name}({', '.join(format_expr(a) for a in s.args)})"
    return s.name


def format_program(stmts: Sequence) -> str:
    """Canonical single-line name of a ground program; the empty program is ``skip``."""
    if not stmts:
        return "skip"
    return "; ".join(format_stmt(s) for s in stmts)


def substitute_program(stmts: Sequence, values: Mapping[str, int]) -> tuple:
    out = []
    for s in stmts:
        if isinstance(s, Assign):
            out.append(Assign(s.var, substitute(s.expr, values)))
        elif isinstance(s, Send):
            out.append(Send(s.port, s.name, tuple(substitute(a, values) for a in s.args)))
        else:
            out.append(s)
    return tuple(out)


# -- declarations ------------------------------------------------------------

class VarDecl(NamedTuple):
    name: str
    lower: int
    upper: int
    init: int | None = None

    def clamp(self, v: int) -> int:
        return min(self.upper, max(self.lower, v))


class MessageDecl(NamedTuple):
    port: str
    name: str
    ranges: tuple[tuple[int, int], ...] = ()

    @property
    def full_name(self) -> str:
        return f"{self.port}.{self.name}"


class EventDecl(NamedTuple):
    name: str
    ranges: tuple[tuple[int, int], ...] = ()


def ground_name(name: str, args: Iterable[int] = ()) -> str:
    args = tuple(args)
    if not args:
        return name
    return f"{name}({','.join(str(a) for a in args)})"


_GROUND = re.compile(r"^(?P<base>[^()]+?)(?:\((?P<args>[-0-9,]*)\))?$")


def split_ground(text: str) -> tuple[str, tuple[int, ...]]:
    m = _GROUND.match(text)
    if not m:
        raise ValueError(f"not a ground name: {text!r}")
    args = m.group("args")
    return m.group("base"), tuple(int(a) for a in args.split(",")) if args else ()


def expand(ranges: Sequence[tuple[int, int]]) -> list[tuple[int, ...]]:
    return list(itertools.product(*(range(lo, hi + 1) for lo, hi in ranges)))


def ground_events(decl) -> frozenset[str]:
    """Cartesian expansion of a parameterised event or message family."""
    base = decl.full_name if isinstance(decl, MessageDecl) else decl.name
    return frozenset(ground_name(base, args) for args in expand(decl.ranges))


def exec_action(
    stmts: Sequence,
    store: Mapping[str, int],
    params: Mapping[str, int] | None = None,
    variables: Sequence[VarDecl] = (),
    messages: Sequence[MessageDecl] = (),
) -> tuple[dict[str, int], frozenset[str]]:
    """Run statements left to right.

    Assignments clamp to the declared range; send arguments are evaluated at
    send time and clamped to the message's parameter ranges.
    """
    ranges = {v.name: v for v in variables}
    msg_ranges = {m.full_name: m.ranges for m in messages}
    current = dict(store)
    sent = set()
    for s in stmts:
        if isinstance(s, Assign):
            value = eval_term(s.expr, current, params)
            decl = ranges.get(s.var)
            current[s.var] = decl.clamp(value) if decl else value
        elif isinstance(s, Send):
            args = [eval_term(a, current, params) for a in s.args]
            bounds = msg_ranges.get(f"{s.port}.{s.name}")
            if bounds:
                args = [min(hi, max(lo, a)) for a, (lo, hi) in zip(args, bounds)]
            sent.add(ground_name(f"{s.port}.{s.name}", args))
        else:
            raise ResolutionError(f"action reference {s.name!r} must be inlined before execution")
    return current, frozenset(sent)


@dataclass(frozen=True, eq=False)
class ConcreteEnv:
    """Variable and message declarations of one environment."""

    variables: tuple[VarDecl, ...]
    messages: tuple[MessageDecl, ...] = ()

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def carrier_size(self) -> int:
        n = 1
        for v in self.variables:
            n *= v.upper - v.lower + 1
        return n

    def carrier(self, cap: int = DEFAULT_CARRIER_CAP) -> list[tuple[int, ...]]:
        if self.carrier_size() > cap:
            raise ModelTooLarge(f"carrier has {self.carrier_size()} states, cap is {cap}")
        return list(itertools.product(*(range(v.lower, v.upper + 1) for v in self.variables)))

    def initial_states(self) -> frozenset[tuple[int, ...]]:
        choices = [
            [v.init] if v.init is not None else range(v.lower, v.upper + 1) for v in self.variables
        ]
        return frozenset(itertools.product(*choices))

    def as_dict(self, state: tuple[int, ...]) -> dict[str, int]:
        return dict(zip(self.names, state))

    def as_state(self, store: Mapping[str, int]) -> tuple[int, ...]:
        return tuple(store[n] for n in self.names)

    def message_names(self) -> frozenset[str]:
        out: set[str] = set()
        for m in self.messages:
            out |= ground_events(m)
        return frozenset(out)


def build_env_structure(
    variables: Sequence[VarDecl],
    guards: Sequence[tuple[str, object]],
    actions: Sequence[tuple[str, Sequence]],
    messages: Sequence[MessageDecl],
    cap: int = DEFAULT_CARRIER_CAP,
    allow_undeclared: bool = False,
) -> tuple[EnvSignature, EnvStructure]:
    """Enumerate the carrier and tabulate guards and actions.

    With ``allow_undeclared`` the message set also contains every ground
    message an action actually sends, so ill-declared models stay buildable
    and can be reported by the interface check.
    """
    env = ConcreteEnv(tuple(variables), tuple(messages))
    states = env.carrier(cap)
    dicts = [env.as_dict(w) for w in states]
    guard_interp = {}
    for gname, expr in guards:
        guard_interp[gname] = frozenset(w for w, d in zip(states, dicts) if eval_guard(expr, d))
    action_interp = {}
    for aname, stmts in actions:
        table = {}
        for w, d in zip(states, dicts):
            after, sent = exec_action(stmts, d, None, env.variables, env.messages)
            table[w] = (env.as_state(after), sent)
        action_interp[aname] = table
    names = env.message_names()
    if allow_undeclared:
        for table in action_interp.values():
            for _, sent in table.values():
                names |= sent
    sig = EnvSignature(frozenset(guard_interp), frozenset(action_interp), names)
    return sig, EnvStructure(sig, frozenset(states), guard_interp, action_interp)
