"""Name resolution and grounding: syntax trees to institution-level objects."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..concrete import (
    Assign,
    Bool,
    CallAction,
    ConcreteEnv,
    EventDecl,
    MessageDecl,
    ModelTooLarge,
    Name,
    ResolutionError,
    Send,
    Unary,
    Binary,
    VarDecl,
    build_env_structure,
    eval_term,
    expand,
    format_expr,
    format_program,
    free_names,
    ground_events,
    ground_name,
    infer_type,
    substitute,
    substitute_program,
)
from ..env import EnvSignature, EnvStructure
from ..psm import ERROR, ProtocolMachine, PsmSentence, PsmTransition
from ..sm import Completion, Event, Machine, SmSentence, SmSignature, SmTransition
from .ast import (
    ActionDef,
    EnvBlock,
    EventNode,
    GuardDef,
    InitNode,
    MachineBlock,
    ModelFile,
    MsgNode,
    ProtocolBlock,
    ProtoTransitionNode,
    Span,
    StatesNode,
    SystemBlock,
    TransitionNode,
    VarNode,
)
from .lexer import Diagnostic, DslError

MACHINE = "machine"
PROTOCOL = "protocol"


@dataclass
class EnvModel:
    name: str
    concrete: ConcreteEnv
    guards: dict
    actions: dict
    span: Span | None = None
    undeclared: tuple = ()


@dataclass
class MachineModel:
    """A grounded machine or protocol together with its environment structure."""

    name: str
    kind: str
    env_name: str | None
    concrete: ConcreteEnv
    events: tuple[EventDecl, ...]
    states: tuple[str, ...]
    initial: str
    sig: SmSignature
    env_sig: EnvSignature
    env: EnvStructure
    sentence: SmSentence | PsmSentence
    ground_guards: dict = field(default_factory=dict)
    ground_actions: dict = field(default_factory=dict)
    undeclared_sends: tuple = ()
    span: Span | None = None

    @property
    def ports(self) -> frozenset[str]:
        return frozenset(m.port for m in self.concrete.messages)

    @property
    def initial_data(self) -> frozenset:
        return self.concrete.initial_states()

    def event_decl(self, name: str) -> EventDecl | None:
        for e in self.events:
            if e.name == name:
                return e
        return None

    def build(self, capacity: int | None = 4):
        cls = ProtocolMachine if self.kind == PROTOCOL else Machine
        return cls(self.env, self.sig, self.sentence, capacity, self.initial_data)


@dataclass
class SystemModel:
    name: str
    block: SystemBlock
    span: Span | None = None


@dataclass
class ResolvedModel:
    envs: dict = field(default_factory=dict)
    machines: dict = field(default_factory=dict)
    systems: dict = field(default_factory=dict)


class _Resolver:
    def __init__(self, cap: int):
        self.diags: list[Diagnostic] = []
        self.cap = cap

    def error(self, message: str, span: Span | None):
        d = Diagnostic("error", message, span or Span(1, 1, 0))
        # grounded transitions repeat their checks once per parameter value
        if d not in self.diags:
            self.diags.append(d)

    # -- environments --------------------------------------------------------
    def env(self, block: EnvBlock) -> EnvModel:
        variables, messages, guards, actions = [], [], {}, {}
        undeclared: list = []
        seen_vars, seen_msgs = set(), set()
        for item in block.items:
            if isinstance(item, VarNode):
                if item.name in seen_vars:
                    self.error(f"duplicate variable {item.name!r}", item.span)
                    continue
                seen_vars.add(item.name)
                if item.init is not None and not item.lower <= item.init <= item.upper:
                    self.error(f"initial value {item.init} of {item.name!r} is out of range", item.span)
                variables.append(VarDecl(item.name, item.lower, item.upper, item.init))
            elif isinstance(item, MsgNode):
                key = (item.port, item.name)
                if key in seen_msgs:
                    self.error(f"duplicate message {item.port}.{item.name}", item.span)
                    continue
                seen_msgs.add(key)
                messages.append(MessageDecl(item.port, item.name, tuple((r.lower, r.upper) for r in item.ranges)))
        concrete = ConcreteEnv(tuple(variables), tuple(messages))
        scope = {v.name: "int" for v in variables}
        for item in block.items:
            if isinstance(item, GuardDef):
                if item.name in guards or item.name in actions or item.name in scope:
                    self.error(f"duplicate name {item.name!r}", item.span)
                    continue
                expr = self.guard_expr(item.expr, scope, guards, {})
                if expr is not None:
                    guards[item.name] = expr
            elif isinstance(item, ActionDef):
                if item.name in guards or item.name in actions or item.name in scope:
                    self.error(f"duplicate name {item.name!r}", item.span)
                    continue
                body = self.program(item.body, concrete, actions, {}, undeclared)
                if body is not None:
                    actions[item.name] = body
        return EnvModel(block.name, concrete, guards, actions, block.span, tuple(undeclared))

    def inline_guards(self, e, guards: dict):
        if isinstance(e, Name) and e.name in guards:
            return guards[e.name]
        if isinstance(e, Unary):
            return Unary(e.op, self.inline_guards(e.operand, guards), e.span)
        if isinstance(e, Binary):
            return Binary(e.op, self.inline_guards(e.left, guards), self.inline_guards(e.right, guards), e.span)
        return e

    def guard_expr(self, e, scope: dict, guards: dict, params: dict):
        names = dict(scope)
        names.update({p: "int" for p in params})
        names.update({g: "bool" for g in guards})
        for n in sorted(free_names(e) - names.keys()):
            self.error(f"unresolved identifier {n!r}", _find_name(e, n))
        if free_names(e) - names.keys():
            return None
        try:
            if infer_type(e, names) != "bool":
                self.error("guard must be a boolean expression", getattr(e, "span", None))
                return None
        except ResolutionError as exc:
            self.error(str(exc), getattr(e, "span", None))
            return None
        return self.inline_guards(e, guards)

    def int_expr(self, e, names: dict) -> bool:
        for n in sorted(free_names(e) - names.keys()):
            self.error(f"unresolved identifier {n!r}", _find_name(e, n))
        if free_names(e) - names.keys():
            return False
        try:
            if infer_type(e, names) != "int":
                self.error("expected an integer expression", getattr(e, "span", None))
                return False
        except ResolutionError as exc:
            self.error(str(exc), getattr(e, "span", None))
            return False
        return True

    def program(self, stmts, concrete: ConcreteEnv, actions: dict, params: dict, undeclared: list):
        """Type-check statements and inline action references; None on error."""
        names = {v.name: "int" for v in concrete.variables}
        names.update({p: "int" for p in params})
        msgs = {(m.port, m.name): m for m in concrete.messages}
        out, ok = [], True
        for s in stmts:
            if isinstance(s, Assign):
                if s.var not in {v.name for v in concrete.variables}:
                    self.error(f"assignment to undeclared variable {s.var!r}", s.span)
                    ok = False
                    continue
                ok &= self.int_expr(s.expr, names)
                out.append(s)
            elif isinstance(s, Send):
                good = all([self.int_expr(a, names) for a in s.args])
                ok &= good
                decl = msgs.get((s.port, s.name))
                if decl is None:
                    undeclared.append((f"{s.port}.{s.name}", s.span))
                elif len(decl.ranges) != len(s.args):
                    self.error(
                        f"message {s.port}.{s.name} takes {len(decl.ranges)} arguments, got {len(s.args)}", s.span
                    )
                    ok = False
                elif good:
                    for a, (lo, hi) in zip(s.args, decl.ranges):
                        if not free_names(substitute(a, params)):
                            v = eval_term(substitute(a, params), {})
                            if not lo <= v <= hi:
                                self.error(f"argument {v} of {s.port}.{s.name} is outside {lo}..{hi}", s.span)
                                ok = False
                out.append(s)
            elif isinstance(s, CallAction):
                if s.name not in actions:
                    self.error(f"unresolved action {s.name!r}", s.span)
                    ok = False
                    continue
                out.append(s)
        return tuple(out) if ok else None

    # -- machines and protocols ----------------------------------------------
    def machine(self, block, envs: dict) -> MachineModel | None:
        is_protocol = isinstance(block, ProtocolBlock)
        kind = PROTOCOL if is_protocol else MACHINE
        if block.env is None:
            env = EnvModel("", ConcreteEnv(()), {}, {})
        elif block.env not in envs:
            self.error(f"unknown environment {block.env!r}", block.span)
            return None
        else:
            env = envs[block.env]
        before = len(self.diags)
        states, events, inits = [], [], []
        for item in block.items:
            if isinstance(item, StatesNode):
                for s in item.names:
                    if s in states:
                        self.error(f"duplicate state {s!r}", item.span)
                    elif is_protocol and s == ERROR:
                        self.error(f"state name {ERROR!r} is reserved in protocols", item.span)
                    else:
                        states.append(s)
            elif isinstance(item, EventNode):
                if any(e.name == item.name for e in events):
                    self.error(f"duplicate event {item.name!r}", item.span)
                else:
                    events.append(EventDecl(item.name, tuple((r.lower, r.upper) for r in item.ranges)))
            elif isinstance(item, InitNode):
                inits.append(item)
        if not inits:
            self.error(f"{kind} {block.name!r} has no init state", block.span)
        elif len(inits) > 1:
            self.error("more than one init state", inits[1].span)
        elif inits[0].state not in states:
            self.error(f"unknown init state {inits[0].state!r}", inits[0].span)
        decls = {e.name: e for e in events}
        scope = {v.name: "int" for v in env.concrete.variables}
        ground_guards = dict(env.guards)
        ground_actions = {name: self.inline_actions(body, env.actions) for name, body in env.actions.items()}
        undeclared: list = list(env.undeclared)
        transitions = []
        for item in block.items:
            if not isinstance(item, (TransitionNode, ProtoTransitionNode)):
                continue
            for s in (item.source, item.target):
                if s not in states:
                    self.error(f"unknown state {s!r}", item.span)
            if item.trigger is None:
                bindings = [({}, ())]
            else:
                decl = decls.get(item.trigger)
                if decl is None:
                    self.error(f"unknown event {item.trigger!r}", item.span)
                    continue
                bindings = self.bindings(item, decl, scope)
                if bindings is None:
                    continue
            for params, args in bindings:
                if is_protocol:
                    t = self.proto_transition(item, params, args, env, scope, ground_guards, undeclared)
                else:
                    t = self.sm_transition(item, params, args, env, scope, ground_guards, ground_actions, undeclared)
                if t is not None:
                    transitions.append(t)
        if len(self.diags) > before:
            return None
        messages = list(env.concrete.messages)
        extra_msgs = set()
        if is_protocol:
            for t in transitions:
                extra_msgs |= t.required
        try:
            env_sig, structure = build_env_structure(
                env.concrete.variables,
                sorted(ground_guards.items()),
                sorted(ground_actions.items()),
                messages,
                self.cap,
                allow_undeclared=True,
            )
        except ModelTooLarge as exc:
            self.error(str(exc), block.span)
            return None
        if extra_msgs - env_sig.messages:
            env_sig = EnvSignature(env_sig.guards, env_sig.actions, env_sig.messages | extra_msgs)
            structure = EnvStructure(env_sig, structure.carrier, structure.guard_interp, structure.action_interp)
        sig = SmSignature(frozenset().union(*(ground_events(e) for e in events)) if events else frozenset(), states)
        initial = inits[0].state
        if is_protocol:
            sentence = PsmSentence(initial, frozenset(transitions))
        else:
            sentence = SmSentence(initial, frozenset(transitions))
        return MachineModel(
            block.name, kind, block.env, env.concrete, tuple(events), tuple(states), initial, sig,
            env_sig, structure, sentence, ground_guards, ground_actions, tuple(dict.fromkeys(undeclared)), block.span,
        )

    def inline_actions(self, stmts, actions: dict) -> tuple:
        out = []
        for s in stmts:
            if isinstance(s, CallAction):
                out.extend(self.inline_actions(actions[s.name], actions))
            else:
                out.append(s)
        return tuple(out)

    def bindings(self, item, decl: EventDecl, scope: dict):
        grounds = expand(decl.ranges)
        if item.params is None:
            return [({}, args) for args in grounds]
        if len(item.params) != len(decl.ranges):
            self.error(
                f"event {decl.name!r} takes {len(decl.ranges)} parameters, got {len(item.params)}", item.span
            )
            return None
        if len(set(item.params)) != len(item.params):
            self.error("duplicate parameter name", item.span)
            return None
        for p in item.params:
            if p in scope:
                self.error(f"parameter {p!r} shadows a variable", item.span)
                return None
        return [(dict(zip(item.params, args)), args) for args in grounds]

    def ground_guard(self, e, params: dict, env: EnvModel, scope: dict, ground_guards: dict):
        if e is None:
            e = Bool(True)
        if isinstance(e, Name) and e.name in env.guards:
            return e.name
        expr = self.guard_expr(e, scope, env.guards, params)
        if expr is None:
            return None
        grounded = substitute(expr, params)
        text = format_expr(grounded)
        ground_guards[text] = grounded
        return text

    def sm_transition(self, item, params, args, env, scope, ground_guards, ground_actions, undeclared):
        guard = self.ground_guard(item.guard, params, env, scope, ground_guards)
        body = self.program(item.action or (), env.concrete, env.actions, params, undeclared)
        if guard is None or body is None:
            return None
        grounded = substitute_program(body, params)
        if len(grounded) == 1 and isinstance(grounded[0], CallAction):
            action = grounded[0].name
        else:
            action = format_program(grounded)
            ground_actions[action] = self.inline_actions(grounded, env.actions)
        if item.trigger is None:
            trigger = Completion(item.source)
        else:
            trigger = Event(ground_name(item.trigger, args))
        return SmTransition(item.source, trigger, guard, action, item.target)

    def proto_transition(self, item, params, args, env, scope, ground_guards, undeclared):
        pre = self.ground_guard(item.pre, params, env, scope, ground_guards)
        post = self.ground_guard(item.post, params, env, scope, ground_guards)
        required = set()
        msgs = {(m.port, m.name): m for m in env.concrete.messages}
        ok = pre is not None and post is not None
        for ref in item.sends:
            vals = []
            for a in ref.args:
                a = substitute(a, params)
                if free_names(a):
                    self.error("arguments of required messages must be constant", ref.span)
                    ok = False
                    break
                vals.append(eval_term(a, {}))
            else:
                decl = msgs.get((ref.port, ref.name))
                if decl is not None and len(decl.ranges) != len(vals):
                    self.error(f"message {ref.port}.{ref.name} takes {len(decl.ranges)} arguments", ref.span)
                    ok = False
                    continue
                if decl is None and env.name:
                    undeclared.append((f"{ref.port}.{ref.name}", ref.span))
                required.add(ground_name(f"{ref.port}.{ref.name}", vals))
        if not ok:
            return None
        return PsmTransition(item.source, pre, ground_name(item.trigger, args), post, frozenset(required), item.target)


def _find_name(e, name: str):
    if isinstance(e, Name):
        return e.span if e.name == name else None
    for child in ("operand", "left", "right"):
        sub = getattr(e, child, None)
        if sub is not None:
            found = _find_name(sub, name)
            if found is not None:
                return found
    return getattr(e, "span", None)


def resolve_with_diagnostics(m: ModelFile, cap: int = 10**6) -> tuple[ResolvedModel, list[Diagnostic]]:
    r = _Resolver(cap)
    out = ResolvedModel()
    type_names = {}
    for block in m.blocks:
        if isinstance(block, EnvBlock):
            if block.name in out.envs:
                r.error(f"duplicate environment {block.name!r}", block.span)
                continue
            out.envs[block.name] = r.env(block)
    for block in m.blocks:
        if isinstance(block, (MachineBlock, ProtocolBlock)):
            if block.name in type_names:
                r.error(f"duplicate machine or protocol {block.name!r}", block.span)
                continue
            type_names[block.name] = block
            model = r.machine(block, out.envs)
            if model is not None:
                out.machines[block.name] = model
        elif isinstance(block, SystemBlock):
            if block.name in out.systems:
                r.error(f"duplicate system {block.name!r}", block.span)
                continue
            out.systems[block.name] = SystemModel(block.name, block, block.span)
    return out, r.diags


def resolve(m: ModelFile, cap: int = 10**6) -> ResolvedModel:
    out, diags = resolve_with_diagnostics(m, cap)
    if diags:
        raise DslError(diags)
    return out
