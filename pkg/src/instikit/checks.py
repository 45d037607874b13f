"""Static and dynamic consistency checks over resolved models."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .concrete import eval_guard, format_expr, free_names, ground_events, ground_name, split_ground
from .dsl.ast import (
    AttachNode,
    ConnectNode,
    ConnectorCheck,
    ExternalNode,
    InstNode,
    InteractionCheck,
    InvariantCheck,
    PortRef,
    PrePostCheck,
    StimulusNode,
)
from .dsl.resolve import PROTOCOL, MachineModel, ResolvedModel, SystemModel
from .env import EnvSentence, EnvSignature, EnvStructure
from .psm import ERROR, PsmSentence, PsmTransition
from .sm import EVENT
from .system import (
    FIRE,
    QUIESCENT,
    CompositeSystem,
    InstanceSpec,
    PortMonitor,
    SysMove,
    SystemConfig,
    bfs,
    describe_fired,
    port_of,
)

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

DEFAULT_BUDGET = 100_000


@dataclass
class CheckReport:
    id: str
    kind: str
    subject: str
    verdict: str
    witness: list | None = None
    stats: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    # raw witness for replay: (start configuration, moves); not serialized
    trace: tuple | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict:
        out = {"id": self.id, "verdict": self.verdict, "witness": self.witness, "stats": self.stats}
        out["kind"] = self.kind
        out["subject"] = self.subject
        if self.notes:
            out["notes"] = list(self.notes)
        return out


# -- witness rendering -------------------------------------------------------

def render_config(system: CompositeSystem, cfg: SystemConfig) -> dict:
    instances = {}
    for inst, local in zip(system.instances, cfg.locals):
        instances[inst.name] = {
            "control": local.control,
            "pool": [str(i) for i in local.pool.items()],
            "store": dict(zip(inst.variables, local.data)),
        }
    out = {"stimulus": cfg.stimulus, "instances": instances}
    if system.monitors:
        out["monitors"] = {
            m.label: (list(s) if s else ERROR) for m, s in zip(system.monitors, cfg.monitors)
        }
    return out


def render_move(system: CompositeSystem, k: int, m: SysMove) -> dict:
    return {
        "step": k,
        "instance": m.instance,
        "kind": m.kind,
        "consumed": None if m.consumed is None else str(m.consumed),
        "fired": describe_fired(m.fired) or None,
        "emitted": sorted(m.emitted),
        "internal": [str(d) for d in m.internal],
        "overflow": m.overflow,
        "config": render_config(system, m.target),
    }


def render_witness(system: CompositeSystem, start: SystemConfig, path: Sequence[SysMove]) -> list:
    steps = [{"step": 0, "kind": "initial", "config": render_config(system, start)}]
    steps += [render_move(system, k + 1, m) for k, m in enumerate(path)]
    return steps


# -- system construction -----------------------------------------------------

def _instances(sysm: SystemModel) -> list[InstNode]:
    return [i for i in sysm.block.items if isinstance(i, InstNode)]


def _connectors(sysm: SystemModel) -> list[ConnectNode]:
    return [i for i in sysm.block.items if isinstance(i, ConnectNode)]


def _types(model: ResolvedModel, sysm: SystemModel) -> dict[str, MachineModel]:
    return {i.name: model.machines[i.type] for i in _instances(sysm) if i.type in model.machines}


def _strip(message: str) -> str:
    return port_of(message)[1]


def monitor_for(proto: MachineModel, owner: MachineModel, instance: str, port: str) -> PortMonitor:
    """Run protocol ``proto`` on ``instance.port`` with guards over the owner's store."""
    carrier = owner.env.carrier
    guards = {}
    for name, expr in proto.ground_guards.items():
        guards[name] = frozenset(w for w in carrier if eval_guard(expr, owner.concrete.as_dict(w)))
    sentence = PsmSentence(
        proto.sentence.initial,
        frozenset(
            PsmTransition(t.source, t.pre, t.trigger, t.post, frozenset(_strip(m) for m in t.required), t.target)
            for t in proto.sentence.transitions
        ),
    )
    required = frozenset().union(*(t.required for t in sentence.transitions)) if sentence.transitions else frozenset()
    sig = EnvSignature(frozenset(guards), frozenset(), required)
    return PortMonitor(instance, port, sentence, EnvStructure(sig, carrier, guards, {}))


def build_system(
    model: ResolvedModel,
    sysm: SystemModel,
    capacity: int | None = 4,
    monitors: Sequence[PortRef] = (),
    policy: str = QUIESCENT,
) -> CompositeSystem:
    """Assemble the composite system; assumes the static checks passed."""
    types = _types(model, sysm)
    specs = [
        InstanceSpec(i.name, types[i.name].build(capacity), types[i.name].concrete.names) for i in _instances(sysm)
    ]
    routes = {}
    for c in _connectors(sysm):
        for a, b in ((c.left, c.right), (c.right, c.left)):
            for decl in types[a.instance].concrete.messages:
                if decl.port != a.port:
                    continue
                for g in ground_events(decl):
                    routes[(a.instance, g)] = (b.instance, _strip(g))
    stimuli = [
        (s.instance, ground_name(s.event, s.args)) for s in sysm.block.items if isinstance(s, StimulusNode)
    ]
    attached = {
        (a.port.instance, a.port.port): a.protocol for a in sysm.block.items if isinstance(a, AttachNode)
    }
    mons = []
    for ref in monitors:
        proto = model.machines[attached[(ref.instance, ref.port)]]
        mons.append(monitor_for(proto, types[ref.instance], ref.instance, ref.port))
    return CompositeSystem(sysm.name, tuple(specs), routes, tuple(stimuli), tuple(mons), capacity, policy)


# -- static checks -----------------------------------------------------------

def static_instance_check(model: ResolvedModel, sysm: SystemModel) -> CheckReport:
    problems = []
    insts = {}
    for i in _instances(sysm):
        if i.name in insts:
            problems.append(f"duplicate instance {i.name!r}")
            continue
        insts[i.name] = i
        if i.type not in model.machines:
            problems.append(f"instance {i.name!r} has undeclared type {i.type!r}")
    types = _types(model, sysm)

    def port_ok(ref: PortRef, what: str) -> bool:
        if ref.instance not in insts:
            problems.append(f"{what} {ref} refers to undeclared instance {ref.instance!r}")
            return False
        typ = types.get(ref.instance)
        if typ is not None and ref.port not in typ.ports:
            problems.append(f"{what} {ref} uses port {ref.port!r} not declared by {typ.name}")
            return False
        return typ is not None

    used = {}
    declared_connectors = set()
    for item in sysm.block.items:
        if isinstance(item, ConnectNode):
            for ref in (item.left, item.right):
                if port_ok(ref, "connector"):
                    key = (ref.instance, ref.port)
                    if key in used:
                        problems.append(f"port {ref} is used by more than one connector or external declaration")
                    used[key] = item
            declared_connectors.add(frozenset({str(item.left), str(item.right)}))
        elif isinstance(item, ExternalNode):
            if port_ok(item.port, "external port"):
                key = (item.port.instance, item.port.port)
                if key in used:
                    problems.append(f"port {item.port} is used by more than one connector or external declaration")
                used[key] = item
        elif isinstance(item, AttachNode):
            port_ok(item.port, "protocol attachment")
            proto = model.machines.get(item.protocol)
            if proto is None or proto.kind != PROTOCOL:
                problems.append(f"{item.protocol!r} is not a declared protocol")
        elif isinstance(item, StimulusNode):
            typ = types.get(item.instance)
            if item.instance not in insts:
                problems.append(f"stimulus for undeclared instance {item.instance!r}")
            elif typ is not None:
                g = ground_name(item.event, item.args)
                if g not in typ.sig.events:
                    problems.append(f"stimulus {item.instance}.{g} is not an event of {typ.name}")
        elif isinstance(item, ConnectorCheck):
            if frozenset({str(item.left), str(item.right)}) not in declared_connectors:
                problems.append(f"checked connector {item.left} -- {item.right} is not declared")
    return _static_report(sysm, "static-instance", problems)


def static_interface_check(model: ResolvedModel, sysm: SystemModel) -> CheckReport:
    problems = []
    types = _types(model, sysm)
    for inst in _instances(sysm):
        typ = types.get(inst.name)
        if typ is None:
            continue
        for msg, span in typ.undeclared_sends:
            where = f" at {span}" if span is not None else ""
            problems.append(f"{inst.name}: {typ.name} sends undeclared message {msg}{where}")
    wired = set()
    for item in sysm.block.items:
        if isinstance(item, ExternalNode):
            wired.add((item.port.instance, item.port.port))
        elif isinstance(item, ConnectNode):
            wired.add((item.left.instance, item.left.port))
            wired.add((item.right.instance, item.right.port))
            for a, b in ((item.left, item.right), (item.right, item.left)):
                ta, tb = types.get(a.instance), types.get(b.instance)
                if ta is None or tb is None:
                    continue
                for decl in ta.concrete.messages:
                    if decl.port != a.port:
                        continue
                    ev = tb.event_decl(decl.name)
                    if ev is None:
                        problems.append(f"{a}.{decl.name} has no matching event in {b.instance} ({tb.name})")
                    elif len(ev.ranges) != len(decl.ranges):
                        problems.append(
                            f"arity mismatch on {a} -- {b}: {decl.full_name} has {len(decl.ranges)} "
                            f"parameters, {b.instance}.{ev.name} has {len(ev.ranges)}"
                        )
                    elif not ground_events(decl) <= {f"{decl.port}.{e}" for e in ground_events(ev)}:
                        problems.append(f"parameter ranges of {a}.{decl.name} exceed those of {b.instance}.{ev.name}")
    for inst in _instances(sysm):
        typ = types.get(inst.name)
        if typ is None:
            continue
        for port in sorted(typ.ports):
            if (inst.name, port) not in wired:
                problems.append(f"port {inst.name}.{port} is neither connected nor external")
    scope = {
        f"{i.name}.{v}" for i in _instances(sysm) if i.name in types for v in types[i.name].concrete.names
    }
    attached = {}
    for item in sysm.block.items:
        if isinstance(item, InvariantCheck):
            for n in sorted(free_names(item.expr) - scope):
                problems.append(f"invariant refers to unknown variable {n!r}")
        elif isinstance(item, PrePostCheck):
            params = set(item.params or ())
            for e in (item.pre, item.post):
                for n in sorted(free_names(e) - scope - params):
                    problems.append(f"pre/post check refers to unknown name {n!r}")
            typ = types.get(item.instance)
            if typ is not None:
                ev = typ.event_decl(item.event)
                if ev is None:
                    problems.append(f"pre/post check on unknown event {item.instance}.{item.event}")
                elif item.params is not None and len(item.params) != len(ev.ranges):
                    problems.append(f"pre/post check binds {len(item.params)} parameters of {item.event}")
        elif isinstance(item, AttachNode):
            attached[(item.port.instance, item.port.port)] = item.protocol
            proto = model.machines.get(item.protocol)
            owner = types.get(item.port.instance)
            if proto is not None and owner is not None and proto.kind == PROTOCOL:
                names = set(owner.concrete.names)
                for g, expr in proto.ground_guards.items():
                    for n in sorted(free_names(expr) - names):
                        problems.append(f"protocol {proto.name} guard {g!r} uses {n!r}, unknown to {item.port.instance}")
        elif isinstance(item, InteractionCheck):
            for p in item.patterns:
                typ = types.get(p.instance)
                if typ is None:
                    problems.append(f"interaction message {p} names an unknown instance")
                    continue
                decl = next((m for m in typ.concrete.messages if m.port == p.port and m.name == p.name), None)
                if decl is None:
                    problems.append(f"interaction message {p} is not declared")
                elif p.args is not None and ground_name(decl.full_name, p.args) not in ground_events(decl):
                    problems.append(f"interaction message {p} has arguments outside the declared ranges")
        elif isinstance(item, ConnectorCheck):
            for ref in (item.left, item.right):
                if (ref.instance, ref.port) not in attached and not any(
                    isinstance(a, AttachNode) and (a.port.instance, a.port.port) == (ref.instance, ref.port)
                    for a in sysm.block.items
                ):
                    problems.append(f"connector end {ref} carries no protocol")
    return _static_report(sysm, "static-interface", problems)


def _static_report(sysm: SystemModel, kind: str, problems: list) -> CheckReport:
    return CheckReport(
        f"{sysm.name}/{kind}", kind, sysm.name, FAIL if problems else PASS, None,
        {"problems": len(problems)}, problems,
    )


# -- dynamic checks ----------------------------------------------------------

def _verdict_from_search(result, system, check_id, kind, subject, pass_when_found=False):
    stats = {"configurations": result.explored, "complete": result.complete}
    if result.found:
        witness = render_witness(system, result.start, result.path)
        verdict = PASS if pass_when_found else FAIL
        return CheckReport(check_id, kind, subject, verdict, witness, stats, [], (result.start, result.path))
    if not result.complete:
        return CheckReport(check_id, kind, subject, INCONCLUSIVE, None, stats, ["exploration budget exhausted"])
    return CheckReport(check_id, kind, subject, FAIL if pass_when_found else PASS, None, stats)


def check_invariant(system: CompositeSystem, inv, budget: int = DEFAULT_BUDGET, check_id: str | None = None) -> CheckReport:
    def bad(cfg):
        return not eval_guard(inv, system.view(cfg))

    result = bfs(system.initial_configs(), system.successors, budget, node_bad=bad)
    text = format_expr(inv)
    return _verdict_from_search(result, system, check_id or f"{system.name}/invariant", "invariant", text)


def _bind(params, args) -> dict | None:
    if params is None:
        return {}
    if len(params) != len(args):
        return None
    return dict(zip(params, args))


def check_pre_post(
    system: CompositeSystem, instance: str, event: str, params, pre, post,
    budget: int = DEFAULT_BUDGET, check_id: str | None = None,
) -> CheckReport:
    """Post-conditions are evaluated when the fired transition finishes."""

    def bad(cfg, m: SysMove):
        if m.instance != instance or m.kind != FIRE or m.consumed.kind != EVENT:
            return False
        base, args = split_ground(m.consumed.name)
        if base != event:
            return False
        binding = _bind(params, args)
        if binding is None:
            return False
        if not eval_guard(pre, system.view(cfg), binding):
            return False
        return not eval_guard(post, system.view(m.target), binding)

    result = bfs(system.initial_configs(), system.successors, budget, edge_bad=bad)
    return _verdict_from_search(result, system, check_id or f"{system.name}/prepost", "prepost", f"{instance}.{event}")


def check_connector(
    system: CompositeSystem,
    budget: int = DEFAULT_BUDGET,
    errors: bool = True,
    deadlock: bool = True,
    overflow: bool = True,
    check_id: str | None = None,
    subject: str = "",
) -> CheckReport:
    """Protocol errors, deadlocks and pool overruns in the monitored product.

    ``system`` must carry the port monitors of the connector ends.
    """
    found = {}

    def node_bad(cfg):
        if errors and system.in_error(cfg):
            found["kind"] = "protocol-error"
            return True
        if deadlock and not system.in_error(cfg) and not system.quiescent(cfg) and not system.successors(cfg):
            found["kind"] = "deadlock"
            return True
        return False

    def edge_bad(cfg, m):
        if overflow and m.overflow:
            found["kind"] = "overflow"
            return True
        return False

    result = bfs(system.initial_configs(), system.successors, budget, node_bad=node_bad, edge_bad=edge_bad)
    report = _verdict_from_search(result, system, check_id or f"{system.name}/connector", "connector", subject)
    if result.found:
        report.notes.append(f"violation: {found['kind']}")
    if deadlock and not any(i.is_protocol for i in system.instances):
        report.notes.append("deadlock is impossible: behavioural machines discard unmatched events")
    report.stats["properties"] = [n for n, on in (("error", errors), ("deadlock", deadlock), ("overflow", overflow)) if on]
    return report


def _matches(pattern, delivery) -> bool:
    port, rest = port_of(delivery.message)
    base, args = split_ground(rest)
    if (pattern.instance, pattern.port, pattern.name) != (delivery.sender, port, base):
        return False
    return pattern.args is None or tuple(pattern.args) == args


def check_interaction(
    system: CompositeSystem, patterns: Sequence, mode: str,
    budget: int = DEFAULT_BUDGET, check_id: str | None = None,
) -> CheckReport:
    """Realizability of a message sequence over wired messages, in send order.

    strict: the messages exchanged along some finite run are exactly the sequence.
    loose: the sequence embeds as a subsequence of some run's messages.
    """
    if mode not in ("strict", "loose"):
        raise ValueError(f"unknown interaction mode {mode!r}")
    n = len(patterns)

    def successors(node):
        cfg, k = node
        out = []
        for m in system.successors(cfg):
            j, ok = k, True
            for d in m.internal:
                if j < n and _matches(patterns[j], d):
                    j += 1
                elif mode == "strict":
                    ok = False
                    break
            if ok:
                out.append((m, (m.target, j)))
        return out

    result = bfs(
        [(c, 0) for c in system.initial_configs()],
        successors,
        budget,
        node_bad=lambda node: node[1] == n,
        target_of=lambda pair: pair[1],
    )
    stats = {"configurations": result.explored, "complete": result.complete}
    subject = f"{mode} [{'; '.join(str(p) for p in patterns)}]"
    cid = check_id or f"{system.name}/interaction"
    if result.found:
        start = result.start[0]
        path = tuple(m for m, _ in result.path)
        return CheckReport(cid, "interaction", subject, PASS, render_witness(system, start, path), stats, [], (start, path))
    if not result.complete:
        return CheckReport(cid, "interaction", subject, INCONCLUSIVE, None, stats, ["exploration budget exhausted"])
    return CheckReport(cid, "interaction", subject, FAIL, None, stats, ["no run realizes the sequence"])


def check_hoare_chain(env: EnvStructure, s1: EnvSentence, s2: EnvSentence, mode: str) -> CheckReport:
    """Can the post-condition of ``s1`` meet the pre-condition of ``s2``?

    strict: the two guards intersect; loose: some finite action sequence
    leads from a post-state of ``s1`` into a pre-state of ``s2``.
    """
    s1.check(env.signature)
    s2.check(env.signature)
    post, pre = env.guard_interp[s1.post], env.guard_interp[s2.pre]
    subject = f"{s1} ; {s2}"
    if mode == "strict":
        meet = sorted(post & pre, key=repr)
        if meet:
            return CheckReport("hoare-chain", "hoare-chain", subject, PASS, [{"state": repr(meet[0])}], {"states": len(post)})
        return CheckReport("hoare-chain", "hoare-chain", subject, FAIL, None, {"states": len(post)})
    if mode != "loose":
        raise ValueError(f"unknown chain mode {mode!r}")
    parent = {w: None for w in post}
    queue = deque(sorted(post, key=repr))
    actions = sorted(env.signature.actions)
    while queue:
        w = queue.popleft()
        if w in pre:
            path = []
            while parent[w] is not None:
                prev, a = parent[w]
                path.append({"action": a, "state": repr(w)})
                w = prev
            path.reverse()
            return CheckReport("hoare-chain", "hoare-chain", subject, PASS, [{"state": repr(w)}] + path, {"states": len(parent)})
        for a in actions:
            nxt, _ = env.action_interp[a][w]
            if nxt not in parent:
                parent[nxt] = (w, a)
                queue.append(nxt)
    return CheckReport("hoare-chain", "hoare-chain", subject, FAIL, None, {"states": len(parent)})


# -- driver ------------------------------------------------------------------

@dataclass
class RunOptions:
    capacity: int = 4
    budget: int = DEFAULT_BUDGET
    policy: str = QUIESCENT
    selected: tuple = ()


def _selected(check_id: str, kind: str, selected) -> bool:
    if not selected:
        return True
    short = check_id.split("/", 1)[-1]
    return any(s in (check_id, short, kind) for s in selected)


def run_system_checks(model: ResolvedModel, sysm: SystemModel, opts: RunOptions = RunOptions()) -> list[CheckReport]:
    """Static checks first; dynamic checks only when both static checks pass."""
    reports = [static_instance_check(model, sysm), static_interface_check(model, sysm)]
    static_ok = all(r.verdict == PASS for r in reports)
    reports = [r for r in reports if _selected(r.id, r.kind, opts.selected)]
    counters = {}
    plain = None
    for item in sysm.block.items:
        if not isinstance(item, (InvariantCheck, PrePostCheck, ConnectorCheck, InteractionCheck)):
            continue
        kind = {
            InvariantCheck: "invariant", PrePostCheck: "prepost",
            ConnectorCheck: "connector", InteractionCheck: "interaction",
        }[type(item)]
        counters[kind] = counters.get(kind, 0) + 1
        cid = f"{sysm.name}/{kind}-{counters[kind]}"
        if not _selected(cid, kind, opts.selected):
            continue
        if not static_ok:
            reports.append(CheckReport(cid, kind, sysm.name, FAIL, None, {}, ["skipped: static checks failed"]))
            continue
        if plain is None and kind != "connector":
            plain = build_system(model, sysm, opts.capacity, policy=opts.policy)
        if isinstance(item, InvariantCheck):
            reports.append(check_invariant(plain, item.expr, opts.budget, cid))
        elif isinstance(item, PrePostCheck):
            reports.append(
                check_pre_post(plain, item.instance, item.event, item.params, item.pre, item.post, opts.budget, cid)
            )
        elif isinstance(item, ConnectorCheck):
            monitored = build_system(model, sysm, opts.capacity, (item.left, item.right), opts.policy)
            reports.append(check_connector(monitored, opts.budget, check_id=cid, subject=f"{item.left} -- {item.right}"))
        else:
            reports.append(check_interaction(plain, item.patterns, item.mode, opts.budget, cid))
    return reports


__all__ = [
    "CheckReport",
    "FAIL",
    "INCONCLUSIVE",
    "PASS",
    "RunOptions",
    "build_system",
    "check_connector",
    "check_hoare_chain",
    "check_interaction",
    "check_invariant",
    "check_pre_post",
    "monitor_for",
    "render_witness",
    "run_system_checks",
    "static_instance_check",
    "static_interface_check",
]
