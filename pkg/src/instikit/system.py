"""N-ary interleaving product of machine instances with explicit connector routing.

Each instance keeps its own pool.  A message sent on a connected port is
renamed to the peer's event and queued on the peer's pool; everything else
is emitted to the outside.  Environment stimuli form an ordered script that
is fed in one event at a time.  Optional port monitors run protocol
sentences alongside the product.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, NamedTuple, Sequence

from .concrete import split_ground
from .env import EnvStructure
from .psm import ERROR, Observation, ProtocolMachine, PsmSentence, monitor_step
from .sm import COMPLETION, EVENT, Configuration, Event, Machine, PoolItem, SmTransition

QUIESCENT = "quiescent"
EAGER = "eager"

STIMULUS = "stimulus"
FIRE = "fire"
DISCARD = "discard"
PROTOCOL_ERROR = "error"


@dataclass(frozen=True)
class InstanceSpec:
    name: str
    machine: Machine | ProtocolMachine
    variables: tuple[str, ...] = ()

    @property
    def is_protocol(self) -> bool:
        return isinstance(self.machine, ProtocolMachine)


@dataclass(frozen=True)
class PortMonitor:
    """A protocol sentence observing one port of one instance.

    ``env`` is built over the owner's carrier, so guards are evaluated on
    the owner's data state before and after each observed step.
    """

    instance: str
    port: str
    protocol: PsmSentence
    env: EnvStructure

    @property
    def label(self) -> str:
        return f"{self.instance}.{self.port}"


class SystemConfig(NamedTuple):
    locals: tuple[Configuration, ...]
    stimulus: int
    monitors: tuple[tuple[str, ...], ...] = ()


class Delivery(NamedTuple):
    sender: str
    message: str
    receiver: str
    event: str

    def __str__(self):
        return f"{self.sender}.{self.message} -> {self.receiver}.{self.event}"


class SysMove(NamedTuple):
    instance: str
    kind: str
    consumed: PoolItem | None
    fired: object
    emitted: frozenset
    internal: tuple[Delivery, ...]
    target: SystemConfig
    overflow: bool

    def label(self):
        return (
            self.instance,
            self.kind,
            "" if self.consumed is None else str(self.consumed),
            describe_fired(self.fired),
            tuple(sorted(self.emitted)),
            tuple(str(d) for d in self.internal),
            self.target,
        )


def describe_fired(fired) -> str:
    if fired is None:
        return ""
    if fired == ERROR:
        return ERROR
    if isinstance(fired, SmTransition):
        return f"{fired.source} --{fired.trigger}[{fired.guard}]/{fired.action}--> {fired.target}"
    sends = ", ".join(sorted(fired.required))
    return f"{fired.source} --[{fired.pre}]{fired.trigger}/[{fired.post}]{{{sends}}}--> {fired.target}"


def port_of(message: str) -> tuple[str, str]:
    port, _, rest = message.partition(".")
    return port, rest


@dataclass
class CompositeSystem:
    name: str
    instances: tuple[InstanceSpec, ...]
    routes: Mapping[tuple[str, str], tuple[str, str]] = field(default_factory=dict)
    stimuli: tuple[tuple[str, str], ...] = ()
    monitors: tuple[PortMonitor, ...] = ()
    capacity: int | None = 4
    policy: str = QUIESCENT

    def __post_init__(self):
        self.instances = tuple(self.instances)
        self.stimuli = tuple(self.stimuli)
        self.monitors = tuple(self.monitors)
        self._pos = {inst.name: i for i, inst in enumerate(self.instances)}
        if len(self._pos) != len(self.instances):
            raise ValueError("instance names must be unique")
        for (sender, _), (receiver, event) in self.routes.items():
            if sender not in self._pos or receiver not in self._pos:
                raise ValueError(f"route mentions an unknown instance: {sender} -> {receiver}")
            if event not in self.instances[self._pos[receiver]].machine.sig.events:
                raise ValueError(f"routed event {receiver}.{event} is not declared")
        for inst, event in self.stimuli:
            if inst not in self._pos:
                raise ValueError(f"stimulus for unknown instance {inst!r}")
            if event not in self.instances[self._pos[inst]].machine.sig.events:
                raise ValueError(f"stimulus {inst}.{event} is not a declared event")
        for mon in self.monitors:
            if mon.instance not in self._pos:
                raise ValueError(f"monitor on unknown instance {mon.instance!r}")
        if self.policy not in (QUIESCENT, EAGER):
            raise ValueError(f"unknown stimulus policy {self.policy!r}")

    def index(self, name: str) -> int:
        return self._pos[name]

    def initial_configs(self) -> list[SystemConfig]:
        per = [inst.machine.initial_configs() for inst in self.instances]
        monitors = tuple((m.protocol.initial,) for m in self.monitors)
        out = [SystemConfig((), 0, monitors)]
        for options in per:
            out = [SystemConfig(c.locals + (o,), 0, monitors) for c in out for o in options]
        return sorted(out)

    def view(self, cfg: SystemConfig) -> dict[str, int]:
        """Qualified variable valuation ``inst.var`` of a configuration."""
        out = {}
        for inst, local in zip(self.instances, cfg.locals):
            for var, value in zip(inst.variables, local.data):
                out[f"{inst.name}.{var}"] = value
        return out

    def in_error(self, cfg: SystemConfig) -> bool:
        return any(not m for m in cfg.monitors) or any(
            local.control == ERROR for local in cfg.locals
        )

    def quiescent(self, cfg: SystemConfig) -> bool:
        return all(local.pool.is_empty() for local in cfg.locals)

    def successors(self, cfg: SystemConfig) -> list[SysMove]:
        out = []
        if cfg.stimulus < len(self.stimuli) and (self.policy == EAGER or self.quiescent(cfg)):
            inst, event = self.stimuli[cfg.stimulus]
            i = self._pos[inst]
            local = cfg.locals[i]
            pool, overflow = local.pool.append([Event(event)], self.capacity)
            locals_ = list(cfg.locals)
            locals_[i] = Configuration(local.data, pool, local.control)
            out.append(
                SysMove(
                    inst, STIMULUS, Event(event), None, frozenset(), (),
                    SystemConfig(tuple(locals_), cfg.stimulus + 1, cfg.monitors), overflow,
                )
            )
        for i, inst in enumerate(self.instances):
            before = cfg.locals[i]
            for m in inst.machine.moves(before):
                out.append(self._apply(cfg, i, before, m))
        return sorted(out, key=SysMove.label)

    def _apply(self, cfg: SystemConfig, i: int, before: Configuration, m) -> SysMove:
        inst = self.instances[i]
        locals_ = list(cfg.locals)
        locals_[i] = m.target
        overflow = m.overflow
        external, internal = set(), []
        for msg in sorted(m.emitted):
            route = self.routes.get((inst.name, msg))
            if route is None:
                external.add(f"{inst.name}.{msg}")
                continue
            receiver, event = route
            j = self._pos[receiver]
            peer = locals_[j]
            pool, over = peer.pool.append([Event(event)], self.capacity)
            overflow = overflow or over
            locals_[j] = Configuration(peer.data, pool, peer.control)
            internal.append(Delivery(inst.name, msg, receiver, event))
        monitors = tuple(
            self._observe(mon, state, inst.name, before, m) if mon.instance == inst.name else state
            for mon, state in zip(self.monitors, cfg.monitors)
        )
        if m.fired is None:
            kind = DISCARD
        elif m.fired == ERROR:
            kind = PROTOCOL_ERROR
        else:
            kind = FIRE
        return SysMove(
            inst.name, kind, m.consumed, m.fired, frozenset(external), tuple(internal),
            SystemConfig(tuple(locals_), cfg.stimulus, monitors), overflow,
        )

    def _observe(self, mon: PortMonitor, current: tuple, owner: str, before: Configuration, m) -> tuple:
        if not current:
            return current
        states = frozenset(current)
        after = m.target.data
        sent_here = sorted(rest for port, rest in map(port_of, m.emitted) if port == mon.port)
        sent = frozenset(sent_here)
        alphabet = mon.protocol.alphabet
        if m.consumed.kind == EVENT and m.consumed.name in alphabet and m.fired is not None:
            states = monitor_step(states, Observation(m.consumed.name, before.data, after, sent), mon.protocol, mon.env)
        for msg in sent_here:
            if not states:
                break
            states = monitor_step(states, Observation(msg, before.data, after, sent), mon.protocol, mon.env)
        return tuple(sorted(states))


# -- search ------------------------------------------------------------------

class SearchResult(NamedTuple):
    """Outcome of a breadth-first search.

    ``path`` is the list of moves from ``start`` to the violating node (or
    to the source of the violating edge, followed by that edge).
    """

    found: bool
    start: Hashable | None
    path: tuple
    explored: int
    complete: bool


def bfs(
    initial: Sequence,
    successors: Callable,
    budget: int,
    node_bad: Callable | None = None,
    edge_bad: Callable | None = None,
    target_of: Callable = lambda m: m.target,
) -> SearchResult:
    """Shortest, lexicographically least violation within ``budget`` nodes.

    Successors must be returned in a fixed order; nodes are checked when
    discovered and edges when expanded, so the first hit is minimal.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    parent: dict = {}
    order = []
    for c in initial:
        if c in parent:
            continue
        if len(parent) >= budget:
            return SearchResult(False, None, (), len(parent), False)
        parent[c] = None
        order.append(c)
        if node_bad is not None and node_bad(c):
            return SearchResult(True, c, (), len(parent), True)
    queue = deque(order)
    complete = True
    while queue:
        c = queue.popleft()
        for m in successors(c):
            if edge_bad is not None and edge_bad(c, m):
                start, path = _trace(parent, c)
                return SearchResult(True, start, path + (m,), len(parent), True)
            t = target_of(m)
            if t in parent:
                continue
            if len(parent) >= budget:
                complete = False
                continue
            parent[t] = (c, m)
            if node_bad is not None and node_bad(t):
                start, path = _trace(parent, t)
                return SearchResult(True, start, path, len(parent), True)
            queue.append(t)
    return SearchResult(False, None, (), len(parent), complete)


def _trace(parent: dict, node) -> tuple:
    path = []
    while parent[node] is not None:
        prev, move = parent[node]
        path.append(move)
        node = prev
    path.reverse()
    return node, tuple(path)


def replay(system: CompositeSystem, start: SystemConfig, path: Sequence[SysMove]) -> SystemConfig:
    """Re-execute a witness; raise ValueError if some step is not a successor."""
    if start not in system.initial_configs():
        raise ValueError("witness does not start in an initial configuration")
    cfg = start
    for k, move in enumerate(path):
        if move not in system.successors(cfg):
            raise ValueError(f"step {k} is not a successor of the preceding configuration")
        cfg = move.target
    return cfg


def reachable_system(system: CompositeSystem, budget: int):
    """All reachable configurations and moves; ``complete`` is False on budget exhaustion."""
    seen = {}
    order = []
    edges = []
    complete = True
    for c in system.initial_configs():
        if len(seen) >= budget:
            complete = False
            break
        seen[c] = True
        order.append(c)
    queue = deque(order)
    while queue:
        c = queue.popleft()
        for m in system.successors(c):
            if m.target not in seen:
                if len(seen) >= budget:
                    complete = False
                    continue
                seen[m.target] = True
                queue.append(m.target)
            edges.append((c, m))
    return order, list(seen), edges, complete


def local_name(message: str) -> tuple[str, str, tuple[int, ...]]:
    """Split ``port.name(args)`` into its parts."""
    port, rest = port_of(message)
    base, args = split_ground(rest)
    return port, base, args


__all__ = [
    "COMPLETION",
    "CompositeSystem",
    "Delivery",
    "EAGER",
    "InstanceSpec",
    "PortMonitor",
    "QUIESCENT",
    "SearchResult",
    "SysMove",
    "SystemConfig",
    "bfs",
    "describe_fired",
    "local_name",
    "reachable_system",
    "replay",
]
