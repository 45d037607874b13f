"""State-machine institution over a fixed environment ``(H, Omega)``.

Configurations are ``(data state, pool, control state)``.  The pool has two
FIFO lanes; completion events are always selected before ordinary events.
Canonical structures enumerate every configuration whose lanes hold at most
``capacity`` items, so satisfaction (set equality of transition relations) is
decidable.
"""
from __future__ import annotations

import itertools
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, NamedTuple, Sequence

from .env import EnvSignature, EnvStructure, IllFormedSentence

DEFAULT_CAPACITY = 4

EVENT = "event"
COMPLETION = "completion"


class PoolItem(NamedTuple):
    kind: str
    name: str

    def __str__(self):
        return self.name if self.kind == EVENT else f"complete({self.name})"


def Event(name: str) -> PoolItem:
    return PoolItem(EVENT, name)


def Completion(state: str) -> PoolItem:
    return PoolItem(COMPLETION, state)


class Pool(NamedTuple):
    completions: tuple[str, ...] = ()
    events: tuple[str, ...] = ()

    @classmethod
    def of(cls, items: Iterable[PoolItem] = (), capacity: int | None = None) -> "Pool":
        pool, _ = cls().append(items, capacity)
        return pool

    @property
    def size(self) -> int:
        return len(self.completions) + len(self.events)

    def is_empty(self) -> bool:
        return not self.completions and not self.events

    def items(self) -> list[PoolItem]:
        return [Completion(s) for s in self.completions] + [Event(e) for e in self.events]

    def select(self) -> tuple[PoolItem, "Pool"] | None:
        """Take the next item; the completion lane has strict priority."""
        if self.completions:
            return Completion(self.completions[0]), Pool(self.completions[1:], self.events)
        if self.events:
            return Event(self.events[0]), Pool(self.completions, self.events[1:])
        return None

    def append(self, items: Iterable[PoolItem], capacity: int | None = None) -> tuple["Pool", bool]:
        """Add items to their lane tails; items beyond capacity are dropped and flagged."""
        comps, evs = list(self.completions), list(self.events)
        overflow = False
        for item in items:
            lane = comps if item.kind == COMPLETION else evs
            if capacity is not None and len(lane) >= capacity:
                overflow = True
                continue
            lane.append(item.name)
        return Pool(tuple(comps), tuple(evs)), overflow

    def __str__(self):
        return "[" + ", ".join(str(i) for i in self.items()) + "]"


class Configuration(NamedTuple):
    data: Hashable
    pool: Pool
    control: Hashable


class Step(NamedTuple):
    """One element of a transition relation."""

    source: Configuration
    emitted: frozenset
    target: Configuration
    overflow: bool = False


def step_key(t: Step):
    return (t.source, tuple(sorted(t.emitted)), t.target, t.overflow)


class SmTransition(NamedTuple):
    source: str
    trigger: PoolItem
    guard: str
    action: str
    target: str


@dataclass(frozen=True)
class SmSignature:
    events: frozenset[str] = frozenset()
    states: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "events", frozenset(self.events))
        object.__setattr__(self, "states", frozenset(self.states))

    def has_item(self, item: PoolItem) -> bool:
        return item.name in (self.events if item.kind == EVENT else self.states)


def _injective(mapping: Mapping) -> bool:
    return len(set(mapping.values())) == len(mapping)


@dataclass(frozen=True, eq=False)
class SmMorphism:
    source: SmSignature
    target: SmSignature
    event_map: Mapping[str, str]
    state_map: Mapping[str, str]

    def __post_init__(self):
        for kind, names, image, mapping in (
            ("event", self.source.events, self.target.events, self.event_map),
            ("state", self.source.states, self.target.states, self.state_map),
        ):
            if set(mapping) != set(names):
                raise IllFormedSentence(f"{kind} map is not total")
            if any(v not in image for v in mapping.values()):
                raise IllFormedSentence(f"{kind} map leaves the target signature")
            if not _injective(mapping):
                raise IllFormedSentence(f"{kind} map is not injective")
        object.__setattr__(self, "event_map", dict(self.event_map))
        object.__setattr__(self, "state_map", dict(self.state_map))

    def __eq__(self, other):
        if not isinstance(other, SmMorphism):
            return NotImplemented
        return (self.source, self.target, self.event_map, self.state_map) == (
            other.source, other.target, other.event_map, other.state_map,
        )

    @classmethod
    def identity(cls, sig: SmSignature) -> "SmMorphism":
        return cls(sig, sig, {e: e for e in sig.events}, {s: s for s in sig.states})

    def then(self, other: "SmMorphism") -> "SmMorphism":
        if self.target != other.source:
            raise IllFormedSentence("morphisms are not composable")
        return SmMorphism(
            self.source,
            other.target,
            {e: other.event_map[v] for e, v in self.event_map.items()},
            {s: other.state_map[v] for s, v in self.state_map.items()},
        )

    def is_bijective(self) -> bool:
        return len(self.source.events) == len(self.target.events) and len(
            self.source.states
        ) == len(self.target.states)

    def map_item(self, item: PoolItem) -> PoolItem:
        if item.kind == EVENT:
            return Event(self.event_map[item.name])
        return Completion(self.state_map[item.name])

    def map_pool(self, pool: Pool) -> Pool:
        return Pool(
            tuple(self.state_map[s] for s in pool.completions),
            tuple(self.event_map[e] for e in pool.events),
        )

    def map_config(self, c: Configuration) -> Configuration:
        return Configuration(c.data, self.map_pool(c.pool), self.state_map[c.control])


@dataclass(frozen=True)
class SmSentence:
    """Initial state plus diagrammatic transitions ``(s, trigger, guard, action, s')``."""

    initial: str
    transitions: frozenset[SmTransition] = frozenset()

    def __post_init__(self):
        object.__setattr__(
            self, "transitions", frozenset(SmTransition(*t) for t in self.transitions)
        )

    def check(self, sig: SmSignature, env_sig: EnvSignature) -> None:
        if self.initial not in sig.states:
            raise IllFormedSentence(f"unknown initial state {self.initial!r}")
        for t in self.transitions:
            if t.source not in sig.states or t.target not in sig.states:
                raise IllFormedSentence(f"unknown state in {t}")
            if not sig.has_item(t.trigger):
                raise IllFormedSentence(f"unknown trigger {t.trigger}")
            if t.guard not in env_sig.guards or t.action not in env_sig.actions:
                raise IllFormedSentence(f"unknown guard/action in {t}")

    def without(self, t: SmTransition) -> "SmSentence":
        return SmSentence(self.initial, self.transitions - {t})


@dataclass(frozen=True)
class SmStructure:
    """``initial`` is ``(set of data states, control state)``; control may be
    ``None`` for reducts whose initial state lies outside the morphism's image."""

    initial: tuple[frozenset, Hashable]
    transitions: frozenset[Step]

    def __post_init__(self):
        data, control = self.initial
        object.__setattr__(self, "initial", (frozenset(data), control))
        object.__setattr__(self, "transitions", frozenset(self.transitions))

    def sorted_transitions(self) -> list[Step]:
        return sorted(self.transitions, key=step_key)

    def configurations(self) -> set[Configuration]:
        out = {Configuration(d, Pool(), self.initial[1]) for d in self.initial[0]}
        for t in self.transitions:
            out.add(t.source)
            out.add(t.target)
        return out

    def without(self, t: Step) -> "SmStructure":
        return SmStructure(self.initial, self.transitions - {t})


class Move(NamedTuple):
    """A single step out of a configuration, with provenance.

    ``fired`` is the sentence transition used, or ``None`` for a discard.
    ``accepted`` lists the self-accepted events added to the own pool.
    """

    consumed: PoolItem
    fired: object
    emitted: frozenset
    accepted: tuple[str, ...]
    target: Configuration
    overflow: bool

    def as_step(self, source: Configuration) -> Step:
        return Step(source, self.emitted, self.target, self.overflow)


def all_pools(sig: SmSignature, capacity: int) -> list[Pool]:
    states, events = sorted(sig.states), sorted(sig.events)
    comp_lanes = [
        lane for n in range(capacity + 1) for lane in itertools.product(states, repeat=n)
    ]
    event_lanes = [
        lane for n in range(capacity + 1) for lane in itertools.product(events, repeat=n)
    ]
    return [Pool(c, e) for c in comp_lanes for e in event_lanes]


class Machine:
    """Operational semantics of one behavioural sentence over ``(H, Omega)``."""

    def __init__(
        self,
        env: EnvStructure,
        sig: SmSignature,
        sentence: SmSentence,
        capacity: int | None = DEFAULT_CAPACITY,
        initial_data: Iterable | None = None,
    ):
        sentence.check(sig, env.signature)
        self.env = env
        self.sig = sig
        self.sentence = sentence
        self.capacity = capacity
        self.initial_data = frozenset(env.carrier if initial_data is None else initial_data)
        self._index: dict[tuple[str, PoolItem], list[SmTransition]] = defaultdict(list)
        for t in sorted(sentence.transitions):
            self._index[(t.source, t.trigger)].append(t)

    def initial_configs(self, injection: Sequence[PoolItem] = ()) -> list[Configuration]:
        pool = Pool.of(injection, self.capacity)
        return [Configuration(d, pool, self.sentence.initial) for d in sorted(self.initial_data)]

    def moves(self, c: Configuration) -> list[Move]:
        picked = c.pool.select()
        if picked is None:
            return []
        item, rest = picked
        out = []
        for t in self._index.get((c.control, item), ()):
            if c.data not in self.env.guard_interp[t.guard]:
                continue
            nxt, msgs = self.env.action_interp[t.action][c.data]
            accepted = tuple(sorted(msgs & self.sig.events))
            pool, overflow = rest.append(
                [Event(e) for e in accepted] + [Completion(t.target)], self.capacity
            )
            out.append(
                Move(item, t, msgs - self.sig.events, accepted, Configuration(nxt, pool, t.target), overflow)
            )
        if not out:
            out.append(Move(item, None, frozenset(), (), Configuration(c.data, rest, c.control), False))
        return out

    def step(self, c: Configuration) -> list[tuple[frozenset, Configuration]]:
        return [(m.emitted, m.target) for m in self.moves(c)]

    def canonical(self) -> SmStructure:
        if self.capacity is None:
            raise ValueError("canonical enumeration needs a bounded pool")
        steps = set()
        pools = [p for p in all_pools(self.sig, self.capacity) if not p.is_empty()]
        for control in sorted(self.sig.states):
            for data in self.env.carrier:
                for pool in pools:
                    c = Configuration(data, pool, control)
                    for m in self.moves(c):
                        steps.add(m.as_step(c))
        return SmStructure((self.initial_data, self.sentence.initial), frozenset(steps))


def canonical_structure(
    env: EnvStructure,
    sig: SmSignature,
    s: SmSentence,
    capacity: int = DEFAULT_CAPACITY,
    initial_data: Iterable | None = None,
) -> SmStructure:
    if capacity < 1:
        raise ValueError("capacity must be at least 1")
    return Machine(env, sig, s, capacity, initial_data).canonical()


def step(
    c: Configuration, s: SmSentence, env: EnvStructure, sig: SmSignature, capacity: int | None = DEFAULT_CAPACITY
) -> list[tuple[frozenset, Configuration]]:
    return Machine(env, sig, s, capacity).step(c)


def satisfies_sm(
    theta: SmStructure,
    s: SmSentence,
    env: EnvStructure,
    sig: SmSignature,
    capacity: int = DEFAULT_CAPACITY,
) -> bool:
    if theta.initial[1] != s.initial:
        return False
    return theta.transitions == canonical_structure(env, sig, s, capacity, theta.initial[0]).transitions


def translate_sm_sentence(m: SmMorphism, s: SmSentence) -> SmSentence:
    try:
        return SmSentence(
            m.state_map[s.initial],
            frozenset(
                SmTransition(m.state_map[t.source], m.map_item(t.trigger), t.guard, t.action, m.state_map[t.target])
                for t in s.transitions
            ),
        )
    except KeyError as exc:
        raise IllFormedSentence(f"name {exc.args[0]!r} is not in the morphism's source") from None


def _inverse(m: SmMorphism):
    ev = {v: k for k, v in m.event_map.items()}
    st = {v: k for k, v in m.state_map.items()}

    def pull(c: Configuration) -> Configuration | None:
        try:
            return Configuration(
                c.data,
                Pool(tuple(st[s] for s in c.pool.completions), tuple(ev[e] for e in c.pool.events)),
                st[c.control],
            )
        except KeyError:
            return None

    return st, pull


def reduct_sm(m: SmMorphism, bigger: SmStructure) -> SmStructure:
    st, pull = _inverse(m)
    data, control = bigger.initial
    steps = set()
    for t in bigger.transitions:
        a, b = pull(t.source), pull(t.target)
        if a is not None and b is not None:
            steps.add(Step(a, t.emitted, b, t.overflow))
    return SmStructure((data, st.get(control)), frozenset(steps))


class Reachability(NamedTuple):
    configurations: tuple[Configuration, ...]
    transitions: tuple[tuple[Configuration, Move], ...]
    complete: bool


def explore(initial: Sequence[Configuration], moves, max_configs: int) -> Reachability:
    """Breadth-first closure; the initial set is always included."""
    if max_configs < 1:
        raise ValueError("max_configs must be at least 1")
    seen = set(initial)
    queue = deque(sorted(seen))
    edges = []
    complete = True
    while queue:
        c = queue.popleft()
        for m in moves(c):
            if m.target not in seen:
                if len(seen) >= max_configs:
                    complete = False
                    continue
                seen.add(m.target)
                queue.append(m.target)
            edges.append((c, m))
    return Reachability(tuple(sorted(seen)), tuple(edges), complete)


def reachable(
    injection: Sequence[PoolItem],
    s: SmSentence,
    env: EnvStructure,
    sig: SmSignature,
    capacity: int | None = DEFAULT_CAPACITY,
    max_configs: int = 100_000,
    initial_data: Iterable | None = None,
) -> Reachability:
    machine = Machine(env, sig, s, capacity, initial_data)
    for item in injection:
        if item.kind != EVENT or item.name not in sig.events:
            raise IllFormedSentence(f"only declared events can be injected, got {item}")
    return explore(machine.initial_configs(injection), machine.moves, max_configs)
