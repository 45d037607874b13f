"""Protocol state machines: pre/post guards, required messages, error state."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Iterable, NamedTuple, Sequence

from .env import EnvSignature, EnvStructure, IllFormedSentence
from .sm import (
    COMPLETION,
    DEFAULT_CAPACITY,
    Configuration,
    Event,
    Move,
    Pool,
    PoolItem,
    SmSignature,
    SmStructure,
    Step,
    all_pools,
)

ERROR = "Error"


class PsmTransition(NamedTuple):
    source: str
    pre: str
    trigger: str
    post: str
    required: frozenset
    target: str


@dataclass(frozen=True)
class PsmSentence:
    initial: str
    transitions: frozenset[PsmTransition] = frozenset()

    def __post_init__(self):
        object.__setattr__(
            self,
            "transitions",
            frozenset(
                PsmTransition(t[0], t[1], t[2], t[3], frozenset(t[4]), t[5]) for t in self.transitions
            ),
        )

    @property
    def alphabet(self) -> frozenset[str]:
        return frozenset(t.trigger for t in self.transitions)

    def check(self, sig: SmSignature, env_sig: EnvSignature) -> None:
        if ERROR in sig.states:
            raise IllFormedSentence(f"state name {ERROR!r} is reserved for protocol errors")
        if self.initial not in sig.states:
            raise IllFormedSentence(f"unknown initial state {self.initial!r}")
        for t in self.transitions:
            if t.source not in sig.states or t.target not in sig.states:
                raise IllFormedSentence(f"unknown state in {t}")
            if t.trigger not in sig.events:
                raise IllFormedSentence(f"protocol triggers must be declared events: {t.trigger!r}")
            if t.pre not in env_sig.guards or t.post not in env_sig.guards:
                raise IllFormedSentence(f"unknown guard in {t}")
            if not t.required <= env_sig.messages:
                raise IllFormedSentence(f"unknown messages {sorted(t.required - env_sig.messages)}")


class ProtocolMachine:
    """Monitoring semantics: unmatched events lead to the absorbing error state.

    A matched transition may land in any data state satisfying its
    post-guard; it emits the required messages (self-accepted ones are
    queued instead).
    """

    def __init__(
        self,
        env: EnvStructure,
        sig: SmSignature,
        sentence: PsmSentence,
        capacity: int | None = DEFAULT_CAPACITY,
        initial_data: Iterable | None = None,
    ):
        sentence.check(sig, env.signature)
        self.env = env
        self.sig = sig
        self.sentence = sentence
        self.capacity = capacity
        self.initial_data = frozenset(env.carrier if initial_data is None else initial_data)
        self._index = defaultdict(list)
        for t in sorted(sentence.transitions, key=_tkey):
            self._index[(t.source, t.trigger)].append(t)
        self._posts = {g: sorted(states) for g, states in env.guard_interp.items()}

    def initial_configs(self, injection: Sequence[PoolItem] = ()) -> list[Configuration]:
        pool = Pool.of(injection, self.capacity)
        return [Configuration(d, pool, self.sentence.initial) for d in sorted(self.initial_data)]

    def moves(self, c: Configuration) -> list[Move]:
        if c.control == ERROR:
            return []
        picked = c.pool.select()
        if picked is None:
            return []
        item, rest = picked
        if item.kind == COMPLETION:
            return [Move(item, None, frozenset(), (), Configuration(c.data, rest, c.control), False)]
        enabled = [
            t for t in self._index.get((c.control, item.name), ()) if c.data in self.env.guard_interp[t.pre]
        ]
        if not enabled:
            return [Move(item, ERROR, frozenset(), (), Configuration(c.data, rest, ERROR), False)]
        out = []
        for t in enabled:
            accepted = tuple(sorted(t.required & self.sig.events))
            pool, overflow = rest.append([Event(e) for e in accepted], self.capacity)
            emitted = t.required - self.sig.events
            for after in self._posts[t.post]:
                out.append(Move(item, t, emitted, accepted, Configuration(after, pool, t.target), overflow))
        return out

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


def _tkey(t: PsmTransition):
    return (t.source, t.trigger, t.pre, t.post, tuple(sorted(t.required)), t.target)


def psm_canonical_monitor(
    env: EnvStructure, sig: SmSignature, p: PsmSentence, capacity: int = DEFAULT_CAPACITY
) -> SmStructure:
    return ProtocolMachine(env, sig, p, capacity).canonical()


def appended_events(t: Step) -> tuple[str, ...]:
    """Events a transition queued on its own pool (its self-accepted messages)."""
    picked = t.source.pool.select()
    if picked is None:
        return ()
    _, rest = picked
    return t.target.pool.events[len(rest.events):]


def matches(
    t: PsmTransition, state, event: str, before, after, sent: frozenset, env: EnvStructure
) -> bool:
    return (
        t.source == state
        and t.trigger == event
        and before in env.guard_interp[t.pre]
        and after in env.guard_interp[t.post]
        and t.required <= sent
    )


def psm_satisfies(theta: SmStructure, p: PsmSentence, env: EnvStructure) -> bool:
    if theta.initial[1] != p.initial:
        return False
    for t in theta.transitions:
        picked = t.source.pool.select()
        if picked is None or picked[0].kind == COMPLETION:
            continue
        event = picked[0].name
        sent = t.emitted | frozenset(appended_events(t))
        if not any(
            matches(pt, t.source.control, event, t.source.data, t.target.data, sent, env)
            for pt in p.transitions
        ):
            return False
    return True


def restrict(theta: SmStructure, events: Iterable[str]) -> SmStructure:
    """Keep only the transitions that consume one of ``events``."""
    events = frozenset(events)
    keep = set()
    for t in theta.transitions:
        picked = t.source.pool.select()
        if picked and picked[0].kind != COMPLETION and picked[0].name in events:
            keep.add(t)
    return SmStructure(theta.initial, frozenset(keep))


class Ok(NamedTuple):
    def __bool__(self):
        return True


class ErrorAt(NamedTuple):
    index: int
    event: str
    states: frozenset
    data: Hashable

    def __bool__(self):
        return False


MonitorVerdict = Ok | ErrorAt


class Observation(NamedTuple):
    event: str
    before: Hashable
    after: Hashable
    sent: frozenset = frozenset()


def monitor_step(
    states: frozenset, obs: Observation, p: PsmSentence, env: EnvStructure
) -> frozenset:
    """Advance a (possibly nondeterministic) monitor; the empty set is the error state."""
    return frozenset(
        t.target
        for t in p.transitions
        if t.source in states and matches(t, t.source, obs.event, obs.before, obs.after, frozenset(obs.sent), env)
    )


def monitor_trace(trace: Sequence, p: PsmSentence, env: EnvStructure) -> MonitorVerdict:
    states = frozenset({p.initial})
    for i, raw in enumerate(trace):
        obs = Observation(*raw)
        nxt = monitor_step(states, obs, p, env)
        if not nxt:
            return ErrorAt(i, obs.event, states, obs.before)
        states = nxt
    return Ok()
