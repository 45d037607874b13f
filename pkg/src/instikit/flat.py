"""Flat state-machine institution: signatures ``<H, Sigma>`` and the interleaving product."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

from .env import (
    EnvMorphism,
    EnvSentence,
    EnvSignature,
    EnvStructure,
    IllFormedSentence,
    reduct_env,
    satisfies_env,
    translate_env_sentence,
)
from .sm import (
    COMPLETION,
    DEFAULT_CAPACITY,
    Configuration,
    Event,
    Pool,
    SmMorphism,
    SmSentence,
    SmSignature,
    SmStructure,
    SmTransition,
    Step,
    reduct_sm,
    satisfies_sm,
    translate_sm_sentence,
)


class CombinationError(ValueError):
    pass


@dataclass(frozen=True)
class FlatSignature:
    env: EnvSignature
    sm: SmSignature


@dataclass(frozen=True)
class FlatMorphism:
    env_part: EnvMorphism
    sm_part: SmMorphism

    @property
    def source(self) -> FlatSignature:
        return FlatSignature(self.env_part.source, self.sm_part.source)

    @property
    def target(self) -> FlatSignature:
        return FlatSignature(self.env_part.target, self.sm_part.target)

    @classmethod
    def identity(cls, sig: FlatSignature) -> "FlatMorphism":
        return cls(EnvMorphism.identity(sig.env), SmMorphism.identity(sig.sm))

    def then(self, other: "FlatMorphism") -> "FlatMorphism":
        return FlatMorphism(self.env_part.then(other.env_part), self.sm_part.then(other.sm_part))


@dataclass(frozen=True)
class FlatStructure:
    env: EnvStructure
    sm: SmStructure


def reduct_messages(eta: EnvMorphism, theta: SmStructure) -> SmStructure:
    """Pull emitted message sets back along ``eta``."""
    return SmStructure(
        theta.initial,
        frozenset(Step(t.source, eta.message_preimage(t.emitted), t.target, t.overflow) for t in theta.transitions),
    )


def flat_reduct(m: FlatMorphism, s: FlatStructure) -> FlatStructure:
    return FlatStructure(reduct_env(m.env_part, s.env), reduct_messages(m.env_part, reduct_sm(m.sm_part, s.sm)))


def translate_flat_sentence(m: FlatMorphism, s):
    if isinstance(s, EnvSentence):
        return translate_env_sentence(m.env_part, s)
    renamed = translate_sm_sentence(m.sm_part, s)
    eta = m.env_part
    try:
        return SmSentence(
            renamed.initial,
            frozenset(
                SmTransition(t.source, t.trigger, eta.guard_map[t.guard], eta.action_map[t.action], t.target)
                for t in renamed.transitions
            ),
        )
    except KeyError as exc:
        raise IllFormedSentence(f"name {exc.args[0]!r} is not in the morphism's source") from None


def satisfies_flat(st: FlatStructure, sig: FlatSignature, s, capacity: int = DEFAULT_CAPACITY) -> bool:
    if isinstance(s, EnvSentence):
        return satisfies_env(st.env, s)
    return satisfies_sm(st.sm, s, st.env, sig.sm, capacity)


def is_admissible(m: FlatMorphism) -> bool:
    """Side conditions under which reduct and translation agree on machine sentences.

    The state and event maps must be bijective (satisfaction compares whole
    transition relations, so configurations outside the image matter), and
    messages that a machine accepts itself must be renamed consistently by
    the message map and the event map.  Self-accepted messages enter the
    pool sorted by name, so that renaming must also preserve their order.
    The message map must be onto, otherwise the reduct forgets emissions
    that a translated sentence still constrains.
    """
    sigma, eta = m.sm_part, m.env_part
    if not sigma.is_bijective():
        return False
    if set(eta.message_map.values()) != set(eta.target.messages):
        return False
    src_events, tgt_events = m.source.sm.events, m.target.sm.events
    for msg, image in eta.message_map.items():
        if (msg in src_events) != (image in tgt_events):
            return False
        if msg in src_events and sigma.event_map[msg] != image:
            return False
    for image in eta.target.messages & tgt_events:
        if len(eta.message_preimage({image})) != 1:
            return False
    own = sorted(eta.source.messages & src_events)
    return [sigma.event_map[x] for x in own] == sorted(sigma.event_map[x] for x in own)


def combine_signatures(a: FlatSignature, b: FlatSignature) -> FlatSignature:
    for kind, x, y in (
        ("guards", a.env.guards, b.env.guards),
        ("actions", a.env.actions, b.env.actions),
        ("events", a.sm.events, b.sm.events),
        ("states", a.sm.states, b.sm.states),
    ):
        clash = x & y
        if clash:
            raise CombinationError(f"{kind} are not disjoint: {sorted(clash)}")
    env = EnvSignature(
        a.env.guards | b.env.guards, a.env.actions | b.env.actions, a.env.messages | b.env.messages
    )
    events = a.sm.events | b.sm.events | a.sm.states | b.sm.states
    states = frozenset(itertools.product(sorted(a.sm.states), sorted(b.sm.states)))
    return FlatSignature(env, SmSignature(events, states))


def project_env(f):
    """Forget the machine component of a flat signature or structure."""
    return f.env


def product_env(o1: EnvStructure, o2: EnvStructure) -> EnvStructure:
    clash = (o1.signature.guards & o2.signature.guards) | (o1.signature.actions & o2.signature.actions)
    if clash:
        raise CombinationError(f"guards/actions are not disjoint: {sorted(clash)}")
    sig = EnvSignature(
        o1.signature.guards | o2.signature.guards,
        o1.signature.actions | o2.signature.actions,
        o1.signature.messages | o2.signature.messages,
    )
    carrier = frozenset(itertools.product(o1.carrier, o2.carrier))
    guards = {}
    for g, states in o1.guard_interp.items():
        guards[g] = frozenset(w for w in carrier if w[0] in states)
    for g, states in o2.guard_interp.items():
        guards[g] = frozenset(w for w in carrier if w[1] in states)
    actions = {}
    for a, table in o1.action_interp.items():
        actions[a] = {(w1, w2): ((table[w1][0], w2), table[w1][1]) for w1, w2 in carrier}
    for a, table in o2.action_interp.items():
        actions[a] = {(w1, w2): ((w1, table[w2][0]), table[w2][1]) for w1, w2 in carrier}
    return EnvStructure(sig, carrier, guards, actions)


@dataclass(frozen=True)
class Wiring:
    """Connector renaming for a binary product.

    ``routes[(side, message)] = event`` sends a message emitted by component
    ``side`` (0 or 1) to the other component's pool as ``event``.
    """

    routes: Mapping[tuple[int, str], str] = field(default_factory=dict)


def merged_pool(c: Configuration) -> Pool:
    """The single pool of the textbook product, forgetting the routing partition."""
    comps, evs = [], []
    for p in c.pool:
        comps.extend(p.completions)
        evs.extend(p.events)
    return Pool(tuple(comps), tuple(evs))


def interleave_product(
    s1: FlatStructure, s2: FlatStructure, wiring: Wiring = Wiring(), capacity: int | None = DEFAULT_CAPACITY
) -> FlatStructure:
    """Explicit interleaving product of two flat structures.

    Product configurations pair data states, pools and control states.
    Exactly one component moves per step; messages covered by the wiring are
    queued on the peer's pool instead of being emitted.
    """
    env = product_env(s1.env, s2.env)
    parts = (s1.sm, s2.sm)
    configs = [sorted(p.configurations()) for p in parts]
    by_source = []
    for p in parts:
        idx: dict = {}
        for t in p.transitions:
            idx.setdefault(t.source, []).append(t)
        by_source.append(idx)
    steps = set()
    for c1, c2 in itertools.product(*configs):
        pair = (c1, c2)
        for side in (0, 1):
            other = 1 - side
            for t in by_source[side].get(pair[side], ()):
                peer = pair[other]
                external, queued = set(), []
                for msg in sorted(t.emitted):
                    event = wiring.routes.get((side, msg))
                    if event is None:
                        external.add(msg)
                    else:
                        queued.append(Event(event))
                peer_pool, overflow = peer.pool.append(queued, capacity)
                locals_ = [None, None]
                locals_[side] = t.target
                locals_[other] = Configuration(peer.data, peer_pool, peer.control)
                steps.add(
                    Step(
                        _pack(c1, c2),
                        frozenset(external),
                        _pack(*locals_),
                        t.overflow or overflow,
                    )
                )
    (d1, i1), (d2, i2) = s1.sm.initial, s2.sm.initial
    initial = (frozenset(itertools.product(d1, d2)), (i1, i2))
    return FlatStructure(env, SmStructure(initial, frozenset(steps)))


def _pack(c1: Configuration, c2: Configuration) -> Configuration:
    return Configuration((c1.data, c2.data), (c1.pool, c2.pool), (c1.control, c2.control))


def unpack(c: Configuration) -> tuple[Configuration, Configuration]:
    return (
        Configuration(c.data[0], c.pool[0], c.control[0]),
        Configuration(c.data[1], c.pool[1], c.control[1]),
    )


__all__ = [
    "COMPLETION",
    "CombinationError",
    "FlatMorphism",
    "FlatSignature",
    "FlatStructure",
    "Wiring",
    "combine_signatures",
    "flat_reduct",
    "interleave_product",
    "is_admissible",
    "merged_pool",
    "product_env",
    "project_env",
    "reduct_messages",
    "satisfies_flat",
    "translate_flat_sentence",
    "unpack",
]
