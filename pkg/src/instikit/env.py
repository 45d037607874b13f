"""Environment institution: guards, actions and messages over finite data states.

A signature ``H = (G, A, M)`` names guards, actions and messages.  A structure
interprets guards as sets of data states and actions as total deterministic
functions ``state -> (state, emitted messages)``.  Sentences are dynamic-logic
formulas ``pre -> [action] msgs |> post``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping

State = Hashable


class IllFormedSentence(ValueError):
    """A sentence or morphism mentions a name outside its signature."""


def _frozen(names) -> frozenset[str]:
    return frozenset(names)


@dataclass(frozen=True)
class EnvSignature:
    guards: frozenset[str] = frozenset()
    actions: frozenset[str] = frozenset()
    messages: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "guards", _frozen(self.guards))
        object.__setattr__(self, "actions", _frozen(self.actions))
        object.__setattr__(self, "messages", _frozen(self.messages))


@dataclass(frozen=True, eq=False)
class EnvMorphism:
    """Triple of total maps between guard, action and message names."""

    source: EnvSignature
    target: EnvSignature
    guard_map: Mapping[str, str]
    action_map: Mapping[str, str]
    message_map: Mapping[str, str]

    def __post_init__(self):
        for kind, names, image, mapping in (
            ("guard", self.source.guards, self.target.guards, self.guard_map),
            ("action", self.source.actions, self.target.actions, self.action_map),
            ("message", self.source.messages, self.target.messages, self.message_map),
        ):
            if set(mapping) != set(names):
                raise IllFormedSentence(f"{kind} map is not total on the source signature")
            stray = {v for v in mapping.values() if v not in image}
            if stray:
                raise IllFormedSentence(f"{kind} map leaves the target signature: {sorted(stray)}")
        object.__setattr__(self, "guard_map", dict(self.guard_map))
        object.__setattr__(self, "action_map", dict(self.action_map))
        object.__setattr__(self, "message_map", dict(self.message_map))

    def __eq__(self, other):
        if not isinstance(other, EnvMorphism):
            return NotImplemented
        return (
            self.source == other.source
            and self.target == other.target
            and self.guard_map == other.guard_map
            and self.action_map == other.action_map
            and self.message_map == other.message_map
        )

    @classmethod
    def identity(cls, sig: EnvSignature) -> "EnvMorphism":
        return cls(
            sig,
            sig,
            {g: g for g in sig.guards},
            {a: a for a in sig.actions},
            {m: m for m in sig.messages},
        )

    def then(self, other: "EnvMorphism") -> "EnvMorphism":
        """Diagrammatic composition: first ``self``, then ``other``."""
        if self.target != other.source:
            raise IllFormedSentence("morphisms are not composable")
        return EnvMorphism(
            self.source,
            other.target,
            {g: other.guard_map[v] for g, v in self.guard_map.items()},
            {a: other.action_map[v] for a, v in self.action_map.items()},
            {m: other.message_map[v] for m, v in self.message_map.items()},
        )

    def message_image(self, msgs) -> frozenset[str]:
        return frozenset(self.message_map[m] for m in msgs)

    def message_preimage(self, msgs) -> frozenset[str]:
        msgs = frozenset(msgs)
        return frozenset(m for m, v in self.message_map.items() if v in msgs)


@dataclass(frozen=True, eq=False)
class EnvStructure:
    """Finite model of an environment signature.

    ``action_interp[a]`` is a table from every carrier state to
    ``(next_state, emitted)``; missing entries are filled with the identity
    emitting nothing, so the interpretation is total.
    """

    signature: EnvSignature
    carrier: frozenset
    guard_interp: Mapping[str, frozenset]
    action_interp: Mapping[str, Mapping[State, tuple[State, frozenset[str]]]] = field(
        default_factory=dict
    )

    def __post_init__(self):
        carrier = frozenset(self.carrier)
        object.__setattr__(self, "carrier", carrier)
        sig = self.signature
        missing = sig.guards - set(self.guard_interp)
        if missing:
            raise ValueError(f"guards without interpretation: {sorted(missing)}")
        guards = {}
        for g in sig.guards:
            states = frozenset(self.guard_interp[g])
            if not states <= carrier:
                raise ValueError(f"guard {g!r} denotes states outside the carrier")
            guards[g] = states
        actions = {}
        for a in sig.actions:
            table = dict(self.action_interp.get(a, {}))
            full = {}
            for w in carrier:
                nxt, emitted = table.get(w, (w, frozenset()))
                emitted = frozenset(emitted)
                if nxt not in carrier:
                    raise ValueError(f"action {a!r} leaves the carrier")
                if not emitted <= sig.messages:
                    raise ValueError(f"action {a!r} emits undeclared messages {sorted(emitted - sig.messages)}")
                full[w] = (nxt, emitted)
            actions[a] = full
        object.__setattr__(self, "guard_interp", guards)
        object.__setattr__(self, "action_interp", actions)

    def __eq__(self, other):
        if not isinstance(other, EnvStructure):
            return NotImplemented
        return (
            self.signature == other.signature
            and self.carrier == other.carrier
            and self.guard_interp == other.guard_interp
            and self.action_interp == other.action_interp
        )

    def holds(self, guard: str, state: State) -> bool:
        return state in self.guard_interp[guard]

    def run(self, action: str, state: State) -> tuple[State, frozenset[str]]:
        return self.action_interp[action][state]


@dataclass(frozen=True)
class EnvSentence:
    """``pre -> [action] emits |> post``."""

    pre: str
    action: str
    emits: frozenset[str]
    post: str

    def __post_init__(self):
        object.__setattr__(self, "emits", frozenset(self.emits))

    def check(self, sig: EnvSignature) -> None:
        if self.pre not in sig.guards or self.post not in sig.guards:
            raise IllFormedSentence(f"unknown guard in {self}")
        if self.action not in sig.actions:
            raise IllFormedSentence(f"unknown action {self.action!r}")
        if not self.emits <= sig.messages:
            raise IllFormedSentence(f"unknown messages {sorted(self.emits - sig.messages)}")

    def __str__(self):
        msgs = ", ".join(sorted(self.emits))
        return f"{self.pre} -> [{self.action}]{{{msgs}}} |> {self.post}"


def translate_env_sentence(m: EnvMorphism, s: EnvSentence) -> EnvSentence:
    s.check(m.source)
    return EnvSentence(
        m.guard_map[s.pre],
        m.action_map[s.action],
        m.message_image(s.emits),
        m.guard_map[s.post],
    )


def reduct_env(m: EnvMorphism, bigger: EnvStructure) -> EnvStructure:
    if bigger.signature != m.target:
        raise IllFormedSentence("structure is not over the morphism's target")
    guards = {g: bigger.guard_interp[m.guard_map[g]] for g in m.source.guards}
    actions = {}
    for a in m.source.actions:
        table = bigger.action_interp[m.action_map[a]]
        actions[a] = {w: (nxt, m.message_preimage(out)) for w, (nxt, out) in table.items()}
    return EnvStructure(m.source, bigger.carrier, guards, actions)


def satisfies_env(omega: EnvStructure, s: EnvSentence) -> bool:
    s.check(omega.signature)
    post = omega.guard_interp[s.post]
    table = omega.action_interp[s.action]
    for w in omega.guard_interp[s.pre]:
        nxt, out = table[w]
        if nxt not in post or not s.emits <= out:
            return False
    return True
