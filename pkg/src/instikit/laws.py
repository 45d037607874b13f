"""Randomized law suites: satisfaction condition and functor laws per institution.

Instances are drawn from a seeded generator.  Sizes grow with the iteration
index, so the first failures found are small; every failing instance is
kept and the smallest one is reported.

Two morphism scopes exist for the machine institutions.  ``general`` draws
arbitrary injective event/state maps, as the definition of the institution
allows.  ``admissible`` draws morphisms satisfying ``flat.is_admissible``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

from .env import (
    EnvMorphism,
    EnvSentence,
    EnvSignature,
    EnvStructure,
    reduct_env,
    satisfies_env,
    translate_env_sentence,
)
from .flat import (
    FlatMorphism,
    FlatSignature,
    FlatStructure,
    flat_reduct,
    is_admissible,
    reduct_messages,
    satisfies_flat,
    translate_flat_sentence,
)
from .sm import (
    Completion,
    Event,
    SmMorphism,
    SmSentence,
    SmSignature,
    SmStructure,
    SmTransition,
    canonical_structure,
    reduct_sm,
    satisfies_sm,
    translate_sm_sentence,
)

GENERAL = "general"
ADMISSIBLE = "admissible"
INSTITUTIONS = ("env", "sm", "flat")
LAWS = ("satisfaction", "reduct-identity", "reduct-composition", "translation-identity", "translation-composition")


@dataclass(frozen=True)
class LawConfig:
    seed: int = 0
    iterations: int = 500
    scope: str = ADMISSIBLE
    broken_reduct: bool = False
    max_names: int = 3
    max_carrier: int = 4
    max_capacity: int = 2
    institutions: tuple[str, ...] = INSTITUTIONS


@dataclass
class Counterexample:
    institution: str
    law: str
    size: int
    detail: str


@dataclass
class LawOutcome:
    institution: str
    law: str
    checked: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def minimal(self) -> Counterexample | None:
        if not self.failures:
            return None
        return min(self.failures, key=lambda c: (c.size, len(c.detail), c.detail))


def broken_reduct_env(m: EnvMorphism, bigger: EnvStructure) -> EnvStructure:
    """A deliberately wrong reduct that forgets every emitted message."""
    good = reduct_env(m, bigger)
    actions = {a: {w: (nxt, frozenset()) for w, (nxt, _) in t.items()} for a, t in good.action_interp.items()}
    return EnvStructure(good.signature, good.carrier, good.guard_interp, actions)


# -- generators --------------------------------------------------------------

def _names(prefix: str, k: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(k)]


def _subset(rng: random.Random, items) -> frozenset:
    return frozenset(x for x in sorted(items) if rng.random() < 0.5)


def _cap(config: LawConfig, i: int, limit: int) -> int:
    """Size bound growing from 1 to ``limit`` over the iterations."""
    if config.iterations <= 0:
        return limit
    return min(limit, 1 + (limit * i) // config.iterations)


def rand_env_sig(rng, k: int, prefix: str = "", messages=None) -> EnvSignature:
    g = _names(prefix + "g", rng.randint(1, k))
    a = _names(prefix + "a", rng.randint(1, k))
    if messages is None:
        messages = _names(prefix + "m", rng.randint(0, k))
    return EnvSignature(frozenset(g), frozenset(a), frozenset(messages))


def rand_env_structure(rng, sig: EnvSignature, n: int) -> EnvStructure:
    carrier = list(range(n))
    guards = {g: _subset(rng, carrier) for g in sorted(sig.guards)}
    actions = {
        a: {w: (rng.choice(carrier), _subset(rng, sig.messages)) for w in carrier} for a in sorted(sig.actions)
    }
    return EnvStructure(sig, frozenset(carrier), guards, actions)


def rand_env_morphism(rng, src: EnvSignature, tgt: EnvSignature) -> EnvMorphism:
    def pick(names, image):
        image = sorted(image)
        return {n: rng.choice(image) for n in sorted(names)}

    return EnvMorphism(src, tgt, pick(src.guards, tgt.guards), pick(src.actions, tgt.actions), pick(src.messages, tgt.messages))


def rand_env_sentence(rng, sig: EnvSignature) -> EnvSentence:
    return EnvSentence(
        rng.choice(sorted(sig.guards)), rng.choice(sorted(sig.actions)), _subset(rng, sig.messages), rng.choice(sorted(sig.guards))
    )


def _env_size(sig: EnvSignature, st: EnvStructure | None = None) -> int:
    return len(sig.guards) + len(sig.actions) + len(sig.messages) + (len(st.carrier) if st else 0)


def rand_injection(rng, src: list[str], tgt: list[str]) -> dict:
    image = rng.sample(sorted(tgt), len(src))
    return dict(zip(sorted(src), image))


def rand_sm_sentence(rng, sig: SmSignature, env_sig: EnvSignature, max_transitions: int = 4) -> SmSentence:
    states = sorted(sig.states)
    triggers = [Event(e) for e in sorted(sig.events)] + [Completion(s) for s in states]
    ts = set()
    for _ in range(rng.randint(0, max_transitions)):
        ts.add(
            SmTransition(
                rng.choice(states), rng.choice(triggers), rng.choice(sorted(env_sig.guards)),
                rng.choice(sorted(env_sig.actions)), rng.choice(states),
            )
        )
    return SmSentence(rng.choice(states), frozenset(ts))


def pullback_sentence(sigma: SmMorphism, s: SmSentence) -> SmSentence | None:
    """The part of a target sentence expressible over the source signature."""
    st = {v: k for k, v in sigma.state_map.items()}
    ev = {v: k for k, v in sigma.event_map.items()}
    if s.initial not in st:
        return None
    ts = set()
    for t in s.transitions:
        if t.source not in st or t.target not in st:
            continue
        if t.trigger.kind == "event":
            if t.trigger.name not in ev:
                continue
            trig = Event(ev[t.trigger.name])
        elif t.trigger.name in st:
            trig = Completion(st[t.trigger.name])
        else:
            continue
        ts.add(SmTransition(st[t.source], trig, t.guard, t.action, st[t.target]))
    return SmSentence(st[s.initial], frozenset(ts))


def _perturb(rng, theta: SmStructure) -> SmStructure:
    if theta.transitions and rng.random() < 0.2:
        victim = rng.choice(sorted(theta.transitions))
        return theta.without(victim)
    return theta


def _sm_size(sig: SmSignature) -> int:
    return len(sig.events) + len(sig.states)


def _describe_sm(sigma: SmMorphism, s: SmSentence, capacity: int) -> str:
    return (
        f"events {dict(sorted(sigma.event_map.items()))} ; states {dict(sorted(sigma.state_map.items()))}"
        f" ; target events {sorted(sigma.target.events)} states {sorted(sigma.target.states)}"
        f" ; sentence init {s.initial} transitions {sorted(s.transitions)} ; capacity {capacity}"
    )


# -- env suite ---------------------------------------------------------------

def _record(out: dict, inst: str, law: str, ok: bool, size: int, detail: Callable[[], str]):
    o = out[law]
    o.checked += 1
    if not ok:
        o.failures.append(Counterexample(inst, law, size, detail()))


def env_suite(config: LawConfig) -> list[LawOutcome]:
    rng = random.Random(f"env/{config.seed}")
    reduct = broken_reduct_env if config.broken_reduct else reduct_env
    out = {law: LawOutcome("env", law) for law in LAWS}
    for i in range(config.iterations):
        k = _cap(config, i, config.max_names)
        n = _cap(config, i, config.max_carrier)
        tgt = rand_env_sig(rng, k, "T")
        src = rand_env_sig(rng, k, "", messages=None if tgt.messages else ())
        third = rand_env_sig(rng, k, "U", messages=_names("Um", rng.randint(1, k)))
        m = rand_env_morphism(rng, src, tgt)
        m2 = rand_env_morphism(rng, tgt, third)
        omega = rand_env_structure(rng, tgt, rng.randint(1, n))
        omega3 = rand_env_structure(rng, third, rng.randint(1, n))
        s = rand_env_sentence(rng, src)
        size = _env_size(src) + _env_size(tgt, omega)

        def detail(m=m, omega=omega, s=s):
            return (
                f"sentence {s} ; guards {m.guard_map} actions {m.action_map} messages {m.message_map}"
                f" ; target carrier {sorted(omega.carrier)} guards "
                f"{ {g: sorted(v) for g, v in sorted(omega.guard_interp.items())} } actions "
                f"{ {a: {w: (x, sorted(e)) for w, (x, e) in sorted(t.items())} for a, t in sorted(omega.action_interp.items())} }"
            )

        lhs = satisfies_env(reduct(m, omega), s)
        rhs = satisfies_env(omega, translate_env_sentence(m, s))
        _record(out, "env", "satisfaction", lhs == rhs, size, detail)
        ident = EnvMorphism.identity(tgt)
        _record(out, "env", "reduct-identity", reduct(ident, omega) == omega, _env_size(tgt, omega), detail)
        _record(
            out, "env", "reduct-composition",
            reduct(m.then(m2), omega3) == reduct(m, reduct(m2, omega3)), size + _env_size(third, omega3), detail,
        )
        _record(out, "env", "translation-identity", translate_env_sentence(EnvMorphism.identity(src), s) == s, size, detail)
        _record(
            out, "env", "translation-composition",
            translate_env_sentence(m.then(m2), s) == translate_env_sentence(m2, translate_env_sentence(m, s)),
            size, detail,
        )
    return list(out.values())


# -- sm suite ----------------------------------------------------------------

def _sm_env(rng, config: LawConfig, i: int, event_names) -> EnvStructure:
    k = min(2, _cap(config, i, config.max_names))
    n = min(3, _cap(config, i, config.max_carrier))
    pool = sorted(set(event_names) | {"n0"})
    sig = rand_env_sig(rng, k, "", messages=_subset(rng, pool))
    return rand_env_structure(rng, sig, rng.randint(1, n))


def _sm_target(rng, config: LawConfig, i: int) -> SmSignature:
    k = _cap(config, i, config.max_names)
    return SmSignature(
        frozenset(_names("e", rng.randint(0, min(2, k)))), frozenset(_names("S", rng.randint(1, k)))
    )


def _sm_morphism(rng, tgt: SmSignature, env_messages, scope: str) -> SmMorphism:
    """General: any injection.  Admissible: a bijection fixing events that double as messages."""
    if scope == ADMISSIBLE:
        ev_names = {}
        fresh = iter(_names("y", len(tgt.events)))
        for e in sorted(tgt.events):
            ev_names[e if e in env_messages else next(fresh)] = e
        st = dict(zip(_names("s", len(tgt.states)), rng.sample(sorted(tgt.states), len(tgt.states))))
        src = SmSignature(frozenset(ev_names), frozenset(st))
        return SmMorphism(src, tgt, ev_names, st)
    ne = rng.randint(0, len(tgt.events))
    ns = rng.randint(1, len(tgt.states))
    src_events = _names("x", ne)
    src_states = _names("s", ns)
    src = SmSignature(frozenset(src_events), frozenset(src_states))
    return SmMorphism(src, tgt, rand_injection(rng, src_events, sorted(tgt.events)), rand_injection(rng, src_states, sorted(tgt.states)))


def _sm_structure(rng, env: EnvStructure, sig: SmSignature, capacity: int):
    s = rand_sm_sentence(rng, sig, env.signature)
    return s, _perturb(rng, canonical_structure(env, sig, s, capacity))


def sm_suite(config: LawConfig) -> list[LawOutcome]:
    rng = random.Random(f"sm/{config.seed}/{config.scope}")
    out = {law: LawOutcome("sm", law) for law in LAWS}
    for i in range(config.iterations):
        tgt = _sm_target(rng, config, i)
        env = _sm_env(rng, config, i, tgt.events | {"x0"})
        capacity = rng.randint(1, config.max_capacity)
        sigma = _sm_morphism(rng, tgt, env.signature.messages, config.scope)
        sentence_t, theta = _sm_structure(rng, env, tgt, capacity)
        s = pullback_sentence(sigma, sentence_t) if rng.random() < 0.5 else None
        if s is None:
            s = rand_sm_sentence(rng, sigma.source, env.signature)
        if config.scope == ADMISSIBLE and not is_admissible(
            FlatMorphism(EnvMorphism.identity(env.signature), sigma)
        ):
            raise AssertionError("admissible generator produced an inadmissible morphism")
        size = _sm_size(tgt) + _sm_size(sigma.source) + len(env.carrier) + len(s.transitions)
        lhs = satisfies_sm(reduct_sm(sigma, theta), s, env, sigma.source, capacity)
        rhs = satisfies_sm(theta, translate_sm_sentence(sigma, s), env, tgt, capacity)
        _record(out, "sm", "satisfaction", lhs == rhs, size, lambda: _describe_sm(sigma, s, capacity) + f" ; reduct satisfies {lhs}, translation {rhs}")
        _record(out, "sm", "reduct-identity", reduct_sm(SmMorphism.identity(tgt), theta) == theta, size, lambda: _describe_sm(sigma, s, capacity))
        # compose sigma with an injection into a bigger third signature
        third = SmSignature(tgt.events | {"e_extra"}, tgt.states | {"S_extra"})
        tau = SmMorphism(tgt, third, {e: e for e in tgt.events}, {x: x for x in tgt.states})
        if rng.random() < 0.5:
            perm = rng.sample(sorted(third.states), len(third.states))
            tau = SmMorphism(tgt, third, tau.event_map, dict(zip(sorted(tgt.states), perm)))
        _, theta3 = _sm_structure(rng, env, third, capacity)
        _record(
            out, "sm", "reduct-composition",
            reduct_sm(sigma.then(tau), theta3) == reduct_sm(sigma, reduct_sm(tau, theta3)), size, lambda: _describe_sm(sigma, s, capacity),
        )
        _record(out, "sm", "translation-identity", translate_sm_sentence(SmMorphism.identity(sigma.source), s) == s, size, lambda: _describe_sm(sigma, s, capacity))
        _record(
            out, "sm", "translation-composition",
            translate_sm_sentence(sigma.then(tau), s) == translate_sm_sentence(tau, translate_sm_sentence(sigma, s)),
            size, lambda: _describe_sm(sigma, s, capacity),
        )
    return list(out.values())


# -- flat suite --------------------------------------------------------------

def _flat_morphism(rng, config: LawConfig, i: int, tgt_env: EnvSignature, tgt_sm: SmSignature) -> FlatMorphism:
    k = _cap(config, i, config.max_names)
    if config.scope == ADMISSIBLE:
        # order-preserving event renaming, bijective states
        ev = dict(zip(_names("f", len(tgt_sm.events)), sorted(tgt_sm.events)))
        st = dict(zip(_names("s", len(tgt_sm.states)), rng.sample(sorted(tgt_sm.states), len(tgt_sm.states))))
        src_sm = SmSignature(frozenset(ev), frozenset(st))
        sigma = SmMorphism(src_sm, tgt_sm, ev, st)
        inv = {v: k for k, v in ev.items()}
        msg_map = {inv[m]: m for m in tgt_env.messages & tgt_sm.events}
        plain = sorted(tgt_env.messages - tgt_sm.events)
        extra = rng.randint(0, k)
        for j, image in enumerate(plain + [rng.choice(plain) for _ in range(extra if plain else 0)]):
            msg_map[f"m{j}"] = image
        src_env = rand_env_sig(rng, k, "", messages=frozenset(msg_map))
        eta = EnvMorphism(
            src_env, tgt_env,
            {g: rng.choice(sorted(tgt_env.guards)) for g in sorted(src_env.guards)},
            {a: rng.choice(sorted(tgt_env.actions)) for a in sorted(src_env.actions)},
            msg_map,
        )
        return FlatMorphism(eta, sigma)
    ne = rng.randint(0, len(tgt_sm.events))
    ns = rng.randint(1, len(tgt_sm.states))
    src_sm = SmSignature(frozenset(_names("f", ne)), frozenset(_names("s", ns)))
    sigma = SmMorphism(
        src_sm, tgt_sm, rand_injection(rng, _names("f", ne), sorted(tgt_sm.events)),
        rand_injection(rng, _names("s", ns), sorted(tgt_sm.states)),
    )
    pool = sorted(set(_names("m", k)) | set(src_sm.events))
    src_env = rand_env_sig(rng, k, "", messages=_subset(rng, pool) if tgt_env.messages else frozenset())
    return FlatMorphism(rand_env_morphism(rng, src_env, tgt_env), sigma)


def _describe_flat(fm: FlatMorphism, s, capacity: int) -> str:
    eta = fm.env_part
    return (
        f"messages {dict(sorted(eta.message_map.items()))} ; guards {dict(sorted(eta.guard_map.items()))}"
        f" ; actions {dict(sorted(eta.action_map.items()))} ; " + _describe_sm(fm.sm_part, s, capacity)
        if isinstance(s, SmSentence)
        else f"messages {dict(sorted(eta.message_map.items()))} ; sentence {s}"
    )


def flat_suite(config: LawConfig) -> list[LawOutcome]:
    rng = random.Random(f"flat/{config.seed}/{config.scope}")
    reduct_e = broken_reduct_env if config.broken_reduct else reduct_env
    out = {law: LawOutcome("flat", law) for law in LAWS}

    def reduct(fm: FlatMorphism, st: FlatStructure) -> FlatStructure:
        if not config.broken_reduct:
            return flat_reduct(fm, st)
        return FlatStructure(reduct_e(fm.env_part, st.env), reduct_messages(fm.env_part, reduct_sm(fm.sm_part, st.sm)))

    for i in range(config.iterations):
        k = min(2, _cap(config, i, config.max_names))
        tgt_sm = _sm_target(rng, config, i)
        pool = sorted(tgt_sm.events | {"M0", "M1"})
        tgt_env = rand_env_sig(rng, k, "T", messages=_subset(rng, pool))
        omega = rand_env_structure(rng, tgt_env, rng.randint(1, min(3, _cap(config, i, config.max_carrier))))
        capacity = rng.randint(1, config.max_capacity)
        fm = _flat_morphism(rng, config, i, tgt_env, tgt_sm)
        sentence_t, theta = _sm_structure(rng, omega, tgt_sm, capacity)
        target = FlatStructure(omega, theta)
        sig = fm.source
        roll = rng.random()
        if roll < 0.3:
            s = rand_env_sentence(rng, sig.env)
        else:
            s = None
            if roll < 0.65:
                pulled = pullback_sentence(fm.sm_part, sentence_t)
                if pulled is not None:
                    g_inv, a_inv = {}, {}
                    for g, v in sorted(fm.env_part.guard_map.items()):
                        g_inv.setdefault(v, g)
                    for a, v in sorted(fm.env_part.action_map.items()):
                        a_inv.setdefault(v, a)
                    if all(t.guard in g_inv and t.action in a_inv for t in pulled.transitions):
                        s = SmSentence(
                            pulled.initial,
                            frozenset(
                                SmTransition(t.source, t.trigger, g_inv[t.guard], a_inv[t.action], t.target)
                                for t in pulled.transitions
                            ),
                        )
            if s is None:
                s = rand_sm_sentence(rng, sig.sm, sig.env)
        size = _sm_size(tgt_sm) + _env_size(tgt_env, omega) + _env_size(sig.env) + _sm_size(sig.sm)
        lhs = satisfies_flat(reduct(fm, target), sig, s, capacity)
        rhs = satisfies_flat(target, fm.target, translate_flat_sentence(fm, s), capacity)
        _record(out, "flat", "satisfaction", lhs == rhs, size, lambda: _describe_flat(fm, s, capacity) + f" ; reduct satisfies {lhs}, translation {rhs}")
        ident = FlatMorphism.identity(fm.target)
        _record(out, "flat", "reduct-identity", reduct(ident, target) == target, size, lambda: _describe_flat(fm, s, capacity))
        inner = FlatMorphism.identity(fm.source)
        _record(
            out, "flat", "reduct-composition",
            reduct(inner.then(fm), target) == reduct(inner, reduct(fm, target)), size, lambda: _describe_flat(fm, s, capacity),
        )
        _record(out, "flat", "translation-identity", translate_flat_sentence(inner, s) == s, size, lambda: _describe_flat(fm, s, capacity))
        _record(
            out, "flat", "translation-composition",
            translate_flat_sentence(fm.then(ident), s) == translate_flat_sentence(ident, translate_flat_sentence(fm, s)),
            size, lambda: _describe_flat(fm, s, capacity),
        )
        if config.scope == ADMISSIBLE and not is_admissible(fm):
            raise AssertionError("admissible generator produced an inadmissible morphism")
    return list(out.values())


SUITES = {"env": env_suite, "sm": sm_suite, "flat": flat_suite}


def run_laws(config: LawConfig = LawConfig()) -> list[LawOutcome]:
    out = []
    for name in config.institutions:
        out.extend(SUITES[name](config))
    return out


def format_outcome(o: LawOutcome) -> str:
    status = "ok" if o.passed else "FAIL"
    line = f"{status:4} {o.institution:4} {o.law:24} {o.checked - len(o.failures)}/{o.checked}"
    if not o.passed:
        c = o.minimal
        line += f"\n     minimal counterexample (size {c.size}): {c.detail}"
    return line
