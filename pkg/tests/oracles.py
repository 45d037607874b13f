"""Reference implementations written directly from the definitions.

None of these reuse the engine's stepping code (Machine, Pool.select,
Pool.append, CompositeSystem); they only share the plain data types so
results can be compared with ``==``.
"""
from __future__ import annotations

import itertools

from instikit.sm import EVENT, Configuration, Pool, Step
from instikit.system import FIRE


def lanes(names, capacity):
    for n in range(capacity + 1):
        yield from itertools.product(sorted(names), repeat=n)


def _push(lane: tuple, items, capacity):
    out, over = list(lane), False
    for x in items:
        if capacity is not None and len(out) >= capacity:
            over = True
        else:
            out.append(x)
    return tuple(out), over


def naive_successors(env, sig, sentence, capacity, c: Configuration):
    """The firing and discard clauses for one configuration."""
    comps, evs = c.pool.completions, c.pool.events
    if comps:
        kind, name, comps, rest_evs = "completion", comps[0], comps[1:], evs
    elif evs:
        kind, name, comps, rest_evs = "event", evs[0], comps, evs[1:]
    else:
        return set()
    out = set()
    for t in sentence.transitions:
        if t.source != c.control or t.trigger.kind != kind or t.trigger.name != name:
            continue
        if c.data not in env.guard_interp[t.guard]:
            continue
        after, msgs = env.action_interp[t.action][c.data]
        own = sorted(m for m in msgs if m in sig.events)
        new_evs, o1 = _push(rest_evs, own, capacity)
        new_comps, o2 = _push(comps, [t.target], capacity)
        out.add(
            Step(c, frozenset(m for m in msgs if m not in sig.events), Configuration(after, Pool(new_comps, new_evs), t.target), o1 or o2)
        )
    if not out:
        out.add(Step(c, frozenset(), Configuration(c.data, Pool(comps, rest_evs), c.control), False))
    return out


def naive_delta(env, sig, sentence, capacity):
    steps = set()
    for s in sig.states:
        for w in env.carrier:
            for cl in lanes(sig.states, capacity):
                for el in lanes(sig.events, capacity):
                    if cl or el:
                        steps |= naive_successors(env, sig, sentence, capacity, Configuration(w, Pool(cl, el), s))
    return steps


def naive_fragment(env, sig, sentence, capacity, injection, initial_data):
    """Fixpoint closure (not BFS) of the configurations reachable from the injected pool."""
    pool = Pool((), tuple(injection))
    configs = {Configuration(w, pool, sentence.initial) for w in initial_data}
    steps = set()
    while True:
        new = set()
        for c in configs:
            for t in naive_successors(env, sig, sentence, capacity, c):
                steps.add(t)
                new.add(t.target)
        if new <= configs:
            return configs, steps
        configs |= new


def naive_system_reachable(system):
    """Reachable (locals, stimulus) pairs of a monitor-free composite system, with their distance."""
    insts = system.instances
    pos = {inst.name: i for i, inst in enumerate(insts)}

    def succ(cfg):
        locs, k = cfg
        out = []
        if k < len(system.stimuli) and (system.policy == "eager" or all(l.pool.size == 0 for l in locs)):
            name, ev = system.stimuli[k]
            i = pos[name]
            lane, _ = _push(locs[i].pool.events, [ev], system.capacity)
            new = list(locs)
            new[i] = Configuration(locs[i].data, Pool(locs[i].pool.completions, lane), locs[i].control)
            out.append((tuple(new), k + 1))
        for i, inst in enumerate(insts):
            m = inst.machine
            for t in naive_successors(m.env, m.sig, m.sentence, system.capacity, locs[i]):
                new = list(locs)
                new[i] = t.target
                for msg in sorted(t.emitted):
                    route = system.routes.get((inst.name, msg))
                    if route is None:
                        continue
                    j = pos[route[0]]
                    lane, _ = _push(new[j].pool.events, [route[1]], system.capacity)
                    new[j] = Configuration(new[j].data, Pool(new[j].pool.completions, lane), new[j].control)
                out.append((tuple(new), k))
        return out

    per = [sorted(Configuration(w, Pool(), inst.machine.sentence.initial) for w in inst.machine.initial_data) for inst in insts]
    frontier = {(tuple(combo), 0) for combo in itertools.product(*per)}
    depth = dict.fromkeys(frontier, 0)
    level = 0
    while frontier:
        level += 1
        nxt = set()
        for cfg in frontier:
            for s in succ(cfg):
                if s not in depth:
                    depth[s] = level
                    nxt.add(s)
        frontier = nxt
    return depth


def naive_satisfies_env(omega, s) -> bool:
    return all(
        omega.action_interp[s.action][w][0] in omega.guard_interp[s.post]
        and set(s.emits) <= set(omega.action_interp[s.action][w][1])
        for w in omega.carrier
        if w in omega.guard_interp[s.pre]
    )


def is_subsequence(pattern, seq) -> bool:
    it = iter(seq)
    return all(any(p == x for x in it) for p in pattern)


def port_observations(path, instance, port, alphabet):
    """Monitor input for one port, rebuilt from the raw witness moves."""
    out = []
    for m in path:
        if m.instance != instance or m.kind != FIRE:
            continue
        if m.consumed.kind == EVENT and m.consumed.name in alphabet:
            out.append((m.consumed.name, (), (), frozenset()))
        sent = sorted(
            [d.message for d in m.internal] + [x.split(".", 1)[1] for x in m.emitted]
        )
        for msg in sent:
            p, _, rest = msg.partition(".")
            if p == port:
                out.append((rest, (), (), frozenset()))
    return out
