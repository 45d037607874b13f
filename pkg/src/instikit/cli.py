"""Batch front end: ``instikit check | simulate | product | laws | fmt``.

Exit codes: 0 pass, 1 fail, 2 parse/resolve/usage errors, 3 inconclusive.
Reports go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .checks import (
    DEFAULT_BUDGET,
    FAIL,
    INCONCLUSIVE,
    PASS,
    RunOptions,
    build_system,
    render_config,
    run_system_checks,
    static_instance_check,
    static_interface_check,
)
from .concrete import ground_name, split_ground
from .dsl import DslError, parse_model, print_model, resolve
from .laws import ADMISSIBLE, GENERAL, INSTITUTIONS, LawConfig, format_outcome, run_laws
from .sm import Event
from .system import EAGER, QUIESCENT, describe_fired, reachable_system

TOOL = "instikit"
EXIT_PASS, EXIT_FAIL, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2, 3


@dataclass
class RunConfig:
    paths: list = field(default_factory=list)
    selected: tuple = ()
    capacity: int = 4
    budget: int = DEFAULT_BUDGET
    format: str = "text"
    seed: int = 0
    policy: str = QUIESCENT

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be at least 1")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")


class UsageError(Exception):
    pass


# -- output helpers ----------------------------------------------------------

def _color_enabled(stream) -> bool:
    return os.environ.get("INSTIKIT_COLOR", "1") != "0" and hasattr(stream, "isatty") and stream.isatty()


_STYLE = {PASS: "32", FAIL: "31", INCONCLUSIVE: "33"}


def _verdict(v: str, stream) -> str:
    text = v.upper()
    if _color_enabled(stream) and v in _STYLE:
        return f"\033[{_STYLE[v]}m{text}\033[0m"
    return text


def _diag(msg: str) -> None:
    print(msg, file=sys.stderr)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def load_model(path: str):
    """Parse and resolve one file; raises UsageError with printed diagnostics."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{path}: no such file")
    text = p.read_text(encoding="utf-8", errors="replace")
    try:
        tree = parse_model(text)
        return tree, resolve(tree)
    except DslError as exc:
        raise UsageError("\n".join(f"{path}:{d}" for d in exc.diagnostics)) from None


# -- check -------------------------------------------------------------------

def _exit_for(verdicts) -> int:
    if FAIL in verdicts:
        return EXIT_FAIL
    if INCONCLUSIVE in verdicts:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


def _text_step(step: dict) -> str:
    cfg = step["config"]
    parts = []
    for name, inst in cfg["instances"].items():
        store = ", ".join(f"{k}={v}" for k, v in inst["store"].items())
        parts.append(f"{name}:{inst['control']} pool[{', '.join(inst['pool'])}] {{{store}}}")
    if "monitors" in cfg:
        parts.append("monitors " + ", ".join(f"{k}={v}" for k, v in cfg["monitors"].items()))
    if step["kind"] == "initial":
        return f"  0. initial  " + " | ".join(parts)
    what = step["consumed"] or ""
    if step.get("fired"):
        what += f" via {step['fired']}"
    extra = ""
    if step["emitted"]:
        extra += f" emits {{{', '.join(step['emitted'])}}}"
    if step["internal"]:
        extra += f" delivers [{'; '.join(step['internal'])}]"
    if step["overflow"]:
        extra += " OVERFLOW"
    return f"  {step['step']}. {step['instance']} {step['kind']} {what}{extra}\n     " + " | ".join(parts)


def cmd_check(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    reports = []
    try:
        for path in config.paths:
            _, model = load_model(path)
            for sysm in model.systems.values():
                opts = RunOptions(config.capacity, config.budget, config.policy, tuple(config.selected))
                reports.extend(run_system_checks(model, sysm, opts))
    except UsageError as exc:
        _diag(str(exc))
        return EXIT_ERROR
    if config.format == "json":
        doc = {"tool": TOOL, "version": __version__, "checks": [r.to_json() for r in reports]}
        print(_dump(doc), file=out)
    else:
        for r in reports:
            stats = ", ".join(f"{k}={v}" for k, v in sorted(r.stats.items()))
            print(f"{_verdict(r.verdict, out):12} {r.id} ({stats})" if stats else f"{_verdict(r.verdict, out):12} {r.id}", file=out)
            for n in r.notes:
                print(f"  note: {n}", file=out)
            if r.witness:
                print("  witness:", file=out)
                for step in r.witness:
                    print(_text_step(step), file=out)
        counts = {v: sum(r.verdict == v for r in reports) for v in (PASS, FAIL, INCONCLUSIVE)}
        print(f"{len(reports)} checks: {counts[PASS]} pass, {counts[FAIL]} fail, {counts[INCONCLUSIVE]} inconclusive", file=out)
    return _exit_for({r.verdict for r in reports})


# -- simulate ----------------------------------------------------------------

def _find_machine(model, name: str):
    if name in model.machines:
        return model.machines[name]
    for sysm in model.systems.values():
        for item in sysm.block.items:
            if type(item).__name__ == "InstNode" and item.name == name:
                return model.machines.get(item.type)
    raise UsageError(f"unknown machine or instance {name!r}")


def _parse_stimulus(mm, text: str) -> str:
    text = "".join(text.split())
    try:
        base, args = split_ground(text)
    except ValueError:
        raise UsageError(f"malformed stimulus {text!r}") from None
    ground = ground_name(base, args)
    if ground not in mm.sig.events:
        raise UsageError(f"stimulus {ground!r} is not in the alphabet of {mm.name}")
    return ground


def _local_state(mm, c) -> dict:
    return {
        "control": c.control,
        "pool": [str(i) for i in c.pool.items()],
        "store": dict(zip(mm.concrete.names, c.data)),
    }


def simulate(mm, stimuli, steps: int, capacity: int) -> dict:
    """Deterministic run: first initial store, first move in sorted order."""
    machine = mm.build(capacity)
    configs = machine.initial_configs([Event(s) for s in stimuli])
    notes = []
    if len(configs) > 1:
        notes.append(f"{len(configs)} initial stores; using the least")
    c = configs[0]
    trace = [{"step": 0, **_local_state(mm, c)}]
    for k in range(1, steps + 1):
        moves = machine.moves(c)
        if not moves:
            notes.append(f"pool empty after {k - 1} steps")
            break
        if len(moves) > 1:
            notes.append(f"step {k}: {len(moves)} enabled moves; took the first")
        m = moves[0]
        c = m.target
        trace.append(
            {
                "step": k,
                "consumed": str(m.consumed),
                "fired": describe_fired(m.fired) or None,
                "emitted": sorted(m.emitted),
                "overflow": m.overflow,
                **_local_state(mm, c),
            }
        )
    return {"tool": TOOL, "version": __version__, "machine": mm.name, "trace": trace, "notes": notes}


def cmd_simulate(path: str, name: str, stimuli, steps: int, config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    try:
        _, model = load_model(path)
        mm = _find_machine(model, name)
        if mm is None:
            raise UsageError(f"instance {name!r} has an unknown type")
        ground = [_parse_stimulus(mm, s) for s in stimuli]
    except UsageError as exc:
        _diag(str(exc))
        return EXIT_ERROR
    doc = simulate(mm, ground, steps, config.capacity)
    if config.format == "json":
        print(_dump(doc), file=out)
        return EXIT_PASS
    for st in doc["trace"]:
        store = ", ".join(f"{k}={v}" for k, v in st["store"].items())
        state = f"{st['control']} pool[{', '.join(st['pool'])}] {{{store}}}"
        if st["step"] == 0:
            print(f"0. {state}", file=out)
            continue
        what = st["consumed"] + (f" via {st['fired']}" if st["fired"] else " discarded")
        emits = f" emits {{{', '.join(st['emitted'])}}}" if st["emitted"] else ""
        print(f"{st['step']}. {what}{emits}{' OVERFLOW' if st['overflow'] else ''}\n   {state}", file=out)
    for n in doc["notes"]:
        print(f"note: {n}", file=out)
    return EXIT_PASS


# -- product -----------------------------------------------------------------

def product_fragment(model, sysm, capacity: int, budget: int, policy: str = QUIESCENT) -> dict:
    system = build_system(model, sysm, capacity, policy=policy)
    initial, configs, edges, complete = reachable_system(system, budget)
    ids = {c: k for k, c in enumerate(configs)}
    return {
        "tool": TOOL,
        "version": __version__,
        "system": sysm.name,
        "capacity": capacity,
        "policy": policy,
        "complete": complete,
        "initial": [ids[c] for c in initial],
        "configurations": [{"id": ids[c], **render_config(system, c)} for c in configs],
        "transitions": [
            {
                "source": ids[c],
                "target": ids[m.target],
                "instance": m.instance,
                "kind": m.kind,
                "consumed": None if m.consumed is None else str(m.consumed),
                "fired": describe_fired(m.fired) or None,
                "emitted": sorted(m.emitted),
                "internal": [str(d) for d in m.internal],
                "overflow": m.overflow,
            }
            for c, m in edges
            if m.target in ids
        ],
    }


def cmd_product(path: str, system_name: str | None, out_path: str | None, config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    try:
        _, model = load_model(path)
        if system_name is None:
            if len(model.systems) != 1:
                raise UsageError(f"{path}: choose a system with --system ({', '.join(model.systems) or 'none declared'})")
            system_name = next(iter(model.systems))
        if system_name not in model.systems:
            raise UsageError(f"unknown system {system_name!r}")
        sysm = model.systems[system_name]
        problems = [r for r in (static_instance_check(model, sysm), static_interface_check(model, sysm)) if r.verdict != PASS]
        if problems:
            raise UsageError("\n".join(f"{r.id}: {n}" for r in problems for n in r.notes))
    except UsageError as exc:
        _diag(str(exc))
        return EXIT_ERROR
    doc = product_fragment(model, sysm, config.capacity, config.budget, config.policy)
    text = _dump(doc) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    if not doc["complete"]:
        _diag(f"budget of {config.budget} configurations exhausted; fragment is partial")
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


# -- laws --------------------------------------------------------------------

def cmd_laws(config: LawConfig, fmt: str = "text", out=None) -> int:
    out = out or sys.stdout
    outcomes = run_laws(config)
    ok = all(o.passed for o in outcomes)
    if fmt == "json":
        doc = {
            "tool": TOOL,
            "version": __version__,
            "seed": config.seed,
            "scope": config.scope,
            "laws": [
                {
                    "institution": o.institution,
                    "law": o.law,
                    "checked": o.checked,
                    "failed": len(o.failures),
                    "counterexample": None if o.passed else {"size": o.minimal.size, "detail": o.minimal.detail},
                }
                for o in outcomes
            ],
        }
        print(_dump(doc), file=out)
    else:
        for o in outcomes:
            print(format_outcome(o), file=out)
        print(f"scope {config.scope}, seed {config.seed}: {'all laws hold' if ok else 'law violations found'}", file=out)
    return EXIT_PASS if ok else EXIT_FAIL


# -- fmt ---------------------------------------------------------------------

def cmd_fmt(paths, check: bool = False, write: bool = False, out=None) -> int:
    out = out or sys.stdout
    status = EXIT_PASS
    for path in paths:
        p = Path(path)
        if not p.is_file():
            _diag(f"{path}: no such file")
            return EXIT_ERROR
        text = p.read_text(encoding="utf-8", errors="replace")
        try:
            pretty = print_model(parse_model(text))
        except DslError as exc:
            _diag("\n".join(f"{path}:{d}" for d in exc.diagnostics))
            return EXIT_ERROR
        if check:
            if pretty != text:
                print(f"{path}: not canonically formatted", file=out)
                status = EXIT_FAIL
        elif write:
            if pretty != text:
                p.write_text(pretty, encoding="utf-8")
        else:
            out.write(pretty)
    return status


# -- argument parsing --------------------------------------------------------

def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--capacity", type=_positive, default=4, help="event pool capacity (default 4)")
    common.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET, help="configuration budget (default 100000)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--check", action="append", default=[], metavar="ID", help="run only this check (repeatable)")
    common.add_argument("--policy", choices=(QUIESCENT, EAGER), default=QUIESCENT, help="when stimuli are delivered")

    p = argparse.ArgumentParser(prog=TOOL, description="State machine institutions and consistency checks.")
    p.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="run static and dynamic checks")
    c.add_argument("paths", nargs="+")

    s = sub.add_parser("simulate", parents=[common], help="print a deterministic run of one machine")
    s.add_argument("path")
    s.add_argument("machine", help="machine type or instance name")
    s.add_argument("stimuli", nargs="*", help="ground events injected into the initial pool, e.g. 'card(1)'")
    s.add_argument("--steps", type=_nonneg, default=10)

    pr = sub.add_parser("product", parents=[common], help="write the reachable product fragment as JSON")
    pr.add_argument("path")
    pr.add_argument("--system")
    pr.add_argument("-o", "--output")

    la = sub.add_parser("laws", parents=[common], help="randomized institution-law suites")
    la.add_argument("--iterations", type=_nonneg, default=500)
    la.add_argument("--scope", choices=(ADMISSIBLE, GENERAL), default=ADMISSIBLE)
    la.add_argument("--institution", action="append", choices=INSTITUTIONS, default=[])
    la.add_argument("--demo-broken-reduct", action="store_true", help="use a reduct that drops emitted messages")

    f = sub.add_parser("fmt", help="print models in canonical form")
    f.add_argument("paths", nargs="+")
    mode = f.add_mutually_exclusive_group()
    mode.add_argument("--check", action="store_true", help="exit 1 if a file is not canonical")
    mode.add_argument("--write", action="store_true", help="rewrite files in place")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_ERROR
    if args.command == "fmt":
        return cmd_fmt(args.paths, args.check, args.write)
    config = RunConfig(
        getattr(args, "paths", []), tuple(args.check), args.capacity, args.budget, args.format, args.seed, args.policy
    )
    if args.command == "check":
        return cmd_check(config)
    if args.command == "simulate":
        return cmd_simulate(args.path, args.machine, args.stimuli, args.steps, config)
    if args.command == "product":
        return cmd_product(args.path, args.system, args.output, config)
    laws = LawConfig(
        seed=args.seed,
        iterations=args.iterations,
        scope=args.scope,
        broken_reduct=args.demo_broken_reduct,
        institutions=tuple(args.institution) or INSTITUTIONS,
    )
    return cmd_laws(laws, args.format)


if __name__ == "__main__":
    sys.exit(main())
