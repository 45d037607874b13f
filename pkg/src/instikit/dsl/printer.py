"""Canonical printer; ``parse_model(print_model(m)) == m`` for every tree the parser can produce."""
from __future__ import annotations

from ..concrete import format_expr, format_stmt
from .ast import (
    ActionDef,
    AttachNode,
    ConnectNode,
    ConnectorCheck,
    EnvBlock,
    EventNode,
    ExternalNode,
    GuardDef,
    InitNode,
    InstNode,
    InteractionCheck,
    InvariantCheck,
    MachineBlock,
    ModelFile,
    MsgNode,
    PrePostCheck,
    ProtocolBlock,
    ProtoTransitionNode,
    StatesNode,
    StimulusNode,
    SystemBlock,
    TransitionNode,
    VarNode,
)

INDENT = "  "


def _ranges(ranges) -> str:
    return ", ".join(f"{r.lower}..{r.upper}" for r in ranges)


def _params(params) -> str:
    return "" if params is None else f"({', '.join(params)})"


def _body(stmts) -> str:
    """Body text including its terminator."""
    if not stmts:
        return "skip;"
    if len(stmts) == 1:
        return format_stmt(stmts[0]) + ";"
    inner = " ".join(format_stmt(s) + ";" for s in stmts)
    return "{ " + inner + " }"


def _item(node) -> str:
    if isinstance(node, VarNode):
        init = "" if node.init is None else f" = {node.init}"
        return f"var {node.name}: {node.lower}..{node.upper}{init};"
    if isinstance(node, MsgNode):
        return f"msg {node.port}.{node.name}({_ranges(node.ranges)});"
    if isinstance(node, GuardDef):
        return f"guard {node.name} = {format_expr(node.expr)};"
    if isinstance(node, ActionDef):
        return f"action {node.name} = {_body(node.body)}"
    if isinstance(node, InitNode):
        return f"init {node.state};"
    if isinstance(node, StatesNode):
        return f"state {', '.join(node.names)};"
    if isinstance(node, EventNode):
        ranges = f"({_ranges(node.ranges)})" if node.ranges else ""
        return f"event {node.name}{ranges};"
    if isinstance(node, TransitionNode):
        trigger = "complete" if node.trigger is None else node.trigger + _params(node.params)
        text = f"on {trigger} from {node.source} to {node.target}"
        if node.guard is not None:
            text += f" when {format_expr(node.guard)}"
        if node.action is None:
            return text + ";"
        return f"{text} do {_body(node.action)}"
    if isinstance(node, ProtoTransitionNode):
        text = f"on {node.trigger}{_params(node.params)} from {node.source} to {node.target}"
        if node.pre is not None:
            text += f" pre {format_expr(node.pre)}"
        if node.post is not None:
            text += f" post {format_expr(node.post)}"
        if node.sends:
            refs = ", ".join(
                f"{r.port}.{r.name}({', '.join(format_expr(a) for a in r.args)})" for r in node.sends
            )
            text += f" sends {{ {refs} }}"
        return text + ";"
    if isinstance(node, InstNode):
        return f"inst {node.name}: {node.type};"
    if isinstance(node, ConnectNode):
        return f"connect {node.left} -- {node.right};"
    if isinstance(node, ExternalNode):
        return f"external {node.port};"
    if isinstance(node, AttachNode):
        return f"protocol {node.port}: {node.protocol};"
    if isinstance(node, StimulusNode):
        args = f"({', '.join(str(a) for a in node.args)})" if node.args else ""
        return f"stimulus {node.instance}.{node.event}{args};"
    if isinstance(node, InvariantCheck):
        return f"check invariant {format_expr(node.expr)};"
    if isinstance(node, PrePostCheck):
        return (
            f"check prepost {node.instance}.{node.event}{_params(node.params)}"
            f" pre {format_expr(node.pre)} post {format_expr(node.post)};"
        )
    if isinstance(node, ConnectorCheck):
        return f"check connector {node.left} -- {node.right};"
    if isinstance(node, InteractionCheck):
        return f"check interaction {node.mode} [{'; '.join(str(p) for p in node.patterns)}];"
    raise TypeError(f"cannot print {type(node).__name__}")


def _block(node) -> str:
    if isinstance(node, EnvBlock):
        head = f"env {node.name}"
    elif isinstance(node, MachineBlock):
        head = f"machine {node.name} over {node.env}"
    elif isinstance(node, ProtocolBlock):
        head = f"protocol {node.name}" + (f" over {node.env}" if node.env else "")
    elif isinstance(node, SystemBlock):
        head = f"system {node.name}"
    else:
        raise TypeError(f"cannot print {type(node).__name__}")
    if not node.items:
        return head + " {\n}\n"
    lines = [head + " {"]
    lines += [INDENT + _item(i) for i in node.items]
    lines.append("}")
    return "\n".join(lines) + "\n"


def print_model(m: ModelFile) -> str:
    return "\n".join(_block(b) for b in m.blocks)
