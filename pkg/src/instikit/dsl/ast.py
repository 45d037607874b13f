"""Syntax tree of model files.

Every node carries a ``span`` that is ignored by equality, so trees obtained
from different texts compare structurally.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple


class Span(NamedTuple):
    line: int
    column: int
    length: int = 1

    def __str__(self):
        return f"{self.line}:{self.column}"


def _span():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Range:
    lower: int
    upper: int


# -- env ---------------------------------------------------------------------

@dataclass(frozen=True)
class VarNode:
    name: str
    lower: int
    upper: int
    init: int | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class MsgNode:
    port: str
    name: str
    ranges: tuple[Range, ...] = ()
    span: Span | None = _span()


@dataclass(frozen=True)
class GuardDef:
    name: str
    expr: object
    span: Span | None = _span()


@dataclass(frozen=True)
class ActionDef:
    name: str
    body: tuple
    span: Span | None = _span()


@dataclass(frozen=True)
class EnvBlock:
    name: str
    items: tuple = ()
    span: Span | None = _span()


# -- machines ----------------------------------------------------------------

@dataclass(frozen=True)
class InitNode:
    state: str
    span: Span | None = _span()


@dataclass(frozen=True)
class StatesNode:
    names: tuple[str, ...]
    span: Span | None = _span()


@dataclass(frozen=True)
class EventNode:
    name: str
    ranges: tuple[Range, ...] = ()
    span: Span | None = _span()


@dataclass(frozen=True)
class TransitionNode:
    """``trigger`` is None for a completion transition; ``params`` is None
    when the trigger is written without a parameter list."""

    trigger: str | None
    params: tuple[str, ...] | None
    source: str
    target: str
    guard: object | None = None
    action: tuple | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class MachineBlock:
    name: str
    env: str
    items: tuple = ()
    span: Span | None = _span()


@dataclass(frozen=True)
class MsgRef:
    port: str
    name: str
    args: tuple = ()
    span: Span | None = _span()


@dataclass(frozen=True)
class ProtoTransitionNode:
    trigger: str
    params: tuple[str, ...] | None
    source: str
    target: str
    pre: object | None = None
    post: object | None = None
    sends: tuple[MsgRef, ...] | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class ProtocolBlock:
    name: str
    env: str | None
    items: tuple = ()
    span: Span | None = _span()


# -- systems -----------------------------------------------------------------

@dataclass(frozen=True)
class PortRef:
    instance: str
    port: str
    span: Span | None = _span()

    def __str__(self):
        return f"{self.instance}.{self.port}"


@dataclass(frozen=True)
class InstNode:
    name: str
    type: str
    span: Span | None = _span()


@dataclass(frozen=True)
class ConnectNode:
    left: PortRef
    right: PortRef
    span: Span | None = _span()


@dataclass(frozen=True)
class ExternalNode:
    port: PortRef
    span: Span | None = _span()


@dataclass(frozen=True)
class AttachNode:
    """``protocol i.p: P;`` puts protocol ``P`` on port ``i.p``."""

    port: PortRef
    protocol: str
    span: Span | None = _span()


@dataclass(frozen=True)
class StimulusNode:
    instance: str
    event: str
    args: tuple[int, ...] = ()
    span: Span | None = _span()


@dataclass(frozen=True)
class InvariantCheck:
    expr: object
    span: Span | None = _span()


@dataclass(frozen=True)
class PrePostCheck:
    instance: str
    event: str
    params: tuple[str, ...] | None
    pre: object
    post: object
    span: Span | None = _span()


@dataclass(frozen=True)
class ConnectorCheck:
    left: PortRef
    right: PortRef
    span: Span | None = _span()


@dataclass(frozen=True)
class Pattern:
    instance: str
    port: str
    name: str
    args: tuple[int, ...] | None = None
    span: Span | None = _span()

    def __str__(self):
        base = f"{self.instance}.{self.port}.{self.name}"
        if self.args is None:
            return base
        return f"{base}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class InteractionCheck:
    mode: str
    patterns: tuple[Pattern, ...] = ()
    span: Span | None = _span()


@dataclass(frozen=True)
class SystemBlock:
    name: str
    items: tuple = ()
    span: Span | None = _span()


@dataclass(frozen=True)
class ModelFile:
    blocks: tuple = ()


CHECK_NODES = (InvariantCheck, PrePostCheck, ConnectorCheck, InteractionCheck)
