"""Recursive-descent parser with item-level error recovery."""
from __future__ import annotations

from ..concrete import Assign, Binary, Bool, CallAction, Name, Num, Send, Unary
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
    MsgRef,
    Pattern,
    PortRef,
    PrePostCheck,
    ProtocolBlock,
    ProtoTransitionNode,
    Range,
    Span,
    StatesNode,
    StimulusNode,
    SystemBlock,
    TransitionNode,
    VarNode,
)
from .lexer import EOF, IDENT, INT, KEYWORD, SYMBOL, Diagnostic, DslError, Token, tokenize

MAX_DEPTH = 64
BLOCK_KEYWORDS = ("env", "machine", "protocol", "system")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")


class _Syntax(Exception):
    def __init__(self, message: str, span: Span):
        super().__init__(message)
        self.diag = Diagnostic("error", message, span)


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == EOF else repr(tok.text)


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.diags: list[Diagnostic] = []
        self.depth = 0

    # -- token helpers -------------------------------------------------------
    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.peek()
        if tok.kind != EOF:
            self.pos += 1
        return tok

    def at(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.kind in (SYMBOL, KEYWORD) and tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            tok = self.peek()
            raise _Syntax(f"expected {text!r}, found {_describe(tok)}", tok.span)
        return self.advance()

    def ident(self, what: str = "identifier") -> str:
        tok = self.peek()
        if tok.kind != IDENT:
            raise _Syntax(f"expected {what}, found {_describe(tok)}", tok.span)
        self.advance()
        return tok.text

    def integer(self) -> int:
        neg = self.accept("-")
        tok = self.peek()
        if tok.kind != INT:
            raise _Syntax(f"expected integer, found {_describe(tok)}", tok.span)
        self.advance()
        value = int(tok.text)
        return -value if neg else value

    def range_(self) -> Range:
        tok = self.peek()
        lo = self.integer()
        self.expect("..")
        hi = self.integer()
        if lo > hi:
            raise _Syntax(f"empty range {lo}..{hi}", tok.span)
        return Range(lo, hi)

    def comma_list(self, item, close: str) -> tuple:
        out = []
        if self.at(close):
            self.advance()
            return ()
        while True:
            out.append(item())
            if self.accept(close):
                return tuple(out)
            self.expect(",")

    # -- recovery ------------------------------------------------------------
    def sync_item(self):
        """Skip to just after the next ``;`` or to the ``}`` closing the block."""
        depth = 0
        while True:
            tok = self.peek()
            if tok.kind == EOF:
                return
            if tok.kind == SYMBOL:
                if tok.text in ("{", "(", "["):
                    depth += 1
                elif tok.text in (")", "]"):
                    depth = max(0, depth - 1)
                elif tok.text == "}":
                    if depth == 0:
                        return
                    depth -= 1
                elif tok.text == ";" and depth == 0:
                    self.advance()
                    return
            self.advance()

    def sync_top(self):
        depth = 0
        while True:
            tok = self.peek()
            if tok.kind == EOF:
                return
            if depth == 0 and tok.kind == KEYWORD and tok.text in BLOCK_KEYWORDS and self.peek(1).kind == IDENT:
                return
            if tok.kind == SYMBOL and tok.text == "{":
                depth += 1
            elif tok.kind == SYMBOL and tok.text == "}":
                depth = max(0, depth - 1)
                if depth == 0:
                    self.advance()
                    return
            self.advance()

    # -- file and blocks -----------------------------------------------------
    def parse_file(self) -> ModelFile:
        blocks = []
        while self.peek().kind != EOF:
            tok = self.peek()
            try:
                if self.at("env"):
                    blocks.append(self.env_block())
                elif self.at("machine"):
                    blocks.append(self.machine_block())
                elif self.at("protocol"):
                    blocks.append(self.protocol_block())
                elif self.at("system"):
                    blocks.append(self.system_block())
                else:
                    raise _Syntax(f"expected a block, found {_describe(tok)}", tok.span)
            except _Syntax as exc:
                self.diags.append(exc.diag)
                if self.peek() is tok:
                    self.advance()
                self.sync_top()
        return ModelFile(tuple(blocks))

    def items(self, parse_item) -> tuple:
        self.expect("{")
        out = []
        while not self.at("}"):
            tok = self.peek()
            if tok.kind == EOF:
                raise _Syntax("expected '}' before end of input", tok.span)
            try:
                out.append(parse_item())
            except _Syntax as exc:
                self.diags.append(exc.diag)
                if self.peek() is tok and not self.at("}"):
                    self.advance()
                self.sync_item()
        self.expect("}")
        return tuple(out)

    def env_block(self) -> EnvBlock:
        span = self.expect("env").span
        name = self.ident("environment name")
        return EnvBlock(name, self.items(self.env_item), span)

    def env_item(self):
        tok = self.peek()
        if self.accept("var"):
            name = self.ident("variable name")
            self.expect(":")
            r = self.range_()
            init = self.integer() if self.accept("=") else None
            self.expect(";")
            return VarNode(name, r.lower, r.upper, init, tok.span)
        if self.accept("msg"):
            port = self.ident("port name")
            self.expect(".")
            name = self.ident("message name")
            ranges = self.comma_list(self.range_, ")") if self.accept("(") else ()
            self.expect(";")
            return MsgNode(port, name, ranges, tok.span)
        if self.accept("guard"):
            name = self.ident("guard name")
            self.expect("=")
            expr = self.expr()
            self.expect(";")
            return GuardDef(name, expr, tok.span)
        if self.accept("action"):
            name = self.ident("action name")
            self.expect("=")
            return ActionDef(name, self.body(), tok.span)
        raise _Syntax(f"expected an environment item, found {_describe(tok)}", tok.span)

    def body(self) -> tuple:
        """A statement terminated by ``;`` or a braced block with optional ``;``."""
        if self.at("{"):
            self.advance()
            stmts = []
            while not self.accept("}"):
                s = self.stmt()
                if s is not None:
                    stmts.append(s)
                self.expect(";")
            self.accept(";")
            return tuple(stmts)
        s = self.stmt()
        self.expect(";")
        return () if s is None else (s,)

    def stmt(self):
        tok = self.peek()
        if self.accept("skip"):
            return None
        if self.accept("send"):
            port = self.ident("port name")
            self.expect(".")
            name = self.ident("message name")
            self.expect("(")
            args = self.comma_list(self.expr, ")")
            return Send(port, name, args, tok.span)
        if tok.kind == IDENT:
            self.advance()
            if self.accept(":="):
                return Assign(tok.text, self.expr(), tok.span)
            return CallAction(tok.text, tok.span)
        raise _Syntax(f"expected a statement, found {_describe(tok)}", tok.span)

    def common_item(self):
        tok = self.peek()
        if self.accept("init"):
            state = self.ident("state name")
            self.expect(";")
            return InitNode(state, tok.span)
        if self.accept("state"):
            names = [self.ident("state name")]
            while self.accept(","):
                names.append(self.ident("state name"))
            self.expect(";")
            return StatesNode(tuple(names), tok.span)
        if self.accept("event"):
            name = self.ident("event name")
            ranges = self.comma_list(self.range_, ")") if self.accept("(") else ()
            self.expect(";")
            return EventNode(name, ranges, tok.span)
        return None

    def params(self):
        if self.accept("("):
            return self.comma_list(lambda: self.ident("parameter name"), ")")
        return None

    def machine_block(self) -> MachineBlock:
        span = self.expect("machine").span
        name = self.ident("machine name")
        self.expect("over")
        env = self.ident("environment name")
        return MachineBlock(name, env, self.items(self.machine_item), span)

    def machine_item(self):
        item = self.common_item()
        if item is not None:
            return item
        tok = self.peek()
        if not self.accept("on"):
            raise _Syntax(f"expected a machine item, found {_describe(tok)}", tok.span)
        if self.accept("complete"):
            trigger, params = None, None
        else:
            trigger = self.ident("event name")
            params = self.params()
        guard = self.expr() if self.accept("when") else None
        self.expect("from")
        source = self.ident("state name")
        self.expect("to")
        target = self.ident("state name")
        if guard is None and self.accept("when"):
            guard = self.expr()
        if self.accept("do"):
            action = self.body()
        else:
            action = None
            self.expect(";")
        return TransitionNode(trigger, params, source, target, guard, action, tok.span)

    def protocol_block(self) -> ProtocolBlock:
        span = self.expect("protocol").span
        name = self.ident("protocol name")
        env = self.ident("environment name") if self.accept("over") else None
        return ProtocolBlock(name, env, self.items(self.protocol_item), span)

    def protocol_item(self):
        item = self.common_item()
        if item is not None:
            return item
        tok = self.peek()
        if not self.accept("on"):
            raise _Syntax(f"expected a protocol item, found {_describe(tok)}", tok.span)
        trigger = self.ident("event name")
        params = self.params()
        self.expect("from")
        source = self.ident("state name")
        self.expect("to")
        target = self.ident("state name")
        pre = self.expr() if self.accept("pre") else None
        post = self.expr() if self.accept("post") else None
        sends = ()
        if self.accept("sends"):
            self.expect("{")
            sends = self.comma_list(self.msg_ref, "}")
        self.expect(";")
        return ProtoTransitionNode(trigger, params, source, target, pre, post, sends, tok.span)

    def msg_ref(self) -> MsgRef:
        tok = self.peek()
        port = self.ident("port name")
        self.expect(".")
        name = self.ident("message name")
        args = self.comma_list(self.expr, ")") if self.accept("(") else ()
        return MsgRef(port, name, args, tok.span)

    def system_block(self) -> SystemBlock:
        span = self.expect("system").span
        name = self.ident("system name")
        return SystemBlock(name, self.items(self.system_item), span)

    def port_ref(self) -> PortRef:
        tok = self.peek()
        inst = self.ident("instance name")
        self.expect(".")
        return PortRef(inst, self.ident("port name"), tok.span)

    def int_args(self) -> tuple[int, ...]:
        if self.accept("("):
            return self.comma_list(self.integer, ")")
        return ()

    def system_item(self):
        tok = self.peek()
        if self.accept("inst"):
            name = self.ident("instance name")
            self.expect(":")
            typ = self.ident("machine name")
            self.expect(";")
            return InstNode(name, typ, tok.span)
        if self.accept("connect"):
            a = self.port_ref()
            self.expect("--")
            b = self.port_ref()
            self.expect(";")
            return ConnectNode(a, b, tok.span)
        if self.accept("external"):
            p = self.port_ref()
            self.expect(";")
            return ExternalNode(p, tok.span)
        if self.accept("protocol"):
            p = self.port_ref()
            self.expect(":")
            proto = self.ident("protocol name")
            self.expect(";")
            return AttachNode(p, proto, tok.span)
        if self.accept("stimulus"):
            inst = self.ident("instance name")
            self.expect(".")
            event = self.ident("event name")
            args = self.int_args()
            self.expect(";")
            return StimulusNode(inst, event, args, tok.span)
        if self.accept("check"):
            node = self.check_item(tok)
            self.expect(";")
            return node
        raise _Syntax(f"expected a system item, found {_describe(tok)}", tok.span)

    def check_item(self, tok: Token):
        if self.accept("invariant"):
            return InvariantCheck(self.expr(), tok.span)
        if self.accept("prepost"):
            inst = self.ident("instance name")
            self.expect(".")
            event = self.ident("event name")
            params = self.params()
            self.expect("pre")
            pre = self.expr()
            self.expect("post")
            post = self.expr()
            return PrePostCheck(inst, event, params, pre, post, tok.span)
        if self.accept("connector"):
            a = self.port_ref()
            self.expect("--")
            b = self.port_ref()
            return ConnectorCheck(a, b, tok.span)
        if self.accept("interaction"):
            mode_tok = self.peek()
            if self.accept("strict"):
                mode = "strict"
            elif self.accept("loose"):
                mode = "loose"
            else:
                raise _Syntax(f"expected 'strict' or 'loose', found {_describe(mode_tok)}", mode_tok.span)
            self.expect("[")
            patterns = []
            if not self.accept("]"):
                while True:
                    patterns.append(self.pattern())
                    if self.accept("]"):
                        break
                    self.expect(";")
            return InteractionCheck(mode, tuple(patterns), tok.span)
        bad = self.peek()
        raise _Syntax(f"unknown check kind {_describe(bad)}", bad.span)

    def pattern(self) -> Pattern:
        tok = self.peek()
        inst = self.ident("instance name")
        self.expect(".")
        port = self.ident("port name")
        self.expect(".")
        name = self.ident("message name")
        args = self.comma_list(self.integer, ")") if self.accept("(") else None
        return Pattern(inst, port, name, args, tok.span)

    # -- expressions ---------------------------------------------------------
    def expr(self):
        self.depth += 1
        try:
            if self.depth > MAX_DEPTH:
                tok = self.peek()
                raise _Syntax("expression nests too deeply", tok.span)
            return self.or_expr()
        finally:
            self.depth -= 1

    def or_expr(self):
        left = self.and_expr()
        while self.at("or"):
            span = self.advance().span
            left = Binary("or", left, self.and_expr(), span)
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.at("and"):
            span = self.advance().span
            left = Binary("and", left, self.not_expr(), span)
        return left

    def not_expr(self):
        if self.at("not"):
            span = self.advance().span
            return Unary("not", self._nested(self.not_expr), span)
        return self.cmp_expr()

    def _nested(self, fn):
        self.depth += 1
        try:
            if self.depth > MAX_DEPTH:
                raise _Syntax("expression nests too deeply", self.peek().span)
            return fn()
        finally:
            self.depth -= 1

    def cmp_expr(self):
        left = self.arith()
        tok = self.peek()
        if tok.kind == SYMBOL and tok.text in CMP_OPS:
            self.advance()
            return Binary(tok.text, left, self.arith(), tok.span)
        return left

    def arith(self):
        left = self.term()
        while self.at("+") or self.at("-"):
            tok = self.advance()
            left = Binary(tok.text, left, self.term(), tok.span)
        return left

    def term(self):
        left = self.unary()
        while self.at("*"):
            tok = self.advance()
            left = Binary("*", left, self.unary(), tok.span)
        return left

    def unary(self):
        if self.at("-"):
            span = self.advance().span
            return Unary("-", self._nested(self.unary), span)
        return self.atom()

    def atom(self):
        tok = self.peek()
        if tok.kind == INT:
            self.advance()
            return Num(int(tok.text), tok.span)
        if self.accept("true"):
            return Bool(True, tok.span)
        if self.accept("false"):
            return Bool(False, tok.span)
        if tok.kind == IDENT:
            self.advance()
            parts = [tok.text]
            while self.at(".") and self.peek(1).kind == IDENT:
                self.advance()
                parts.append(self.advance().text)
            return Name(".".join(parts), Span(tok.span.line, tok.span.column, len(".".join(parts))))
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        raise _Syntax(f"expected an expression, found {_describe(tok)}", tok.span)


def parse_with_diagnostics(text: str) -> tuple[ModelFile, list[Diagnostic]]:
    tokens, diags = tokenize(text)
    parser = Parser(tokens)
    model = parser.parse_file()
    return model, diags + parser.diags


def parse_model(text: str) -> ModelFile:
    """Parse a model file; raise DslError carrying every diagnostic on failure."""
    model, diags = parse_with_diagnostics(text)
    if diags:
        raise DslError(sorted(diags, key=lambda d: (d.span.line, d.span.column)))
    return model


def parse_expr(text: str):
    tokens, diags = tokenize(text)
    if diags:
        raise DslError(diags)
    parser = Parser(tokens)
    try:
        e = parser.expr()
        if parser.peek().kind != EOF:
            tok = parser.peek()
            raise _Syntax(f"unexpected {_describe(tok)} after expression", tok.span)
    except _Syntax as exc:
        raise DslError([exc.diag]) from None
    return e
