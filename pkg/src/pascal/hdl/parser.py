"""Recursive-descent parser producing a position-annotated AST."""

from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import Comment, HdlError, LexError, Token, tokenize

MAX_NESTING = 64


class HdlSyntaxError(HdlError):
    pass


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: int
    width: int | None
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Ident:
    name: str
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Ternary:
    cond: object
    then: object
    other: object
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Slice:
    name: str
    hi: int
    lo: int
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Concat:
    parts: tuple
    line: int = 0
    col: int = 0


# -- module structure ----------------------------------------------------------

@dataclass(frozen=True)
class PortDecl:
    direction: str
    is_reg: bool
    width: int
    name: str
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Decl:
    kind: str  # "wire" | "reg"
    width: int
    names: tuple
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Assign:
    target: str
    expr: object
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class NonBlocking:
    target: str
    expr: object
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class If:
    cond: object
    then: object
    other: object | None
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Block:
    stmts: tuple
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Always:
    clock: str
    body: object
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Pragma:
    kind: str
    args: tuple  # identifiers, or (expr,) for @assume, (int,) for @bound
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class SourceModule:
    name: str
    ports: tuple
    items: tuple
    pragmas: tuple = field(default=())
    line: int = 0
    col: int = 0


PRAGMA_KINDS = ("secret", "observable", "start", "done", "assume", "alarm", "bound")

_BINARY_LEVELS = (
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<",),
    ("<<", ">>"),
    ("+", "-"),
    ("*",),
)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.depth = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        found = tok.text or "end of input"
        return HdlSyntaxError(f"{msg}, found {found!r}", tok.line, tok.col)

    def at(self, text) -> bool:
        t = self.tok
        return t.kind in ("op", "kw") and t.text == text

    def accept(self, text) -> Token | None:
        if self.at(text):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text) -> Token:
        t = self.accept(text)
        if t is None:
            raise self.error(f"expected {text!r}")
        return t

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "id":
            raise self.error("expected identifier")
        self.i += 1
        return t

    def integer(self) -> int:
        t = self.tok
        if t.kind != "num" or t.value[1] is not None:
            raise self.error("expected integer")
        self.i += 1
        return t.value[0]

    # -- module ------------------------------------------------------------
    def module(self) -> SourceModule:
        start = self.expect("module")
        name = self.ident().text
        self.expect("(")
        ports = [self.portdecl()]
        while self.accept(","):
            ports.append(self.portdecl())
        self.expect(")")
        self.expect(";")
        items = []
        while not self.at("endmodule"):
            if self.tok.kind == "eof":
                raise self.error("expected 'endmodule'")
            items.append(self.item())
        self.expect("endmodule")
        if self.tok.kind != "eof":
            raise self.error("trailing text after 'endmodule'")
        return SourceModule(name, tuple(ports), tuple(items), (), start.line, start.col)

    def range_(self) -> int:
        """Parse an optional ``[hi:0]`` and return the width."""
        if not self.accept("["):
            return 1
        t = self.tok
        hi = self.integer()
        self.expect(":")
        lo = self.integer()
        self.expect("]")
        if lo != 0:
            raise HdlSyntaxError("ranges must be of the form [hi:0]", t.line, t.col)
        if hi > 63:
            raise HdlSyntaxError(f"width {hi + 1} exceeds 64 bits", t.line, t.col)
        return hi + 1

    def portdecl(self) -> PortDecl:
        t = self.tok
        if self.accept("input"):
            direction = "input"
        elif self.accept("output"):
            direction = "output"
        else:
            raise self.error("expected 'input' or 'output'")
        is_reg = self.accept("reg") is not None
        if is_reg and direction == "input":
            raise HdlSyntaxError("input ports cannot be 'reg'", t.line, t.col)
        width = self.range_()
        name = self.ident().text
        return PortDecl(direction, is_reg, width, name, t.line, t.col)

    def item(self):
        t = self.tok
        if self.at("wire") or self.at("reg"):
            kind = self.tok.text
            self.i += 1
            width = self.range_()
            names = [self.ident().text]
            while self.accept(","):
                names.append(self.ident().text)
            self.expect(";")
            return Decl(kind, width, tuple(names), t.line, t.col)
        if self.accept("assign"):
            target = self.ident().text
            self.expect("=")
            e = self.expr()
            self.expect(";")
            return Assign(target, e, t.line, t.col)
        if self.accept("always"):
            self.expect("@")
            self.expect("(")
            self.expect("posedge")
            clock = self.ident().text
            self.expect(")")
            body = self.stmt()
            return Always(clock, body, t.line, t.col)
        raise self.error("expected a declaration, 'assign' or 'always'")

    def stmt(self):
        t = self.tok
        self.enter()
        try:
            if self.accept("begin"):
                stmts = []
                while not self.accept("end"):
                    if self.tok.kind == "eof":
                        raise self.error("expected 'end'")
                    stmts.append(self.stmt())
                return Block(tuple(stmts), t.line, t.col)
            if self.accept("if"):
                self.expect("(")
                cond = self.expr()
                self.expect(")")
                then = self.stmt()
                other = self.stmt() if self.accept("else") else None
                return If(cond, then, other, t.line, t.col)
            if t.kind == "id":
                self.i += 1
                self.expect("<=")
                e = self.expr()
                self.expect(";")
                return NonBlocking(t.text, e, t.line, t.col)
            raise self.error("expected a statement")
        finally:
            self.depth -= 1

    # -- expressions -------------------------------------------------------
    def enter(self):
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise self.error("nesting too deep")

    def expr(self):
        self.enter()
        try:
            cond = self.binary(0)
            t = self.tok
            if self.accept("?"):
                a = self.expr()
                self.expect(":")
                b = self.expr()
                return Ternary(cond, a, b, t.line, t.col)
            return cond
        finally:
            self.depth -= 1

    def binary(self, level):
        if level == len(_BINARY_LEVELS):
            return self.unary()
        left = self.binary(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            t = self.tok
            self.i += 1
            right = self.binary(level + 1)
            left = Binary(t.text, left, right, t.line, t.col)
        return left

    def unary(self):
        t = self.tok
        if self.accept("~") or self.accept("-"):
            self.enter()
            try:
                return Unary(t.text, self.unary(), t.line, t.col)
            finally:
                self.depth -= 1
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            value, width = t.value
            if width is not None and not 1 <= width <= 64:
                raise HdlSyntaxError(f"literal width {width} outside 1..64", t.line, t.col)
            return Num(value, width, t.line, t.col)
        if t.kind == "id":
            self.i += 1
            if self.accept("["):
                hi = self.integer()
                lo = self.integer() if self.accept(":") else hi
                self.expect("]")
                return Slice(t.text, hi, lo, t.line, t.col)
            return Ident(t.text, t.line, t.col)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("{"):
            parts = [self.expr()]
            while self.accept(","):
                parts.append(self.expr())
            self.expect("}")
            return Concat(tuple(parts), t.line, t.col)
        raise self.error("expected an expression")


def parse_expr(text: str, line: int = 1):
    toks, _ = tokenize(text)
    toks = [Token(t.kind, t.text, line, t.col, t.value) for t in toks]
    p = _Parser(toks)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error("unexpected text after expression")
    return e


def _pragmas(comments: list[Comment]) -> tuple:
    out = []
    for c in comments:
        body = c.text.strip()
        if not body.startswith("@"):
            continue
        head, _, rest = body[1:].partition(" ")
        kind = head.strip()
        if kind not in PRAGMA_KINDS:
            raise HdlSyntaxError(f"unknown pragma '@{kind}'", c.line, c.col)
        rest = rest.strip()
        if kind == "assume":
            if not rest:
                raise HdlSyntaxError("@assume needs an expression", c.line, c.col)
            args = (parse_expr(rest, c.line),)
        elif kind == "bound":
            if not rest.isdigit():
                raise HdlSyntaxError("@bound needs a positive integer", c.line, c.col)
            args = (int(rest),)
        else:
            args = tuple(rest.split())
            if not args:
                raise HdlSyntaxError(f"@{kind} needs at least one name", c.line, c.col)
        out.append(Pragma(kind, args, c.line, c.col))
    return tuple(out)


def parse(text: str) -> SourceModule:
    """Parse one module; raises :class:`LexError` or :class:`HdlSyntaxError`."""
    try:
        toks, comments = tokenize(text)
        p = _Parser(toks)
        m = p.module()
        pragmas = _pragmas(comments)
    except RecursionError:  # pragma: no cover - guarded by MAX_NESTING
        raise HdlSyntaxError("nesting too deep") from None
    return SourceModule(m.name, m.ports, m.items, pragmas, m.line, m.col)


__all__ = [
    "Always", "Assign", "Binary", "Block", "Concat", "Decl", "HdlError", "HdlSyntaxError",
    "Ident", "If", "LexError", "NonBlocking", "Num", "PortDecl", "Pragma", "SourceModule",
    "Slice", "Ternary", "Unary", "parse", "parse_expr",
]
