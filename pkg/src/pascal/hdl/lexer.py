"""Tokenizer for the mini-HDL."""

from __future__ import annotations

import re
from dataclasses import dataclass


class HdlError(Exception):
    """Base for frontend errors; carries a source position when known."""

    def __init__(self, message, line=None, col=None, code=None):
        self.message = message
        self.line = line
        self.col = col
        self.code = code
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class LexError(HdlError):
    pass


KEYWORDS = {
    "module", "endmodule", "input", "output", "reg", "wire", "assign",
    "always", "posedge", "begin", "end", "if", "else",
}

# longest operators first
_OPERATORS = ("<=", "==", "!=", "<<", ">>", "<", "(", ")", ";", ",", "[", "]",
              ":", "{", "}", "?", "@", "~", "-", "+", "*", "&", "|", "^", "=")

_SIZED = re.compile(r"(\d+)'([hHdDbB])([0-9a-fA-F_]+)")
_DECIMAL = re.compile(r"\d[\d_]*")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*")
_RADIX = {"h": 16, "d": 10, "b": 2}


@dataclass(frozen=True)
class Token:
    kind: str  # "id", "kw", "num", "op", "eof"
    text: str
    line: int
    col: int
    value: object = None  # (int, width or None) for numbers


@dataclass(frozen=True)
class Comment:
    text: str
    line: int
    col: int


def tokenize(text: str) -> tuple[list[Token], list[Comment]]:
    """Split source text into tokens and ``//`` comments."""
    tokens: list[Token] = []
    comments: list[Comment] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r\f\v":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            end = text.find("\n", i)
            end = n if end < 0 else end
            comments.append(Comment(text[i + 2:end], line, col))
            col += end - i
            i = end
            continue
        m = _SIZED.match(text, i)
        if m:
            width = int(m.group(1))
            radix = _RADIX[m.group(2).lower()]
            digits = m.group(3).replace("_", "")
            try:
                value = int(digits, radix) if digits else None
            except ValueError:
                value = None
            if value is None:
                raise LexError(f"malformed literal {m.group(0)!r}", line, col)
            tokens.append(Token("num", m.group(0), line, col, (value, width)))
            col += m.end() - i
            i = m.end()
            continue
        m = _DECIMAL.match(text, i)
        if m:
            if i + len(m.group(0)) < n and text[m.end()] == "'":
                raise LexError(f"malformed sized literal near {text[i:m.end() + 2]!r}", line, col)
            tokens.append(Token("num", m.group(0), line, col, (int(m.group(0).replace("_", "")), None)))
            col += m.end() - i
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            word = m.group(0)
            tokens.append(Token("kw" if word in KEYWORDS else "id", word, line, col))
            col += m.end() - i
            i = m.end()
            continue
        for op in _OPERATORS:
            if text.startswith(op, i):
                tokens.append(Token("op", op, line, col))
                i += len(op)
                col += len(op)
                break
        else:
            raise LexError(f"illegal character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens, comments
