"""Mini-HDL frontend: parse, elaborate and emit."""

from __future__ import annotations

from pathlib import Path

from .elaborate import ElabError, PragmaSet, elaborate
from .emit import emit
from .lexer import HdlError, LexError
from .parser import HdlSyntaxError, SourceModule, parse, parse_expr


def load_text(text: str, pragmas: PragmaSet | None = None):
    return elaborate(parse(text), pragmas)


def load(path, pragmas: PragmaSet | None = None):
    return load_text(Path(path).read_text(encoding="utf-8"), pragmas)


__all__ = [
    "ElabError", "HdlError", "HdlSyntaxError", "LexError", "PragmaSet", "SourceModule",
    "elaborate", "emit", "load", "load_text", "parse", "parse_expr",
]
