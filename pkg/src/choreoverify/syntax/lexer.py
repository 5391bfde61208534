"""Tokenizer for .mcc files."""

from __future__ import annotations

import re
from dataclasses import dataclass


@dataclass(frozen=True)
class Pos:
    line: int
    col: int


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start: Pos
    end: Pos

    def __str__(self):
        return f"{self.file}:{self.start.line}:{self.start.col}"

    def to_json(self):
        return {"file": self.file, "start": [self.start.line, self.start.col],
                "end": [self.end.line, self.end.col]}


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    code: str
    message: str
    span: SourceSpan

    def __str__(self):
        return f"{self.span}: {self.severity}[{self.code}]: {self.message}"

    def to_json(self):
        return {"severity": self.severity, "code": self.code, "message": self.message,
                "span": self.span.to_json()}


class ParseError(Exception):
    def __init__(self, code, message, span):
        super().__init__(message)
        self.diag = Diagnostic("error", code, message, span)


@dataclass(frozen=True)
class Token:
    kind: str      # IDENT NUM OP EOF
    text: str
    span: SourceSpan
    gap_before: bool  # whitespace or comment precedes the token

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r})"


_OPS = sorted([
    "->", "=>", "<=", ">=", "==", "!=", "&&", "||",
    "(", ")", "{", "}", "[", "]", "<", ">", "=", "!", "+", "-", "*", "/", "^",
    ".", ",", ":", ";", "|", "?", "@", "&",
], key=len, reverse=True)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_NUM = re.compile(r"\d+(?:\.\d+)?")
_SPACE = re.compile(r"(?:[ \t\r\n]|//[^\n]*)+")


def tokenize(text: str, file: str = "<input>") -> list:
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(s):
        nonlocal line, col
        for ch in s:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1

    gap = True
    while i < n:
        m = _SPACE.match(text, i)
        if m:
            advance(m.group())
            i = m.end()
            gap = True
            continue
        start = Pos(line, col)
        m = _IDENT.match(text, i) or None
        kind = None
        if m:
            kind = "IDENT"
        else:
            m = _NUM.match(text, i)
            if m:
                kind = "NUM"
        if kind is None:
            for op in _OPS:
                if text.startswith(op, i):
                    kind = "OP"
                    word = op
                    break
            else:
                ch = text[i]
                raise ParseError("LexError", f"unexpected character {ch!r}",
                                 SourceSpan(file, start, Pos(line, col + 1)))
        else:
            word = m.group()
        advance(word)
        i += len(word)
        toks.append(Token(kind, word, SourceSpan(file, start, Pos(line, col)), gap))
        gap = False
    toks.append(Token("EOF", "", SourceSpan(file, Pos(line, col), Pos(line, col)), True))
    return toks
