"""Tokenizer for Neno source text."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .rdf import unescape_literal

KEYWORDS = {
    "prefix", "this", "if", "else", "while", "for", "return", "new", "delete",
    "typeof", "true", "false",
}

# multi-character operators, longest first
_OPERATORS = [
    ("==", "EQ"), ("!=", "NEQ"), ("<=", "LE"), (">=", "GE"),
    ("=+", "SETPLUS"), ("=-", "SETMINUS"), ("=/", "SETCLEAR"), ("=?", "SETQUERY"),
    ("<?", "NETQUERY"), ("++", "PLUSPLUS"), ("..", "DOTDOT"),
    ("=", "ASSIGN"), ("<", "LT"), (">", "GT"), ("+", "PLUS"), ("-", "MINUS"),
    ("*", "STAR"), ("/", "SLASH"), (".", "DOT"), ("!", "BANG"), ("~", "TILDE"),
    ("{", "LBRACE"), ("}", "RBRACE"), ("(", "LPAREN"), (")", "RPAREN"),
    ("[", "LBRACKET"), ("]", "RBRACKET"), (";", "SEMI"), (",", "COMMA"),
    (":", "COLON"),
]

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_QNAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*:[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"[0-9]+")
_URN_RE = re.compile(r"urn:[A-Za-z0-9:\-]+")
_URIANGLE_RE = re.compile(r"<(?:[A-Za-z][A-Za-z0-9+.\-]*://[^<>\s]*|urn:[^<>\s]+)>")
_STRING_RE = re.compile(r'"(?:[^"\\]|\\.)*"')


class NenoSyntaxError(SyntaxError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int
    datatype: str | None = None  # typed literals only: the datatype as written

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"{self.kind}({self.text!r})"


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0

    def here() -> tuple[int, int]:
        return line, pos - line_start + 1

    def error(message: str):
        ln, col = here()
        raise NenoSyntaxError(message, ln, col)

    n = len(source)
    while pos < n:
        ch = source[pos]
        if ch == "\n":
            line += 1
            pos += 1
            line_start = pos
            continue
        if ch in " \t\r":
            pos += 1
            continue
        if source.startswith("/*", pos):
            end = source.find("*/", pos + 2)
            if end < 0:
                error("unterminated comment")
            line += source.count("\n", pos, end)
            if "\n" in source[pos:end]:
                line_start = pos + source.rindex("\n", pos, end) + 1
            pos = end + 2
            continue
        ln, col = here()
        if ch == '"':
            m = _STRING_RE.match(source, pos)
            if not m:
                error("unterminated string literal")
            try:
                raw = unescape_literal(m.group(0)[1:-1])
            except ValueError as exc:
                error(str(exc))
            pos = m.end()
            # typed literal: "lex"^^xsd:date or "lex"^^<uri>
            look = pos
            while look < n and source[look] in " \t":
                look += 1
            if source.startswith("^^", look):
                look += 2
                while look < n and source[look] in " \t":
                    look += 1
                qm = _QNAME_RE.match(source, look)
                if qm:
                    tokens.append(Token("TYPED", raw, ln, col, qm.group(0)))
                    pos = qm.end()
                    continue
                if look < n and source[look] == "<":
                    close = source.find(">", look + 1)
                    if close < 0 or any(c in source[look + 1:close] for c in " \t\n<"):
                        error("malformed datatype URI")
                    tokens.append(Token("TYPED", raw, ln, col, source[look + 1:close]))
                    pos = close + 1
                    continue
                error("expected datatype after ^^")
            tokens.append(Token("STRING", raw, ln, col))
            continue
        m = _URN_RE.match(source, pos)
        if m:
            tokens.append(Token("URIREF", m.group(0), ln, col))
            pos = m.end()
            continue
        m = _URIANGLE_RE.match(source, pos)
        if m:
            tokens.append(Token("URIANGLE", m.group(0)[1:-1], ln, col))
            pos = m.end()
            continue
        m = _QNAME_RE.match(source, pos)
        if m:
            tokens.append(Token("QNAME", m.group(0), ln, col))
            pos = m.end()
            continue
        m = _IDENT_RE.match(source, pos)
        if m:
            text = m.group(0)
            pos = m.end()
            if text == "typeof" and pos < n and source[pos] == "?":
                tokens.append(Token("TYPEOFQ", "typeof?", ln, col))
                pos += 1
            elif text in KEYWORDS:
                tokens.append(Token(text.upper(), text, ln, col))
            else:
                tokens.append(Token("IDENT", text, ln, col))
            continue
        m = _INT_RE.match(source, pos)
        if m:
            tokens.append(Token("INT", m.group(0), ln, col))
            pos = m.end()
            continue
        for text, kind in _OPERATORS:
            if source.startswith(text, pos):
                tokens.append(Token(kind, text, ln, col))
                pos += len(text)
                break
        else:
            error(f"unexpected character {ch!r}")
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens
