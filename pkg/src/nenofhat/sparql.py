"""The query/update surface the machine speaks: conjunctive SELECT with
optional LIMIT, ASK, pattern INSERT, and pattern DELETE.

No OPTIONAL, FILTER, UNION, paths, or entailment; matching is raw URI and
literal equality.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

from .namespaces import NamespaceMap, well_known
from .rdf import Graph, Term, Triple, XSD_STRING, escape_literal, unescape_literal

VARIABLE_RE = re.compile(r"\?([A-Za-z][A-Za-z0-9]*)")


class QueryParseError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __post_init__(self):
        if not re.fullmatch(r"[A-Za-z][A-Za-z0-9]*", self.name):
            raise QueryParseError(f"bad variable name: ?{self.name}")


PatternTerm = Union[Term, Variable]


@dataclass(frozen=True, slots=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    def variables(self) -> set[str]:
        return {t.name for t in (self.subject, self.predicate, self.object) if isinstance(t, Variable)}

    def is_ground(self) -> bool:
        return not self.variables()


@dataclass(frozen=True)
class Query:
    form: str  # "select" | "ask"
    projected: tuple[str, ...]
    where: tuple[TriplePattern, ...]
    limit: int | None = None

    def __post_init__(self):
        if self.form == "select":
            where_vars = set()
            for pat in self.where:
                where_vars |= pat.variables()
            missing = [v for v in self.projected if v not in where_vars]
            if missing:
                raise QueryParseError(f"projected variable ?{missing[0]} not in any pattern")
        if self.limit is not None and self.limit <= 0:
            raise QueryParseError("LIMIT must be positive")


@dataclass(frozen=True)
class UpdateCommand:
    kind: str  # "insert" | "delete"
    patterns: tuple[TriplePattern, ...]


Command = Union[Query, UpdateCommand]


# ---------------------------------------------------------------------------
# Surface syntax
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<brace>[{}])
      | (?P<dot>\.(?!\d))
      | (?P<uri><[^<>]*>)
      | (?P<var>\?[A-Za-z][A-Za-z0-9]*)
      | (?P<literal>"(?:[^"\\]|\\.)*"(?:\^\^(?:<[^<>]*>|[A-Za-z_][\w.-]*:[\w.-]+))?)
      | (?P<int>\d+)
      | (?P<word>[A-Za-z]+)
    )""",
    re.VERBOSE,
)


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == m.start():
            remainder = text[pos:].strip()
            if not remainder:
                break
            raise QueryParseError(f"cannot tokenize near {remainder[:20]!r}")
        pos = m.end()
        tokens.append(m.group(0).strip())
    return tokens


class _Parser:
    def __init__(self, tokens: list[str], nsmap: NamespaceMap):
        self.tokens = tokens
        self.pos = 0
        self.nsmap = nsmap

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise QueryParseError("unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, want: str) -> None:
        tok = self.next()
        if tok.upper() != want:
            raise QueryParseError(f"expected {want}, found {tok!r}")

    def parse_command(self) -> Command:
        head = self.next().upper()
        if head == "SELECT":
            projected = []
            while self.peek() is not None and self.peek().startswith("?"):
                projected.append(self.next()[1:])
            if not projected:
                raise QueryParseError("SELECT needs at least one variable")
            self.expect("WHERE")
            where = self.parse_group()
            limit = None
            if self.peek() is not None and self.peek().upper() == "LIMIT":
                self.next()
                tok = self.next()
                if not tok.isdigit():
                    raise QueryParseError("LIMIT expects an integer")
                limit = int(tok)
            self.end()
            return Query("select", tuple(projected), where, limit)
        if head == "ASK":
            where = self.parse_group()
            self.end()
            return Query("ask", (), where)
        if head in ("INSERT", "DELETE"):
            patterns = self.parse_group()
            self.end()
            return UpdateCommand(head.lower(), patterns)
        raise QueryParseError(f"expected SELECT, ASK, INSERT, or DELETE, found {head!r}")

    def end(self) -> None:
        if self.peek() is not None:
            raise QueryParseError(f"trailing input: {self.peek()!r}")

    def parse_group(self) -> tuple[TriplePattern, ...]:
        self.expect("{")
        patterns: list[TriplePattern] = []
        while True:
            tok = self.peek()
            if tok is None:
                raise QueryParseError("unterminated pattern group")
            if tok == "}":
                self.next()
                break
            patterns.append(self.parse_pattern())
            if self.peek() == ".":
                self.next()
        if not patterns:
            raise QueryParseError("empty pattern group")
        return tuple(patterns)

    def parse_pattern(self) -> TriplePattern:
        s = self.parse_term()
        p = self.parse_term()
        o = self.parse_term()
        return TriplePattern(s, p, o)

    def parse_term(self) -> PatternTerm:
        tok = self.next()
        if tok.startswith("?"):
            return Variable(tok[1:])
        if tok.startswith("<"):
            return Term.uri(self.nsmap.expand_or_uri(tok[1:-1]))
        if tok.startswith('"'):
            return self.parse_literal(tok)
        raise QueryParseError(f"expected URI, variable, or literal, found {tok!r}")

    def parse_literal(self, tok: str) -> Term:
        m = re.fullmatch(r'"((?:[^"\\]|\\.)*)"(?:\^\^(.+))?', tok, re.DOTALL)
        if not m:
            raise QueryParseError(f"malformed literal {tok!r}")
        lexical = unescape_literal(m.group(1))
        dtext = m.group(2)
        if dtext is None:
            return Term.literal(lexical, XSD_STRING)
        if dtext.startswith("<"):
            return Term.literal(lexical, dtext[1:-1])
        return Term.literal(lexical, self.nsmap.expand_or_uri(dtext))


def parse_command(text: str, nsmap: NamespaceMap | None = None) -> Command:
    return _Parser(_tokenize(text), nsmap or well_known()).parse_command()


def term_to_surface(term: Term, nsmap: NamespaceMap | None = None) -> str:
    """Render a term in the surface syntax, compacting URIs to prefixed form
    inside angle brackets when a prefix is registered."""
    nsmap = nsmap or well_known()
    if term.is_uri:
        compact = nsmap.compact(term.text)
        return f"<{compact}>" if compact else f"<{term.text}>"
    dt = nsmap.compact(term.datatype or XSD_STRING)
    suffix = f"^^{dt}" if dt else f"^^<{term.datatype}>"
    return f'"{escape_literal(term.text)}"{suffix}'


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

Binding = dict[str, Term]


def _match_pattern(g: Graph, pat: TriplePattern, binding: Binding) -> Iterable[Binding]:
    parts = []
    for t in (pat.subject, pat.predicate, pat.object):
        if isinstance(t, Variable):
            parts.append(binding.get(t.name))
        else:
            parts.append(t)
    for found in g.match(*parts):
        new = dict(binding)
        ok = True
        for t, got in zip((pat.subject, pat.predicate, pat.object),
                          (found.subject, found.predicate, found.object)):
            if isinstance(t, Variable):
                bound = new.get(t.name)
                if bound is None:
                    new[t.name] = got
                elif bound != got:
                    ok = False
                    break
        if ok:
            yield new


def _solutions(g: Graph, patterns: Iterable[TriplePattern]) -> list[Binding]:
    rows: list[Binding] = [{}]
    for pat in patterns:
        rows = [nb for b in rows for nb in _match_pattern(g, pat, b)]
        if not rows:
            return []
    seen = set()
    unique = []
    for b in rows:
        key = frozenset(b.items())
        if key not in seen:
            seen.add(key)
            unique.append(b)
    return unique


def _row_key(b: Binding) -> tuple:
    return tuple(b[name].sort_key() for name in sorted(b))


def eval_select(g: Graph, q: Query) -> list[Binding]:
    """Deduplicated solutions projected to the query's variables, in
    deterministic (lexicographic) order, truncated to LIMIT when present."""
    if q.form != "select":
        raise ValueError("eval_select requires a SELECT query")
    rows = _solutions(g, q.where)
    projected = []
    seen = set()
    for b in rows:
        pb = {name: b[name] for name in q.projected}
        key = frozenset(pb.items())
        if key not in seen:
            seen.add(key)
            projected.append(pb)
    projected.sort(key=_row_key)
    if q.limit is not None:
        projected = projected[: q.limit]
    return projected


def eval_ask(g: Graph, q: Query) -> bool:
    if q.form != "ask":
        raise ValueError("eval_ask requires an ASK query")
    return bool(_solutions(g, q.where))


def _instantiate(pat: TriplePattern, binding: Binding) -> Triple:
    parts = []
    for t in (pat.subject, pat.predicate, pat.object):
        parts.append(binding[t.name] if isinstance(t, Variable) else t)
    return Triple(*parts)


def _components(patterns: tuple[TriplePattern, ...]) -> list[list[TriplePattern]]:
    """Group patterns into connected components by shared variables, so that
    patterns with disjoint variables delete independently."""
    groups: list[tuple[set[str], list[TriplePattern]]] = []
    for pat in patterns:
        pvars = pat.variables()
        joined: tuple[set[str], list[TriplePattern]] | None = None
        rest = []
        for gvars, gpats in groups:
            if pvars and (gvars & pvars):
                if joined is None:
                    joined = (gvars | pvars, gpats + [pat])
                else:
                    joined = (joined[0] | gvars, joined[1] + gpats)
            else:
                rest.append((gvars, gpats))
        if joined is None:
            rest.append((pvars, [pat]))
        else:
            rest.append(joined)
        groups = rest
    return [gpats for _, gpats in groups]


def exec_update(g: Graph, u: UpdateCommand) -> int:
    """Apply an INSERT or DELETE; returns the count of triples actually
    added or removed."""
    affected = apply_update(g, u)
    return len(affected)


def apply_update(g: Graph, u: UpdateCommand) -> list[Triple]:
    """Like exec_update but returns the triples that were added/removed."""
    if u.kind == "insert":
        added = []
        for pat in u.patterns:
            if not pat.is_ground():
                raise ValueError("unbound insert variable")
            t = _instantiate(pat, {})
            if g.add(t):
                added.append(t)
        return added
    removed = []
    for component in _components(u.patterns):
        doomed: set[Triple] = set()
        for binding in _solutions(g, component):
            for pat in component:
                doomed.add(_instantiate(pat, binding))
        for t in sorted(doomed, key=Triple.sort_key):
            if g.discard(t):
                removed.append(t)
    return removed
