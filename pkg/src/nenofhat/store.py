"""Triple-store access used by the compiler and both interpreters.

A store exposes raw triple operations (match/add/remove) plus the textual
query/update surface. LocalStore wraps an in-process Graph; HttpStore talks
the same surface to a remote endpoint, so a machine runs identically against
either. RecordingStore captures executed surface commands for inspection.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .rdf import Graph, Term, Triple, parse_ntriples, serialize_ntriples, term_to_ntriples
from .sparql import (
    Query,
    UpdateCommand,
    apply_update,
    eval_ask,
    eval_select,
    parse_command,
)


class StoreError(RuntimeError):
    pass


@dataclass
class Result:
    kind: str  # "bindings" | "truth" | "count"
    variables: tuple[str, ...] = ()
    rows: list[dict[str, Term]] = field(default_factory=list)
    truth: bool = False
    count: int = 0
    affected: list[Triple] = field(default_factory=list)


class LocalStore:
    """A store over an in-process Graph, optionally backed by an N-Triples file."""

    def __init__(self, graph: Graph | None = None, path: str | None = None):
        self.graph = graph if graph is not None else Graph()
        self.path = path
        if path is not None and os.path.exists(path):
            self.graph.update(parse_ntriples(open(path, encoding="utf-8").read()))

    def match(self, s: Term | None = None, p: Term | None = None, o: Term | None = None) -> set[Triple]:
        return self.graph.match(s, p, o)

    def add(self, t: Triple) -> bool:
        return self.graph.add(t)

    def remove(self, t: Triple) -> bool:
        return self.graph.discard(t)

    def execute_text(self, text: str) -> Result:
        command = parse_command(text)
        return self.execute(command)

    def execute(self, command) -> Result:
        if isinstance(command, Query):
            if command.form == "select":
                rows = eval_select(self.graph, command)
                return Result("bindings", command.projected, rows)
            return Result("truth", truth=eval_ask(self.graph, command))
        if isinstance(command, UpdateCommand):
            affected = apply_update(self.graph, command)
            return Result("count", count=len(affected), affected=affected)
        raise StoreError(f"unsupported command: {command!r}")

    def save(self, path: str | None = None) -> None:
        target = path or self.path
        if target is None:
            raise StoreError("no persistence path configured")
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(serialize_ntriples(self.graph))


class RecordingStore:
    """Delegating wrapper that records every textual command executed."""

    def __init__(self, inner):
        self.inner = inner
        self.commands: list[str] = []

    def match(self, s=None, p=None, o=None):
        return self.inner.match(s, p, o)

    def add(self, t: Triple) -> bool:
        return self.inner.add(t)

    def remove(self, t: Triple) -> bool:
        return self.inner.remove(t)

    def execute_text(self, text: str) -> Result:
        self.commands.append(text)
        return self.inner.execute_text(text)

    @property
    def graph(self):
        return self.inner.graph


def _render_match_query(s: Term | None, p: Term | None, o: Term | None) -> str:
    names = ("s", "p", "o")
    parts = []
    variables = []
    for name, t in zip(names, (s, p, o)):
        if t is None:
            parts.append(f"?{name}")
            variables.append(name)
        else:
            parts.append(term_to_ntriples(t))
    pattern = " ".join(parts)
    if not variables:
        return f"ASK {{ {pattern} . }}"
    return f"SELECT {' '.join('?' + v for v in variables)} WHERE {{ {pattern} . }}"


class HttpStore:
    """Client for the HTTP triple-store endpoint (see server.py)."""

    def __init__(self, url: str, timeout: float = 30.0):
        import requests

        self.url = url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()

    def _post(self, text: str) -> str:
        import requests

        try:
            resp = self._session.post(
                self.url + "/", data=text.encode("utf-8"),
                headers={"Content-Type": "text/plain; charset=utf-8"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise StoreError(f"store unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise StoreError(f"store error {resp.status_code}: {resp.text.strip()}")
        return resp.text

    def execute_text(self, text: str) -> Result:
        command = parse_command(text)
        body = self._post(text)
        if isinstance(command, UpdateCommand):
            stripped = body.strip()
            if not stripped.lstrip("-").isdigit():
                raise StoreError(f"expected count response, got {stripped!r}")
            return Result("count", count=int(stripped))
        if command.form == "ask":
            stripped = body.strip()
            if stripped not in ("true", "false"):
                raise StoreError(f"expected truth response, got {stripped!r}")
            return Result("truth", truth=(stripped == "true"))
        return _parse_bindings(body)

    def match(self, s: Term | None = None, p: Term | None = None, o: Term | None = None) -> set[Triple]:
        result = self.execute_text(_render_match_query(s, p, o))
        if result.kind == "truth":
            return {Triple(s, p, o)} if result.truth else set()
        out = set()
        for row in result.rows:
            out.add(Triple(row.get("s", s), row.get("p", p), row.get("o", o)))
        return out

    def add(self, t: Triple) -> bool:
        res = self.execute_text(f"INSERT {{ {term_to_ntriples(t.subject)} {term_to_ntriples(t.predicate)} {term_to_ntriples(t.object)} . }}")
        return res.count > 0

    def remove(self, t: Triple) -> bool:
        res = self.execute_text(f"DELETE {{ {term_to_ntriples(t.subject)} {term_to_ntriples(t.predicate)} {term_to_ntriples(t.object)} . }}")
        return res.count > 0

    def persist(self) -> None:
        import requests

        try:
            resp = self._session.post(self.url + "/persist", timeout=self.timeout)
        except requests.RequestException as exc:
            raise StoreError(f"store unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise StoreError(f"persist failed: {resp.text.strip()}")


def render_response(result: Result) -> str:
    """Wire encoding of a Result: TSV bindings, a truth token, or a count."""
    if result.kind == "truth":
        return "true" if result.truth else "false"
    if result.kind == "count":
        return str(result.count)
    lines = ["\t".join(result.variables)]
    for row in result.rows:
        lines.append("\t".join(term_to_ntriples(row[v]) for v in result.variables))
    return "\n".join(lines) + "\n" if lines else "\n"


def _parse_wire_term(text: str) -> Term:
    from .rdf import _parse_term  # reuse the N-Triples term grammar

    term, rest = _parse_term(text, 0)
    if rest.strip():
        raise StoreError(f"trailing content in term: {text!r}")
    return term


def _parse_bindings(body: str) -> Result:
    lines = body.splitlines()
    if not lines:
        return Result("bindings", (), [])
    variables = tuple(v for v in lines[0].split("\t") if v)
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split("\t")
        rows.append({v: _parse_wire_term(c) for v, c in zip(variables, cells)})
    return Result("bindings", variables, rows)


def open_store(target: str):
    """A store for a CLI-style target: http(s) URL or local N-Triples path."""
    if target.startswith("http://") or target.startswith("https://"):
        return HttpStore(target)
    return LocalStore(path=target)
