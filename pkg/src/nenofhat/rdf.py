"""Terms, triples, and the indexed in-memory graph that everything else runs on.

Terms are immutable values; equality is byte equality of kind, URI text,
lexical form, and datatype. Literals always carry a datatype (plain literals
normalize to xsd:string). Blank nodes do not exist in this system.
"""

from __future__ import annotations

import random
import re
import uuid as _uuid
from dataclasses import dataclass
from typing import Iterable, Iterator

from .namespaces import XSD_NS

XSD_STRING = XSD_NS + "string"

_UUID_URN = "urn:uuid:"


class NTriplesError(ValueError):
    """Raised on malformed N-Triples input, carrying the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, slots=True)
class Term:
    """A URI or a typed literal."""

    kind: str  # "uri" | "literal"
    text: str  # URI text, or the lexical form for literals
    datatype: str | None = None  # datatype IRI, literals only

    @staticmethod
    def uri(text: str) -> "Term":
        return Term("uri", text)

    @staticmethod
    def literal(lexical: str, datatype: str = XSD_STRING) -> "Term":
        return Term("literal", lexical, datatype)

    @property
    def is_uri(self) -> bool:
        return self.kind == "uri"

    @property
    def is_literal(self) -> bool:
        return self.kind == "literal"

    def sort_key(self) -> tuple:
        if self.kind == "uri":
            return (0, self.text, "")
        return (1, self.datatype or "", self.text)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        if self.is_uri:
            return f"<{self.text}>"
        return f'"{self.text}"^^<{self.datatype}>'


@dataclass(frozen=True, slots=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if not self.subject.is_uri:
            raise ValueError("triple subject must be a URI")
        if not self.predicate.is_uri:
            raise ValueError("triple predicate must be a URI")

    def sort_key(self) -> tuple:
        return (self.subject.sort_key(), self.predicate.sort_key(), self.object.sort_key())


def triple(s: Term, p: Term, o: Term) -> Triple:
    return Triple(s, p, o)


class UuidSource:
    """Mints ``urn:uuid:`` URIs.

    Without a seed, URIs come from the system entropy source. With a seed, the
    sequence is a pure function of the seed so runs can be replayed.
    """

    def __init__(self, seed: int | None = None):
        self._rng = random.Random(seed) if seed is not None else None

    def uuid_str(self) -> str:
        if self._rng is None:
            return str(_uuid.uuid4())
        return str(_uuid.UUID(int=self._rng.getrandbits(128), version=4))

    def mint(self) -> Term:
        return Term.uri(_UUID_URN + self.uuid_str())


def is_uuid_uri(term: Term) -> bool:
    return term.is_uri and term.text.startswith(_UUID_URN)


class Graph:
    """A set of triples with subject-, predicate-, and object-keyed indexes.

    Single-writer, multi-reader: mutation must be serialized by the owner.
    """

    def __init__(self, triples: Iterable[Triple] = ()):
        self._spo: dict[Term, dict[Term, set[Term]]] = {}
        self._pos: dict[Term, dict[Term, set[Term]]] = {}
        self._osp: dict[Term, dict[Term, set[Term]]] = {}
        self._size = 0
        for t in triples:
            self.add(t)

    def __len__(self) -> int:
        return self._size

    def __contains__(self, t: Triple) -> bool:
        po = self._spo.get(t.subject)
        if po is None:
            return False
        objs = po.get(t.predicate)
        return objs is not None and t.object in objs

    def __iter__(self) -> Iterator[Triple]:
        for s, po in self._spo.items():
            for p, objs in po.items():
                for o in objs:
                    yield Triple(s, p, o)

    def add(self, t: Triple) -> bool:
        """Insert a triple; returns whether the graph grew."""
        if t in self:
            return False
        self._spo.setdefault(t.subject, {}).setdefault(t.predicate, set()).add(t.object)
        self._pos.setdefault(t.predicate, {}).setdefault(t.object, set()).add(t.subject)
        self._osp.setdefault(t.object, {}).setdefault(t.subject, set()).add(t.predicate)
        self._size += 1
        return True

    def discard(self, t: Triple) -> bool:
        """Remove a triple; returns whether it was present."""
        if t not in self:
            return False
        self._prune(self._spo, t.subject, t.predicate, t.object)
        self._prune(self._pos, t.predicate, t.object, t.subject)
        self._prune(self._osp, t.object, t.subject, t.predicate)
        self._size -= 1
        return True

    @staticmethod
    def _prune(index, a, b, c) -> None:
        leaf = index[a][b]
        leaf.discard(c)
        if not leaf:
            del index[a][b]
            if not index[a]:
                del index[a]

    def match(self, s: Term | None = None, p: Term | None = None, o: Term | None = None) -> set[Triple]:
        """All triples agreeing with every non-None position."""
        if s is not None:
            po = self._spo.get(s, {})
            if p is not None:
                objs = po.get(p, set())
                if o is not None:
                    return {Triple(s, p, o)} if o in objs else set()
                return {Triple(s, p, obj) for obj in objs}
            if o is not None:
                preds = self._osp.get(o, {}).get(s, set())
                return {Triple(s, pred, o) for pred in preds}
            return {Triple(s, pred, obj) for pred, objs in po.items() for obj in objs}
        if p is not None:
            os_ = self._pos.get(p, {})
            if o is not None:
                return {Triple(subj, p, o) for subj in os_.get(o, set())}
            return {Triple(subj, p, obj) for obj, subjs in os_.items() for subj in subjs}
        if o is not None:
            sp = self._osp.get(o, {})
            return {Triple(subj, o_p, o) for subj, preds in sp.items() for o_p in preds}
        return set(self)

    def copy(self) -> "Graph":
        return Graph(self)

    def update(self, triples: Iterable[Triple]) -> int:
        return sum(1 for t in triples if self.add(t))


# ---------------------------------------------------------------------------
# N-Triples serialization
# ---------------------------------------------------------------------------

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}


def escape_literal(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def unescape_literal(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= len(text):
            raise ValueError("dangling escape")
        nxt = text[i + 1]
        if nxt in _UNESCAPES:
            out.append(_UNESCAPES[nxt])
            i += 2
        elif nxt == "u":
            out.append(chr(int(text[i + 2 : i + 6], 16)))
            i += 6
        elif nxt == "U":
            out.append(chr(int(text[i + 2 : i + 10], 16)))
            i += 10
        else:
            raise ValueError(f"unknown escape \\{nxt}")
    return "".join(out)


def term_to_ntriples(term: Term) -> str:
    if term.is_uri:
        return f"<{term.text}>"
    return f'"{escape_literal(term.text)}"^^<{term.datatype}>'


def triple_to_ntriples(t: Triple) -> str:
    return f"{term_to_ntriples(t.subject)} {term_to_ntriples(t.predicate)} {term_to_ntriples(t.object)} ."


def serialize_ntriples(g: Graph | Iterable[Triple]) -> str:
    lines = sorted(triple_to_ntriples(t) for t in g)
    return "".join(line + "\n" for line in lines)


_URI_RE = re.compile(r"<([^<>\s]*)>")
_LITERAL_RE = re.compile(r'"((?:[^"\\]|\\.)*)"(?:\^\^<([^<>\s]*)>)?')


def _parse_term(text: str, line_no: int) -> tuple[Term, str]:
    text = text.lstrip()
    if text.startswith("<"):
        m = _URI_RE.match(text)
        if not m:
            raise NTriplesError("malformed URI", line_no)
        return Term.uri(m.group(1)), text[m.end():]
    if text.startswith('"'):
        m = _LITERAL_RE.match(text)
        if not m:
            raise NTriplesError("malformed literal", line_no)
        try:
            lexical = unescape_literal(m.group(1))
        except ValueError as exc:
            raise NTriplesError(str(exc), line_no) from None
        datatype = m.group(2) or XSD_STRING
        return Term.literal(lexical, datatype), text[m.end():]
    raise NTriplesError(f"expected term, found {text[:20]!r}", line_no)


def parse_ntriples(text: str) -> Graph:
    g = Graph()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        s, rest = _parse_term(line, line_no)
        p, rest = _parse_term(rest, line_no)
        o, rest = _parse_term(rest, line_no)
        rest = rest.strip()
        if rest != ".":
            raise NTriplesError("expected terminating '.'", line_no)
        if not s.is_uri or not p.is_uri:
            raise NTriplesError("subject and predicate must be URIs", line_no)
        g.add(Triple(s, p, o))
    return g
