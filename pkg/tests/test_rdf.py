"""Terms, graph indexing, UUID minting, and N-Triples round-trips."""

from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from nenofhat.rdf import (
    Graph,
    NTriplesError,
    Term,
    Triple,
    UuidSource,
    is_uuid_uri,
    parse_ntriples,
    serialize_ntriples,
)

XSD = "http://www.w3.org/2001/XMLSchema#"
RDF_TYPE = Term.uri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type")

MARKO = Term.uri("urn:example:Marko")
HUMAN = Term.uri("urn:example:Human")
COMPSCI = Term.uri("urn:example:ComputerScientist")
COGSCI = Term.uri("urn:example:CognitiveScientist")


def test_term_equality_is_byte_equality():
    assert Term.literal("1", XSD + "integer") == Term.literal("1", XSD + "integer")
    assert Term.literal("1", XSD + "integer") != Term.literal("01", XSD + "integer")
    assert Term.literal("1", XSD + "integer") != Term.literal("1", XSD + "int")
    assert Term.uri("urn:a") != Term.literal("urn:a")


def test_plain_literals_normalize_to_string():
    assert Term.literal("hello").datatype == XSD + "string"


def test_triple_positions_must_be_uris():
    with pytest.raises(ValueError):
        Triple(Term.literal("x"), RDF_TYPE, MARKO)
    with pytest.raises(ValueError):
        Triple(MARKO, Term.literal("x"), MARKO)


def test_insert_into_empty_graph():
    g = Graph()
    assert g.add(Triple(MARKO, RDF_TYPE, HUMAN)) is True
    assert len(g) == 1


def test_insert_twice_is_idempotent():
    g = Graph()
    t = Triple(MARKO, RDF_TYPE, HUMAN)
    assert g.add(t) is True
    assert g.add(t) is False
    assert len(g) == 1


def test_insert_remove_insert():
    g = Graph()
    t = Triple(MARKO, RDF_TYPE, HUMAN)
    g.add(t)
    g.discard(t)
    g.add(t)
    assert len(g) == 1


def test_remove_i_am_i():
    i, am = Term.uri("urn:x:I"), Term.uri("urn:x:am")
    g = Graph([Triple(i, am, i)])
    assert g.discard(Triple(i, am, i)) is True
    assert len(g) == 0


def test_remove_absent_triple():
    g = Graph()
    assert g.discard(Triple(MARKO, RDF_TYPE, HUMAN)) is False


def test_remove_one_of_two():
    t1 = Triple(MARKO, RDF_TYPE, HUMAN)
    t2 = Triple(MARKO, RDF_TYPE, COMPSCI)
    g = Graph([t1, t2])
    g.discard(t1)
    assert set(g) == {t2}


def test_match_by_type():
    g = Graph([
        Triple(MARKO, RDF_TYPE, COMPSCI),
        Triple(MARKO, RDF_TYPE, COGSCI),
        Triple(HUMAN, RDF_TYPE, COGSCI),
    ])
    found = g.match(None, RDF_TYPE, COMPSCI)
    assert found == {Triple(MARKO, RDF_TYPE, COMPSCI)}


def test_match_all_wildcards_returns_whole_graph():
    triples = {Triple(MARKO, RDF_TYPE, HUMAN), Triple(MARKO, RDF_TYPE, COMPSCI)}
    g = Graph(triples)
    assert g.match() == triples


def _random_graph(rng: random.Random, size: int) -> Graph:
    terms = [Term.uri(f"urn:n:{i}") for i in range(6)]
    literals = [Term.literal(str(i), XSD + "integer") for i in range(3)]
    g = Graph()
    for _ in range(size):
        s = rng.choice(terms)
        p = rng.choice(terms)
        o = rng.choice(terms + literals)
        g.add(Triple(s, p, o))
    return g


def test_index_coherence_against_full_scan():
    """Every wildcard combination must agree with a brute-force scan."""
    rng = random.Random(7)
    for _ in range(20):
        g = _random_graph(rng, rng.randint(0, 100))
        pool_s = sorted({t.subject for t in g}, key=Term.sort_key) + [None]
        pool_p = sorted({t.predicate for t in g}, key=Term.sort_key) + [None]
        pool_o = sorted({t.object for t in g}, key=Term.sort_key) + [None]
        for s, p, o in itertools.product(pool_s[:3], pool_p[:3], pool_o[:3]):
            expected = {
                t for t in g
                if (s is None or t.subject == s)
                and (p is None or t.predicate == p)
                and (o is None or t.object == o)
            }
            assert g.match(s, p, o) == expected


def test_uuid_uri_format():
    source = UuidSource()
    term = source.mint()
    assert is_uuid_uri(term)
    tail = term.text[len("urn:uuid:"):]
    assert len(tail) == 36
    assert tail == tail.lower()
    # the documented shape: 8-4-4-4-12 hex digits
    parts = tail.split("-")
    assert [len(p) for p in parts] == [8, 4, 4, 4, 12]


def test_uuid_minting_distinct():
    source = UuidSource()
    assert source.mint() != source.mint()


def test_seeded_uuid_source_replays():
    a = [UuidSource(seed=42).mint() for _ in range(50)]
    b = [UuidSource(seed=42).mint() for _ in range(50)]
    assert a == b
    c = [UuidSource(seed=43).mint() for _ in range(50)]
    assert a != c


def test_uuid_injectivity_at_scale():
    source = UuidSource(seed=1)
    seen = {source.uuid_str() for _ in range(100_000)}
    assert len(seen) == 100_000


def test_serialize_is_sorted_and_insertion_order_free():
    t1 = Triple(MARKO, RDF_TYPE, HUMAN)
    t2 = Triple(HUMAN, RDF_TYPE, COGSCI)
    assert serialize_ntriples(Graph([t1, t2])) == serialize_ntriples(Graph([t2, t1]))
    lines = serialize_ntriples(Graph([t1, t2])).splitlines()
    assert lines == sorted(lines)


def test_ntriples_fixpoint():
    g = Graph([Triple(MARKO, RDF_TYPE, HUMAN)])
    once = serialize_ntriples(g)
    twice = serialize_ntriples(parse_ntriples(once))
    assert once == twice


def test_parse_integer_literal_line():
    text = '<urn:uuid:a> <urn:uuid:b> "1"^^<http://www.w3.org/2001/XMLSchema#integer> .\n'
    g = parse_ntriples(text)
    [t] = list(g)
    assert t.object == Term.literal("1", XSD + "integer")


def test_parse_error_carries_line_number():
    with pytest.raises(NTriplesError) as err:
        parse_ntriples("<urn:a> <urn:b> .\n")
    assert err.value.line == 1
    with pytest.raises(NTriplesError) as err:
        parse_ntriples('<urn:a> <urn:b> "x" .\nnot a triple\n')
    assert err.value.line == 2


def test_escaping_round_trip():
    nasty = Term.literal('a "quoted" \\ line\nwith\ttabs')
    g = Graph([Triple(MARKO, RDF_TYPE, nasty)])
    assert parse_ntriples(serialize_ntriples(g)).match() == set(g)


def test_namespace_expand_compact_identity():
    from nenofhat.namespaces import NamespaceMap, well_known

    nsmap = well_known()
    for qname in ("rdf:type", "xsd:integer", "neno:Fhat", "demo:hasFriend", "owl:Thing"):
        assert nsmap.compact(nsmap.expand(qname)) == qname
    custom = NamespaceMap({"me": "http://example.org/mine"})
    assert custom.expand("me:Thing") == "http://example.org/mine#Thing"
    assert custom.compact("http://example.org/mine#Thing") == "me:Thing"


def test_namespace_expand_or_uri_passes_absolute_uris():
    from nenofhat.namespaces import well_known

    nsmap = well_known()
    assert nsmap.expand_or_uri("urn:uuid:abc") == "urn:uuid:abc"
    assert nsmap.expand_or_uri("demo:hasName") == "http://neno.lanl.gov/demo#hasName"


_TERM = st.one_of(
    st.integers(0, 9).map(lambda i: Term.uri(f"urn:t:{i}")),
    st.text(alphabet="ab\"\\\n", max_size=4).map(Term.literal),
    st.integers(-10, 10).map(lambda i: Term.literal(str(i), XSD + "integer")),
)
_TRIPLE = st.tuples(
    st.integers(0, 9).map(lambda i: Term.uri(f"urn:s:{i}")),
    st.integers(0, 4).map(lambda i: Term.uri(f"urn:p:{i}")),
    _TERM,
).map(lambda spo: Triple(*spo))


@settings(max_examples=60, deadline=None)
@given(st.lists(_TRIPLE, max_size=50))
def test_generative_round_trip(triples):
    g = Graph(triples)
    again = parse_ntriples(serialize_ntriples(g))
    assert set(again) == set(g)
