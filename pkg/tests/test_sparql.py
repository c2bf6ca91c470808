"""Query/update surface: parser, evaluator, and the brute-force oracle."""

from __future__ import annotations

import itertools
import random

import pytest

from nenofhat.rdf import Graph, Term, Triple
from nenofhat.sparql import (
    Query,
    QueryParseError,
    TriplePattern,
    UpdateCommand,
    Variable,
    eval_ask,
    eval_select,
    exec_update,
    parse_command,
)

RDF_TYPE = Term.uri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type")
MARKO = Term.uri("urn:x:Marko")
JOHAN = Term.uri("urn:x:Johan")
COMPSCI = Term.uri("urn:x:ComputerScientist")
COGSCI = Term.uri("urn:x:CognitiveScientist")
HAS_FRIEND = Term.uri("http://neno.lanl.gov/demo#hasFriend")
HAS_NAME = Term.uri("http://neno.lanl.gov/demo#hasName")


def figure_graph() -> Graph:
    return Graph([
        Triple(MARKO, RDF_TYPE, COMPSCI),
        Triple(MARKO, RDF_TYPE, COGSCI),
        Triple(JOHAN, RDF_TYPE, COGSCI),
    ])


def test_parse_select_with_prefixed_uris():
    q = parse_command("SELECT ?x WHERE { ?x <rdf:type> <urn:x:ComputerScientist> . }")
    assert isinstance(q, Query)
    assert q.form == "select"
    assert q.projected == ("x",)
    assert q.where[0].predicate == RDF_TYPE


def test_conjunctive_select_binds_the_join():
    q = Query("select", ("x",), (
        TriplePattern(Variable("x"), RDF_TYPE, COMPSCI),
        TriplePattern(Variable("x"), RDF_TYPE, COGSCI),
    ))
    rows = eval_select(figure_graph(), q)
    assert rows == [{"x": MARKO}]


def test_select_inverse_reference():
    g = Graph([
        Triple(MARKO, HAS_FRIEND, JOHAN),
        Triple(COMPSCI, HAS_FRIEND, JOHAN),
    ])
    q = parse_command("SELECT ?h WHERE { ?h <demo:hasFriend> <urn:x:Johan> . }")
    rows = eval_select(g, q)
    assert {row["h"] for row in rows} == {MARKO, COMPSCI}


def test_select_limit():
    g = Graph([Triple(Term.uri(f"urn:n:{i}"), HAS_FRIEND, JOHAN) for i in range(10)])
    q = parse_command("SELECT ?h WHERE { ?h <demo:hasFriend> <urn:x:Johan> . } LIMIT 3")
    assert len(eval_select(g, q)) == 3
    full = parse_command("SELECT ?h WHERE { ?h <demo:hasFriend> <urn:x:Johan> . }")
    assert len(eval_select(g, full)) == 10


def test_limit_returns_min_of_limit_and_total():
    g = Graph([Triple(MARKO, HAS_FRIEND, JOHAN)])
    q = parse_command("SELECT ?h WHERE { ?h <demo:hasFriend> <urn:x:Johan> . } LIMIT 3")
    assert len(eval_select(g, q)) == 1


def test_select_on_empty_graph():
    q = parse_command("SELECT ?x WHERE { ?x <rdf:type> <urn:x:Human> . }")
    assert eval_select(Graph(), q) == []


def test_select_result_order_is_deterministic():
    g = Graph([Triple(Term.uri(f"urn:n:{i}"), HAS_FRIEND, JOHAN) for i in range(8)])
    q = parse_command("SELECT ?h WHERE { ?h <demo:hasFriend> <urn:x:Johan> . }")
    assert eval_select(g, q) == eval_select(g, q)
    values = [row["h"].text for row in eval_select(g, q)]
    assert values == sorted(values)


def test_ask_two_hop_name_join():
    this, unknown, friend = (Term.uri(f"urn:u:{n}") for n in ("this", "unknown", "friend"))
    shared = Term.literal("Johan")
    g = Graph([
        Triple(this, HAS_FRIEND, friend),
        Triple(friend, HAS_NAME, shared),
        Triple(unknown, HAS_NAME, shared),
    ])
    q = parse_command(
        "ASK { <urn:u:this> <demo:hasFriend> ?x . ?x <demo:hasName> ?y . "
        "<urn:u:unknown> <demo:hasName> ?y . }"
    )
    assert eval_ask(g, q) is True
    g.discard(Triple(unknown, HAS_NAME, shared))
    g.add(Triple(unknown, HAS_NAME, Term.literal("Other")))
    assert eval_ask(g, q) is False


def test_ask_ground_pattern():
    g = Graph([Triple(MARKO, HAS_FRIEND, JOHAN)])
    assert eval_ask(g, parse_command("ASK { <urn:x:Marko> <demo:hasFriend> <urn:x:Johan> . }"))


def test_insert_and_counts():
    g = Graph()
    cmd = parse_command("INSERT { <urn:x:Marko> <rdf:type> <urn:x:Human> . }")
    assert exec_update(g, cmd) == 1
    assert exec_update(g, cmd) == 0  # set semantics


def test_insert_unbound_variable_is_an_error():
    g = Graph()
    cmd = parse_command("INSERT { ?x <rdf:type> <urn:x:Human> . }")
    with pytest.raises(ValueError, match="unbound insert variable"):
        exec_update(g, cmd)


def test_delete_with_variable_object():
    subj = Term.uri("urn:uuid:55b2a3b0")
    g = Graph([
        Triple(subj, HAS_NAME, Term.literal("A")),
        Triple(subj, HAS_NAME, Term.literal("B")),
        Triple(MARKO, HAS_NAME, Term.literal("C")),
    ])
    cmd = parse_command("DELETE { <urn:uuid:55b2a3b0> <demo:hasName> ?name . }")
    assert exec_update(g, cmd) == 2
    assert g.match(subj, HAS_NAME, None) == set()
    assert len(g.match(MARKO, HAS_NAME, None)) == 1


def test_delete_inbound_edges():
    target = Term.uri("urn:uuid:55b2a3b0")
    g = Graph([
        Triple(MARKO, HAS_FRIEND, target),
        Triple(JOHAN, HAS_FRIEND, target),
        Triple(MARKO, HAS_FRIEND, JOHAN),
    ])
    cmd = parse_command("DELETE { ?human <demo:hasFriend> <urn:uuid:55b2a3b0> . }")
    assert exec_update(g, cmd) == 2
    assert g.match(None, HAS_FRIEND, target) == set()


def test_delete_then_ask_is_false():
    g = Graph([Triple(MARKO, HAS_FRIEND, JOHAN)])
    exec_update(g, parse_command("DELETE { <urn:x:Marko> <demo:hasFriend> <urn:x:Johan> . }"))
    assert not eval_ask(g, parse_command("ASK { <urn:x:Marko> <demo:hasFriend> <urn:x:Johan> . }"))


def test_insert_then_delete_restores_graph():
    g = Graph([Triple(MARKO, RDF_TYPE, COMPSCI)])
    before = set(g)
    ins = parse_command("INSERT { <urn:x:Johan> <demo:hasFriend> <urn:x:Marko> . }")
    dele = parse_command("DELETE { <urn:x:Johan> <demo:hasFriend> <urn:x:Marko> . }")
    exec_update(g, ins)
    exec_update(g, dele)
    assert set(g) == before


def test_disjoint_delete_patterns_run_independently():
    g = Graph([Triple(MARKO, HAS_NAME, Term.literal("M"))])
    # the second pattern matches nothing; the first must still delete
    cmd = parse_command(
        "DELETE { <urn:x:Marko> <demo:hasName> ?a . <urn:x:Johan> <demo:hasFriend> ?b . }"
    )
    assert exec_update(g, cmd) == 1
    assert len(g) == 0


def test_projected_variable_must_occur():
    with pytest.raises(QueryParseError):
        parse_command("SELECT ?y WHERE { ?x <rdf:type> <urn:x:Human> . }")


def test_parse_accepts_missing_trailing_dot():
    q = parse_command("DELETE { <urn:uuid:2db4a1d2> <demo:hasFriend> ?human }")
    assert isinstance(q, UpdateCommand)


def test_literal_patterns_with_datatype():
    g = Graph([Triple(MARKO, HAS_NAME, Term.literal("Marko"))])
    q = parse_command('ASK { <urn:x:Marko> <demo:hasName> "Marko" . }')
    assert eval_ask(g, q) is True
    q2 = parse_command('ASK { <urn:x:Marko> <demo:hasName> "Marko"^^xsd:integer . }')
    assert eval_ask(g, q2) is False


# ---------------------------------------------------------------------------
# Oracle: exhaustive enumeration over all term assignments
# ---------------------------------------------------------------------------

def _brute_force_select(g: Graph, q: Query) -> list[dict]:
    variables = sorted({v for pat in q.where for v in pat.variables()})
    pool = sorted(
        {t.subject for t in g} | {t.predicate for t in g} | {t.object for t in g},
        key=Term.sort_key,
    )
    rows = []
    for combo in itertools.product(pool, repeat=len(variables)):
        binding = dict(zip(variables, combo))

        def ground(pt):
            return binding[pt.name] if isinstance(pt, Variable) else pt

        ok = True
        for pat in q.where:
            s, p, o = ground(pat.subject), ground(pat.predicate), ground(pat.object)
            if not s.is_uri or not p.is_uri or Triple(s, p, o) not in g:
                ok = False
                break
        if ok:
            rows.append({v: binding[v] for v in q.projected})
    unique = []
    seen = set()
    for row in rows:
        key = frozenset(row.items())
        if key not in seen:
            seen.add(key)
            unique.append(row)
    unique.sort(key=lambda r: tuple(r[v].sort_key() for v in sorted(r)))
    return unique


def _random_case(rng: random.Random):
    uris = [Term.uri(f"urn:o:{i}") for i in range(5)]
    lits = [Term.literal(str(i)) for i in range(2)]
    g = Graph()
    for _ in range(rng.randint(0, 50)):
        g.add(Triple(rng.choice(uris), rng.choice(uris[:3]), rng.choice(uris + lits)))
    var_names = ["a", "b", "c"]

    def pattern_term(position):
        r = rng.random()
        if r < 0.45:
            return Variable(rng.choice(var_names))
        if position == "o" and r < 0.6:
            return rng.choice(lits)
        return rng.choice(uris if position != "p" else uris[:3])

    patterns = tuple(
        TriplePattern(pattern_term("s"), pattern_term("p"), pattern_term("o"))
        for _ in range(rng.randint(1, 3))
    )
    projected = tuple(sorted({v for pat in patterns for v in pat.variables()}))
    return g, patterns, projected


def test_select_and_ask_match_brute_force_enumeration():
    rng = random.Random(2024)
    checked = 0
    while checked < 200:
        g, patterns, projected = _random_case(rng)
        if not projected:
            continue
        limit = rng.choice([None, None, 1, 2])
        q = Query("select", projected, patterns, limit)
        expected = _brute_force_select(g, q)
        if limit is not None:
            expected = expected[:limit]
        assert eval_select(g, q) == expected
        ask = Query("ask", (), patterns)
        assert eval_ask(g, ask) == bool(_brute_force_select(g, Query("select", projected, patterns)))
        checked += 1


def test_update_effects_match_scan_application():
    rng = random.Random(77)
    for _ in range(60):
        g, patterns, projected = _random_case(rng)
        if not projected:
            continue
        reference = g.copy()
        cmd = UpdateCommand("delete", patterns)
        removed = exec_update(g, cmd)
        # scan-based application: delete every instantiation of each connected
        # component's solutions
        q = Query("select", projected, patterns)
        doomed = set()
        # use single patterns independently when no variables are shared
        from nenofhat.sparql import _components, _solutions, _instantiate

        for component in _components(patterns):
            for binding in _solutions(reference, tuple(component)):
                for pat in component:
                    doomed.add(_instantiate(pat, binding))
        survivors = {t for t in reference if t not in doomed}
        assert set(g) == survivors
        assert removed == len(set(reference)) - len(survivors)
