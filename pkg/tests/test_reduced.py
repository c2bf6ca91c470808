"""The reduced interpreter as a differential oracle, and the isomorphism
checker that powers the comparison."""

from __future__ import annotations

import pytest

from conftest import build_store, demo, run_program
from corpus import CORPUS
from nenofhat.api import NENO, RDF
from nenofhat.isomorphism import graph_iso_mod_uuid, object_graph_iso, object_level
from nenofhat.machine import MachineFault
from nenofhat.rdf import Graph, Term, Triple, UuidSource
from nenofhat.reduced import run_reduced

XSD = "http://www.w3.org/2001/XMLSchema#"


def lit(text: str, dt: str = "string") -> Term:
    return Term.literal(text, XSD + dt)


# ---------------------------------------------------------------------------
# isomorphism checker
# ---------------------------------------------------------------------------

def _uuid(n: int) -> Term:
    return Term.uri(f"urn:uuid:00000000-0000-4000-8000-{n:012d}")


def test_graph_is_isomorphic_to_itself():
    g = Graph([
        Triple(_uuid(1), demo("hasFriend"), _uuid(2)),
        Triple(_uuid(2), demo("hasName"), lit("x")),
    ])
    report = graph_iso_mod_uuid(g, g)
    assert report.verdict
    assert all(k == v for k, v in report.mapping.items())


def test_isomorphic_after_renaming():
    g1 = Graph([
        Triple(_uuid(1), demo("hasFriend"), _uuid(2)),
        Triple(_uuid(2), demo("hasName"), lit("x")),
    ])
    g2 = Graph([
        Triple(_uuid(7), demo("hasFriend"), _uuid(9)),
        Triple(_uuid(9), demo("hasName"), lit("x")),
    ])
    report = graph_iso_mod_uuid(g1, g2)
    assert report.verdict
    assert report.mapping[_uuid(1)] == _uuid(7)
    assert report.mapping[_uuid(2)] == _uuid(9)


def test_literal_difference_is_a_counterexample():
    g1 = Graph([Triple(_uuid(1), demo("hasName"), lit("x"))])
    g2 = Graph([Triple(_uuid(1), demo("hasName"), lit("y"))])
    report = graph_iso_mod_uuid(g1, g2)
    assert not report.verdict
    assert report.counterexample is not None


def test_structure_difference_detected():
    g1 = Graph([
        Triple(_uuid(1), demo("hasFriend"), _uuid(2)),
        Triple(_uuid(2), demo("hasFriend"), _uuid(1)),
    ])
    g2 = Graph([
        Triple(_uuid(1), demo("hasFriend"), _uuid(2)),
        Triple(_uuid(1), demo("hasFriend"), _uuid(3)),
    ])
    assert not graph_iso_mod_uuid(g1, g2).verdict


def test_symmetric_candidates_need_backtracking():
    # two nodes with identical signatures; only one assignment extends to a
    # full mapping once the asymmetric neighbor is considered
    g1 = Graph([
        Triple(_uuid(1), demo("p"), _uuid(3)),
        Triple(_uuid(2), demo("p"), _uuid(3)),
        Triple(_uuid(1), demo("q"), _uuid(2)),
    ])
    g2 = Graph([
        Triple(_uuid(11), demo("p"), _uuid(13)),
        Triple(_uuid(12), demo("p"), _uuid(13)),
        Triple(_uuid(11), demo("q"), _uuid(12)),
    ])
    report = graph_iso_mod_uuid(g1, g2)
    assert report.verdict
    assert report.mapping[_uuid(1)] == _uuid(11)


def test_object_level_filter_strips_machine_and_code():
    store = build_store(*CORPUS["human_test"]["sources"])
    run_program(store, "Test")
    level = object_level(store.graph)
    preds = {t.predicate for t in level}
    assert demo("hasName") in preds
    assert NENO.HAS_METHOD not in preds
    assert NENO.PROGRAM_LOCATION not in preds
    types = {t.object for t in level if t.predicate == RDF.TYPE}
    assert types == {demo("Human"), demo("Test")}


# ---------------------------------------------------------------------------
# reduced machine semantics
# ---------------------------------------------------------------------------

def test_reduced_runs_the_renaming_program():
    store = build_store(*CORPUS["human_test"]["sources"])
    status, steps = run_reduced(store, demo("Test"), "main", UuidSource(3))
    assert status == "finished" and steps > 0
    humans = [t.subject for t in store.match(None, RDF.TYPE, demo("Human"))]
    assert len(humans) == 1
    names = {t.object for t in store.match(humans[0], demo("hasName"), None)}
    assert names == {lit("Marko Antonio Rodriguez")}


def test_reduced_writes_no_machine_state():
    store = build_store(*CORPUS["human_test"]["sources"])
    before = {t for t in store.graph if t.predicate.text.startswith("http://neno.lanl.gov#")}
    run_reduced(store, demo("Test"), "main", UuidSource(3))
    after = {t for t in store.graph if t.predicate.text.startswith("http://neno.lanl.gov#")}
    assert before == after  # no neno: predicates added: no stacks, no frames
    assert not store.match(None, RDF.TYPE, NENO.FHAT)
    assert not store.match(None, RDF.TYPE, NENO.FRAME)


def test_program_without_object_writes_leaves_graph_untouched():
    from corpus import PRELUDE

    source = PRELUDE + """
    owl:Thing demo:Pure {
      main() {
        xsd:integer x = 1 + 2;
        xsd:integer y = x * x;
      }
    }
    """
    store = build_store(source)
    before = set(store.graph)
    run_reduced(store, demo("Pure"), "main", UuidSource(3))
    after = set(store.graph)
    # only the start object's type triple is new
    new = after - before
    assert len(new) == 1
    [t] = new
    assert t.predicate == RDF.TYPE and t.object == demo("Pure")


def test_reduced_faults_match_the_machine_taxonomy():
    from corpus import PRELUDE

    source = PRELUDE + """
    owl:Thing demo:Crash {
      main() {
        xsd:integer x = 1 / 0;
      }
    }
    """
    store = build_store(source)
    with pytest.raises(MachineFault, match="division by zero"):
        run_reduced(store, demo("Crash"), "main", UuidSource(3))


# ---------------------------------------------------------------------------
# the differential oracle across the corpus
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(CORPUS))
def test_differential_corpus(name):
    entry = CORPUS[name]
    full_store = build_store(*entry["sources"])
    _, status, _ = run_program(full_store, entry["start"], seed=21)
    assert status == "finished"

    reduced_store = build_store(*entry["sources"])
    rstatus, _ = run_reduced(reduced_store, demo(entry["start"]), "main", UuidSource(99))
    assert rstatus == "finished"

    report = object_graph_iso(full_store.graph, reduced_store.graph)
    assert report.verdict, f"{name}: differs at {report.counterexample}"


def test_differential_detects_divergence():
    # sanity: the oracle actually notices object-level differences
    a = build_store(*CORPUS["loops"]["sources"])
    run_program(a, "Loops")
    b = build_store(*CORPUS["loops"]["sources"])
    run_reduced(b, demo("Loops"), "main", UuidSource(5))
    loops = [t.subject for t in b.match(None, RDF.TYPE, demo("Loops"))][0]
    b.remove(Triple(loops, demo("sum"), lit("45", "integer")))
    b.add(Triple(loops, demo("sum"), lit("46", "integer")))
    assert not object_graph_iso(a.graph, b.graph).verdict
