"""End-to-end compile pipeline: source text -> analyzed AST -> API graph,
resolving references against whatever is already compiled into the store."""

from __future__ import annotations

from .analyzer import SymbolTable, analyze, table_from_api
from .api import ApiIndex, base_ontology
from .ast_nodes import SourceUnit
from .codegen import compile_unit
from .parser import parse
from .rdf import Graph, UuidSource


def ensure_base_ontology(store) -> int:
    """Load the instruction-set ontology into a store; returns triples added."""
    added = 0
    for t in base_ontology():
        if store.add(t):
            added += 1
    return added


def compile_source(source: str, store=None, uuid_source: UuidSource | None = None,
                   source_name: str = "inline") -> tuple[SourceUnit, SymbolTable, Graph]:
    """Parse, analyze (against the store's existing classes, when given), and
    generate the API graph. The caller loads the result where it wants it."""
    unit = parse(source)
    externals = None
    if store is not None:
        externals = table_from_api(ApiIndex(store.match))
    table = analyze(unit, externals)
    api_graph = compile_unit(unit, table, uuid_source, source_name)
    return unit, table, api_graph


def compile_into_store(source: str, store, uuid_source: UuidSource | None = None,
                       source_name: str = "inline") -> int:
    """Compile and load, returning the number of triples added."""
    ensure_base_ontology(store)
    _, _, api_graph = compile_source(source, store, uuid_source, source_name)
    added = 0
    for t in api_graph:
        if store.add(t):
            added += 1
    return added
