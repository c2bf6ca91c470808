"""Neno compiler and Fhat RDF virtual machine.

Programs, their compiled form, and the machine executing them are all triples
in one store: the compiler emits an ontology of UUID-named instruction
classes, the full machine keeps its stacks and frames as triples (so it can
freeze, migrate, and resume), and the reduced machine runs the same programs
natively as a semantic cross-check.
"""

from .rdf import Graph, Term, Triple, UuidSource, parse_ntriples, serialize_ntriples
from .sparql import Query, UpdateCommand, eval_ask, eval_select, exec_update, parse_command
from .store import HttpStore, LocalStore, RecordingStore, open_store
from .machine import FhatMachine, MachineFault, ProgramError, resume
from .reduced import ReducedMachine, run_reduced
from .isomorphism import graph_iso_mod_uuid, object_graph_iso, object_level
from .toolchain import compile_into_store, compile_source, ensure_base_ontology

__all__ = [
    "Graph", "Term", "Triple", "UuidSource", "parse_ntriples", "serialize_ntriples",
    "Query", "UpdateCommand", "eval_ask", "eval_select", "exec_update", "parse_command",
    "HttpStore", "LocalStore", "RecordingStore", "open_store",
    "FhatMachine", "MachineFault", "ProgramError", "resume",
    "ReducedMachine", "run_reduced",
    "graph_iso_mod_uuid", "object_graph_iso", "object_level",
    "compile_into_store", "compile_source", "ensure_base_ontology",
]
