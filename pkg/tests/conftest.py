"""Shared fixtures: compiled stores and machine drivers."""

from __future__ import annotations

import pytest

from nenofhat.machine import FhatMachine
from nenofhat.rdf import Term, UuidSource
from nenofhat.store import LocalStore, RecordingStore
from nenofhat.toolchain import compile_into_store

DEMO = "http://neno.lanl.gov/demo#"


def demo(name: str) -> Term:
    return Term.uri(DEMO + name)


def build_store(*sources: str, seed: int = 11) -> RecordingStore:
    """A recording local store with every source compiled in."""
    store = RecordingStore(LocalStore())
    uuid_source = UuidSource(seed)
    for i, source in enumerate(sources):
        compile_into_store(source, store, uuid_source, source_name=f"unit{i}.neno")
    return store


def boot_machine(store, seed: int = 101, reuse: bool = True) -> FhatMachine:
    vm = FhatMachine(store, UuidSource(seed))
    vm.boot(reuse=reuse)
    return vm


def run_program(store, class_name: str, method: str = "main", seed: int = 101,
                reuse: bool = True, max_steps: int | None = 100_000):
    vm = boot_machine(store, seed=seed, reuse=reuse)
    vm.start_program(demo(class_name), method)
    status, steps = vm.run(max_steps)
    return vm, status, steps


@pytest.fixture
def prelude() -> str:
    return (
        "prefix owl: <http://www.w3.org/2002/07/owl>;\n"
        "prefix xsd: <http://www.w3.org/2001/XMLSchema>;\n"
        "prefix demo: <http://neno.lanl.gov/demo>;\n"
    )
