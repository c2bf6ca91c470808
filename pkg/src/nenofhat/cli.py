"""Command-line tools: the nenofhat compiler, the fhat VM process, and the
fhat-store HTTP endpoint."""

from __future__ import annotations

import argparse
import os
import sys

from .analyzer import AnalysisError
from .api import NENO
from .lexer import NenoSyntaxError
from .machine import FhatMachine, ProgramError
from .namespaces import well_known
from .rdf import Term, Triple, UuidSource
from .reduced import ReducedMachine
from .store import LocalStore, StoreError, open_store
from .toolchain import compile_into_store, ensure_base_ontology

_STORE_ENV = "NENO_STORE"


def _default_store() -> str | None:
    return os.environ.get(_STORE_ENV)


def _uuid_source(seed: int | None) -> UuidSource:
    return UuidSource(seed)


def _expand_uri(text: str) -> Term:
    return Term.uri(well_known().expand_or_uri(text))


def _save_if_local(store) -> None:
    if isinstance(store, LocalStore) and store.path is not None:
        store.save()


# ---------------------------------------------------------------------------
# nenofhat
# ---------------------------------------------------------------------------

def nenofhat_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nenofhat", description="Compile Neno source into a triple store.")
    parser.add_argument("source", help="Neno source file")
    parser.add_argument("-o", dest="format", default="ntriple",
                        help="output type (ntriple)")
    parser.add_argument("-t", dest="target", default=_default_store(),
                        help="triple-store interface (URL or N-Triples file path)")
    parser.add_argument("--seed", type=int, default=None,
                        help="deterministic UUID generator seed")
    args = parser.parse_args(argv)

    if args.format != "ntriple":
        print(f"unsupported format: {args.format}", file=sys.stderr)
        return 1
    if args.target is None:
        print("no store target: pass -t or set $" + _STORE_ENV, file=sys.stderr)
        return 1
    try:
        with open(args.source, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        print(f"cannot read source: {exc}", file=sys.stderr)
        return 1
    try:
        store = open_store(args.target)
        added = compile_into_store(source, store, _uuid_source(args.seed),
                                   source_name=os.path.basename(args.source))
        _save_if_local(store)
    except (NenoSyntaxError, AnalysisError) as exc:
        print(f"{args.source}: {exc}", file=sys.stderr)
        return 1
    except StoreError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    print(f"loaded {added} triples into {args.target}")
    return 0


# ---------------------------------------------------------------------------
# fhat
# ---------------------------------------------------------------------------

def _claim(store, machine: Term, token: str, steal: bool) -> bool:
    existing = store.match(machine, NENO.CLAIMED_BY, None)
    if existing and not steal:
        return False
    for t in existing:
        store.remove(t)
    store.add(Triple(machine, NENO.CLAIMED_BY, Term.literal(token)))
    return True


def _release(store, machine: Term, token: str) -> None:
    store.remove(Triple(machine, NENO.CLAIMED_BY, Term.literal(token)))


def fhat_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fhat", description="Run or resume a Fhat virtual machine.")
    parser.add_argument("-vmi", dest="vmi", help="virtual machine instance URI (resume)")
    parser.add_argument("-vmc", dest="vmc", help="virtual machine class URI (fresh)")
    parser.add_argument("-c", dest="start_class", help="start class URI")
    parser.add_argument("-cm", dest="start_method", help="start class no-argument method")
    parser.add_argument("-t", dest="target", default=_default_store(),
                        help="triple-store interface (URL or N-Triples file path)")
    parser.add_argument("--engine", choices=("fhat", "rfhat"), default="fhat")
    parser.add_argument("--max-steps", type=int, default=None,
                        help="halt cleanly after this many instructions")
    parser.add_argument("--seed", type=int, default=None,
                        help="deterministic UUID generator seed")
    parser.add_argument("--no-method-reuse", action="store_true",
                        help="give every object a private method instance")
    parser.add_argument("--steal", action="store_true",
                        help="override a stale machine claim")
    parser.add_argument("--list-machines", action="store_true",
                        help="list machine instance URIs in the store and exit")
    args = parser.parse_args(argv)

    if args.target is None:
        print("no store target: pass -t or set $" + _STORE_ENV, file=sys.stderr)
        return 1
    if args.list_machines:
        try:
            store = open_store(args.target)
        except StoreError as exc:
            print(str(exc), file=sys.stderr)
            return 2
        from .api import RDF

        for t in sorted(store.match(None, RDF.TYPE, NENO.FHAT),
                        key=lambda t: t.subject.sort_key()):
            claims = store.match(t.subject, NENO.CLAIMED_BY, None)
            suffix = " claimed" if claims else ""
            print(f"{t.subject.text}{suffix}")
        return 0
    resume_mode = args.vmi is not None
    if not resume_mode and not (args.vmc and args.start_class and args.start_method):
        print("fresh runs need -vmc, -c, and -cm; resumes need -vmi", file=sys.stderr)
        return 1

    try:
        store = open_store(args.target)
    except StoreError as exc:
        print(str(exc), file=sys.stderr)
        return 2

    uuid_source = _uuid_source(args.seed)
    try:
        if args.engine == "rfhat":
            if resume_mode:
                print("the reduced engine cannot resume a stored machine state",
                      file=sys.stderr)
                return 1
            vm = ReducedMachine(store, uuid_source)
            vm.start_program(_expand_uri(args.start_class), args.start_method)
            status, steps = vm.run(args.max_steps)
            _save_if_local(store)
            print(f"{status} after {steps} step(s) (reduced engine)")
            return 0
        machine = FhatMachine(store, uuid_source)
        if resume_mode:
            machine.attach(_expand_uri(args.vmi))
        else:
            if _expand_uri(args.vmc) != NENO.FHAT:
                print(f"unknown machine class: {args.vmc}", file=sys.stderr)
                return 1
            machine.boot(reuse=not args.no_method_reuse)
        token = uuid_source.uuid_str()
        if not _claim(store, machine.machine, token, args.steal):
            print(f"machine {machine.machine.text} is claimed by another process "
                  "(use --steal to override)", file=sys.stderr)
            return 1
        try:
            if not resume_mode:
                machine.start_program(_expand_uri(args.start_class), args.start_method)
            status, steps = machine.run(args.max_steps)
        finally:
            _release(store, machine.machine, token)
            _save_if_local(store)
        fault = machine.fault()
        if fault is not None:
            print(f"machine fault at {fault['instruction']}: {fault['message']}",
                  file=sys.stderr)
            print(f"machine {machine.machine.text}")
            return 3
        print(f"{status} after {steps} step(s)")
        print(f"machine {machine.machine.text}")
        return 0
    except ProgramError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except StoreError as exc:
        print(str(exc), file=sys.stderr)
        return 2


# ---------------------------------------------------------------------------
# fhat-store
# ---------------------------------------------------------------------------

def store_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fhat-store", description="Serve a triple store over HTTP.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8585)
    parser.add_argument("--file", dest="path", default=None,
                        help="N-Triples persistence file")
    parser.add_argument("--with-ontology", action="store_true",
                        help="preload the instruction-set ontology")
    args = parser.parse_args(argv)

    from .server import StoreServer

    store = LocalStore(path=args.path)
    if args.with_ontology:
        ensure_base_ontology(store)
    server = StoreServer(store, args.host, args.port)
    print(f"serving triple store on {server.url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:  # pragma: no cover - interactive
        pass
    return 0
