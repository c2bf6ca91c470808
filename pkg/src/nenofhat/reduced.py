"""The reduced interpreter: same observable program semantics as the
triple-resident machine, but the program counter, stacks, and frames are
native values. The store is touched only to instantiate/destroy objects and
manipulate their properties, through the same templates and query engine the
full machine uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .api import ApiIndex, InstrSpec, NENO, RDF, has_base_ontology
from .datatypes import EvalError, apply_arithmetic, boolean, compare
from .machine import (
    MachineFault,
    ProgramError,
    check_constructed,
    execute_field_command,
    select_terms,
    subsumes,
    type_of,
)
from .rdf import Term, Triple, UuidSource
from .sparql import Query, QueryParseError, parse_command

_XSD_INT = "http://www.w3.org/2001/XMLSchema#integer"


@dataclass
class _Var:
    values: list[Term]
    depth: int  # index into the frame's block stack


@dataclass
class _Frame:
    receiver: Term
    blocks: list[Term] = field(default_factory=list)  # Block class URIs
    vars: dict[str, _Var] = field(default_factory=dict)


@dataclass
class _Entry:
    return_to: Term | None
    frame: _Frame | None
    purge: Term | None = None
    constructed: Term | None = None


class ReducedMachine:
    """Executes compiled method classes directly; never writes machine state
    to the store."""

    def __init__(self, store, uuid_source: UuidSource | None = None):
        self.store = store
        self.uuid = uuid_source or UuidSource()
        self.index = ApiIndex(store.match)
        if not has_base_ontology(store.match):
            raise ProgramError("instruction ontology missing from store")
        self.pc: Term | None = None
        self.frame: _Frame | None = None
        self.operands: list[Term] = []
        self.returns: list[_Entry] = []
        self.destructing: set[Term] = set()

    # -- objects -----------------------------------------------------------

    def instantiate_object(self, class_uri: Term, ctor_args: list[Term] | None = None) -> Term:
        if self.pc is not None:
            raise ProgramError("machine busy")
        obj = self._raw_instantiate(class_uri)
        args = ctor_args or []
        local = class_uri.text.rsplit("#", 1)[-1]
        ctor = self.index.find_method(class_uri, "!" + local, len(args))
        if ctor is None:
            if args:
                raise MachineFault(f"no matching constructor for {class_uri.text}")
            check_constructed(self.store, self.index, obj)
            return obj
        self._enter_method(ctor, obj, args, _Entry(None, None, constructed=obj))
        self._run_to_completion()
        self.operands.pop()  # the constructor's returned reference
        return obj

    def _raw_instantiate(self, class_uri: Term) -> Term:
        if self.index.class_spec(class_uri) is None:
            raise ProgramError(f"unknown class {class_uri.text}")
        obj = self.uuid.mint()
        self.store.add(Triple(obj, RDF.TYPE, class_uri))
        return obj

    def _purge(self, obj: Term, frames: list["_Frame"] | None = None) -> None:
        for t in self.store.match(obj, None, None):
            self.store.remove(t)
        # variable references to the destroyed object die, as they do when the
        # full machine strips frame-variable triples
        scrub = frames if frames is not None else self._live_frames()
        for frame in scrub:
            for var in frame.vars.values():
                var.values = [v for v in var.values if v != obj]

    def _live_frames(self) -> list["_Frame"]:
        frames = [e.frame for e in self.returns if e.frame is not None]
        if self.frame is not None:
            frames.append(self.frame)
        return frames

    # -- program drive -------------------------------------------------------

    def start_program(self, class_uri: Term, method_name: str) -> None:
        if self.pc is not None:
            raise ProgramError("machine busy")
        spec = self.index.class_spec(class_uri)
        if spec is None:
            raise ProgramError(f"unknown class {class_uri.text}")
        candidates = [m for m in self.index.all_methods(class_uri) if m.name == method_name]
        if not candidates:
            raise ProgramError(f"method {method_name!r} not found on {class_uri.text}")
        target = [m for m in candidates if m.arity == 0]
        if not target:
            raise ProgramError(f"method {method_name!r} takes arguments")
        obj = self._raw_instantiate(class_uri)
        self._enter_method(target[0], obj, [], None)

    def run(self, max_steps: int | None = None) -> tuple[str, int]:
        steps = 0
        while self.pc is not None and (max_steps is None or steps < max_steps):
            self._step()
            steps += 1
        return ("finished" if self.pc is None else "progressed"), steps

    def _run_to_completion(self) -> None:
        while self.pc is not None:
            self._step()

    def _enter_method(self, mspec, receiver: Term, args: list[Term],
                      entry: _Entry | None) -> None:
        if mspec.first_inst is None:
            raise MachineFault(f"method {mspec.name!r} has no code")
        if len(mspec.args) != len(args):
            raise MachineFault("argument count mismatch")
        if entry is not None:
            self.returns.append(entry)
        frame = _Frame(receiver, blocks=[mspec.first_inst])
        for (name, _), value in zip(mspec.args, args):
            frame.vars[name] = _Var([value], depth=0)
        self.frame = frame
        self.pc = mspec.first_inst

    # -- scope bookkeeping ------------------------------------------------------

    def _pop_blocks_until(self, target: Term | None) -> None:
        frame = self.frame
        while True:
            top = frame.blocks[-1] if frame.blocks else None
            if top == target:
                return
            if top is None:
                raise MachineFault("malformed block structure")
            depth = len(frame.blocks) - 1
            frame.blocks.pop()
            frame.vars = {k: v for k, v in frame.vars.items() if v.depth != depth}

    # -- values -------------------------------------------------------------------

    def _spec(self, cls: Term) -> InstrSpec:
        return self.index.instr_spec(cls)

    def resolve_values(self, cls: Term) -> list[Term]:
        spec = self._spec(cls)
        op = spec.opcode
        if op == NENO.LOCAL_DIRECT:
            value = spec.consts.get(NENO.HAS_VALUE) or spec.consts.get(NENO.HAS_URI)
            if value is None:
                raise MachineFault("LocalDirect without a value")
            return [value]
        if op == NENO.POP_DIRECT:
            if not self.operands:
                raise MachineFault("operand stack underflow")
            return [self.operands.pop()]
        if op == NENO.OBJECT_VARIABLE:
            if self.frame is None:
                raise MachineFault("no current object")
            return [self.frame.receiver]
        if op == NENO.LOCAL_VARIABLE:
            name = spec.const_text(NENO.HAS_VARIABLE_NAME)
            var = self.frame.vars.get(name) if self.frame else None
            if var is None:
                raise MachineFault(f"undefined variable {name!r}")
            idx, count = self._index_and_count(spec)
            values = sorted(var.values, key=Term.sort_key)
            if count:
                return [Term.literal(str(len(values)), _XSD_INT)]
            if idx is not None:
                if idx < 0 or idx >= len(values):
                    raise MachineFault(
                        f"variable index {idx} out of range ({len(values)} values)")
                return [values[idx]]
            return values
        if op == NENO.FIELD_VARIABLE:
            base_cls = spec.refs.get(NENO.HAS_BASE)
            template = spec.const_text(NENO.HAS_TEMPLATE)
            if base_cls is None or template is None:
                raise MachineFault("field value node missing base or template")
            idx, count = self._index_and_count(spec)
            base = self.resolve_single(base_cls)
            return select_terms(self.store, template, [base], idx, count)
        raise MachineFault(f"unsupported value opcode {op.text}")

    def _index_and_count(self, spec: InstrSpec) -> tuple[int | None, bool]:
        count = spec.flag(NENO.IS_COUNT)
        idx = None
        idx_cls = spec.refs.get(NENO.HAS_INDEX)
        if idx_cls is not None:
            term = self.resolve_single(idx_cls)
            if not term.is_literal:
                raise MachineFault("index must be an integer")
            idx = int(term.text)
        return idx, count

    def resolve_single(self, cls: Term) -> Term:
        values = self.resolve_values(cls)
        if len(values) != 1:
            raise MachineFault(f"expected exactly one value, found {len(values)}")
        return values[0]

    def _operand(self, spec: InstrSpec, prop: Term) -> Term:
        ref = spec.refs.get(prop)
        if ref is None:
            raise MachineFault(f"missing operand {prop.text}")
        return self.resolve_single(ref)

    # -- stepping -----------------------------------------------------------------

    def _step(self) -> None:
        cls = self.pc
        spec = self._spec(cls)
        op = spec.opcode
        if op == NENO.BLOCK:
            frame = self.frame
            if not frame.blocks or frame.blocks[-1] != cls:
                self._pop_blocks_until(spec.refs.get(NENO.IN_BLOCK))
                frame.blocks.append(cls)
            self._advance(spec)
            return
        self._pop_blocks_until(spec.refs.get(NENO.IN_BLOCK))

        if op == NENO.PUSH_VALUE:
            self.operands.append(self._operand(spec, NENO.HAS_VALUE))
            self._advance(spec)
        elif op in (NENO.ADD, NENO.SUBTRACT, NENO.MULTIPLY, NENO.DIVIDE, NENO.NOT):
            right = None
            if NENO.HAS_RIGHT in spec.refs:
                right = self.resolve_single(spec.refs[NENO.HAS_RIGHT])
            left = self._operand(spec, NENO.HAS_LEFT)
            try:
                self.operands.append(apply_arithmetic(op, left, right))
            except EvalError as exc:
                raise MachineFault(str(exc)) from exc
            self._advance(spec)
        elif op in (NENO.EQUALS, NENO.GREATER_THAN, NENO.GREATER_THAN_EQUAL,
                    NENO.LESS_THAN, NENO.LESS_THAN_EQUAL):
            right = self._operand(spec, NENO.HAS_RIGHT)
            left = self._operand(spec, NENO.HAS_LEFT)
            try:
                truth = compare(op, left, right)
            except EvalError as exc:
                raise MachineFault(str(exc)) from exc
            target = spec.refs.get(NENO.TRUE_INST if truth else NENO.FALSE_INST)
            if target is None:
                self._do_return(None)
            else:
                self.pc = target
        elif op in (NENO.SET, NENO.SET_PLUS, NENO.SET_MINUS, NENO.SET_CLEAR):
            self._exec_setter(spec, op)
            self._advance(spec)
        elif op == NENO.SET_QUERY:
            template = spec.const_text(NENO.HAS_TEMPLATE)
            slots = [self.resolve_single(c) for c in reversed(spec.slots)][::-1]
            from .codegen import render_template_text

            [text] = render_template_text(template, slots)
            result = self.store.execute_text(text)
            if result.kind != "truth":
                raise MachineFault("field query template must be an ASK")
            self.operands.append(boolean(result.truth))
            self._advance(spec)
        elif op == NENO.NET_QUERY:
            self._exec_net_query(spec)
            self._advance(spec)
        elif op == NENO.INVOKE_METHOD:
            self._exec_invoke(spec)
        elif op == NENO.CONSTRUCT:
            self._exec_construct(spec)
        elif op == NENO.DESTRUCT:
            self._exec_destruct(spec)
        elif op == NENO.RETURN:
            value = None
            if NENO.HAS_VALUE in spec.refs:
                value = self.resolve_single(spec.refs[NENO.HAS_VALUE])
            self._do_return(value)
        elif op == NENO.TYPE_OF:
            term = self._operand(spec, NENO.HAS_VALUE)
            cls_uri = spec.consts.get(NENO.HAS_CLASS)
            if cls_uri is None:
                raise MachineFault("TypeOf without a class operand")
            self.operands.append(boolean(subsumes(self.index, term, cls_uri)))
            self._advance(spec)
        elif op == NENO.TYPE_OF_QUERY:
            term = self._operand(spec, NENO.HAS_VALUE)
            self.operands.append(type_of(self.index, term))
            self._advance(spec)
        else:
            raise MachineFault(f"unsupported opcode {op.text}")

    def _advance(self, spec: InstrSpec) -> None:
        nxt = spec.refs.get(NENO.NEXT_INST)
        if nxt is None:
            self._do_return(None)
        else:
            self.pc = nxt

    def _exec_setter(self, spec: InstrSpec, op: Term) -> None:
        template = spec.const_text(NENO.HAS_TEMPLATE)
        if template is not None:
            slot_values: list[list[Term]] = []
            for cls in reversed(spec.slots):
                slot_values.append(self.resolve_values(cls))
            slot_values.reverse()
            execute_field_command(self.store, self.index, template, slot_values,
                                  self.destructing)
            return
        target_cls = spec.refs.get(NENO.HAS_TARGET)
        if target_cls is None:
            raise MachineFault("setter without target or template")
        tspec = self._spec(target_cls)
        name = tspec.const_text(NENO.HAS_VARIABLE_NAME)
        if name is None:
            raise MachineFault("setter target is not a variable")
        values: list[Term] = []
        if NENO.HAS_VALUE in spec.refs:
            values = self.resolve_values(spec.refs[NENO.HAS_VALUE])
        frame = self.frame
        if spec.flag(NENO.DECLARES):
            if name in frame.vars:
                raise MachineFault(f"variable {name!r} already declared")
            frame.vars[name] = _Var(list(values), depth=len(frame.blocks) - 1)
            return
        var = frame.vars.get(name)
        if var is None:
            raise MachineFault(f"undefined variable {name!r}")
        if op == NENO.SET:
            var.values = list(values)
        elif op == NENO.SET_PLUS:
            var.values.extend(v for v in values if v not in var.values)
        elif op == NENO.SET_MINUS:
            var.values = [v for v in var.values if v not in values]
        elif op == NENO.SET_CLEAR:
            var.values = []

    def _exec_net_query(self, spec: InstrSpec) -> None:
        query_term = self._operand(spec, NENO.HAS_VALUE)
        if not query_term.is_literal:
            raise MachineFault("network query must be a string")
        try:
            command = parse_command(query_term.text)
        except QueryParseError as exc:
            raise MachineFault(f"malformed query: {exc}") from exc
        if not isinstance(command, Query) or command.form != "select":
            raise MachineFault("network query must be a SELECT")
        result = self.store.execute_text(query_term.text)
        var_name = command.projected[0]
        values = [row[var_name] for row in result.rows]
        target_cls = spec.refs.get(NENO.HAS_TARGET)
        tspec = self._spec(target_cls) if target_cls is not None else None
        name = tspec.const_text(NENO.HAS_VARIABLE_NAME) if tspec else None
        if name is None:
            raise MachineFault("network query target is not a variable")
        frame = self.frame
        if spec.flag(NENO.DECLARES):
            if name in frame.vars:
                raise MachineFault(f"variable {name!r} already declared")
            frame.vars[name] = _Var(list(values), depth=len(frame.blocks) - 1)
        else:
            var = frame.vars.get(name)
            if var is None:
                raise MachineFault(f"undefined variable {name!r}")
            var.values = list(values)

    def _class_of(self, obj: Term) -> Term:
        types = self.index.objects(obj, RDF.TYPE)
        if not types:
            raise MachineFault(f"untyped object {obj.text}")
        return types[0]

    def _exec_invoke(self, spec: InstrSpec) -> None:
        name = spec.const_text(NENO.HAS_METHOD_NAME)
        arity = int(spec.const_text(NENO.HAS_ARITY) or "0")
        if len(self.operands) < arity:
            raise MachineFault("operand stack underflow")
        args = [self.operands.pop() for _ in range(arity)][::-1]
        receiver = self._operand(spec, NENO.HAS_OBJECT)
        if not receiver.is_uri:
            raise MachineFault("method invocation on a literal")
        mspec = self.index.find_method(self._class_of(receiver), name, arity)
        if mspec is None or mspec.name.startswith(("!", "~")):
            raise MachineFault(f"method {name!r}/{arity} not found on {receiver.text}")
        return_to = spec.refs.get(NENO.NEXT_INST)
        if return_to is None:
            raise MachineFault("invoke without continuation")
        self._enter_method(mspec, receiver, args, _Entry(return_to, self.frame))

    def _exec_construct(self, spec: InstrSpec) -> None:
        cls = spec.consts.get(NENO.HAS_CLASS)
        arity = int(spec.const_text(NENO.HAS_ARITY) or "0")
        if cls is None:
            raise MachineFault("construct without class")
        if len(self.operands) < arity:
            raise MachineFault("operand stack underflow")
        args = [self.operands.pop() for _ in range(arity)][::-1]
        obj = self._raw_instantiate(cls)
        local = cls.text.rsplit("#", 1)[-1]
        ctor = self.index.find_method(cls, "!" + local, arity)
        return_to = spec.refs.get(NENO.NEXT_INST)
        if ctor is None:
            if arity:
                raise MachineFault(f"no matching constructor for {cls.text}")
            check_constructed(self.store, self.index, obj)
            self.operands.append(obj)
            if return_to is None:
                self._do_return(None)
            else:
                self.pc = return_to
            return
        if return_to is None:
            raise MachineFault("construct without continuation")
        self._enter_method(ctor, obj, args,
                           _Entry(return_to, self.frame, constructed=obj))

    def _exec_destruct(self, spec: InstrSpec) -> None:
        obj = self._operand(spec, NENO.HAS_OBJECT)
        if not obj.is_uri or not self.index.objects(obj, RDF.TYPE):
            raise MachineFault("destruct of nonexistent object")
        cls = self._class_of(obj)
        local = cls.text.rsplit("#", 1)[-1]
        dtor = self.index.find_method(cls, "~" + local, 0)
        return_to = spec.refs.get(NENO.NEXT_INST)
        if dtor is None:
            self._purge(obj)
            if return_to is None:
                self._do_return(None)
            else:
                self.pc = return_to
            return
        if return_to is None:
            raise MachineFault("destruct without continuation")
        self.destructing.add(obj)
        self._enter_method(dtor, obj, [], _Entry(return_to, self.frame, purge=obj))

    def _do_return(self, value: Term | None) -> None:
        # variables referencing a destroyed object die with the frame natively
        if not self.returns:
            self.pc = None
            self.frame = None
            return
        entry = self.returns.pop()
        if entry.purge is not None:
            frames = [e.frame for e in self.returns if e.frame is not None]
            if entry.frame is not None:
                frames.append(entry.frame)
            self._purge(entry.purge, frames)
            self.destructing.discard(entry.purge)
        if entry.constructed is not None:
            check_constructed(self.store, self.index, entry.constructed)
        self.frame = entry.frame
        if value is not None:
            self.operands.append(value)
        self.pc = entry.return_to


def run_reduced(store, class_uri: Term, method_name: str,
                uuid_source: UuidSource | None = None,
                max_steps: int | None = None) -> tuple[str, int]:
    """Execute a program under the reduced interpreter; the store ends up
    holding only object-level effects."""
    vm = ReducedMachine(store, uuid_source)
    vm.start_program(class_uri, method_name)
    return vm.run(max_steps)
