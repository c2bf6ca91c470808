"""The triple-resident virtual machine: program counter, stacks, frames, and
objects all live in the store as triples. One step() reads the instruction at
programLocation, applies its effects, and advances the counter; a snapshot at
any step boundary is a complete, resumable machine.
"""

from __future__ import annotations

from .api import ApiIndex, NENO, RDF, RDFS, has_base_ontology
from .codegen import render_template_text
from .datatypes import EvalError, apply_arithmetic, boolean, compare
from .namespaces import NENO_NS, in_base_namespace
from .rdf import Term, Triple, UuidSource, parse_ntriples, serialize_ntriples
from .sparql import Query, QueryParseError, UpdateCommand, Variable, parse_command

PROGRESSED = "progressed"
HALTED = "halted"
FINISHED = "finished"

_TRUE = Term.literal("true", "http://www.w3.org/2001/XMLSchema#boolean")
_FALSE = Term.literal("false", "http://www.w3.org/2001/XMLSchema#boolean")


class MachineFault(RuntimeError):
    """A runtime fault: the machine halts and records it, state preserved."""


class ProgramError(RuntimeError):
    """Missing machine/class/method or a store not set up for execution."""


# ---------------------------------------------------------------------------
# Runtime helpers shared with the reduced interpreter
# ---------------------------------------------------------------------------

def subsumes(index: ApiIndex, term: Term, cls: Term) -> bool:
    """typeof semantics: rdf:type through zero or more rdfs:subClassOf edges;
    everything is an rdfs:Resource."""
    if cls == RDFS.RESOURCE:
        return True
    if term.is_literal:
        return cls.text == term.datatype
    for typ in index.objects(term, RDF.TYPE):
        if typ == cls or cls in index.superclasses(typ):
            return True
    return False


def type_of(index: ApiIndex, term: Term) -> Term:
    if term.is_literal:
        return Term.uri(term.datatype or "")
    types = index.objects(term, RDF.TYPE)
    if not types:
        raise MachineFault(f"untyped resource {term.text}")
    return types[0]


def select_terms(store, template_text: str, slots: list[Term],
                 index_value: int | None = None, count: bool = False) -> list[Term]:
    """Run a compiled SELECT template; rows come back in the engine's
    deterministic order."""
    [text] = render_template_text(template_text, slots)
    result = store.execute_text(text)
    if result.kind != "bindings":
        raise MachineFault("field selection template did not yield bindings")
    var = result.variables[0]
    rows = [row[var] for row in result.rows]
    if count:
        return [Term.literal(str(len(rows)), "http://www.w3.org/2001/XMLSchema#integer")]
    if index_value is not None:
        if index_value < 0 or index_value >= len(rows):
            raise MachineFault(f"field index {index_value} out of range ({len(rows)} values)")
        return [rows[index_value]]
    return rows


def _touched_pairs(store, command) -> set[tuple[Term, Term]]:
    """(subject, predicate) pairs an update will affect, computed before
    execution so variable-subject deletes can be audited afterwards."""
    if not isinstance(command, UpdateCommand):
        return set()
    touched: set[tuple[Term, Term]] = set()
    for pat in command.patterns:
        if isinstance(pat.predicate, Variable):
            continue
        pred = pat.predicate
        if not isinstance(pat.subject, Variable):
            touched.add((pat.subject, pred))
        elif not isinstance(pat.object, Variable):
            for t in store.match(None, pred, pat.object):
                touched.add((t.subject, pred))
    return touched


def check_cardinality(store, index: ApiIndex,
                      touched: set[tuple[Term, Term]],
                      exempt: set[Term]) -> None:
    """Field counts must sit inside declared bounds after every completed
    statement; a violation is a machine fault, never silent."""
    for subject, pred in touched:
        if subject in exempt:
            continue
        types = index.objects(subject, RDF.TYPE)
        if not types:
            continue
        fields = index.all_fields(types[0])
        fspec = fields.get(pred)
        if fspec is None:
            continue
        count = len(store.match(subject, pred, None))
        if count < fspec.min or (fspec.max is not None and count > fspec.max):
            bound = "*" if fspec.max is None else str(fspec.max)
            raise MachineFault(
                f"cardinality violation: {pred.text} on {subject.text} has "
                f"{count} value(s), declared [{fspec.min}..{bound}]"
            )


def check_constructed(store, index: ApiIndex, obj: Term) -> None:
    types = index.objects(obj, RDF.TYPE)
    if not types:
        return
    touched = {(obj, f) for f in index.all_fields(types[0])}
    check_cardinality(store, index, touched, set())


def execute_field_command(store, index: ApiIndex, template_text: str,
                          slot_values: list[list[Term]],
                          exempt: set[Term]) -> list:
    """Render and run a field-operation template; slot k substitutes each of
    slot_values[k] in turn (only the value slot is ever multi-valued)."""
    combos: list[list[Term]] = [[]]
    for values in slot_values:
        combos = [prefix + [v] for prefix in combos for v in values]
    if not slot_values:
        combos = [[]]
    results = []
    touched: set[tuple[Term, Term]] = set()
    issued: set[str] = set()
    for combo in combos:
        for text in render_template_text(template_text, combo):
            if text in issued:
                continue  # a shared DELETE line renders once across values
            issued.add(text)
            try:
                command = parse_command(text)
            except QueryParseError as exc:
                raise MachineFault(f"malformed store command: {exc}") from exc
            touched |= _touched_pairs(store, command)
            results.append(store.execute_text(text))
    check_cardinality(store, index, touched, exempt)
    return results


# ---------------------------------------------------------------------------
# The machine
# ---------------------------------------------------------------------------

class FhatMachine:
    def __init__(self, store, uuid_source: UuidSource | None = None):
        self.store = store
        self.uuid = uuid_source or UuidSource()
        self.index = ApiIndex(store.match)
        self.machine: Term | None = None
        if not has_base_ontology(store.match):
            raise ProgramError("instruction ontology missing from store")

    # -- triple plumbing ---------------------------------------------------

    def _one(self, s: Term, p: Term) -> Term | None:
        return self.index.one(s, p)

    def _objs(self, s: Term, p: Term) -> list[Term]:
        return self.index.objects(s, p)

    def _add(self, s: Term, p: Term, o: Term) -> None:
        self.store.add(Triple(s, p, o))

    def _remove_all(self, s: Term, p: Term) -> None:
        for t in self.store.match(s, p, None):
            self.store.remove(t)

    def _set(self, s: Term, p: Term, o: Term | None) -> None:
        self._remove_all(s, p)
        if o is not None:
            self._add(s, p, o)

    def _drop_node(self, node: Term) -> None:
        for t in self.store.match(node, None, None):
            self.store.remove(t)

    # -- linked-list stacks --------------------------------------------------

    def _stack_push(self, owner: Term, prop: Term, value: Term) -> None:
        old = self._one(owner, prop) or RDF.NIL
        cell = self.uuid.mint()
        self._add(cell, RDF.FIRST, value)
        self._add(cell, RDF.REST, old)
        self._set(owner, prop, cell)

    def _stack_pop(self, owner: Term, prop: Term, what: str) -> Term:
        cell = self._one(owner, prop)
        if cell is None or cell == RDF.NIL:
            raise MachineFault(f"{what} underflow")
        value = self._one(cell, RDF.FIRST)
        rest = self._one(cell, RDF.REST) or RDF.NIL
        self._drop_node(cell)
        self._set(owner, prop, rest)
        if value is None:
            raise MachineFault(f"malformed {what} cell")
        return value

    def _stack_peek_all(self, owner: Term, prop: Term) -> list[Term]:
        out = []
        cell = self._one(owner, prop)
        while cell is not None and cell != RDF.NIL:
            value = self._one(cell, RDF.FIRST)
            if value is not None:
                out.append(value)
            cell = self._one(cell, RDF.REST)
        return out

    def operand_stack(self) -> list[Term]:
        """Top first."""
        return self._stack_peek_all(self.machine, NENO.HAS_OPERAND_STACK)

    def _push(self, value: Term) -> None:
        self._stack_push(self.machine, NENO.HAS_OPERAND_STACK, value)

    def _pop(self) -> Term:
        return self._stack_pop(self.machine, NENO.HAS_OPERAND_STACK, "operand stack")

    # -- lifecycle -------------------------------------------------------------

    def boot(self, reuse: bool = True) -> Term:
        vm = self.uuid.mint()
        self._add(vm, RDF.TYPE, NENO.FHAT)
        self._add(vm, NENO.HALT, _FALSE)
        self._add(vm, NENO.METHOD_REUSE, boolean(reuse))
        self._add(vm, NENO.HAS_OPERAND_STACK, RDF.NIL)
        self._add(vm, NENO.HAS_RETURN_STACK, RDF.NIL)
        self.machine = vm
        return vm

    def attach(self, machine: Term) -> None:
        if not self.store.match(machine, RDF.TYPE, NENO.FHAT):
            raise ProgramError(f"no machine at {machine.text}")
        self.machine = machine

    @property
    def method_reuse(self) -> bool:
        flag = self._one(self.machine, NENO.METHOD_REUSE)
        return flag is not None and flag.text == "true"

    def halt_flag(self) -> bool:
        flag = self._one(self.machine, NENO.HALT)
        return flag is not None and flag.text == "true"

    def set_halt(self, value: bool) -> None:
        self._set(self.machine, NENO.HALT, boolean(value))

    def program_location(self) -> Term | None:
        return self._one(self.machine, NENO.PROGRAM_LOCATION)

    def current_frame(self) -> Term | None:
        return self._one(self.machine, NENO.HAS_FRAME)

    def fault(self) -> dict | None:
        node = self._one(self.machine, NENO.HAS_FAULT)
        if node is None:
            return None
        message = self._one(node, NENO.HAS_MESSAGE)
        at = self._one(node, NENO.AT_INSTRUCTION)
        return {
            "message": message.text if message else "",
            "instruction": at.text if at else None,
        }

    # -- objects and triple-code instantiation -----------------------------------

    def instantiate_object(self, class_uri: Term, ctor_args: list[Term] | None = None) -> Term:
        """Mint an object, instantiate its methods per the reuse policy, and
        run a constructor synchronously when one matches."""
        if self.program_location() is not None:
            raise ProgramError("machine busy")
        obj = self._raw_instantiate(class_uri)
        args = ctor_args or []
        local = class_uri.text.rsplit("#", 1)[-1]
        ctor = self._find_method_instance(obj, "!" + local, len(args))
        if ctor is None:
            if args:
                raise MachineFault(f"no matching constructor for {class_uri.text}")
            check_constructed(self.store, self.index, obj)
            return obj
        self._enter_method(ctor, obj, args, return_to=None, constructed=obj)
        while self.program_location() is not None:
            status = self.step()
            if status == HALTED:
                fault = self.fault()
                raise MachineFault(f"constructor faulted: {fault['message'] if fault else ''}")
            if status == FINISHED:
                break
        self._pop()  # the constructor's returned object reference
        return obj

    def destruct_object(self, obj: Term) -> None:
        """Run the object's destructor (default: none) and strip every
        remaining reference; the class specification stays in the store."""
        if self.program_location() is not None:
            raise ProgramError("machine busy")
        if not obj.is_uri or not self._objs(obj, RDF.TYPE):
            raise MachineFault("destruct of nonexistent object")
        types = self._objs(obj, RDF.TYPE)
        local = types[0].text.rsplit("#", 1)[-1]
        dtor = self._find_method_instance(obj, "~" + local, 0)
        if dtor is None:
            self._purge(obj)
            return
        self._add(self.machine, NENO.DESTRUCTING, obj)
        self._enter_method(dtor, obj, [], return_to=None, purge=obj)
        while self.program_location() is not None:
            status = self.step()
            if status == HALTED:
                fault = self.fault()
                raise MachineFault(f"destructor faulted: {fault['message'] if fault else ''}")
            if status == FINISHED:
                break

    def _raw_instantiate(self, class_uri: Term) -> Term:
        if self.index.class_spec(class_uri) is None:
            raise ProgramError(f"unknown class {class_uri.text}")
        obj = self.uuid.mint()
        self._add(obj, RDF.TYPE, class_uri)
        reuse = self.method_reuse
        for mspec in self.index.all_methods(class_uri):
            mi = None
            if reuse:
                existing = sorted(
                    (t.subject for t in self.store.match(None, RDF.TYPE, mspec.class_uri)),
                    key=Term.sort_key,
                )
                mi = existing[0] if existing else None
            if mi is None:
                mi = self._instantiate_code(mspec.class_uri)
            self._add(obj, NENO.HAS_METHOD, mi)
        return obj

    def _instantiate_code(self, root_cls: Term) -> Term:
        """Instantiate a method class and everything reachable through its
        restrictions into fresh UUID-named triple-code."""
        reachable: list[Term] = []
        seen = {root_cls}
        work = [root_cls]
        while work:
            cls = work.pop()
            reachable.append(cls)
            for prop, kind, value in self.index.restrictions(cls):
                if kind == "ref" and value not in seen:
                    seen.add(value)
                    work.append(value)
        instance_of = {cls: self.uuid.mint() for cls in sorted(reachable, key=Term.sort_key)}
        for cls, inst in instance_of.items():
            self._add(inst, RDF.TYPE, cls)
            for prop, kind, value in self.index.restrictions(cls):
                if kind == "const":
                    self._add(inst, prop, value)
                else:
                    self._add(inst, prop, instance_of[value])
        return instance_of[root_cls]

    def _find_method_instance(self, obj: Term, name: str, arity: int) -> Term | None:
        for mi in self._objs(obj, NENO.HAS_METHOD):
            mname = self._one(mi, NENO.HAS_METHOD_NAME)
            marity = self._one(mi, NENO.HAS_ARITY)
            if mname is not None and mname.text == name \
                    and marity is not None and int(marity.text) == arity:
                return mi
        return None

    # -- frames -------------------------------------------------------------------

    def _create_frame(self, receiver: Term, root_block: Term,
                      params: list[tuple[str, Term]]) -> Term:
        frame = self.uuid.mint()
        self._add(frame, RDF.TYPE, NENO.FRAME)
        self._add(frame, NENO.FOR_OBJECT, receiver)
        self._add(frame, NENO.HAS_BLOCK_STACK, RDF.NIL)
        self._stack_push(frame, NENO.HAS_BLOCK_STACK, root_block)
        for name, value in params:
            fv = self._new_frame_var(frame, name, root_block)
            self._add(fv, NENO.HAS_VALUE, value)
        return frame

    def _new_frame_var(self, frame: Term, name: str, block: Term) -> Term:
        fv = self.uuid.mint()
        self._add(frame, NENO.HAS_FRAME_VARIABLE, fv)
        self._add(fv, RDF.TYPE, NENO.FRAME_VARIABLE)
        self._add(fv, NENO.HAS_VARIABLE_NAME, Term.literal(name))
        self._add(fv, NENO.FROM_BLOCK, block)
        return fv

    def _find_frame_var(self, frame: Term, name: str) -> Term | None:
        for fv in self._objs(frame, NENO.HAS_FRAME_VARIABLE):
            fname = self._one(fv, NENO.HAS_VARIABLE_NAME)
            if fname is not None and fname.text == name:
                return fv
        return None

    def _destroy_frame_var(self, frame: Term, fv: Term) -> None:
        self.store.remove(Triple(frame, NENO.HAS_FRAME_VARIABLE, fv))
        self._drop_node(fv)

    def _teardown_frame(self, frame: Term) -> None:
        for fv in self._objs(frame, NENO.HAS_FRAME_VARIABLE):
            self._destroy_frame_var(frame, fv)
        cell = self._one(frame, NENO.HAS_BLOCK_STACK)
        while cell is not None and cell != RDF.NIL:
            rest = self._one(cell, RDF.REST)
            self._drop_node(cell)
            cell = rest
        self._drop_node(frame)

    def _block_top(self, frame: Term) -> Term | None:
        stack = self._stack_peek_all(frame, NENO.HAS_BLOCK_STACK)
        return stack[0] if stack else None

    def _sync_block_top(self) -> None:
        frame = self.current_frame()
        top = self._block_top(frame) if frame is not None else None
        self._set(self.machine, NENO.BLOCK_TOP, top)

    def _pop_blocks_until(self, frame: Term, target: Term | None) -> None:
        """Leave blocks down to (and keeping) target, destroying the variables
        scoped to every popped block."""
        while True:
            top = self._block_top(frame)
            if top == target:
                return
            if top is None:
                raise MachineFault("malformed block structure")
            self._stack_pop(frame, NENO.HAS_BLOCK_STACK, "block stack")
            for fv in self._objs(frame, NENO.HAS_FRAME_VARIABLE):
                if self._one(fv, NENO.FROM_BLOCK) == top:
                    self._destroy_frame_var(frame, fv)

    # -- program start ----------------------------------------------------------

    def start_program(self, class_uri: Term, method_name: str) -> None:
        if self.program_location() is not None:
            raise ProgramError("machine busy")
        spec = self.index.class_spec(class_uri)
        if spec is None:
            raise ProgramError(f"unknown class {class_uri.text}")
        candidates = [m for m in self.index.all_methods(class_uri) if m.name == method_name]
        if not candidates:
            raise ProgramError(f"method {method_name!r} not found on {class_uri.text}")
        if not any(m.arity == 0 for m in candidates):
            raise ProgramError(f"method {method_name!r} takes arguments")
        obj = self._raw_instantiate(class_uri)
        mi = self._find_method_instance(obj, method_name, 0)
        if mi is None:
            raise ProgramError(f"method {method_name!r} not instantiated")
        self._enter_method(mi, obj, [], return_to=None)

    def _enter_method(self, mi: Term, receiver: Term, args: list[Term],
                      return_to: Term | None, purge: Term | None = None,
                      constructed: Term | None = None) -> None:
        first = self._one(mi, NENO.FIRST_INST)
        if first is None:
            raise MachineFault("method instance has no code")
        names = self._param_names(mi)
        if len(names) != len(args):
            raise MachineFault("argument count mismatch")
        if return_to is not None or purge is not None or constructed is not None:
            entry = self.uuid.mint()
            if return_to is not None:
                self._add(entry, NENO.HAS_INSTRUCTION, return_to)
            current = self.current_frame()
            if current is not None:
                self._add(entry, NENO.HAS_FRAME, current)
            if purge is not None:
                self._add(entry, NENO.PURGE_OBJECT, purge)
            if constructed is not None:
                self._add(entry, NENO.CONSTRUCTED_OBJECT, constructed)
            self._stack_push(self.machine, NENO.HAS_RETURN_STACK, entry)
        frame = self._create_frame(receiver, first, list(zip(names, args)))
        self._set(self.machine, NENO.HAS_FRAME, frame)
        self._set(self.machine, NENO.PROGRAM_LOCATION, first)
        self._sync_block_top()

    def _param_names(self, mi: Term) -> list[str]:
        ad = self._one(mi, NENO.HAS_ARGUMENT_DESCRIPTOR)
        if ad is None:
            return []
        slots: list[tuple[int, str]] = []
        for t in self.store.match(ad, None, None):
            idx = RDF.member_index(t.predicate)
            if idx is None:
                continue
            name = self._one(t.object, NENO.HAS_ARGUMENT_NAME)
            if name is not None:
                slots.append((idx, name.text))
        return [name for _, name in sorted(slots)]

    # -- value resolution ----------------------------------------------------------

    def _vnode_opcode(self, vnode: Term) -> Term:
        cls = self._one(vnode, RDF.TYPE)
        if cls is None:
            raise MachineFault(f"missing operand value node at {vnode.text}")
        opcode = self.index.opcode_of(cls)
        if opcode is None:
            raise MachineFault(f"operand node {vnode.text} has no opcode")
        return opcode

    def resolve_values(self, vnode: Term) -> list[Term]:
        opcode = self._vnode_opcode(vnode)
        if opcode == NENO.LOCAL_DIRECT:
            value = self._one(vnode, NENO.HAS_VALUE)
            if value is None:
                value = self._one(vnode, NENO.HAS_URI)
            if value is None:
                raise MachineFault("LocalDirect without a value")
            return [value]
        if opcode == NENO.POP_DIRECT:
            return [self._pop()]
        if opcode == NENO.OBJECT_VARIABLE:
            frame = self.current_frame()
            receiver = self._one(frame, NENO.FOR_OBJECT) if frame is not None else None
            if receiver is None:
                raise MachineFault("no current object")
            return [receiver]
        if opcode == NENO.LOCAL_VARIABLE:
            return self._resolve_local(vnode)
        if opcode == NENO.FIELD_VARIABLE:
            return self._resolve_field(vnode)
        raise MachineFault(f"unsupported value opcode {opcode.text}")

    def resolve_single(self, vnode: Term) -> Term:
        values = self.resolve_values(vnode)
        if len(values) != 1:
            raise MachineFault(f"expected exactly one value, found {len(values)}")
        return values[0]

    def _index_and_count(self, vnode: Term) -> tuple[int | None, bool]:
        count = False
        flag = self._one(vnode, NENO.IS_COUNT)
        if flag is not None and flag.text == "true":
            count = True
        idx_node = self._one(vnode, NENO.HAS_INDEX)
        idx = None
        if idx_node is not None:
            idx_term = self.resolve_single(idx_node)
            if not idx_term.is_literal:
                raise MachineFault("index must be an integer")
            idx = int(idx_term.text)
        return idx, count

    def _resolve_local(self, vnode: Term) -> list[Term]:
        name = self._one(vnode, NENO.HAS_VARIABLE_NAME)
        if name is None:
            raise MachineFault("variable node without a name")
        frame = self.current_frame()
        fv = self._find_frame_var(frame, name.text) if frame is not None else None
        if fv is None:
            raise MachineFault(f"undefined variable {name.text!r}")
        idx, count = self._index_and_count(vnode)
        values = sorted(self._objs(fv, NENO.HAS_VALUE), key=Term.sort_key)
        if count:
            return [Term.literal(str(len(values)), "http://www.w3.org/2001/XMLSchema#integer")]
        if idx is not None:
            if idx < 0 or idx >= len(values):
                raise MachineFault(f"variable index {idx} out of range ({len(values)} values)")
            return [values[idx]]
        return values

    def _resolve_field(self, vnode: Term) -> list[Term]:
        base_node = self._one(vnode, NENO.HAS_BASE)
        template = self._one(vnode, NENO.HAS_TEMPLATE)
        if base_node is None or template is None:
            raise MachineFault("field value node missing base or template")
        idx, count = self._index_and_count(vnode)
        base = self.resolve_single(base_node)
        return select_terms(self.store, template.text, [base], idx, count)

    # -- stepping -----------------------------------------------------------------

    def step(self) -> str:
        if self.machine is None:
            raise ProgramError("no machine attached")
        if self.halt_flag():
            return HALTED
        inst = self.program_location()
        if inst is None:
            return FINISHED
        try:
            self._execute(inst)
            return PROGRESSED
        except MachineFault as fault:
            self._record_fault(inst, str(fault))
            return HALTED

    def run(self, max_steps: int | None = None) -> tuple[str, int]:
        steps = 0
        while max_steps is None or steps < max_steps:
            status = self.step()
            if status != PROGRESSED:
                return status, steps
            steps += 1
        return PROGRESSED, steps

    def _record_fault(self, inst: Term, message: str) -> None:
        node = self.uuid.mint()
        self._add(node, NENO.HAS_MESSAGE, Term.literal(message))
        self._add(node, NENO.AT_INSTRUCTION, inst)
        self._set(self.machine, NENO.HAS_FAULT, node)
        self.set_halt(True)

    def _instruction_class(self, inst: Term) -> Term:
        cls = self._one(inst, RDF.TYPE)
        if cls is None:
            raise MachineFault(f"instruction {inst.text} has no class")
        return cls

    def _execute(self, inst: Term) -> None:
        cls = self._instruction_class(inst)
        opcode = self.index.opcode_of(cls)
        if opcode is None:
            raise MachineFault(f"instruction {inst.text} has no opcode")
        frame = self.current_frame()
        if frame is None:
            raise MachineFault("no active frame")
        # scope bookkeeping: entering a block pushes it; landing outside the
        # current block unwinds to the instruction's own block
        if opcode == NENO.BLOCK:
            if self._block_top(frame) != inst:
                self._pop_blocks_until(frame, self._one(inst, NENO.IN_BLOCK))
                self._stack_push(frame, NENO.HAS_BLOCK_STACK, inst)
            self._sync_block_top()
            self._advance(inst)
            return
        self._pop_blocks_until(frame, self._one(inst, NENO.IN_BLOCK))
        self._sync_block_top()

        if opcode == NENO.PUSH_VALUE:
            self._push(self._operand(inst, NENO.HAS_VALUE))
            self._advance(inst)
        elif opcode in (NENO.ADD, NENO.SUBTRACT, NENO.MULTIPLY, NENO.DIVIDE, NENO.NOT):
            right = None
            right_node = self._one(inst, NENO.HAS_RIGHT)
            if right_node is not None:
                right = self.resolve_single(right_node)
            left = self._operand(inst, NENO.HAS_LEFT)
            try:
                self._push(apply_arithmetic(opcode, left, right))
            except EvalError as exc:
                raise MachineFault(str(exc)) from exc
            self._advance(inst)
        elif opcode in (NENO.EQUALS, NENO.GREATER_THAN, NENO.GREATER_THAN_EQUAL,
                        NENO.LESS_THAN, NENO.LESS_THAN_EQUAL):
            right = self._operand(inst, NENO.HAS_RIGHT)
            left = self._operand(inst, NENO.HAS_LEFT)
            try:
                truth = compare(opcode, left, right)
            except EvalError as exc:
                raise MachineFault(str(exc)) from exc
            target = self._one(inst, NENO.TRUE_INST if truth else NENO.FALSE_INST)
            if target is None:
                self._do_return(None)
            else:
                self._set(self.machine, NENO.PROGRAM_LOCATION, target)
        elif opcode in (NENO.SET, NENO.SET_PLUS, NENO.SET_MINUS, NENO.SET_CLEAR):
            self._exec_setter(inst, opcode, frame)
            self._advance(inst)
        elif opcode == NENO.SET_QUERY:
            template = self._require_template(inst)
            slots = self._resolve_slots(inst)
            flat = [self._single(values) for values in slots]
            [text] = render_template_text(template, flat)
            result = self.store.execute_text(text)
            if result.kind != "truth":
                raise MachineFault("field query template must be an ASK")
            self._push(boolean(result.truth))
            self._advance(inst)
        elif opcode == NENO.NET_QUERY:
            self._exec_net_query(inst, frame)
            self._advance(inst)
        elif opcode == NENO.INVOKE_METHOD:
            self._exec_invoke(inst)
        elif opcode == NENO.CONSTRUCT:
            self._exec_construct(inst)
        elif opcode == NENO.DESTRUCT:
            self._exec_destruct(inst)
        elif opcode == NENO.RETURN:
            value = None
            vnode = self._one(inst, NENO.HAS_VALUE)
            if vnode is not None:
                value = self.resolve_single(vnode)
            self._do_return(value)
        elif opcode == NENO.TYPE_OF:
            term = self._operand(inst, NENO.HAS_VALUE)
            cls_uri = self._one(inst, NENO.HAS_CLASS)
            if cls_uri is None:
                raise MachineFault("TypeOf without a class operand")
            self._push(boolean(subsumes(self.index, term, cls_uri)))
            self._advance(inst)
        elif opcode == NENO.TYPE_OF_QUERY:
            term = self._operand(inst, NENO.HAS_VALUE)
            self._push(type_of(self.index, term))
            self._advance(inst)
        else:
            raise MachineFault(f"unsupported opcode {opcode.text}")

    def _operand(self, inst: Term, prop: Term) -> Term:
        vnode = self._one(inst, prop)
        if vnode is None:
            raise MachineFault(f"missing operand {prop.text} at {inst.text}")
        return self.resolve_single(vnode)

    @staticmethod
    def _single(values: list[Term]) -> Term:
        if len(values) != 1:
            raise MachineFault(f"expected exactly one value, found {len(values)}")
        return values[0]

    def _advance(self, inst: Term) -> None:
        nxt = self._one(inst, NENO.NEXT_INST)
        if nxt is None:
            self._do_return(None)
        else:
            self._set(self.machine, NENO.PROGRAM_LOCATION, nxt)

    def _require_template(self, inst: Term) -> str:
        template = self._one(inst, NENO.HAS_TEMPLATE)
        if template is None:
            raise MachineFault("missing command template")
        return template.text

    def _resolve_slots(self, inst: Term) -> list[list[Term]]:
        seq = self._one(inst, NENO.HAS_SLOTS)
        if seq is None:
            return []
        indexed: list[tuple[int, Term]] = []
        for t in self.store.match(seq, None, None):
            idx = RDF.member_index(t.predicate)
            if idx is not None:
                indexed.append((idx, t.object))
        indexed.sort()
        # resolve in reverse so stacked operands pop in push order
        resolved: dict[int, list[Term]] = {}
        for idx, vnode in reversed(indexed):
            resolved[idx] = self.resolve_values(vnode)
        return [resolved[idx] for idx, _ in indexed]

    def _destructing_set(self) -> set[Term]:
        return set(self._objs(self.machine, NENO.DESTRUCTING))

    def _exec_setter(self, inst: Term, opcode: Term, frame: Term) -> None:
        template = self._one(inst, NENO.HAS_TEMPLATE)
        if template is not None:
            slots = self._resolve_slots(inst)
            execute_field_command(self.store, self.index, template.text, slots,
                                  self._destructing_set())
            return
        # variable-targeted setter
        target = self._one(inst, NENO.HAS_TARGET)
        if target is None:
            raise MachineFault("setter without target or template")
        name = self._one(target, NENO.HAS_VARIABLE_NAME)
        if name is None:
            raise MachineFault("setter target is not a variable")
        values: list[Term] = []
        vnode = self._one(inst, NENO.HAS_VALUE)
        if vnode is not None:
            values = self.resolve_values(vnode)
        declares = self._one(inst, NENO.DECLARES)
        fv = self._find_frame_var(frame, name.text)
        if declares is not None and declares.text == "true":
            if fv is not None:
                raise MachineFault(f"variable {name.text!r} already declared")
            top = self._block_top(frame)
            if top is None:
                raise MachineFault("no active block")
            fv = self._new_frame_var(frame, name.text, top)
        elif fv is None:
            raise MachineFault(f"undefined variable {name.text!r}")
        if opcode == NENO.SET:
            self._remove_all(fv, NENO.HAS_VALUE)
            for v in values:
                self._add(fv, NENO.HAS_VALUE, v)
        elif opcode == NENO.SET_PLUS:
            for v in values:
                self._add(fv, NENO.HAS_VALUE, v)
        elif opcode == NENO.SET_MINUS:
            for v in values:
                self.store.remove(Triple(fv, NENO.HAS_VALUE, v))
        elif opcode == NENO.SET_CLEAR:
            self._remove_all(fv, NENO.HAS_VALUE)

    def _exec_net_query(self, inst: Term, frame: Term) -> None:
        vnode = self._one(inst, NENO.HAS_VALUE)
        if vnode is None:
            raise MachineFault("network query without a query operand")
        query_term = self.resolve_single(vnode)
        if not query_term.is_literal:
            raise MachineFault("network query must be a string")
        try:
            command = parse_command(query_term.text)
        except QueryParseError as exc:
            raise MachineFault(f"malformed query: {exc}") from exc
        if not isinstance(command, Query) or command.form != "select":
            raise MachineFault("network query must be a SELECT")
        result = self.store.execute_text(query_term.text)
        var = command.projected[0]
        values = [row[var] for row in result.rows]
        target = self._one(inst, NENO.HAS_TARGET)
        name = self._one(target, NENO.HAS_VARIABLE_NAME) if target is not None else None
        if name is None:
            raise MachineFault("network query target is not a variable")
        declares = self._one(inst, NENO.DECLARES)
        fv = self._find_frame_var(frame, name.text)
        if declares is not None and declares.text == "true":
            if fv is not None:
                raise MachineFault(f"variable {name.text!r} already declared")
            top = self._block_top(frame)
            if top is None:
                raise MachineFault("no active block")
            fv = self._new_frame_var(frame, name.text, top)
        elif fv is None:
            raise MachineFault(f"undefined variable {name.text!r}")
        self._remove_all(fv, NENO.HAS_VALUE)
        for v in values:
            self._add(fv, NENO.HAS_VALUE, v)

    def _exec_invoke(self, inst: Term) -> None:
        arity_term = self._one(inst, NENO.HAS_ARITY)
        name_term = self._one(inst, NENO.HAS_METHOD_NAME)
        if arity_term is None or name_term is None:
            raise MachineFault("invoke without method name or arity")
        arity = int(arity_term.text)
        args = [self._pop() for _ in range(arity)][::-1]
        receiver = self._operand(inst, NENO.HAS_OBJECT)
        if not receiver.is_uri:
            raise MachineFault("method invocation on a literal")
        mi = self._find_method_instance(receiver, name_term.text, arity)
        if mi is None:
            raise MachineFault(
                f"method {name_term.text!r}/{arity} not found on {receiver.text}"
            )
        return_to = self._one(inst, NENO.NEXT_INST)
        if return_to is None:
            raise MachineFault("invoke without continuation")
        self._enter_method(mi, receiver, args, return_to=return_to)

    def _exec_construct(self, inst: Term) -> None:
        cls = self._one(inst, NENO.HAS_CLASS)
        arity_term = self._one(inst, NENO.HAS_ARITY)
        if cls is None or arity_term is None:
            raise MachineFault("construct without class or arity")
        arity = int(arity_term.text)
        args = [self._pop() for _ in range(arity)][::-1]
        obj = self._raw_instantiate(cls)
        local = cls.text.rsplit("#", 1)[-1]
        ctor = self._find_method_instance(obj, "!" + local, arity)
        return_to = self._one(inst, NENO.NEXT_INST)
        if ctor is None:
            if arity:
                raise MachineFault(f"no matching constructor for {cls.text}")
            check_constructed(self.store, self.index, obj)
            self._push(obj)
            if return_to is None:
                self._do_return(None)
            else:
                self._set(self.machine, NENO.PROGRAM_LOCATION, return_to)
            return
        if return_to is None:
            raise MachineFault("construct without continuation")
        self._enter_method(ctor, obj, args, return_to=return_to, constructed=obj)

    def _exec_destruct(self, inst: Term) -> None:
        obj = self._operand(inst, NENO.HAS_OBJECT)
        if not obj.is_uri or not self._objs(obj, RDF.TYPE):
            raise MachineFault("destruct of nonexistent object")
        types = self._objs(obj, RDF.TYPE)
        local = types[0].text.rsplit("#", 1)[-1]
        dtor = self._find_method_instance(obj, "~" + local, 0)
        return_to = self._one(inst, NENO.NEXT_INST)
        if dtor is None:
            self._purge(obj)
            if return_to is None:
                self._do_return(None)
            else:
                self._set(self.machine, NENO.PROGRAM_LOCATION, return_to)
            return
        if return_to is None:
            raise MachineFault("destruct without continuation")
        self._add(self.machine, NENO.DESTRUCTING, obj)
        self._enter_method(dtor, obj, [], return_to=return_to, purge=obj)

    def _do_return(self, value: Term | None) -> None:
        frame = self.current_frame()
        if frame is not None:
            self._teardown_frame(frame)
        cell = self._one(self.machine, NENO.HAS_RETURN_STACK)
        if cell is None or cell == RDF.NIL:
            self._remove_all(self.machine, NENO.PROGRAM_LOCATION)
            self._remove_all(self.machine, NENO.HAS_FRAME)
            self._remove_all(self.machine, NENO.BLOCK_TOP)
            return
        entry = self._stack_pop(self.machine, NENO.HAS_RETURN_STACK, "return stack")
        return_to = self._one(entry, NENO.HAS_INSTRUCTION)
        caller = self._one(entry, NENO.HAS_FRAME)
        purge = self._one(entry, NENO.PURGE_OBJECT)
        constructed = self._one(entry, NENO.CONSTRUCTED_OBJECT)
        self._drop_node(entry)
        if purge is not None:
            self._purge(purge)
            self.store.remove(Triple(self.machine, NENO.DESTRUCTING, purge))
        if constructed is not None:
            check_constructed(self.store, self.index, constructed)
        self._set(self.machine, NENO.HAS_FRAME, caller)
        self._sync_block_top()
        if value is not None:
            self._push(value)
        if return_to is None:
            self._remove_all(self.machine, NENO.PROGRAM_LOCATION)
        else:
            self._set(self.machine, NENO.PROGRAM_LOCATION, return_to)

    # -- destruction ---------------------------------------------------------------

    def _is_code_instance(self, node: Term) -> bool:
        for cls in self._objs(node, RDF.TYPE):
            if in_base_namespace(cls.text):
                return cls.text.startswith(NENO_NS)
            chain = [cls] + self.index.superclasses(cls)
            for c in chain:
                if c in (NENO.INSTRUCTION, NENO.VALUE, NENO.METHOD,
                         NENO.ARGUMENT_DESCRIPTOR, NENO.ARGUMENT, NENO.SLOT_DESCRIPTOR):
                    return True
        return False

    def _drop_code_subgraph(self, root: Term) -> None:
        seen = {root}
        work = [root]
        while work:
            node = work.pop()
            for t in self.store.match(node, None, None):
                self.store.remove(t)
                o = t.object
                if o.is_uri and o not in seen and not in_base_namespace(o.text) \
                        and self._is_code_instance(o):
                    seen.add(o)
                    work.append(o)

    def _purge(self, obj: Term) -> None:
        """After the destructor body: strip method references, frame-variable
        references, type triples, and leftover outbound field triples. The
        class specification stays."""
        reuse = self.method_reuse
        for mi in self._objs(obj, NENO.HAS_METHOD):
            self.store.remove(Triple(obj, NENO.HAS_METHOD, mi))
            other_holders = self.store.match(None, NENO.HAS_METHOD, mi)
            if not other_holders and not reuse:
                self._drop_code_subgraph(mi)
        for t in self.store.match(None, NENO.HAS_VALUE, obj):
            if self.store.match(t.subject, RDF.TYPE, NENO.FRAME_VARIABLE):
                self.store.remove(t)
        for t in self.store.match(obj, None, None):
            self.store.remove(t)

    # -- snapshot / resume ------------------------------------------------------------

    def snapshot(self) -> str:
        if self.machine is None:
            raise ProgramError("no machine attached")
        triples = snapshot_subgraph(self.store, self.machine)
        return serialize_ntriples(triples)


def snapshot_subgraph(store, machine: Term) -> list[Triple]:
    """The machine-state subgraph plus the program/object subgraph connected
    to it, stopping at the base vocabulary (which a resuming store must
    already hold)."""
    seen_nodes = {machine}
    work = [machine]
    collected: set[Triple] = set()
    while work:
        node = work.pop()
        for t in list(store.match(node, None, None)) + list(store.match(None, None, node)):
            collected.add(t)
            for endpoint in (t.subject, t.object):
                if not endpoint.is_uri or endpoint in seen_nodes:
                    continue
                if in_base_namespace(endpoint.text):
                    continue
                seen_nodes.add(endpoint)
                work.append(endpoint)
    return sorted(collected, key=Triple.sort_key)


def resume(text: str, store, uuid_source: UuidSource | None = None) -> FhatMachine:
    """Load a snapshot into a store that already holds the instruction
    ontology and attach to the machine it contains."""
    if not has_base_ontology(store.match):
        raise ProgramError("instruction ontology missing from store")
    loaded = parse_ntriples(text)
    machines = [t.subject for t in loaded.match(None, RDF.TYPE, NENO.FHAT)]
    if len(machines) != 1:
        raise ProgramError(f"snapshot holds {len(machines)} machines, expected 1")
    for t in loaded:
        store.add(t)
    vm = FhatMachine(store, uuid_source)
    vm.attach(machines[0])
    return vm
