"""The instruction-set vocabulary, the base ontology it lives in, and a
decoder that turns a compiled API graph back into navigable specs.

A compiled program is an ontology of UUID-named classes. Each instruction
class subclasses exactly one opcode superclass and carries restrictions that
pin down how instances must be wired: ``owl:allValuesFrom`` restrictions
reference other generated classes, ``owl:hasValue`` restrictions carry
constant operands.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .namespaces import (
    BASE_NAMESPACES,
    NENO_NS,
    OWL_NS,
    RDF_NS,
    RDFS_NS,
    XSD_NS,
    in_base_namespace,
)
from .rdf import Graph, Term, Triple


def _u(ns: str, local: str) -> Term:
    return Term.uri(ns + local)


class RDF:
    TYPE = _u(RDF_NS, "type")
    PROPERTY = _u(RDF_NS, "Property")
    SEQ = _u(RDF_NS, "Seq")
    FIRST = _u(RDF_NS, "first")
    REST = _u(RDF_NS, "rest")
    NIL = _u(RDF_NS, "nil")

    @staticmethod
    def member(n: int) -> Term:
        return _u(RDF_NS, f"_{n}")

    @staticmethod
    def member_index(term: Term) -> int | None:
        if term.is_uri and term.text.startswith(RDF_NS + "_"):
            tail = term.text[len(RDF_NS) + 1:]
            if tail.isdigit():
                return int(tail)
        return None


class RDFS:
    SUBCLASSOF = _u(RDFS_NS, "subClassOf")
    DOMAIN = _u(RDFS_NS, "domain")
    RANGE = _u(RDFS_NS, "range")
    RESOURCE = _u(RDFS_NS, "Resource")


class OWL:
    CLASS = _u(OWL_NS, "Class")
    THING = _u(OWL_NS, "Thing")
    RESTRICTION = _u(OWL_NS, "Restriction")
    ON_PROPERTY = _u(OWL_NS, "onProperty")
    ALL_VALUES_FROM = _u(OWL_NS, "allValuesFrom")
    HAS_VALUE = _u(OWL_NS, "hasValue")
    MIN_CARDINALITY = _u(OWL_NS, "minCardinality")
    MAX_CARDINALITY = _u(OWL_NS, "maxCardinality")
    OBJECT_PROPERTY = _u(OWL_NS, "ObjectProperty")
    DATATYPE_PROPERTY = _u(OWL_NS, "DatatypeProperty")
    ONTOLOGY = _u(OWL_NS, "Ontology")
    IMPORTS = _u(OWL_NS, "imports")


class XSD:
    STRING = _u(XSD_NS, "string")
    BOOLEAN = _u(XSD_NS, "boolean")
    INTEGER = _u(XSD_NS, "integer")
    INT = _u(XSD_NS, "int")
    FLOAT = _u(XSD_NS, "float")
    DOUBLE = _u(XSD_NS, "double")
    DATE = _u(XSD_NS, "date")
    DATETIME = _u(XSD_NS, "dateTime")
    ANYURI = _u(XSD_NS, "anyURI")


class NENO:
    # machine architecture
    FHAT = _u(NENO_NS, "Fhat")
    FRAME = _u(NENO_NS, "Frame")
    FRAME_VARIABLE = _u(NENO_NS, "FrameVariable")
    HALT = _u(NENO_NS, "halt")
    METHOD_REUSE = _u(NENO_NS, "methodReuse")
    PROGRAM_LOCATION = _u(NENO_NS, "programLocation")
    BLOCK_TOP = _u(NENO_NS, "blockTop")
    HAS_OPERAND_STACK = _u(NENO_NS, "hasOperandStack")
    HAS_RETURN_STACK = _u(NENO_NS, "hasReturnStack")
    HAS_FRAME = _u(NENO_NS, "hasFrame")
    HAS_BLOCK_STACK = _u(NENO_NS, "hasBlockStack")
    FOR_OBJECT = _u(NENO_NS, "forObject")
    HAS_FRAME_VARIABLE = _u(NENO_NS, "hasFrameVariable")
    FROM_BLOCK = _u(NENO_NS, "fromBlock")
    HAS_INSTRUCTION = _u(NENO_NS, "hasInstruction")
    PURGE_OBJECT = _u(NENO_NS, "purgeObject")
    CONSTRUCTED_OBJECT = _u(NENO_NS, "constructedObject")
    DESTRUCTING = _u(NENO_NS, "destructing")
    CLAIMED_BY = _u(NENO_NS, "claimedBy")
    HAS_FAULT = _u(NENO_NS, "hasFault")
    HAS_MESSAGE = _u(NENO_NS, "hasMessage")
    AT_INSTRUCTION = _u(NENO_NS, "atInstruction")

    # instruction taxonomy
    INSTRUCTION = _u(NENO_NS, "Instruction")
    BLOCK = _u(NENO_NS, "Block")
    ARITHMETIC = _u(NENO_NS, "Arithmetic")
    ADD = _u(NENO_NS, "Add")
    SUBTRACT = _u(NENO_NS, "Subtract")
    MULTIPLY = _u(NENO_NS, "Multiply")
    DIVIDE = _u(NENO_NS, "Divide")
    NOT = _u(NENO_NS, "Not")
    CONDITION = _u(NENO_NS, "Condition")
    EQUALS = _u(NENO_NS, "Equals")
    GREATER_THAN = _u(NENO_NS, "GreaterThan")
    GREATER_THAN_EQUAL = _u(NENO_NS, "GreaterThanEqual")
    LESS_THAN = _u(NENO_NS, "LessThan")
    LESS_THAN_EQUAL = _u(NENO_NS, "LessThanEqual")
    SETTER = _u(NENO_NS, "Setter")
    SET = _u(NENO_NS, "Set")
    SET_PLUS = _u(NENO_NS, "SetPlus")
    SET_MINUS = _u(NENO_NS, "SetMinus")
    SET_CLEAR = _u(NENO_NS, "SetClear")
    SET_QUERY = _u(NENO_NS, "SetQuery")
    NET_QUERY = _u(NENO_NS, "NetQuery")
    INVOKE = _u(NENO_NS, "Invoke")
    INVOKE_METHOD = _u(NENO_NS, "InvokeMethod")
    CONSTRUCT = _u(NENO_NS, "Construct")
    DESTRUCT = _u(NENO_NS, "Destruct")
    PUSH_VALUE = _u(NENO_NS, "PushValue")
    RETURN = _u(NENO_NS, "Return")
    TYPE_OF = _u(NENO_NS, "TypeOf")
    TYPE_OF_QUERY = _u(NENO_NS, "TypeOfQuery")

    # value taxonomy
    VALUE = _u(NENO_NS, "Value")
    DIRECT = _u(NENO_NS, "Direct")
    LOCAL_DIRECT = _u(NENO_NS, "LocalDirect")
    POP_DIRECT = _u(NENO_NS, "PopDirect")
    VARIABLE = _u(NENO_NS, "Variable")
    LOCAL_VARIABLE = _u(NENO_NS, "LocalVariable")
    FIELD_VARIABLE = _u(NENO_NS, "FieldVariable")
    OBJECT_VARIABLE = _u(NENO_NS, "ObjectVariable")

    # method structure
    METHOD = _u(NENO_NS, "Method")
    ARGUMENT_DESCRIPTOR = _u(NENO_NS, "ArgumentDescriptor")
    ARGUMENT = _u(NENO_NS, "Argument")
    SLOT_DESCRIPTOR = _u(NENO_NS, "SlotDescriptor")
    HAS_METHOD = _u(NENO_NS, "hasMethod")
    HAS_METHOD_CLASS = _u(NENO_NS, "hasMethodClass")
    HAS_METHOD_NAME = _u(NENO_NS, "hasMethodName")
    HAS_ARGUMENT_DESCRIPTOR = _u(NENO_NS, "hasArgumentDescriptor")
    HAS_RETURN_DESCRIPTOR = _u(NENO_NS, "hasReturnDescriptor")
    HAS_HUMAN_CODE = _u(NENO_NS, "hasHumanCode")
    HAS_ARGUMENT_NAME = _u(NENO_NS, "hasArgumentName")
    HAS_ARGUMENT_TYPE = _u(NENO_NS, "hasArgumentType")

    # instruction operands and payloads
    FIRST_INST = _u(NENO_NS, "firstInst")
    NEXT_INST = _u(NENO_NS, "nextInst")
    TRUE_INST = _u(NENO_NS, "trueInst")
    FALSE_INST = _u(NENO_NS, "falseInst")
    IN_BLOCK = _u(NENO_NS, "inBlock")
    HAS_VALUE = _u(NENO_NS, "hasValue")
    HAS_URI = _u(NENO_NS, "hasURI")
    HAS_LEFT = _u(NENO_NS, "hasLeft")
    HAS_RIGHT = _u(NENO_NS, "hasRight")
    HAS_TARGET = _u(NENO_NS, "hasTarget")
    HAS_OBJECT = _u(NENO_NS, "hasObject")
    HAS_BASE = _u(NENO_NS, "hasBase")
    HAS_INDEX = _u(NENO_NS, "hasIndex")
    HAS_CLASS = _u(NENO_NS, "hasClass")
    HAS_PREDICATE = _u(NENO_NS, "hasPredicate")
    HAS_VARIABLE_NAME = _u(NENO_NS, "hasVariableName")
    HAS_ARITY = _u(NENO_NS, "hasArity")
    IS_INVERSE = _u(NENO_NS, "isInverse")
    IS_COUNT = _u(NENO_NS, "isCount")
    DECLARES = _u(NENO_NS, "declares")
    PUSHES_RESULT = _u(NENO_NS, "pushesResult")
    HAS_TEMPLATE = _u(NENO_NS, "hasTemplate")
    HAS_SLOTS = _u(NENO_NS, "hasSlots")


#: opcode superclass -> parent in the taxonomy
TAXONOMY: dict[Term, Term] = {
    NENO.BLOCK: NENO.INSTRUCTION,
    NENO.ARITHMETIC: NENO.INSTRUCTION,
    NENO.ADD: NENO.ARITHMETIC,
    NENO.SUBTRACT: NENO.ARITHMETIC,
    NENO.MULTIPLY: NENO.ARITHMETIC,
    NENO.DIVIDE: NENO.ARITHMETIC,
    NENO.NOT: NENO.ARITHMETIC,
    NENO.CONDITION: NENO.INSTRUCTION,
    NENO.EQUALS: NENO.CONDITION,
    NENO.GREATER_THAN: NENO.CONDITION,
    NENO.GREATER_THAN_EQUAL: NENO.CONDITION,
    NENO.LESS_THAN: NENO.CONDITION,
    NENO.LESS_THAN_EQUAL: NENO.CONDITION,
    NENO.SETTER: NENO.INSTRUCTION,
    NENO.SET: NENO.SETTER,
    NENO.SET_PLUS: NENO.SETTER,
    NENO.SET_MINUS: NENO.SETTER,
    NENO.SET_CLEAR: NENO.SETTER,
    NENO.SET_QUERY: NENO.SETTER,
    NENO.NET_QUERY: NENO.SETTER,
    NENO.INVOKE: NENO.INSTRUCTION,
    NENO.INVOKE_METHOD: NENO.INVOKE,
    NENO.CONSTRUCT: NENO.INVOKE,
    NENO.DESTRUCT: NENO.INVOKE,
    NENO.PUSH_VALUE: NENO.INSTRUCTION,
    NENO.RETURN: NENO.INSTRUCTION,
    NENO.TYPE_OF: NENO.INSTRUCTION,
    NENO.TYPE_OF_QUERY: NENO.INSTRUCTION,
    NENO.DIRECT: NENO.VALUE,
    NENO.LOCAL_DIRECT: NENO.DIRECT,
    NENO.POP_DIRECT: NENO.DIRECT,
    NENO.VARIABLE: NENO.VALUE,
    NENO.LOCAL_VARIABLE: NENO.VARIABLE,
    NENO.FIELD_VARIABLE: NENO.VARIABLE,
    NENO.OBJECT_VARIABLE: NENO.VARIABLE,
}

#: the opcode superclasses a generated class may directly subclass
EMITTABLE_OPCODES = frozenset(
    [
        NENO.BLOCK,
        NENO.ADD, NENO.SUBTRACT, NENO.MULTIPLY, NENO.DIVIDE, NENO.NOT,
        NENO.EQUALS, NENO.GREATER_THAN, NENO.GREATER_THAN_EQUAL,
        NENO.LESS_THAN, NENO.LESS_THAN_EQUAL,
        NENO.SET, NENO.SET_PLUS, NENO.SET_MINUS, NENO.SET_CLEAR,
        NENO.SET_QUERY, NENO.NET_QUERY,
        NENO.INVOKE_METHOD, NENO.CONSTRUCT, NENO.DESTRUCT,
        NENO.PUSH_VALUE, NENO.RETURN, NENO.TYPE_OF, NENO.TYPE_OF_QUERY,
        NENO.LOCAL_DIRECT, NENO.POP_DIRECT,
        NENO.LOCAL_VARIABLE, NENO.FIELD_VARIABLE, NENO.OBJECT_VARIABLE,
    ]
)

#: properties whose allValuesFrom restriction references another generated class
REF_PROPERTIES = frozenset(
    [
        NENO.FIRST_INST, NENO.NEXT_INST, NENO.TRUE_INST, NENO.FALSE_INST,
        NENO.IN_BLOCK, NENO.HAS_VALUE, NENO.HAS_LEFT, NENO.HAS_RIGHT,
        NENO.HAS_TARGET, NENO.HAS_OBJECT, NENO.HAS_BASE, NENO.HAS_INDEX,
        NENO.HAS_SLOTS, NENO.HAS_ARGUMENT_DESCRIPTOR,
    ]
)


def base_ontology() -> Graph:
    """The static instruction-set ontology every store must hold before
    triple-code can be loaded or executed."""
    g = Graph()

    def cls(term: Term, parent: Term | None = None) -> None:
        g.add(Triple(term, RDF.TYPE, OWL.CLASS))
        if parent is not None:
            g.add(Triple(term, RDFS.SUBCLASSOF, parent))

    cls(OWL.THING, RDFS.RESOURCE)
    cls(NENO.INSTRUCTION, RDFS.RESOURCE)
    cls(NENO.VALUE, RDFS.RESOURCE)
    for child, parent in TAXONOMY.items():
        cls(child, parent)
    cls(NENO.METHOD, RDFS.RESOURCE)
    cls(NENO.ARGUMENT_DESCRIPTOR, RDF.SEQ)
    cls(NENO.ARGUMENT, RDFS.RESOURCE)
    cls(NENO.SLOT_DESCRIPTOR, RDF.SEQ)
    cls(NENO.FHAT, RDFS.RESOURCE)
    cls(NENO.FRAME, RDFS.RESOURCE)
    cls(NENO.FRAME_VARIABLE, RDFS.RESOURCE)
    return g


_BASE = base_ontology()


def has_base_ontology(match) -> bool:
    """True when the store already holds the instruction-set ontology.
    ``match`` is a match(s, p, o) callable."""
    probe = Triple(NENO.BLOCK, RDFS.SUBCLASSOF, NENO.INSTRUCTION)
    return bool(match(probe.subject, probe.predicate, probe.object))


# ---------------------------------------------------------------------------
# Decoding a compiled API graph
# ---------------------------------------------------------------------------

@dataclass
class FieldSpec:
    uri: Term
    range: Term
    min: int
    max: int | None  # None = unbounded


@dataclass
class MethodSpec:
    class_uri: Term
    name: str
    args: list[tuple[str, Term]]
    return_type: Term | None
    first_inst: Term | None  # the method's Block class

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass
class ClassSpec:
    uri: Term
    parent: Term
    fields: dict[Term, FieldSpec] = field(default_factory=dict)
    methods: list[MethodSpec] = field(default_factory=list)


@dataclass
class InstrSpec:
    uri: Term
    opcode: Term  # leaf superclass from the taxonomy
    consts: dict[Term, Term] = field(default_factory=dict)   # property -> constant term
    refs: dict[Term, Term] = field(default_factory=dict)     # property -> generated class
    slots: list[Term] = field(default_factory=list)          # ordered value classes

    def const_text(self, prop: Term) -> str | None:
        t = self.consts.get(prop)
        return t.text if t is not None else None

    def flag(self, prop: Term) -> bool:
        t = self.consts.get(prop)
        return t is not None and t.text == "true"


class ApiIndex:
    """Decoded view of a graph's ontology layer: user classes with fields and
    methods, plus instruction classes with their operand wiring."""

    def __init__(self, match):
        """``match`` is a match(s, p, o) callable over the backing store."""
        self._match = match
        self._opcode_cache: dict[Term, Term | None] = {}
        self._instr_cache: dict[Term, InstrSpec] = {}
        self._class_cache: dict[Term, ClassSpec | None] = {}

    # -- raw helpers -----------------------------------------------------

    def objects(self, s: Term, p: Term) -> list[Term]:
        return sorted((t.object for t in self._match(s, p, None)), key=Term.sort_key)

    def one(self, s: Term, p: Term) -> Term | None:
        objs = self.objects(s, p)
        return objs[0] if objs else None

    # -- taxonomy --------------------------------------------------------

    def superclasses(self, cls: Term) -> list[Term]:
        """Transitive rdfs:subClassOf closure, nearest first."""
        out: list[Term] = []
        seen = {cls}
        frontier = [cls]
        while frontier:
            nxt: list[Term] = []
            for c in frontier:
                for parent in self.objects(c, RDFS.SUBCLASSOF):
                    if self._is_restriction(parent) or parent in seen:
                        continue
                    seen.add(parent)
                    out.append(parent)
                    nxt.append(parent)
            frontier = nxt
        return out

    def is_subclass(self, cls: Term, ancestor: Term) -> bool:
        return cls == ancestor or ancestor in self.superclasses(cls)

    def _is_restriction(self, node: Term) -> bool:
        return bool(self._match(node, RDF.TYPE, OWL.RESTRICTION))

    def opcode_of(self, cls: Term) -> Term | None:
        """The emittable opcode superclass a generated class descends from."""
        if cls in self._opcode_cache:
            return self._opcode_cache[cls]
        result = None
        if cls in EMITTABLE_OPCODES:
            result = cls
        else:
            for parent in self.superclasses(cls):
                if parent in EMITTABLE_OPCODES:
                    result = parent
                    break
        self._opcode_cache[cls] = result
        return result

    # -- restrictions ----------------------------------------------------

    def restrictions(self, cls: Term) -> list[tuple[Term, str, Term]]:
        """(property, "const"|"ref", value) for each restriction on cls."""
        out = []
        for t in self._match(cls, RDFS.SUBCLASSOF, None):
            node = t.object
            if not self._is_restriction(node):
                continue
            prop = self.one(node, OWL.ON_PROPERTY)
            if prop is None:
                continue
            const = self.one(node, OWL.HAS_VALUE)
            if const is not None:
                out.append((prop, "const", const))
                continue
            ref = self.one(node, OWL.ALL_VALUES_FROM)
            if ref is not None:
                out.append((prop, "ref", ref))
        return out

    def instr_spec(self, cls: Term) -> InstrSpec:
        if cls in self._instr_cache:
            return self._instr_cache[cls]
        opcode = self.opcode_of(cls)
        if opcode is None:
            raise ValueError(f"not an instruction or value class: {cls.text}")
        spec = InstrSpec(cls, opcode)
        for prop, kind, value in self.restrictions(cls):
            if kind == "const":
                spec.consts[prop] = value
            elif prop == NENO.HAS_SLOTS:
                spec.slots = self._decode_seq(value)
                spec.refs[prop] = value
            else:
                spec.refs[prop] = value
        self._instr_cache[cls] = spec
        return spec

    def _decode_seq(self, seq_cls: Term) -> list[Term]:
        members: list[tuple[int, Term]] = []
        for prop, kind, value in self.restrictions(seq_cls):
            idx = RDF.member_index(prop)
            if idx is not None and kind == "ref":
                members.append((idx, value))
        return [v for _, v in sorted(members)]

    # -- user classes ----------------------------------------------------

    def user_classes(self) -> list[Term]:
        """Classes whose superclass chain reaches owl:Thing (compiled program
        classes, as opposed to instruction classes)."""
        out = []
        for t in self._match(None, RDF.TYPE, OWL.CLASS):
            cls = t.subject
            if in_base_namespace(cls.text):
                continue
            if self.is_subclass(cls, OWL.THING):
                out.append(cls)
        return sorted(set(out), key=Term.sort_key)

    def class_spec(self, cls: Term) -> ClassSpec | None:
        if cls in self._class_cache:
            return self._class_cache[cls]
        if not self._match(cls, RDF.TYPE, OWL.CLASS) or not self.is_subclass(cls, OWL.THING):
            self._class_cache[cls] = None
            return None
        parents = [
            p for p in self.objects(cls, RDFS.SUBCLASSOF)
            if not self._is_restriction(p)
        ]
        spec = ClassSpec(cls, parents[0] if parents else OWL.THING)
        # field declarations: properties with rdfs:domain == cls
        for t in self._match(None, RDFS.DOMAIN, cls):
            f = t.subject
            rng = self.one(f, RDFS.RANGE)
            if rng is None:
                continue
            lo, hi = self._cardinality(cls, f)
            spec.fields[f] = FieldSpec(f, rng, lo, hi)
        for mcls in self.objects(cls, NENO.HAS_METHOD_CLASS):
            ms = self.method_spec(mcls)
            if ms is not None:
                spec.methods.append(ms)
        self._class_cache[cls] = spec
        return spec

    def _cardinality(self, cls: Term, prop: Term) -> tuple[int, int | None]:
        lo, hi = 0, None
        for t in self._match(cls, RDFS.SUBCLASSOF, None):
            node = t.object
            if not self._is_restriction(node):
                continue
            if self.one(node, OWL.ON_PROPERTY) != prop:
                continue
            mn = self.one(node, OWL.MIN_CARDINALITY)
            if mn is not None:
                lo = int(mn.text)
            mx = self.one(node, OWL.MAX_CARDINALITY)
            if mx is not None:
                hi = int(mx.text)
        return lo, hi

    def method_spec(self, mcls: Term) -> MethodSpec | None:
        name = None
        ret = None
        first = None
        args: list[tuple[int, str, Term]] = []
        for prop, kind, value in self.restrictions(mcls):
            if prop == NENO.HAS_METHOD_NAME and kind == "const":
                name = value.text
            elif prop == NENO.HAS_RETURN_DESCRIPTOR and kind == "const":
                ret = value
            elif prop == NENO.FIRST_INST and kind == "ref":
                first = value
            elif prop == NENO.HAS_ARGUMENT_DESCRIPTOR and kind == "ref":
                for aprop, akind, acls in self.restrictions(value):
                    idx = RDF.member_index(aprop)
                    if idx is None or akind != "ref":
                        continue
                    aname = None
                    atype = None
                    for p2, k2, v2 in self.restrictions(acls):
                        if p2 == NENO.HAS_ARGUMENT_NAME:
                            aname = v2.text
                        elif p2 == NENO.HAS_ARGUMENT_TYPE:
                            atype = v2
                    if aname is not None:
                        args.append((idx, aname, atype or RDFS.RESOURCE))
        if name is None:
            return None
        ordered = [(n, t) for _, n, t in sorted(args, key=lambda x: x[0])]
        return MethodSpec(mcls, name, ordered, ret, first)

    # -- inheritance-aware lookups ----------------------------------------

    def all_fields(self, cls: Term) -> dict[Term, FieldSpec]:
        """Fields declared on cls and its ancestors."""
        out: dict[Term, FieldSpec] = {}
        for c in [cls] + self.superclasses(cls):
            spec = self.class_spec(c)
            if spec is None:
                continue
            for f, fs in spec.fields.items():
                out.setdefault(f, fs)
        return out

    def all_methods(self, cls: Term) -> list[MethodSpec]:
        """Methods on cls and its ancestors; nearest declaration wins."""
        out: list[MethodSpec] = []
        seen: set[tuple[str, int]] = set()
        for c in [cls] + self.superclasses(cls):
            spec = self.class_spec(c)
            if spec is None:
                continue
            for ms in spec.methods:
                key = (ms.name, ms.arity)
                if key not in seen:
                    seen.add(key)
                    out.append(ms)
        return out

    def find_method(self, cls: Term, name: str, arity: int) -> MethodSpec | None:
        for ms in self.all_methods(cls):
            if ms.name == name and ms.arity == arity:
                return ms
        return None
