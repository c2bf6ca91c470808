"""Semantic analysis: name resolution, the closed-world property check,
datatype/operator legality, cardinality legality, and scope rules.

Annotates the AST in place with resolved types so code generation does not
re-derive them. Raises AnalysisError carrying every diagnostic found.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ast_nodes as ast
from .api import ApiIndex, OWL, XSD
from .namespaces import DEMO_NS, NamespaceMap, XSD_NS, well_known
from .rdf import Term

_DATATYPE_ALIASES = {
    "string", "boolean", "integer", "int", "long", "short", "byte",
    "float", "double", "date", "dateTime", "anyURI",
}

#: datatype families for the operation table
_NUMERIC = {XSD.INTEGER.text, XSD.INT.text, XSD_NS + "long", XSD_NS + "short",
            XSD_NS + "byte", XSD.FLOAT.text, XSD.DOUBLE.text}
_TEMPORAL = {XSD.DATE.text, XSD.DATETIME.text}


@dataclass(frozen=True)
class TypeRef:
    uri: Term
    is_datatype: bool

    @property
    def text(self) -> str:
        return self.uri.text

    def local(self) -> str:
        return self.uri.text.rsplit("#", 1)[-1].rsplit("/", 1)[-1]


BOOLEAN = TypeRef(XSD.BOOLEAN, True)
ANYURI = TypeRef(XSD.ANYURI, True)
THING = TypeRef(OWL.THING, False)


@dataclass
class Diagnostic:
    message: str
    pos: ast.Pos | None = None

    def __str__(self) -> str:
        if self.pos:
            return f"{self.pos[0]}:{self.pos[1]}: {self.message}"
        return self.message


class AnalysisError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass
class FieldSig:
    uri: Term
    range: TypeRef
    card: ast.Cardinality


@dataclass
class MethodSig:
    kind: str
    name: str
    params: list[tuple[str, TypeRef]]
    return_type: TypeRef | None
    decl: ast.MethodDecl | None = None  # None for classes loaded from a store

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass
class ClassSig:
    uri: Term
    parent: Term
    fields: dict[str, FieldSig] = field(default_factory=dict)
    methods: list[MethodSig] = field(default_factory=list)
    decl: ast.ClassDecl | None = None

    def local(self) -> str:
        return self.uri.text.rsplit("#", 1)[-1]

    def namespace(self) -> str:
        return self.uri.text[: -len(self.local())]


class SymbolTable:
    def __init__(self, nsmap: NamespaceMap):
        self.nsmap = nsmap
        self.classes: dict[str, ClassSig] = {}  # uri text -> sig

    def add_class(self, sig: ClassSig) -> None:
        self.classes[sig.uri.text] = sig

    def get(self, uri: Term) -> ClassSig | None:
        return self.classes.get(uri.text)

    def by_local(self, local: str) -> list[ClassSig]:
        return [c for c in self.classes.values() if c.local() == local]

    # -- inheritance-aware lookups ----------------------------------------

    def ancestry(self, uri: Term) -> list[ClassSig]:
        out = []
        cur = self.get(uri)
        seen = set()
        while cur is not None and cur.uri.text not in seen:
            seen.add(cur.uri.text)
            out.append(cur)
            cur = self.get(cur.parent)
        return out

    def is_subclass(self, cls: Term, ancestor: Term) -> bool:
        if ancestor == OWL.THING:
            return True
        return any(sig.uri == ancestor for sig in self.ancestry(cls))

    def find_field(self, cls: Term, name: str) -> FieldSig | None:
        for sig in self.ancestry(cls):
            if name in sig.fields:
                return sig.fields[name]
        return None

    def find_method(self, cls: Term, name: str, arity: int) -> MethodSig | None:
        for sig in self.ancestry(cls):
            for m in sig.methods:
                if m.name == name and m.arity == arity:
                    return m
        return None


def table_from_api(index: ApiIndex, nsmap: NamespaceMap | None = None) -> SymbolTable:
    """Symbol table for classes already compiled into a store, so that a new
    unit can reference them."""
    table = SymbolTable(nsmap or well_known())
    for cls in index.user_classes():
        spec = index.class_spec(cls)
        if spec is None:
            continue
        sig = ClassSig(cls, spec.parent)
        for furi, fs in spec.fields.items():
            local = furi.text.rsplit("#", 1)[-1]
            rng = TypeRef(fs.range, fs.range.text.startswith(XSD_NS))
            sig.fields[local] = FieldSig(furi, rng, ast.Cardinality(fs.min, fs.max))
        for ms in spec.methods:
            kind = "ordinary"
            if ms.name.startswith("!"):
                kind = "constructor"
            elif ms.name.startswith("~"):
                kind = "destructor"
            params = [(n, TypeRef(t, t.text.startswith(XSD_NS))) for n, t in ms.args]
            ret = None
            if ms.return_type is not None:
                ret = TypeRef(ms.return_type, ms.return_type.text.startswith(XSD_NS))
            sig.methods.append(MethodSig(kind, ms.name, params, ret))
        table.add_class(sig)
    return table


class Analyzer:
    def __init__(self, unit: ast.SourceUnit, externals: SymbolTable | None = None):
        self.unit = unit
        self.diagnostics: list[Diagnostic] = []
        self.nsmap = well_known()
        for prefix, uri in unit.prefixes.items():
            self.nsmap.bind(prefix, uri)
        self.table = SymbolTable(self.nsmap)
        if externals is not None:
            for sig in externals.classes.values():
                self.table.add_class(sig)
        self.scopes: list[dict[str, tuple[TypeRef, ast.Cardinality]]] = []
        self.current_class: ClassSig | None = None
        self.current_method: MethodSig | None = None

    # -- plumbing ----------------------------------------------------------

    def fail(self, message: str, pos: ast.Pos | None = None) -> None:
        self.diagnostics.append(Diagnostic(message, pos))

    def resolve_class_name(self, name: str, pos: ast.Pos | None) -> ClassSig | None:
        if ":" in name:
            prefix = name.split(":", 1)[0]
            if not self.nsmap.has_prefix(prefix):
                self.fail(f"undeclared prefix {prefix!r}", pos)
                return None
            uri = Term.uri(self.nsmap.expand(name))
            if uri == OWL.THING:
                return None  # owl:Thing is the implicit root, not a user class
            sig = self.table.get(uri)
            if sig is None:
                self.fail(f"unknown class {name!r}", pos)
            return sig
        if name == "Thing":
            return None
        candidates = self.table.by_local(name)
        if not candidates:
            self.fail(f"unknown class {name!r}", pos)
            return None
        if len(candidates) > 1:
            self.fail(f"ambiguous class name {name!r}", pos)
        return candidates[0]

    def resolve_type(self, name: str, pos: ast.Pos | None) -> TypeRef | None:
        """A type name: xsd datatype, owl:Thing, or a declared class."""
        if ":" in name:
            prefix = name.split(":", 1)[0]
            if not self.nsmap.has_prefix(prefix):
                self.fail(f"undeclared prefix {prefix!r}", pos)
                return None
            uri = self.nsmap.expand(name)
            if uri.startswith(XSD_NS):
                return TypeRef(Term.uri(uri), True)
            if uri == OWL.THING.text:
                return THING
            sig = self.table.get(Term.uri(uri))
            if sig is None:
                self.fail(f"unknown type {name!r}", pos)
                return None
            return TypeRef(sig.uri, False)
        if name in _DATATYPE_ALIASES:
            return TypeRef(Term.uri(XSD_NS + name), True)
        if name == "Thing":
            return THING
        sig = self.resolve_class_name(name, pos)
        if sig is None:
            return None
        return TypeRef(sig.uri, False)

    def class_uri_for_decl(self, name: str, pos: ast.Pos | None) -> Term | None:
        """The URI a class declaration's own name resolves to; bare names land
        in the demo namespace."""
        if ":" in name:
            prefix = name.split(":", 1)[0]
            if not self.nsmap.has_prefix(prefix):
                self.fail(f"undeclared prefix {prefix!r}", pos)
                return None
            return Term.uri(self.nsmap.expand(name))
        return Term.uri(DEMO_NS + name)

    # -- declaration collection ---------------------------------------------

    def collect(self) -> None:
        for cls in self.unit.classes:
            uri = self.class_uri_for_decl(cls.name, cls.pos)
            if uri is None:
                continue
            if self.table.get(uri) is not None:
                self.fail(f"duplicate class {cls.name!r}", cls.pos)
                continue
            parent = OWL.THING
            if cls.superclass not in ("Thing", "owl:Thing"):
                parent_uri = self.class_uri_for_decl(cls.superclass, cls.pos)
                if parent_uri is not None:
                    parent = parent_uri
            sig = ClassSig(uri, parent, decl=cls)
            self.table.add_class(sig)
        # second pass: fields and method signatures need every class known
        for cls in self.unit.classes:
            uri = self.class_uri_for_decl(cls.name, cls.pos)
            if uri is None:
                continue
            sig = self.table.get(uri)
            if sig is None or sig.decl is not cls:
                continue
            if sig.parent != OWL.THING and self.table.get(sig.parent) is None:
                self.fail(f"unknown superclass {cls.superclass!r}", cls.pos)
            ns = sig.namespace()
            for f in cls.fields:
                if f.name in sig.fields:
                    self.fail(f"duplicate field {f.name!r}", f.pos)
                    continue
                rng = self.resolve_type(f.range_name, f.pos)
                if rng is None:
                    continue
                sig.fields[f.name] = FieldSig(Term.uri(ns + f.name), rng, f.card)
            if len(cls.destructors()) > 1:
                self.fail("duplicate destructor", cls.pos)
            seen_methods: set[tuple[str, int]] = set()
            for m in cls.methods:
                msig = self.method_signature(sig, m)
                if msig is None:
                    continue
                key = (msig.name, msig.arity)
                if key in seen_methods:
                    self.fail(f"duplicate method {m.name!r} with {msig.arity} argument(s)", m.pos)
                    continue
                seen_methods.add(key)
                sig.methods.append(msig)

    def method_signature(self, cls: ClassSig, m: ast.MethodDecl) -> MethodSig | None:
        if m.kind == "constructor" and m.name[1:] != cls.local():
            self.fail(f"constructor name {m.name!r} does not match class {cls.local()!r}", m.pos)
            return None
        if m.kind == "destructor" and m.name[1:] != cls.local():
            self.fail(f"destructor name {m.name!r} does not match class {cls.local()!r}", m.pos)
            return None
        params = []
        seen = set()
        for p in m.params:
            ptype = self.resolve_type(p.type_name, m.pos)
            if ptype is None:
                return None
            if p.name in seen:
                self.fail(f"duplicate parameter {p.name!r}", m.pos)
            seen.add(p.name)
            params.append((p.name, ptype))
        ret = None
        if m.return_name is not None:
            ret = self.resolve_type(m.return_name, m.pos)
            if ret is None:
                return None
        return MethodSig(m.kind, m.name, params, ret, decl=m)

    # -- scope handling -------------------------------------------------------

    def push_scope(self) -> None:
        self.scopes.append({})

    def pop_scope(self) -> None:
        self.scopes.pop()

    def declare(self, name: str, t: TypeRef, card: ast.Cardinality, pos: ast.Pos | None) -> None:
        for scope in self.scopes:
            if name in scope:
                self.fail(f"duplicate variable {name!r}", pos)
                return
        self.scopes[-1][name] = (t, card)

    def lookup(self, name: str) -> tuple[TypeRef, ast.Cardinality] | None:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return None

    # -- analysis proper --------------------------------------------------------

    def run(self) -> SymbolTable:
        self.collect()
        for cls in self.unit.classes:
            uri = self.class_uri_for_decl(cls.name, cls.pos)
            sig = self.table.get(uri) if uri is not None else None
            if sig is None or sig.decl is not cls:
                continue
            self.current_class = sig
            for msig in sig.methods:
                if msig.decl is not None:
                    self.check_method(sig, msig)
        self.current_class = None
        if self.diagnostics:
            raise AnalysisError(self.diagnostics)
        return self.table

    def check_method(self, cls: ClassSig, msig: MethodSig) -> None:
        self.current_method = msig
        self.push_scope()
        for pname, ptype in msig.params:
            self.declare(pname, ptype, ast.SINGULAR, msig.decl.pos)
        self.check_block(msig.decl.body)
        self.pop_scope()
        if msig.return_type is not None and not _returns_on_all_paths(msig.decl.body):
            self.fail(f"method {msig.name!r} must return a value on every path", msig.decl.pos)
        self.current_method = None

    def check_block(self, block: ast.Block) -> None:
        self.push_scope()
        for i, stmt in enumerate(block.statements):
            self.check_stmt(stmt)
            if i + 1 < len(block.statements) and _stmt_always_returns(stmt):
                self.fail("unreachable code after return", block.statements[i + 1].pos)
                break
        self.pop_scope()

    # -- statements -----------------------------------------------------------

    def check_stmt(self, stmt: ast.Stmt) -> None:
        if isinstance(stmt, ast.VarDecl):
            self.check_var_decl(stmt)
        elif isinstance(stmt, ast.Assign):
            self.check_assign(stmt)
        elif isinstance(stmt, ast.SetClear):
            self.check_set_clear(stmt)
        elif isinstance(stmt, ast.NetQueryAssign):
            info = self.lookup(stmt.target_name)
            if info is None:
                self.fail(f"undeclared variable {stmt.target_name!r}", stmt.pos)
            elif info[0].is_datatype:
                self.fail("<? binds object URIs; target must be class-typed", stmt.pos)
            qt = self.check_expr(stmt.query, TypeRef(XSD.STRING, True))
            if qt is not None and qt.uri != XSD.STRING:
                self.fail("type mismatch: <? expects a string query", stmt.pos)
        elif isinstance(stmt, ast.Increment):
            info = self.lookup(stmt.target_name)
            if info is None:
                self.fail(f"undeclared variable {stmt.target_name!r}", stmt.pos)
            elif info[0].text not in _NUMERIC:
                self.fail("type mismatch: ++ needs a numeric variable", stmt.pos)
            stmt.resolved_type = info[0] if info else None
        elif isinstance(stmt, ast.If):
            self.require_boolean(stmt.cond, stmt.pos)
            self.check_block(stmt.then)
            if stmt.orelse is not None:
                self.check_block(stmt.orelse)
        elif isinstance(stmt, ast.While):
            self.require_boolean(stmt.cond, stmt.pos)
            self.check_block(stmt.body)
        elif isinstance(stmt, ast.For):
            self.push_scope()
            self.check_stmt(stmt.init)
            self.require_boolean(stmt.cond, stmt.pos)
            self.check_stmt(stmt.step)
            self.check_block(stmt.body)
            self.pop_scope()
        elif isinstance(stmt, ast.ForEach):
            self.check_foreach(stmt)
        elif isinstance(stmt, ast.Return):
            self.check_return(stmt)
        elif isinstance(stmt, ast.Delete):
            t = self.check_expr(stmt.value, None)
            if t is not None and t.is_datatype:
                self.fail("type mismatch: delete needs an object", stmt.pos)
        elif isinstance(stmt, ast.ExprStmt):
            self.check_expr_stmt(stmt)
        else:  # pragma: no cover
            raise TypeError(f"unknown statement {stmt!r}")

    def check_var_decl(self, stmt: ast.VarDecl) -> None:
        t = self.resolve_type(stmt.type_name, stmt.pos)
        card = stmt.card or ast.SINGULAR
        if t is None:
            return
        stmt.resolved_type = t
        stmt.resolved_card = card
        if stmt.init is not None:
            if stmt.net_query:
                if t.is_datatype:
                    self.fail("<? binds object URIs; target must be class-typed", stmt.pos)
                qt = self.check_expr(stmt.init, TypeRef(XSD.STRING, True))
                if qt is not None and qt.uri != XSD.STRING:
                    self.fail("type mismatch: <? expects a string query", stmt.pos)
            else:
                vt = self.check_expr(stmt.init, t)
                self.require_assignable(t, vt, stmt.pos)
        self.declare(stmt.name, t, card, stmt.pos)

    def check_assign(self, stmt: ast.Assign) -> None:
        target = stmt.target
        if isinstance(target, ast.InverseFieldAccess):
            self.fail(f"inverse field reference only supports =/, not {stmt.op!r}", stmt.pos)
            return
        if isinstance(target, ast.Name):
            info = self.lookup(target.ident)
            if info is None:
                self.fail(f"undeclared variable {target.ident!r}", target.pos)
                return
            t, card = info
            target.static_type = t
            if stmt.op == "=+" and (card.max is not None and card.max <= 1):
                self.fail("=+ on singular field", stmt.pos)
            vt = self.check_expr(stmt.value, t)
            self.require_assignable(t, vt, stmt.pos)
            return
        if isinstance(target, ast.FieldAccess):
            fsig = self.check_field_access(target, for_write=True)
            if fsig is None:
                return
            if stmt.op == "=+" and (fsig.card.max is not None and fsig.card.max <= 1):
                self.fail("=+ on singular field", stmt.pos)
            vt = self.check_expr(stmt.value, fsig.range)
            self.require_assignable(fsig.range, vt, stmt.pos)
            return
        self.fail("assignment target must be a variable or field", stmt.pos)

    def check_set_clear(self, stmt: ast.SetClear) -> None:
        target = stmt.target
        if isinstance(target, ast.Name):
            if self.lookup(target.ident) is None:
                self.fail(f"undeclared variable {target.ident!r}", target.pos)
            return
        if isinstance(target, ast.FieldAccess):
            self.check_field_access(target, for_write=True)
            return
        if isinstance(target, ast.InverseFieldAccess):
            base_t = self.check_expr(target.base, None)
            self.resolve_inverse_field(target, base_t)
            return
        self.fail("=/ target must be a variable or field", stmt.pos)

    def check_foreach(self, stmt: ast.ForEach) -> None:
        var_t = self.resolve_type(stmt.type_name, stmt.pos)
        if not isinstance(stmt.path, (ast.FieldAccess, ast.InverseFieldAccess)):
            self.fail("field loop requires a field path", stmt.pos)
            self.check_block(stmt.body)
            return
        if isinstance(stmt.path, ast.FieldAccess):
            fsig = self.check_field_access(stmt.path, for_write=False)
            elem = fsig.range if fsig else None
        else:
            base_t = self.check_expr(stmt.path.base, None)
            elem = self.resolve_inverse_field(stmt.path, base_t)
        if var_t is not None and elem is not None:
            self.require_assignable(var_t, elem, stmt.pos)
        self.push_scope()
        if var_t is not None:
            self.declare(stmt.var_name, var_t, ast.SINGULAR, stmt.pos)
        self.check_block(stmt.body)
        self.pop_scope()
        stmt.resolved_type = var_t

    def check_return(self, stmt: ast.Return) -> None:
        msig = self.current_method
        if msig is None:  # pragma: no cover
            return
        if msig.kind in ("constructor", "destructor"):
            if stmt.value is not None:
                self.fail(f"{msig.kind} cannot return a value", stmt.pos)
            return
        if msig.return_type is None:
            if stmt.value is not None:
                self.fail("method has no return type", stmt.pos)
            return
        if stmt.value is None:
            self.fail("type mismatch: method must return a value", stmt.pos)
            return
        vt = self.check_expr(stmt.value, msig.return_type)
        self.require_assignable(msig.return_type, vt, stmt.pos)

    def check_expr_stmt(self, stmt: ast.ExprStmt) -> None:
        expr = stmt.expr
        if isinstance(expr, ast.MethodCall):
            t = self.check_expr(expr, None)
            if t is not None:
                self.fail("result of a value-returning method must be used", stmt.pos)
            return
        if isinstance(expr, ast.InverseMethodCall):
            self.check_expr(expr, None)
            return
        self.fail("expression statement has no effect", stmt.pos)

    # -- expressions -----------------------------------------------------------

    def require_boolean(self, expr: ast.Expr, pos: ast.Pos | None) -> None:
        t = self.check_expr(expr, BOOLEAN)
        if t is not None and t.uri != XSD.BOOLEAN:
            self.fail("type mismatch: condition must be boolean", pos)

    def require_assignable(self, target: TypeRef, value: TypeRef | None, pos: ast.Pos | None) -> None:
        if value is None:
            return
        if target.is_datatype or value.is_datatype:
            if target.uri != value.uri:
                self.fail(f"type mismatch: cannot assign {value.local()} to {target.local()}", pos)
            return
        if not self.table.is_subclass(value.uri, target.uri):
            self.fail(f"type mismatch: {value.local()} is not a {target.local()}", pos)

    def check_field_access(self, expr: ast.FieldAccess, for_write: bool) -> FieldSig | None:
        base_t = self.check_expr(expr.base, None)
        if base_t is None:
            return None
        if base_t.is_datatype:
            self.fail(f"unknown property {expr.field_name!r} on datatype value", expr.pos)
            return None
        fsig = self.table.find_field(base_t.uri, expr.field_name)
        if fsig is None:
            self.fail(f"unknown property {expr.field_name!r}", expr.pos)
            return None
        expr.resolved_field = fsig
        return fsig

    def resolve_inverse_field(self, expr: ast.InverseFieldAccess, base_t: TypeRef | None) -> TypeRef | None:
        """Find the field by local name anywhere in the ontology (the subjects
        of the inverse edge are instances of the declaring class)."""
        owners = []
        for sig in self.table.classes.values():
            if expr.field_name in sig.fields:
                owners.append(sig)
        if not owners:
            self.fail(f"unknown property {expr.field_name!r}", expr.pos)
            return None
        if len(owners) > 1:
            owners.sort(key=lambda s: s.uri.text)
        sig = owners[0]
        fsig = sig.fields[expr.field_name]
        if base_t is not None and not fsig.range.is_datatype and base_t.is_datatype:
            self.fail("type mismatch: inverse reference base must be an object", expr.pos)
        expr.resolved_field = fsig
        expr.resolved_domain = TypeRef(sig.uri, False)
        return TypeRef(sig.uri, False)

    def check_expr(self, expr: ast.Expr, expected: TypeRef | None) -> TypeRef | None:
        t = self._check_expr(expr, expected)
        if t is not None:
            expr.static_type = t
        return t

    def _check_expr(self, expr: ast.Expr, expected: TypeRef | None) -> TypeRef | None:
        if isinstance(expr, ast.Literal):
            return self.check_literal(expr, expected)
        if isinstance(expr, ast.Name):
            info = self.lookup(expr.ident)
            if info is None:
                self.fail(f"undeclared variable {expr.ident!r}", expr.pos)
                return None
            return info[0]
        if isinstance(expr, ast.This):
            if self.current_class is None:  # pragma: no cover
                return None
            return TypeRef(self.current_class.uri, False)
        if isinstance(expr, ast.UriRef):
            return THING
        if isinstance(expr, ast.FieldAccess):
            fsig = self.check_field_access(expr, for_write=False)
            return fsig.range if fsig else None
        if isinstance(expr, ast.InverseFieldAccess):
            base_t = self.check_expr(expr.base, None)
            return self.resolve_inverse_field(expr, base_t)
        if isinstance(expr, ast.IndexedField):
            fsig = self.check_field_access(
                ast.FieldAccess(expr.base, expr.field_name, pos=expr.pos), for_write=False
            )
            it = self.check_expr(expr.index, TypeRef(XSD.INTEGER, True))
            if it is not None and it.text not in _NUMERIC:
                self.fail("type mismatch: field index must be an integer", expr.pos)
            if fsig is None:
                return None
            expr.resolved_field = fsig
            return fsig.range
        if isinstance(expr, ast.FieldCount):
            fsig = self.check_field_access(
                ast.FieldAccess(expr.base, expr.field_name, pos=expr.pos), for_write=False
            )
            if fsig is not None:
                expr.resolved_field = fsig
            return TypeRef(XSD.INTEGER, True)
        if isinstance(expr, ast.MethodCall):
            return self.check_call(expr)
        if isinstance(expr, ast.InverseMethodCall):
            return self.check_inverse_call(expr)
        if isinstance(expr, ast.New):
            return self.check_new(expr)
        if isinstance(expr, ast.Binary):
            return self.check_binary(expr, expected)
        if isinstance(expr, ast.Not):
            t = self.check_expr(expr.operand, BOOLEAN)
            if t is not None and t.uri != XSD.BOOLEAN:
                self.fail("type mismatch: ! needs a boolean", expr.pos)
            return BOOLEAN
        if isinstance(expr, ast.FieldQuery):
            return self.check_field_query(expr)
        if isinstance(expr, ast.TypeOfExpr):
            t = self.check_expr(expr.operand, None)
            if t is not None and t.is_datatype and t.uri != XSD.ANYURI:
                self.fail("type mismatch: typeof needs an object", expr.pos)
            if expr.class_name in ("rdfs:Resource", "Resource"):
                from .api import RDFS

                expr.resolved_class = RDFS.RESOURCE
                return BOOLEAN
            target = self.resolve_type(expr.class_name, expr.pos)
            if target is not None:
                expr.resolved_class = target.uri
            return BOOLEAN
        if isinstance(expr, ast.TypeOfQueryExpr):
            t = self.check_expr(expr.operand, None)
            if t is not None and t.is_datatype and t.uri != XSD.ANYURI:
                self.fail("type mismatch: typeof? needs an object", expr.pos)
            return ANYURI
        raise TypeError(f"unknown expression {expr!r}")  # pragma: no cover

    def check_literal(self, expr: ast.Literal, expected: TypeRef | None) -> TypeRef | None:
        if expr.datatype_name is not None:
            name = expr.datatype_name
            if "://" in name or name.startswith("urn:"):
                dt = Term.uri(name)
            else:
                prefix = name.split(":", 1)[0]
                if not self.nsmap.has_prefix(prefix):
                    self.fail(f"undeclared prefix {prefix!r}", expr.pos)
                    return None
                dt = Term.uri(self.nsmap.expand(name))
            t = TypeRef(dt, True)
        elif expected is not None and expected.is_datatype and expected.text in _NUMERIC:
            t = expected  # bare digits adopt the numeric context type
        else:
            t = TypeRef(XSD.INTEGER, True)
        expr.resolved_datatype = t.uri
        if t.text in _NUMERIC and not _valid_numeric(expr.lexical, t.text):
            self.fail(f"malformed {t.local()} literal {expr.lexical!r}", expr.pos)
        return t

    def check_call(self, expr: ast.MethodCall) -> TypeRef | None:
        base_t = self.check_expr(expr.base, None)
        if base_t is None:
            return None
        if base_t.is_datatype:
            self.fail(f"unknown method {expr.name!r} on datatype value", expr.pos)
            return None
        msig = self.table.find_method(base_t.uri, expr.name, len(expr.args))
        if msig is None or msig.kind != "ordinary":
            self.fail(f"unknown method {expr.name!r} with {len(expr.args)} argument(s)", expr.pos)
            return None
        for arg, (_, ptype) in zip(expr.args, msig.params):
            at = self.check_expr(arg, ptype)
            self.require_assignable(ptype, at, expr.pos)
        expr.resolved_sig = msig
        return msig.return_type

    def check_inverse_call(self, expr: ast.InverseMethodCall) -> TypeRef | None:
        base_t = self.check_expr(expr.base, None)
        inverse = ast.InverseFieldAccess(expr.base, expr.field_name, pos=expr.pos)
        domain = self.resolve_inverse_field(inverse, base_t)
        if domain is None:
            return None
        expr.resolved_field = inverse.resolved_field
        expr.resolved_domain = domain
        msig = self.table.find_method(domain.uri, expr.method_name, len(expr.args))
        if msig is None or msig.kind != "ordinary":
            self.fail(f"unknown method {expr.method_name!r} with {len(expr.args)} argument(s)", expr.pos)
            return None
        if msig.return_type is not None:
            self.fail("inverse method invocation requires a void method", expr.pos)
        for arg, (_, ptype) in zip(expr.args, msig.params):
            at = self.check_expr(arg, ptype)
            self.require_assignable(ptype, at, expr.pos)
        expr.resolved_sig = msig
        return None

    def check_new(self, expr: ast.New) -> TypeRef | None:
        sig = self.resolve_class_name(expr.class_name, expr.pos)
        if sig is None:
            return None
        expr.resolved_class = sig.uri
        ctors = [m for m in sig.methods if m.kind == "constructor"]
        match = [m for m in ctors if m.arity == len(expr.args)]
        if not match:
            if ctors or expr.args:
                self.fail(f"no matching constructor for {expr.class_name!r} with "
                          f"{len(expr.args)} argument(s)", expr.pos)
                return TypeRef(sig.uri, False)
        else:
            for arg, (_, ptype) in zip(expr.args, match[0].params):
                at = self.check_expr(arg, ptype)
                self.require_assignable(ptype, at, expr.pos)
        return TypeRef(sig.uri, False)

    def check_binary(self, expr: ast.Binary, expected: TypeRef | None) -> TypeRef | None:
        op = expr.op
        hint = expected if op in ("+", "-", "*", "/") else None
        lt = self.check_expr(expr.left, hint)
        rt = self.check_expr(expr.right, lt if lt is not None and lt.is_datatype else hint)
        if lt is None and rt is not None and isinstance(expr.left, ast.Literal):
            lt = self.check_expr(expr.left, rt)
        if lt is None or rt is None:
            return BOOLEAN if op not in ("+", "-", "*", "/") else lt
        result = _binary_result(op, lt, rt, self.table)
        if result is None:
            self.fail(
                f"type mismatch: {lt.local()} {op} {rt.local()} is not a supported operation",
                expr.pos,
            )
            return BOOLEAN if op not in ("+", "-", "*", "/") else None
        return result

    def check_field_query(self, expr: ast.FieldQuery) -> TypeRef | None:
        left = expr.left
        if not isinstance(left, ast.FieldAccess):
            self.fail("=? requires a field path on the left", expr.pos)
            return BOOLEAN
        chain = _field_chain(left)
        if chain is None:
            self.fail("=? requires a field path on the left", expr.pos)
            return BOOLEAN
        self.check_expr(left, None)  # annotates the chain
        if isinstance(expr.right, ast.FieldAccess):
            self.check_expr(expr.right, None)
        else:
            left_t = getattr(left, "static_type", None)
            self.check_expr(expr.right, left_t)
        return BOOLEAN


def _field_chain(expr: ast.Expr) -> list[str] | None:
    """(base ... .f1 .f2) -> [f1, f2]; None when not a pure field chain."""
    names: list[str] = []
    cur = expr
    while isinstance(cur, ast.FieldAccess):
        names.append(cur.field_name)
        cur = cur.base
    if isinstance(cur, (ast.This, ast.Name)):
        return list(reversed(names))
    return None


def _valid_numeric(lexical: str, datatype: str) -> bool:
    try:
        if datatype in (XSD.FLOAT.text, XSD.DOUBLE.text):
            float(lexical)
        else:
            int(lexical)
        return True
    except ValueError:
        return False


def _binary_result(op: str, lt: TypeRef, rt: TypeRef, table: SymbolTable) -> TypeRef | None:
    """The datatype-operation table: which operand pairs each operator accepts."""
    if op in ("==", "!="):
        if not lt.is_datatype and not rt.is_datatype:
            return BOOLEAN
        if lt.is_datatype and rt.is_datatype and lt.uri == rt.uri:
            return BOOLEAN
        return None
    if op in ("<", "<=", ">", ">="):
        if lt.is_datatype and lt.uri == rt.uri and (
            lt.text in _NUMERIC or lt.text in _TEMPORAL
            or lt.uri in (XSD.STRING, XSD.ANYURI)
        ):
            return BOOLEAN
        return None
    # arithmetic
    if not lt.is_datatype or not rt.is_datatype:
        return None
    if lt.text in _NUMERIC and lt.uri == rt.uri:
        return lt
    if op == "+" and lt.uri == XSD.STRING and rt.uri == XSD.STRING:
        return lt
    if op in ("+", "-") and lt.text in _TEMPORAL and rt.text in (XSD.INTEGER.text, XSD.INT.text):
        return lt
    return None


def _stmt_always_returns(stmt: ast.Stmt) -> bool:
    if isinstance(stmt, ast.Return):
        return True
    if isinstance(stmt, ast.If) and stmt.orelse is not None:
        return _returns_on_all_paths(stmt.then) and _returns_on_all_paths(stmt.orelse)
    return False


def _returns_on_all_paths(block: ast.Block) -> bool:
    return any(_stmt_always_returns(stmt) for stmt in block.statements)


def analyze(unit: ast.SourceUnit, externals: SymbolTable | None = None) -> SymbolTable:
    return Analyzer(unit, externals).run()
