"""Code generation: analyzed AST -> ontology graph of UUID-named instruction
classes wired by restrictions.

Statements become instruction chains linked through nextInst; conditions
branch through trueInst/falseInst; every block of source becomes a Block
instruction that scopes the variables declared under it. Field operations
carry the store-command templates they will execute, with $(k) slots filled
from operand value nodes at run time.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from . import ast_nodes as ast
from .analyzer import ClassSig, FieldSig, MethodSig, SymbolTable
from .api import ApiIndex, NENO, OWL, RDF, RDFS, XSD
from .datatypes import canonical_lexical
from .namespaces import well_known
from .rdf import Graph, Term, Triple, UuidSource
from .sparql import term_to_surface


class CompileError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Command templates
# ---------------------------------------------------------------------------

SLOT = "$({})"


@dataclass
class CommandTemplate:
    """One or more store commands with $(k) placeholders for runtime terms."""

    texts: list[str]

    def render(self, slots: list[Term]) -> list[str]:
        rendered = []
        for text in self.texts:
            for k, term in enumerate(slots):
                text = text.replace(SLOT.format(k), term_to_surface(term))
            rendered.append(text)
        return rendered

    def joined(self) -> str:
        return "\n".join(self.texts)


def render_template_text(text: str, slots: list[Term]) -> list[str]:
    out = []
    for line in text.split("\n"):
        for k, term in enumerate(slots):
            line = line.replace(SLOT.format(k), term_to_surface(term))
        out.append(line)
    return out


def _pred(field_uri: Term) -> str:
    compact = well_known().compact(field_uri.text)
    return f"<{compact}>" if compact else f"<{field_uri.text}>"


def _var_seq():
    for name in ("x", "y", "z"):
        yield name
    i = 1
    while True:
        for name in ("x", "y", "z"):
            yield f"{name}{i}"
        i += 1


def set_plus_template(field_uri: Term) -> CommandTemplate:
    return CommandTemplate([f"INSERT {{ $(0) {_pred(field_uri)} $(1) . }}"])


def set_template(field_uri: Term) -> CommandTemplate:
    return CommandTemplate(
        [
            f"DELETE {{ $(0) {_pred(field_uri)} ?x . }}",
            f"INSERT {{ $(0) {_pred(field_uri)} $(1) . }}",
        ]
    )


def set_minus_template(field_uri: Term) -> CommandTemplate:
    return CommandTemplate([f"DELETE {{ $(0) {_pred(field_uri)} $(1) . }}"])


def set_clear_template(field_uri: Term, range_local: str) -> CommandTemplate:
    var = range_local[:1].lower() + range_local[1:]
    return CommandTemplate([f"DELETE {{ $(0) {_pred(field_uri)} ?{var} . }}"])


def inverse_clear_template(field_uri: Term, domain_local: str) -> CommandTemplate:
    var = domain_local[:1].lower() + domain_local[1:]
    return CommandTemplate([f"DELETE {{ ?{var} {_pred(field_uri)} $(0) . }}"])


def field_query_template(left_fields: list[Term], right_fields: list[Term]) -> CommandTemplate:
    """ASK joining a field chain from the left base against either a ground
    right value or a field chain from the right base (shared terminal var)."""
    names = _var_seq()
    patterns = []
    if not right_fields and len(left_fields) == 1:
        patterns.append(f"$(0) {_pred(left_fields[0])} $(1)")
    else:
        subject = "$(0)"
        terminal = None
        for i, f in enumerate(left_fields):
            obj = f"?{next(names)}"
            patterns.append(f"{subject} {_pred(f)} {obj}")
            subject = obj
            terminal = obj
        if not right_fields:
            patterns[-1] = patterns[-1].rsplit(" ", 1)[0] + " $(1)"
        else:
            subject = "$(1)"
            for i, f in enumerate(right_fields):
                obj = terminal if i == len(right_fields) - 1 else f"?{next(names)}"
                patterns.append(f"{subject} {_pred(f)} {obj}")
                subject = obj
    body = " . ".join(patterns)
    return CommandTemplate([f"ASK {{ {body} . }}"])


def field_select_template(field_uri: Term, var_name: str, inverse: bool,
                          limit: int | None = None) -> CommandTemplate:
    v = f"?{var_name}"
    if inverse:
        text = f"SELECT {v} WHERE {{ {v} {_pred(field_uri)} $(0) . }}"
    else:
        text = f"SELECT {v} WHERE {{ $(0) {_pred(field_uri)} {v} . }}"
    if limit is not None:
        text += f" LIMIT {limit}"
    return CommandTemplate([text])


def emit_query_plans(stmt, table: SymbolTable | None = None) -> CommandTemplate:
    """The store-command template a field-operation statement compiles to.
    The statement must already be analyzed (fields resolved)."""
    if isinstance(stmt, ast.Assign) and isinstance(stmt.target, ast.FieldAccess):
        fsig: FieldSig = stmt.target.resolved_field
        if stmt.op == "=+":
            return set_plus_template(fsig.uri)
        if stmt.op == "=":
            return set_template(fsig.uri)
        if stmt.op == "=-":
            return set_minus_template(fsig.uri)
    if isinstance(stmt, ast.SetClear):
        if isinstance(stmt.target, ast.FieldAccess):
            fsig = stmt.target.resolved_field
            return set_clear_template(fsig.uri, fsig.range.local())
        if isinstance(stmt.target, ast.InverseFieldAccess):
            fsig = stmt.target.resolved_field
            return inverse_clear_template(fsig.uri, stmt.target.resolved_domain.local())
    if isinstance(stmt, ast.FieldQuery):
        left = [f.uri for f in _chain_fields(stmt.left)]
        right = [f.uri for f in _chain_fields(stmt.right)] if isinstance(stmt.right, ast.FieldAccess) else []
        return field_query_template(left, right)
    if isinstance(stmt, ast.VarDecl) and isinstance(stmt.init, ast.InverseFieldAccess):
        fsig = stmt.init.resolved_field
        limit = stmt.card.max if stmt.card is not None else None
        return field_select_template(fsig.uri, stmt.name, inverse=True, limit=limit)
    if isinstance(stmt, ast.VarDecl) and isinstance(stmt.init, ast.FieldAccess):
        fsig = stmt.init.resolved_field
        return field_select_template(fsig.uri, stmt.name, inverse=False)
    raise CompileError(f"no query plan for {stmt!r}")


def _chain_fields(expr: ast.Expr) -> list[FieldSig]:
    out = []
    cur = expr
    while isinstance(cur, ast.FieldAccess):
        out.append(cur.resolved_field)
        cur = cur.base
    return list(reversed(out))


def _chain_base(expr: ast.Expr) -> ast.Expr:
    cur = expr
    while isinstance(cur, ast.FieldAccess):
        cur = cur.base
    return cur


# ---------------------------------------------------------------------------
# In-memory instruction/value nodes prior to emission
# ---------------------------------------------------------------------------

@dataclass
class VNode:
    kind: Term  # LocalDirect | PopDirect | LocalVariable | FieldVariable | ObjectVariable
    consts: dict[Term, Term] = dc_field(default_factory=dict)
    refs: dict[Term, "VNode"] = dc_field(default_factory=dict)


@dataclass
class Instr:
    opcode: Term
    consts: dict[Term, Term] = dc_field(default_factory=dict)
    refs: dict[Term, VNode] = dc_field(default_factory=dict)
    slots: list[VNode] = dc_field(default_factory=list)
    next: "Instr | None" = None
    true_next: "Instr | None" = None
    false_next: "Instr | None" = None
    in_block: "Instr | None" = None


@dataclass
class Chain:
    head: Instr
    tails: list[tuple[Instr, str]]  # (instruction, "next"|"true_next"|"false_next")


def _link(tails: list[tuple[Instr, str]], target: Instr) -> None:
    for instr, slot in tails:
        setattr(instr, slot, target)


def _lit(text: str, datatype: Term) -> Term:
    return Term.literal(canonical_lexical(text, datatype.text), datatype.text)


def _bool(value: bool) -> Term:
    return Term.literal("true" if value else "false", XSD.BOOLEAN.text)


def _int_lit(value: int) -> Term:
    return Term.literal(str(value), XSD.INTEGER.text)


class MethodCompiler:
    """Compiles one method body into an instruction graph."""

    def __init__(self, unit_compiler: "UnitCompiler", cls: ClassSig, msig: MethodSig):
        self.uc = unit_compiler
        self.table = unit_compiler.table
        self.cls = cls
        self.msig = msig
        self.instrs: list[Instr] = []
        self.block_stack: list[Instr] = []
        self.hidden_counter = 0

    # -- construction helpers ------------------------------------------------

    def instr(self, opcode: Term, **kw) -> Instr:
        node = Instr(opcode, **kw)
        node.in_block = self.block_stack[-1] if self.block_stack else None
        self.instrs.append(node)
        return node

    def block_instr(self) -> Instr:
        return self.instr(NENO.BLOCK)

    def hidden_name(self) -> str:
        name = f"zzTmp{self.hidden_counter}"
        self.hidden_counter += 1
        return name

    # value node constructors
    def v_direct(self, term: Term) -> VNode:
        prop = NENO.HAS_URI if term.is_uri else NENO.HAS_VALUE
        return VNode(NENO.LOCAL_DIRECT, consts={prop: term})

    def v_pop(self) -> VNode:
        return VNode(NENO.POP_DIRECT)

    def v_var(self, name: str, index: VNode | None = None, count: bool = False) -> VNode:
        node = VNode(NENO.LOCAL_VARIABLE, consts={NENO.HAS_VARIABLE_NAME: Term.literal(name)})
        if index is not None:
            node.refs[NENO.HAS_INDEX] = index
        if count:
            node.consts[NENO.IS_COUNT] = _bool(True)
        return node

    def v_this(self) -> VNode:
        return VNode(NENO.OBJECT_VARIABLE)

    def v_field(self, base: VNode, fsig: FieldSig, inverse: bool, var_name: str = "x",
                limit: int | None = None, index: VNode | None = None,
                count: bool = False) -> VNode:
        template = field_select_template(fsig.uri, var_name, inverse, limit)
        node = VNode(
            NENO.FIELD_VARIABLE,
            consts={
                NENO.HAS_PREDICATE: fsig.uri,
                NENO.IS_INVERSE: _bool(inverse),
                NENO.HAS_TEMPLATE: Term.literal(template.joined()),
            },
            refs={NENO.HAS_BASE: base},
        )
        if index is not None:
            node.refs[NENO.HAS_INDEX] = index
        if count:
            node.consts[NENO.IS_COUNT] = _bool(True)
        return node

    # -- entry point -----------------------------------------------------------

    def compile(self) -> Instr:
        """Returns the method's root Block instruction."""
        root = self.block_instr()
        self.block_stack.append(root)
        decl = self.msig.decl
        chain = self.compile_block_body(decl.body, root)
        if chain.tails:
            ret = self.implicit_return()
            _link(chain.tails, ret)
        self.block_stack.pop()
        return root

    def implicit_return(self) -> Instr:
        if self.msig.kind == "constructor":
            return self.instr(NENO.RETURN, refs={NENO.HAS_VALUE: self.v_this()})
        return self.instr(NENO.RETURN)

    def compile_block_body(self, block: ast.Block, block_instr: Instr) -> Chain:
        """Statements of a block; the Block instruction is already emitted and
        on the stack. Returns a chain headed at the Block instruction."""
        tails: list[tuple[Instr, str]] = [(block_instr, "next")]
        for stmt in block.statements:
            chain = self.compile_stmt(stmt)
            _link(tails, chain.head)
            tails = chain.tails
            if not tails:
                break  # a return ended every path
        return Chain(block_instr, tails)

    def compile_nested_block(self, block: ast.Block) -> Chain:
        b = self.block_instr()
        self.block_stack.append(b)
        chain = self.compile_block_body(block, b)
        self.block_stack.pop()
        return chain

    # -- statements -----------------------------------------------------------

    def compile_stmt(self, stmt: ast.Stmt) -> Chain:
        if isinstance(stmt, ast.VarDecl):
            return self.compile_var_decl(stmt)
        if isinstance(stmt, ast.Assign):
            return self.compile_assign(stmt)
        if isinstance(stmt, ast.SetClear):
            return self.compile_set_clear(stmt)
        if isinstance(stmt, ast.NetQueryAssign):
            query = self.compile_expr(stmt.query)
            nq = self.instr(
                NENO.NET_QUERY,
                consts={NENO.DECLARES: _bool(False)},
                refs={NENO.HAS_TARGET: self.v_var(stmt.target_name), NENO.HAS_VALUE: self.v_pop()},
            )
            _link(query.tails, nq)
            return Chain(query.head, [(nq, "next")])
        if isinstance(stmt, ast.Increment):
            return self.compile_increment(stmt)
        if isinstance(stmt, ast.If):
            return self.compile_if(stmt)
        if isinstance(stmt, ast.While):
            return self.compile_while(stmt)
        if isinstance(stmt, ast.For):
            return self.compile_for(stmt)
        if isinstance(stmt, ast.ForEach):
            return self.compile_foreach(stmt)
        if isinstance(stmt, ast.Return):
            return self.compile_return(stmt)
        if isinstance(stmt, ast.Delete):
            value = self.compile_expr(stmt.value)
            des = self.instr(NENO.DESTRUCT, refs={NENO.HAS_OBJECT: self.v_pop()})
            _link(value.tails, des)
            return Chain(value.head, [(des, "next")])
        if isinstance(stmt, ast.ExprStmt):
            if isinstance(stmt.expr, ast.InverseMethodCall):
                return self.compile_inverse_call(stmt.expr)
            return self.compile_expr(stmt.expr, void=True)
        raise CompileError(f"unknown statement {stmt!r}")  # pragma: no cover

    def compile_var_decl(self, stmt: ast.VarDecl) -> Chain:
        target = self.v_var(stmt.name)
        consts = {NENO.DECLARES: _bool(True)}
        if stmt.init is None:
            node = self.instr(NENO.SET, consts=consts, refs={NENO.HAS_TARGET: target})
            return Chain(node, [(node, "next")])
        if stmt.net_query:
            query = self.compile_expr(stmt.init)
            nq = self.instr(
                NENO.NET_QUERY, consts=consts,
                refs={NENO.HAS_TARGET: target, NENO.HAS_VALUE: self.v_pop()},
            )
            _link(query.tails, nq)
            return Chain(query.head, [(nq, "next")])
        if isinstance(stmt.init, (ast.FieldAccess, ast.InverseFieldAccess)):
            # multi-value bind straight from the field selection
            value, head = self.path_vnode(stmt.init, var_name=stmt.name,
                                          limit_card=stmt.card)
        else:
            value, head = self.value_vnode(stmt.init)
        node = self.instr(NENO.SET, consts=consts,
                          refs={NENO.HAS_TARGET: target, NENO.HAS_VALUE: value})
        return self._join3(head, None, node)

    def path_vnode(self, expr: ast.Expr, var_name: str = "x",
                   limit_card: ast.Cardinality | None = None) -> tuple[VNode, Chain | None]:
        """A FieldVariable value node for a field path, plus the chain that
        computes its base (None when the base is inline)."""
        if isinstance(expr, ast.InverseFieldAccess):
            fsig = expr.resolved_field
            inverse = True
            base_expr = expr.base
        else:
            fsig = expr.resolved_field
            inverse = False
            base_expr = expr.base
        limit = None
        if inverse and limit_card is not None and limit_card.max is not None:
            limit = limit_card.max
        base, head = self.base_vnode(base_expr)
        return self.v_field(base, fsig, inverse, var_name=var_name, limit=limit), head

    def base_vnode(self, expr: ast.Expr) -> tuple[VNode, Chain | None]:
        """Inline simple bases (this, variables); anything else is computed
        onto the operand stack."""
        if isinstance(expr, ast.This):
            return self.v_this(), None
        if isinstance(expr, ast.Name):
            return self.v_var(expr.ident), None
        chain = self.compile_expr(expr)
        return self.v_pop(), chain

    def value_vnode(self, expr: ast.Expr) -> tuple[VNode, Chain | None]:
        """A value node for a setter's right-hand side. Variables and field
        paths stay inline so multi-valued selections can flow through."""
        if isinstance(expr, ast.Literal):
            return self.v_direct(_lit(expr.lexical, expr.resolved_datatype)), None
        if isinstance(expr, (ast.FieldAccess, ast.InverseFieldAccess)):
            return self.path_vnode(expr)
        return self.base_vnode(expr)

    def compile_assign(self, stmt: ast.Assign) -> Chain:
        target = stmt.target
        if isinstance(target, ast.Name):
            opcode = {"=": NENO.SET, "=+": NENO.SET_PLUS, "=-": NENO.SET_MINUS}[stmt.op]
            if isinstance(stmt.value, (ast.FieldAccess, ast.InverseFieldAccess)):
                value, head = self.path_vnode(stmt.value, var_name=target.ident)
            else:
                value, head = self.value_vnode(stmt.value)
            node = self.instr(opcode, consts={NENO.DECLARES: _bool(False)},
                              refs={NENO.HAS_TARGET: self.v_var(target.ident),
                                    NENO.HAS_VALUE: value})
            return self._join3(head, None, node)
        # field target: the operation is a store-command template
        fsig: FieldSig = target.resolved_field
        if stmt.op == "=+":
            opcode, template = NENO.SET_PLUS, set_plus_template(fsig.uri)
        elif stmt.op == "=-":
            opcode, template = NENO.SET_MINUS, set_minus_template(fsig.uri)
        else:
            opcode, template = NENO.SET, set_template(fsig.uri)
        base, base_chain = self.base_vnode(target.base)
        value_node, value_chain = self.value_vnode(stmt.value)
        node = self.instr(opcode,
                          consts={NENO.HAS_TEMPLATE: Term.literal(template.joined())},
                          slots=[base, value_node])
        return self._join3(base_chain, value_chain, node)

    def compile_set_clear(self, stmt: ast.SetClear) -> Chain:
        target = stmt.target
        if isinstance(target, ast.Name):
            node = self.instr(NENO.SET_CLEAR,
                              refs={NENO.HAS_TARGET: self.v_var(target.ident)})
            return Chain(node, [(node, "next")])
        if isinstance(target, ast.FieldAccess):
            fsig = target.resolved_field
            template = set_clear_template(fsig.uri, fsig.range.local())
        else:
            fsig = target.resolved_field
            template = inverse_clear_template(fsig.uri, target.resolved_domain.local())
        base, base_chain = self.base_vnode(target.base)
        node = self.instr(NENO.SET_CLEAR,
                          consts={NENO.HAS_TEMPLATE: Term.literal(template.joined())},
                          slots=[base])
        if base_chain is not None:
            _link(base_chain.tails, node)
            return Chain(base_chain.head, [(node, "next")])
        return Chain(node, [(node, "next")])

    def compile_increment(self, stmt: ast.Increment) -> Chain:
        # i++ is i = i + 1
        datatype = stmt.resolved_type.uri if getattr(stmt, "resolved_type", None) else XSD.INTEGER
        push_var = self.instr(NENO.PUSH_VALUE, refs={NENO.HAS_VALUE: self.v_var(stmt.target_name)})
        push_one = self.instr(NENO.PUSH_VALUE,
                              refs={NENO.HAS_VALUE: self.v_direct(_lit("1", datatype))})
        add = self.instr(NENO.ADD, refs={NENO.HAS_LEFT: self.v_pop(), NENO.HAS_RIGHT: self.v_pop()})
        store = self.instr(NENO.SET, consts={NENO.DECLARES: _bool(False)},
                           refs={NENO.HAS_TARGET: self.v_var(stmt.target_name),
                                 NENO.HAS_VALUE: self.v_pop()})
        push_var.next = push_one
        push_one.next = add
        add.next = store
        return Chain(push_var, [(store, "next")])

    def compile_if(self, stmt: ast.If) -> Chain:
        cond = self.compile_branch_condition(stmt.cond)
        then_chain = self.compile_nested_block(stmt.then)
        tails = list(then_chain.tails)
        true_slot = "false_next" if cond.swapped else "true_next"
        false_slot = "true_next" if cond.swapped else "false_next"
        setattr(cond.instr, true_slot, then_chain.head)
        if stmt.orelse is not None:
            else_chain = self.compile_nested_block(stmt.orelse)
            setattr(cond.instr, false_slot, else_chain.head)
            tails += else_chain.tails
        else:
            tails.append((cond.instr, false_slot))
        return Chain(cond.head, tails)

    def compile_while(self, stmt: ast.While) -> Chain:
        cond = self.compile_branch_condition(stmt.cond)
        body = self.compile_nested_block(stmt.body)
        true_slot = "false_next" if cond.swapped else "true_next"
        false_slot = "true_next" if cond.swapped else "false_next"
        setattr(cond.instr, true_slot, body.head)
        _link(body.tails, cond.head)
        return Chain(cond.head, [(cond.instr, false_slot)])

    def compile_for(self, stmt: ast.For) -> Chain:
        scope = self.block_instr()
        self.block_stack.append(scope)
        init = self.compile_stmt(stmt.init)
        scope.next = init.head
        cond = self.compile_branch_condition(stmt.cond)
        _link(init.tails, cond.head)
        body = self.compile_nested_block(stmt.body)
        step = self.compile_stmt(stmt.step)
        _link(body.tails, step.head)
        _link(step.tails, cond.head)
        true_slot = "false_next" if cond.swapped else "true_next"
        false_slot = "true_next" if cond.swapped else "false_next"
        setattr(cond.instr, true_slot, body.head)
        self.block_stack.pop()
        return Chain(scope, [(cond.instr, false_slot)])

    def compile_foreach(self, stmt: ast.ForEach) -> Chain:
        """Snapshot the field selection into a hidden variable, then drive an
        index loop that re-declares the loop variable each iteration."""
        scope = self.block_instr()
        self.block_stack.append(scope)
        hidden = self.hidden_name()
        idx = self.hidden_name()
        value, head = self.path_vnode(stmt.path, var_name=hidden)
        snap = self.instr(NENO.SET, consts={NENO.DECLARES: _bool(True)},
                          refs={NENO.HAS_TARGET: self.v_var(hidden), NENO.HAS_VALUE: value})
        if head is not None:
            scope.next = head.head
            _link(head.tails, snap)
        else:
            scope.next = snap
        init = self.instr(NENO.SET, consts={NENO.DECLARES: _bool(True)},
                          refs={NENO.HAS_TARGET: self.v_var(idx),
                                NENO.HAS_VALUE: self.v_direct(_int_lit(0))})
        snap.next = init
        push_i = self.instr(NENO.PUSH_VALUE, refs={NENO.HAS_VALUE: self.v_var(idx)})
        init.next = push_i
        push_n = self.instr(NENO.PUSH_VALUE,
                            refs={NENO.HAS_VALUE: self.v_var(hidden, count=True)})
        push_i.next = push_n
        cond = self.instr(NENO.LESS_THAN,
                          refs={NENO.HAS_LEFT: self.v_pop(), NENO.HAS_RIGHT: self.v_pop()})
        push_n.next = cond
        # body block declares the loop variable from the snapshot
        body_block = self.block_instr()
        self.block_stack.append(body_block)
        bind = self.instr(NENO.SET, consts={NENO.DECLARES: _bool(True)},
                          refs={NENO.HAS_TARGET: self.v_var(stmt.var_name),
                                NENO.HAS_VALUE: self.v_var(hidden, index=self.v_var(idx))})
        body_block.next = bind
        tails: list[tuple[Instr, str]] = [(bind, "next")]
        for inner in stmt.body.statements:
            chain = self.compile_stmt(inner)
            _link(tails, chain.head)
            tails = chain.tails
            if not tails:
                break
        self.block_stack.pop()
        cond.true_next = body_block
        incr = self.compile_increment(ast.Increment(idx))
        _link(tails, incr.head)
        _link(incr.tails, push_i)
        self.block_stack.pop()
        return Chain(scope, [(cond, "false_next")])

    def compile_inverse_call(self, expr: ast.InverseMethodCall) -> Chain:
        """this..f.m(args): snapshot the inverse selection, then invoke the
        method once per selected object in deterministic order."""
        hidden = self.hidden_name()
        idx = self.hidden_name()
        fsig: FieldSig = expr.resolved_field
        base, base_chain = self.base_vnode(expr.base)
        value = self.v_field(base, fsig, inverse=True, var_name=hidden)
        snap = self.instr(NENO.SET, consts={NENO.DECLARES: _bool(True)},
                          refs={NENO.HAS_TARGET: self.v_var(hidden), NENO.HAS_VALUE: value})
        head = snap
        if base_chain is not None:
            head = base_chain.head
            _link(base_chain.tails, snap)
        init = self.instr(NENO.SET, consts={NENO.DECLARES: _bool(True)},
                          refs={NENO.HAS_TARGET: self.v_var(idx),
                                NENO.HAS_VALUE: self.v_direct(_int_lit(0))})
        snap.next = init
        push_i = self.instr(NENO.PUSH_VALUE, refs={NENO.HAS_VALUE: self.v_var(idx)})
        init.next = push_i
        push_n = self.instr(NENO.PUSH_VALUE,
                            refs={NENO.HAS_VALUE: self.v_var(hidden, count=True)})
        push_i.next = push_n
        cond = self.instr(NENO.LESS_THAN,
                          refs={NENO.HAS_LEFT: self.v_pop(), NENO.HAS_RIGHT: self.v_pop()})
        push_n.next = cond
        args_chain = self.compile_args(expr.args)
        invoke = self.instr(
            NENO.INVOKE_METHOD,
            consts={
                NENO.HAS_METHOD_NAME: Term.literal(expr.method_name),
                NENO.HAS_ARITY: _int_lit(len(expr.args)),
                NENO.PUSHES_RESULT: _bool(False),
            },
            refs={NENO.HAS_OBJECT: self.v_var(hidden, index=self.v_var(idx))},
        )
        if args_chain is not None:
            cond.true_next = args_chain.head
            _link(args_chain.tails, invoke)
        else:
            cond.true_next = invoke
        incr = self.compile_increment(ast.Increment(idx))
        invoke.next = incr.head
        _link(incr.tails, push_i)
        return Chain(head, [(cond, "false_next")])

    def compile_return(self, stmt: ast.Return) -> Chain:
        if self.msig.kind == "constructor":
            node = self.instr(NENO.RETURN, refs={NENO.HAS_VALUE: self.v_this()})
            return Chain(node, [])
        if stmt.value is None:
            node = self.instr(NENO.RETURN)
            return Chain(node, [])
        value = self.compile_expr(stmt.value)
        node = self.instr(NENO.RETURN, refs={NENO.HAS_VALUE: self.v_pop()})
        _link(value.tails, node)
        return Chain(value.head, [])

    # -- conditions --------------------------------------------------------------

    def compile_branch_condition(self, cond: ast.Expr):
        """Chain ending in a Condition instruction with open branch slots."""

        @dataclass
        class BranchCond:
            head: Instr
            instr: Instr
            swapped: bool

        if isinstance(cond, ast.Not):
            inner = self.compile_branch_condition(cond.operand)
            return BranchCond(inner.head, inner.instr, not inner.swapped)
        if isinstance(cond, ast.Binary) and cond.op in ("==", "!=", "<", "<=", ">", ">="):
            left = self.compile_expr(cond.left)
            right = self.compile_expr(cond.right)
            _link(left.tails, right.head)
            opcode = {
                "==": NENO.EQUALS, "!=": NENO.EQUALS,
                "<": NENO.LESS_THAN, "<=": NENO.LESS_THAN_EQUAL,
                ">": NENO.GREATER_THAN, ">=": NENO.GREATER_THAN_EQUAL,
            }[cond.op]
            node = self.instr(opcode, refs={NENO.HAS_LEFT: self.v_pop(),
                                            NENO.HAS_RIGHT: self.v_pop()})
            _link(right.tails, node)
            return BranchCond(left.head, node, cond.op == "!=")
        # boolean-valued expression: compare against true
        value = self.compile_expr(cond)
        node = self.instr(NENO.EQUALS,
                          refs={NENO.HAS_LEFT: self.v_pop(),
                                NENO.HAS_RIGHT: self.v_direct(_bool(True))})
        _link(value.tails, node)
        return BranchCond(value.head, node, False)

    # -- expressions --------------------------------------------------------------

    def compile_args(self, args: list[ast.Expr]) -> Chain | None:
        chain: Chain | None = None
        for arg in args:
            c = self.compile_expr(arg)
            if chain is None:
                chain = c
            else:
                _link(chain.tails, c.head)
                chain = Chain(chain.head, c.tails)
        return chain

    def compile_expr(self, expr: ast.Expr, void: bool = False) -> Chain:
        """Pushes the expression's value onto the operand stack (except void
        method calls, which leave the stack unchanged)."""
        if isinstance(expr, ast.Literal):
            dt = expr.resolved_datatype
            node = self.instr(NENO.PUSH_VALUE,
                              refs={NENO.HAS_VALUE: self.v_direct(_lit(expr.lexical, dt))})
            return Chain(node, [(node, "next")])
        if isinstance(expr, ast.Name):
            node = self.instr(NENO.PUSH_VALUE, refs={NENO.HAS_VALUE: self.v_var(expr.ident)})
            return Chain(node, [(node, "next")])
        if isinstance(expr, ast.This):
            node = self.instr(NENO.PUSH_VALUE, refs={NENO.HAS_VALUE: self.v_this()})
            return Chain(node, [(node, "next")])
        if isinstance(expr, ast.UriRef):
            node = self.instr(NENO.PUSH_VALUE,
                              refs={NENO.HAS_VALUE: self.v_direct(Term.uri(expr.uri))})
            return Chain(node, [(node, "next")])
        if isinstance(expr, (ast.FieldAccess, ast.InverseFieldAccess)):
            value, head = self.path_vnode(expr)
            node = self.instr(NENO.PUSH_VALUE, refs={NENO.HAS_VALUE: value})
            if head is not None:
                _link(head.tails, node)
                return Chain(head.head, [(node, "next")])
            return Chain(node, [(node, "next")])
        if isinstance(expr, ast.IndexedField):
            fsig = expr.resolved_field
            base, base_chain = self.base_vnode(expr.base)
            index, index_chain = self.index_vnode(expr.index)
            value = self.v_field(base, fsig, inverse=False, index=index)
            node = self.instr(NENO.PUSH_VALUE, refs={NENO.HAS_VALUE: value})
            return self._join3(base_chain, index_chain, node)
        if isinstance(expr, ast.FieldCount):
            fsig = expr.resolved_field
            base, base_chain = self.base_vnode(expr.base)
            value = self.v_field(base, fsig, inverse=False, count=True)
            node = self.instr(NENO.PUSH_VALUE, refs={NENO.HAS_VALUE: value})
            return self._join3(base_chain, None, node)
        if isinstance(expr, ast.MethodCall):
            return self.compile_call(expr, void=void)
        if isinstance(expr, ast.New):
            args = self.compile_args(expr.args)
            node = self.instr(NENO.CONSTRUCT,
                              consts={NENO.HAS_CLASS: expr.resolved_class,
                                      NENO.HAS_ARITY: _int_lit(len(expr.args))})
            if args is not None:
                _link(args.tails, node)
                return Chain(args.head, [(node, "next")])
            return Chain(node, [(node, "next")])
        if isinstance(expr, ast.Binary):
            return self.compile_binary(expr)
        if isinstance(expr, ast.Not):
            operand = self.compile_expr(expr.operand)
            node = self.instr(NENO.NOT, refs={NENO.HAS_LEFT: self.v_pop()})
            _link(operand.tails, node)
            return Chain(operand.head, [(node, "next")])
        if isinstance(expr, ast.FieldQuery):
            return self.compile_field_query(expr)
        if isinstance(expr, ast.TypeOfExpr):
            operand = self.compile_expr(expr.operand)
            node = self.instr(NENO.TYPE_OF,
                              consts={NENO.HAS_CLASS: expr.resolved_class},
                              refs={NENO.HAS_VALUE: self.v_pop()})
            _link(operand.tails, node)
            return Chain(operand.head, [(node, "next")])
        if isinstance(expr, ast.TypeOfQueryExpr):
            operand = self.compile_expr(expr.operand)
            node = self.instr(NENO.TYPE_OF_QUERY, refs={NENO.HAS_VALUE: self.v_pop()})
            _link(operand.tails, node)
            return Chain(operand.head, [(node, "next")])
        raise CompileError(f"cannot compile expression {expr!r}")  # pragma: no cover

    def index_vnode(self, expr: ast.Expr) -> tuple[VNode, Chain | None]:
        if isinstance(expr, ast.Name):
            return self.v_var(expr.ident), None
        if isinstance(expr, ast.Literal):
            return self.v_direct(_lit(expr.lexical, expr.resolved_datatype)), None
        chain = self.compile_expr(expr)
        return self.v_pop(), chain

    def _join3(self, a: Chain | None, b: Chain | None, node: Instr) -> Chain:
        chains = [c for c in (a, b) if c is not None]
        if not chains:
            return Chain(node, [(node, "next")])
        head = chains[0]
        prev = head
        for c in chains[1:]:
            _link(prev.tails, c.head)
            prev = c
        _link(prev.tails, node)
        return Chain(head.head, [(node, "next")])

    def compile_call(self, expr: ast.MethodCall, void: bool = False) -> Chain:
        receiver = self.compile_expr(expr.base)
        args = self.compile_args(expr.args)
        sig: MethodSig = expr.resolved_sig
        node = self.instr(
            NENO.INVOKE_METHOD,
            consts={
                NENO.HAS_METHOD_NAME: Term.literal(expr.name),
                NENO.HAS_ARITY: _int_lit(len(expr.args)),
                NENO.PUSHES_RESULT: _bool(sig.return_type is not None),
            },
            refs={NENO.HAS_OBJECT: self.v_pop()},
        )
        if args is not None:
            _link(receiver.tails, args.head)
            _link(args.tails, node)
        else:
            _link(receiver.tails, node)
        return Chain(receiver.head, [(node, "next")])

    def compile_binary(self, expr: ast.Binary) -> Chain:
        if expr.op in ("+", "-", "*", "/"):
            left = self.compile_expr(expr.left)
            right = self.compile_expr(expr.right)
            _link(left.tails, right.head)
            opcode = {"+": NENO.ADD, "-": NENO.SUBTRACT,
                      "*": NENO.MULTIPLY, "/": NENO.DIVIDE}[expr.op]
            node = self.instr(opcode, refs={NENO.HAS_LEFT: self.v_pop(),
                                            NENO.HAS_RIGHT: self.v_pop()})
            _link(right.tails, node)
            return Chain(left.head, [(node, "next")])
        # comparison in value position: branch to a boolean push
        cond = self.compile_branch_condition(expr)
        push_true = self.instr(NENO.PUSH_VALUE,
                               refs={NENO.HAS_VALUE: self.v_direct(_bool(True))})
        push_false = self.instr(NENO.PUSH_VALUE,
                                refs={NENO.HAS_VALUE: self.v_direct(_bool(False))})
        true_slot = "false_next" if cond.swapped else "true_next"
        false_slot = "true_next" if cond.swapped else "false_next"
        setattr(cond.instr, true_slot, push_true)
        setattr(cond.instr, false_slot, push_false)
        return Chain(cond.head, [(push_true, "next"), (push_false, "next")])

    def compile_field_query(self, expr: ast.FieldQuery) -> Chain:
        left_fields = [f.uri for f in _chain_fields(expr.left)]
        left_base, left_chain = self.base_vnode(_chain_base(expr.left))
        slots = [left_base]
        chains = [left_chain] if left_chain is not None else []
        if isinstance(expr.right, ast.FieldAccess):
            right_fields = [f.uri for f in _chain_fields(expr.right)]
            right_base, right_chain = self.base_vnode(_chain_base(expr.right))
            slots.append(right_base)
            if right_chain is not None:
                chains.append(right_chain)
        else:
            right_fields = []
            right_value, right_chain = self.base_vnode(expr.right)
            slots.append(right_value)
            if right_chain is not None:
                chains.append(right_chain)
        template = field_query_template(left_fields, right_fields)
        node = self.instr(NENO.SET_QUERY,
                          consts={NENO.HAS_TEMPLATE: Term.literal(template.joined())},
                          slots=slots)
        if not chains:
            return Chain(node, [(node, "next")])
        head = chains[0]
        prev = head
        for c in chains[1:]:
            _link(prev.tails, c.head)
            prev = c
        _link(prev.tails, node)
        return Chain(head.head, [(node, "next")])


# ---------------------------------------------------------------------------
# Unit compilation: classes, properties, methods, and graph emission
# ---------------------------------------------------------------------------

class UnitCompiler:
    def __init__(self, table: SymbolTable, uuid_source: UuidSource | None = None,
                 source_name: str = "inline"):
        self.table = table
        self.uuid = uuid_source or UuidSource()
        self.source_name = source_name
        self.graph = Graph()

    # -- emission helpers ------------------------------------------------------

    def _add(self, s: Term, p: Term, o: Term) -> None:
        self.graph.add(Triple(s, p, o))

    def new_class(self, superclass: Term) -> Term:
        uri = self.uuid.mint()
        self._add(uri, RDF.TYPE, OWL.CLASS)
        self._add(uri, RDFS.SUBCLASSOF, superclass)
        return uri

    def restrict_const(self, cls: Term, prop: Term, value: Term) -> None:
        node = self.uuid.mint()
        self._add(node, RDF.TYPE, OWL.RESTRICTION)
        self._add(node, OWL.ON_PROPERTY, prop)
        self._add(node, OWL.HAS_VALUE, value)
        self._add(cls, RDFS.SUBCLASSOF, node)

    def restrict_ref(self, cls: Term, prop: Term, target: Term) -> None:
        node = self.uuid.mint()
        self._add(node, RDF.TYPE, OWL.RESTRICTION)
        self._add(node, OWL.ON_PROPERTY, prop)
        self._add(node, OWL.ALL_VALUES_FROM, target)
        self._add(cls, RDFS.SUBCLASSOF, node)

    # -- compile a whole unit ----------------------------------------------------

    def compile_unit(self, unit: ast.SourceUnit) -> Graph:
        for cls_decl in unit.classes:
            sig = self._sig_for(cls_decl)
            self.compile_class(sig)
        return self.graph

    def _sig_for(self, cls_decl: ast.ClassDecl) -> ClassSig:
        for sig in self.table.classes.values():
            if sig.decl is cls_decl:
                return sig
        raise CompileError(f"class {cls_decl.name!r} missing from the symbol table")

    def compile_class(self, sig: ClassSig) -> None:
        self._add(sig.uri, RDF.TYPE, OWL.CLASS)
        self._add(sig.uri, RDFS.SUBCLASSOF, sig.parent)
        for fsig in sig.fields.values():
            kind = OWL.DATATYPE_PROPERTY if fsig.range.is_datatype else OWL.OBJECT_PROPERTY
            self._add(fsig.uri, RDF.TYPE, kind)
            self._add(fsig.uri, RDFS.DOMAIN, sig.uri)
            self._add(fsig.uri, RDFS.RANGE, fsig.range.uri)
            node = self.uuid.mint()
            self._add(node, RDF.TYPE, OWL.RESTRICTION)
            self._add(node, OWL.ON_PROPERTY, fsig.uri)
            self._add(node, OWL.MIN_CARDINALITY, _int_lit(fsig.card.min))
            if fsig.card.max is not None:
                self._add(node, OWL.MAX_CARDINALITY, _int_lit(fsig.card.max))
            self._add(sig.uri, RDFS.SUBCLASSOF, node)
        for msig in sig.methods:
            mcls = self.compile_method(sig, msig)
            self._add(sig.uri, NENO.HAS_METHOD_CLASS, mcls)

    def compile_method(self, sig: ClassSig, msig: MethodSig) -> Term:
        if msig.decl is None:
            raise CompileError(f"method {msig.name!r} has no body to compile")
        mc = MethodCompiler(self, sig, msig)
        root = mc.compile()
        mcls = self.new_class(NENO.METHOD)
        self.restrict_const(mcls, NENO.HAS_METHOD_NAME, Term.literal(msig.name))
        self.restrict_const(mcls, NENO.HAS_ARITY, _int_lit(msig.arity))
        if msig.return_type is not None:
            self.restrict_const(mcls, NENO.HAS_RETURN_DESCRIPTOR, msig.return_type.uri)
        self._add(mcls, NENO.HAS_HUMAN_CODE, Term.uri(f"file:{self.source_name}"))
        if msig.params:
            ad = self.new_class(NENO.ARGUMENT_DESCRIPTOR)
            for i, (pname, ptype) in enumerate(msig.params, start=1):
                arg = self.new_class(NENO.ARGUMENT)
                self.restrict_const(arg, NENO.HAS_ARGUMENT_NAME, Term.literal(pname))
                self.restrict_const(arg, NENO.HAS_ARGUMENT_TYPE, ptype.uri)
                self.restrict_ref(ad, RDF.member(i), arg)
            self.restrict_ref(mcls, NENO.HAS_ARGUMENT_DESCRIPTOR, ad)
        root_cls = self.emit_instructions(mc.instrs)
        self.restrict_ref(mcls, NENO.FIRST_INST, root_cls[id(root)])
        return mcls

    def emit_instructions(self, instrs: list[Instr]) -> dict[int, Term]:
        """Emit every instruction and reachable value node as a UUID class."""
        cls_of: dict[int, Term] = {}
        vnode_cls: dict[int, Term] = {}

        def emit_vnode(v: VNode) -> Term:
            if id(v) in vnode_cls:
                return vnode_cls[id(v)]
            uri = self.new_class(v.kind)
            vnode_cls[id(v)] = uri
            for prop, value in v.consts.items():
                self.restrict_const(uri, prop, value)
            for prop, ref in v.refs.items():
                self.restrict_ref(uri, prop, emit_vnode(ref))
            return uri

        for instr in instrs:
            cls_of[id(instr)] = self.new_class(instr.opcode)
        for instr in instrs:
            uri = cls_of[id(instr)]
            for prop, value in instr.consts.items():
                self.restrict_const(uri, prop, value)
            for prop, ref in instr.refs.items():
                self.restrict_ref(uri, prop, emit_vnode(ref))
            if instr.slots:
                seq = self.new_class(NENO.SLOT_DESCRIPTOR)
                for i, v in enumerate(instr.slots, start=1):
                    self.restrict_ref(seq, RDF.member(i), emit_vnode(v))
                self.restrict_ref(uri, NENO.HAS_SLOTS, seq)
            if instr.next is not None:
                self.restrict_ref(uri, NENO.NEXT_INST, cls_of[id(instr.next)])
            if instr.true_next is not None:
                self.restrict_ref(uri, NENO.TRUE_INST, cls_of[id(instr.true_next)])
            if instr.false_next is not None:
                self.restrict_ref(uri, NENO.FALSE_INST, cls_of[id(instr.false_next)])
            if instr.in_block is not None and instr.in_block is not instr:
                self.restrict_ref(uri, NENO.IN_BLOCK, cls_of[id(instr.in_block)])
        return cls_of


def compile_unit(unit: ast.SourceUnit, table: SymbolTable,
                 uuid_source: UuidSource | None = None,
                 source_name: str = "inline") -> Graph:
    compiler = UnitCompiler(table, uuid_source, source_name)
    return compiler.compile_unit(unit)


# ---------------------------------------------------------------------------
# Static stack-depth verification over an emitted API graph
# ---------------------------------------------------------------------------

def _count_pops_vnode(index: ApiIndex, cls: Term) -> int:
    spec = index.instr_spec(cls)
    if spec.opcode == NENO.POP_DIRECT:
        return 1
    total = 0
    for prop, ref in spec.refs.items():
        if prop in (NENO.HAS_BASE, NENO.HAS_INDEX):
            total += _count_pops_vnode(index, ref)
    return total


def _stack_effect(index: ApiIndex, spec) -> tuple[int, int]:
    """(pops, pushes) for one instruction class."""
    pops = 0
    for prop in (NENO.HAS_VALUE, NENO.HAS_LEFT, NENO.HAS_RIGHT,
                 NENO.HAS_OBJECT, NENO.HAS_TARGET):
        ref = spec.refs.get(prop)
        if ref is not None:
            pops += _count_pops_vnode(index, ref)
    for slot in spec.slots:
        pops += _count_pops_vnode(index, slot)
    op = spec.opcode
    if op == NENO.PUSH_VALUE:
        return pops, 1
    if op in (NENO.ADD, NENO.SUBTRACT, NENO.MULTIPLY, NENO.DIVIDE, NENO.NOT):
        return pops, 1
    if op in (NENO.EQUALS, NENO.GREATER_THAN, NENO.GREATER_THAN_EQUAL,
              NENO.LESS_THAN, NENO.LESS_THAN_EQUAL):
        return pops, 0
    if op in (NENO.SET, NENO.SET_PLUS, NENO.SET_MINUS, NENO.SET_CLEAR, NENO.NET_QUERY):
        return pops, 0
    if op == NENO.SET_QUERY:
        return pops, 1
    if op == NENO.TYPE_OF or op == NENO.TYPE_OF_QUERY:
        return pops, 1
    if op == NENO.INVOKE_METHOD:
        arity = int(spec.const_text(NENO.HAS_ARITY) or "0")
        pushes = 1 if spec.flag(NENO.PUSHES_RESULT) else 0
        return pops + arity, pushes
    if op == NENO.CONSTRUCT:
        arity = int(spec.const_text(NENO.HAS_ARITY) or "0")
        return pops + arity, 1
    if op == NENO.DESTRUCT:
        return pops, 0
    if op == NENO.RETURN:
        return pops, 0
    if op == NENO.BLOCK:
        return 0, 0
    raise CompileError(f"no stack effect for opcode {op!r}")


def check_stack_balance(index: ApiIndex, first_inst: Term) -> None:
    """Prove the operand stack returns to entry depth on every path and never
    goes negative; raises CompileError otherwise."""
    depths: dict[Term, int] = {first_inst: 0}
    work = [first_inst]
    while work:
        cls = work.pop()
        depth = depths[cls]
        spec = index.instr_spec(cls)
        pops, pushes = _stack_effect(index, spec)
        after = depth - pops + pushes
        if depth - pops < 0:
            raise CompileError(f"operand stack underflow at {cls.text}")
        successors = []
        if spec.opcode == NENO.RETURN:
            if after != 0:
                raise CompileError(f"unbalanced stack at return: depth {after}")
            continue
        for prop in (NENO.NEXT_INST, NENO.TRUE_INST, NENO.FALSE_INST):
            ref = spec.refs.get(prop)
            if ref is not None:
                successors.append(ref)
        if not successors:
            if after != 0:
                raise CompileError(f"unbalanced stack at method end: depth {after}")
            continue
        for nxt in successors:
            if nxt in depths:
                if depths[nxt] != after:
                    raise CompileError(
                        f"inconsistent stack depth joining {nxt.text}: "
                        f"{depths[nxt]} vs {after}"
                    )
            else:
                depths[nxt] = after
                work.append(nxt)


def reachable_instructions(index: ApiIndex, first_inst: Term) -> set[Term]:
    seen = {first_inst}
    work = [first_inst]
    while work:
        cls = work.pop()
        spec = index.instr_spec(cls)
        for prop in (NENO.NEXT_INST, NENO.TRUE_INST, NENO.FALSE_INST):
            ref = spec.refs.get(prop)
            if ref is not None and ref not in seen:
                seen.add(ref)
                work.append(ref)
    return seen
