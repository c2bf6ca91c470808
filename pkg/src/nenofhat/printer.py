"""Canonical pretty-printer; parse(pretty_print(unit)) is structurally the
identity, which the round-trip tests lean on."""

from __future__ import annotations

from . import ast_nodes as ast
from .rdf import escape_literal as _escape

_INDENT = "  "


def print_expr(e: ast.Expr) -> str:
    if isinstance(e, ast.Literal):
        if e.datatype_name is None:
            return e.lexical
        if "://" in e.datatype_name or e.datatype_name.startswith("urn:"):
            return f'"{_escape(e.lexical)}"^^<{e.datatype_name}>'
        return f'"{_escape(e.lexical)}"^^{e.datatype_name}'
    if isinstance(e, ast.Name):
        return e.ident
    if isinstance(e, ast.This):
        return "this"
    if isinstance(e, ast.UriRef):
        return e.uri
    if isinstance(e, ast.FieldAccess):
        return f"{print_expr(e.base)}.{e.field_name}"
    if isinstance(e, ast.InverseFieldAccess):
        return f"{print_expr(e.base)}..{e.field_name}"
    if isinstance(e, ast.IndexedField):
        return f"{print_expr(e.base)}.{e.field_name}[{print_expr(e.index)}]"
    if isinstance(e, ast.FieldCount):
        return f"{print_expr(e.base)}.{e.field_name}*"
    if isinstance(e, ast.MethodCall):
        args = ", ".join(print_expr(a) for a in e.args)
        return f"{print_expr(e.base)}.{e.name}({args})"
    if isinstance(e, ast.InverseMethodCall):
        args = ", ".join(print_expr(a) for a in e.args)
        return f"{print_expr(e.base)}..{e.field_name}.{e.method_name}({args})"
    if isinstance(e, ast.New):
        args = ", ".join(print_expr(a) for a in e.args)
        return f"new {e.class_name}({args})"
    if isinstance(e, ast.Binary):
        return f"({print_expr(e.left)} {e.op} {print_expr(e.right)})"
    if isinstance(e, ast.Not):
        return f"!{print_expr(e.operand)}"
    if isinstance(e, ast.FieldQuery):
        return f"({print_expr(e.left)} =? {print_expr(e.right)})"
    if isinstance(e, ast.TypeOfExpr):
        return f"({print_expr(e.operand)} typeof {e.class_name})"
    if isinstance(e, ast.TypeOfQueryExpr):
        return f"({print_expr(e.operand)} typeof?)"
    raise TypeError(f"unknown expression node: {e!r}")


def _print_simple(s: ast.Stmt) -> str:
    """A statement without trailing ';' (shared with for-headers)."""
    if isinstance(s, ast.VarDecl):
        card = str(s.card) if s.card is not None else ""
        head = f"{s.type_name} {s.name}{card}"
        if s.init is None:
            return head
        op = "<?" if s.net_query else "="
        return f"{head} {op} {print_expr(s.init)}"
    if isinstance(s, ast.Assign):
        return f"{print_expr(s.target)} {s.op} {print_expr(s.value)}"
    if isinstance(s, ast.SetClear):
        return f"{print_expr(s.target)} =/"
    if isinstance(s, ast.NetQueryAssign):
        return f"{s.target_name} <? {print_expr(s.query)}"
    if isinstance(s, ast.Increment):
        return f"{s.target_name}++"
    if isinstance(s, ast.ExprStmt):
        return print_expr(s.expr)
    if isinstance(s, ast.Return):
        return "return" if s.value is None else f"return {print_expr(s.value)}"
    if isinstance(s, ast.Delete):
        return f"delete {print_expr(s.value)}"
    raise TypeError(f"not a simple statement: {s!r}")


def print_stmt(s: ast.Stmt, depth: int) -> list[str]:
    pad = _INDENT * depth
    if isinstance(s, ast.If):
        lines = [f"{pad}if ({print_expr(s.cond)}) {{"]
        lines += print_block_body(s.then, depth + 1)
        lines.append(f"{pad}}}")
        if s.orelse is not None:
            lines.append(f"{pad}else {{")
            lines += print_block_body(s.orelse, depth + 1)
            lines.append(f"{pad}}}")
        return lines
    if isinstance(s, ast.While):
        lines = [f"{pad}while ({print_expr(s.cond)}) {{"]
        lines += print_block_body(s.body, depth + 1)
        lines.append(f"{pad}}}")
        return lines
    if isinstance(s, ast.For):
        header = f"{_print_simple(s.init)}; {print_expr(s.cond)}; {_print_simple(s.step)}"
        lines = [f"{pad}for ({header}) {{"]
        lines += print_block_body(s.body, depth + 1)
        lines.append(f"{pad}}}")
        return lines
    if isinstance(s, ast.ForEach):
        lines = [f"{pad}for ({s.type_name} {s.var_name} : {print_expr(s.path)}) {{"]
        lines += print_block_body(s.body, depth + 1)
        lines.append(f"{pad}}}")
        return lines
    return [f"{pad}{_print_simple(s)};"]


def print_block_body(block: ast.Block, depth: int) -> list[str]:
    lines: list[str] = []
    for s in block.statements:
        lines += print_stmt(s, depth)
    return lines


def pretty_print(unit: ast.SourceUnit) -> str:
    lines: list[str] = []
    for prefix, uri in unit.prefixes.items():
        lines.append(f"prefix {prefix}: <{uri}>;")
    if unit.prefixes:
        lines.append("")
    for cls in unit.classes:
        lines.append(f"{cls.superclass} {cls.name} {{")
        for f in cls.fields:
            lines.append(f"{_INDENT}{f.range_name} {f.name}{f.card};")
        for m in cls.methods:
            params = ", ".join(f"{p.type_name} {p.name}" for p in m.params)
            ret = f"{m.return_name} " if m.return_name else ""
            lines.append(f"{_INDENT}{ret}{m.name}({params}) {{")
            lines += print_block_body(m.body, 2)
            lines.append(f"{_INDENT}}}")
        lines.append("}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
