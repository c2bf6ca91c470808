"""Abstract syntax tree for Neno source.

Positions are carried for diagnostics but excluded from structural equality,
so parse(pretty_print(ast)) == ast can be checked directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

Pos = tuple[int, int]


def _pos_field():
    return field(default=None, compare=False, repr=False)


@dataclass
class Cardinality:
    min: int
    max: Optional[int]  # None = unbounded

    def __str__(self) -> str:
        if self.max == self.min:
            return f"[{self.min}]"
        if self.max is None:
            return f"[{self.min}..*]"
        return f"[{self.min}..{self.max}]"


SINGULAR = Cardinality(0, 1)


# --- expressions -----------------------------------------------------------

@dataclass
class Literal:
    lexical: str
    datatype_name: Optional[str]  # as written; None when left for inference
    pos: Optional[Pos] = _pos_field()


@dataclass
class Name:
    ident: str
    pos: Optional[Pos] = _pos_field()


@dataclass
class This:
    pos: Optional[Pos] = _pos_field()


@dataclass
class UriRef:
    uri: str
    pos: Optional[Pos] = _pos_field()


@dataclass
class FieldAccess:
    base: "Expr"
    field_name: str
    pos: Optional[Pos] = _pos_field()


@dataclass
class InverseFieldAccess:
    base: "Expr"
    field_name: str
    pos: Optional[Pos] = _pos_field()


@dataclass
class IndexedField:
    base: "Expr"
    field_name: str
    index: "Expr"
    pos: Optional[Pos] = _pos_field()


@dataclass
class FieldCount:
    base: "Expr"
    field_name: str
    pos: Optional[Pos] = _pos_field()


@dataclass
class MethodCall:
    base: "Expr"
    name: str
    args: list["Expr"]
    pos: Optional[Pos] = _pos_field()


@dataclass
class InverseMethodCall:
    base: "Expr"
    field_name: str
    method_name: str
    args: list["Expr"]
    pos: Optional[Pos] = _pos_field()


@dataclass
class New:
    class_name: str
    args: list["Expr"]
    pos: Optional[Pos] = _pos_field()


@dataclass
class Binary:
    op: str  # + - * / == != < <= > >=
    left: "Expr"
    right: "Expr"
    pos: Optional[Pos] = _pos_field()


@dataclass
class Not:
    operand: "Expr"
    pos: Optional[Pos] = _pos_field()


@dataclass
class FieldQuery:
    """left =? right: does any value of the left path match the right side?"""
    left: "Expr"
    right: "Expr"
    pos: Optional[Pos] = _pos_field()


@dataclass
class TypeOfExpr:
    operand: "Expr"
    class_name: str
    pos: Optional[Pos] = _pos_field()


@dataclass
class TypeOfQueryExpr:
    operand: "Expr"
    pos: Optional[Pos] = _pos_field()


Expr = Union[
    Literal, Name, This, UriRef, FieldAccess, InverseFieldAccess, IndexedField,
    FieldCount, MethodCall, InverseMethodCall, New, Binary, Not, FieldQuery,
    TypeOfExpr, TypeOfQueryExpr,
]


# --- statements ------------------------------------------------------------

@dataclass
class Block:
    statements: list["Stmt"]
    pos: Optional[Pos] = _pos_field()


@dataclass
class VarDecl:
    type_name: str
    name: str
    card: Optional[Cardinality]
    init: Optional[Expr]
    net_query: bool = False  # initializer arrived through <?
    pos: Optional[Pos] = _pos_field()


@dataclass
class Assign:
    target: Expr
    op: str  # = =+ =-
    value: Expr
    pos: Optional[Pos] = _pos_field()


@dataclass
class SetClear:
    target: Expr
    pos: Optional[Pos] = _pos_field()


@dataclass
class NetQueryAssign:
    target_name: str
    query: Expr
    pos: Optional[Pos] = _pos_field()


@dataclass
class Increment:
    target_name: str
    pos: Optional[Pos] = _pos_field()


@dataclass
class If:
    cond: Expr
    then: Block
    orelse: Optional[Block]
    pos: Optional[Pos] = _pos_field()


@dataclass
class While:
    cond: Expr
    body: Block
    pos: Optional[Pos] = _pos_field()


@dataclass
class For:
    init: "Stmt"
    cond: Expr
    step: "Stmt"
    body: Block
    pos: Optional[Pos] = _pos_field()


@dataclass
class ForEach:
    type_name: str
    var_name: str
    path: Expr
    body: Block
    pos: Optional[Pos] = _pos_field()


@dataclass
class Return:
    value: Optional[Expr]
    pos: Optional[Pos] = _pos_field()


@dataclass
class Delete:
    value: Expr
    pos: Optional[Pos] = _pos_field()


@dataclass
class ExprStmt:
    expr: Expr
    pos: Optional[Pos] = _pos_field()


Stmt = Union[
    VarDecl, Assign, SetClear, NetQueryAssign, Increment, If, While, For,
    ForEach, Return, Delete, ExprStmt,
]


# --- declarations ----------------------------------------------------------

@dataclass
class Param:
    type_name: str
    name: str


@dataclass
class FieldDecl:
    range_name: str
    name: str
    card: Cardinality
    pos: Optional[Pos] = _pos_field()


@dataclass
class MethodDecl:
    kind: str  # "ordinary" | "constructor" | "destructor"
    return_name: Optional[str]
    name: str
    params: list[Param]
    body: Block
    pos: Optional[Pos] = _pos_field()


@dataclass
class ClassDecl:
    superclass: str
    name: str
    fields: list[FieldDecl]
    methods: list[MethodDecl]
    pos: Optional[Pos] = _pos_field()

    def destructors(self) -> list[MethodDecl]:
        return [m for m in self.methods if m.kind == "destructor"]


@dataclass
class SourceUnit:
    prefixes: dict[str, str]
    classes: list[ClassDecl]
