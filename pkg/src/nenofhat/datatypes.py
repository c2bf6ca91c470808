"""Literal value operations shared by the compiler and both interpreters:
canonical lexical forms, the per-datatype operation table, and evaluation."""

from __future__ import annotations

from datetime import date, datetime, timedelta

from .api import NENO, XSD
from .namespaces import XSD_NS
from .rdf import Term

_INT_FAMILY = {
    XSD.INTEGER.text, XSD.INT.text, XSD_NS + "long", XSD_NS + "short", XSD_NS + "byte",
}
_FLOAT_FAMILY = {XSD.FLOAT.text, XSD.DOUBLE.text}


class EvalError(ValueError):
    """An operation outside the supported datatype table, or a bad operand."""


def family(datatype: str) -> str:
    if datatype in _INT_FAMILY:
        return "int"
    if datatype in _FLOAT_FAMILY:
        return "float"
    if datatype == XSD.STRING.text:
        return "string"
    if datatype == XSD.BOOLEAN.text:
        return "boolean"
    if datatype == XSD.DATE.text:
        return "date"
    if datatype == XSD.DATETIME.text:
        return "dateTime"
    if datatype == XSD.ANYURI.text:
        return "anyURI"
    return "other"


def canonical_lexical(lexical: str, datatype: str) -> str:
    """Numeric lexical forms are normalized (no leading zeros, canonical sign)
    so lexical equality matches value equality for machine-produced numbers."""
    fam = family(datatype)
    try:
        if fam == "int":
            return str(int(lexical))
        if fam == "float":
            return repr(float(lexical))
        if fam == "boolean":
            if lexical in ("true", "1"):
                return "true"
            if lexical in ("false", "0"):
                return "false"
            raise EvalError(f"malformed boolean literal {lexical!r}")
    except ValueError:
        raise EvalError(f"malformed {datatype.rsplit('#', 1)[-1]} literal {lexical!r}") from None
    return lexical


def make_literal(lexical: str, datatype: Term) -> Term:
    return Term.literal(canonical_lexical(lexical, datatype.text), datatype.text)


def _as_number(term: Term):
    fam = family(term.datatype or "")
    if fam == "int":
        return int(term.text)
    if fam == "float":
        return float(term.text)
    raise EvalError(f"not a number: {term!r}")


def _as_date(term: Term):
    try:
        if term.datatype == XSD.DATE.text:
            return date.fromisoformat(term.text)
        return datetime.fromisoformat(term.text)
    except ValueError as exc:
        raise EvalError(f"malformed temporal literal {term.text!r}") from exc


def _number_term(value, datatype: str) -> Term:
    if family(datatype) == "int":
        return Term.literal(str(int(value)), datatype)
    return Term.literal(repr(float(value)), datatype)


def apply_arithmetic(opcode: Term, left: Term, right: Term | None) -> Term:
    """The Arithmetic opcodes: Add, Subtract, Multiply, Divide, Not."""
    if opcode == NENO.NOT:
        if left.is_literal and left.datatype == XSD.BOOLEAN.text:
            return Term.literal("false" if left.text == "true" else "true", XSD.BOOLEAN.text)
        raise EvalError("Not needs a boolean operand")
    if right is None:
        raise EvalError("missing right operand")
    if not (left.is_literal and right.is_literal):
        raise EvalError("arithmetic needs literal operands")
    lf, rf = family(left.datatype or ""), family(right.datatype or "")
    if lf in ("int", "float") and left.datatype == right.datatype:
        a, b = _as_number(left), _as_number(right)
        if opcode == NENO.ADD:
            return _number_term(a + b, left.datatype)
        if opcode == NENO.SUBTRACT:
            return _number_term(a - b, left.datatype)
        if opcode == NENO.MULTIPLY:
            return _number_term(a * b, left.datatype)
        if opcode == NENO.DIVIDE:
            if b == 0:
                raise EvalError("division by zero")
            if lf == "int":
                q = abs(a) // abs(b)
                return _number_term(q if (a >= 0) == (b >= 0) else -q, left.datatype)
            return _number_term(a / b, left.datatype)
        raise EvalError(f"unsupported arithmetic opcode {opcode!r}")
    if lf == "string" and rf == "string" and opcode == NENO.ADD:
        return Term.literal(left.text + right.text, left.datatype)
    if lf in ("date", "dateTime") and rf == "int" and opcode in (NENO.ADD, NENO.SUBTRACT):
        # dates shift by whole days, dateTimes by seconds
        value = _as_date(left)
        amount = int(right.text)
        delta = timedelta(days=amount) if lf == "date" else timedelta(seconds=amount)
        shifted = value + delta if opcode == NENO.ADD else value - delta
        return Term.literal(shifted.isoformat(), left.datatype)
    raise EvalError(
        f"unsupported datatype pair for arithmetic: {left.datatype} / {right.datatype}"
    )


_ORDERED = ("int", "float", "string", "date", "dateTime", "anyURI")


def compare(opcode: Term, left: Term, right: Term) -> bool:
    """The Condition opcodes: Equals, GreaterThan(Equal), LessThan(Equal)."""
    if opcode == NENO.EQUALS:
        if left.is_uri and right.is_uri:
            return left.text == right.text
        if left.is_literal and right.is_literal and left.datatype == right.datatype:
            return left.text == right.text
        if left.kind != right.kind:
            return False
        raise EvalError(
            f"unsupported datatype pair for equality: {left.datatype} / {right.datatype}"
        )
    if left.is_uri and right.is_uri:
        a, b = left.text, right.text
    elif left.is_literal and right.is_literal and left.datatype == right.datatype:
        fam = family(left.datatype or "")
        if fam not in _ORDERED:
            raise EvalError(f"datatype {left.datatype} is not ordered")
        if fam in ("int", "float"):
            a, b = _as_number(left), _as_number(right)
        elif fam in ("date", "dateTime"):
            a, b = _as_date(left), _as_date(right)
        else:
            a, b = left.text, right.text
    else:
        raise EvalError("comparison needs operands of one datatype")
    if opcode == NENO.GREATER_THAN:
        return a > b
    if opcode == NENO.GREATER_THAN_EQUAL:
        return a >= b
    if opcode == NENO.LESS_THAN:
        return a < b
    if opcode == NENO.LESS_THAN_EQUAL:
        return a <= b
    raise EvalError(f"unsupported condition opcode {opcode!r}")


TRUE = Term.literal("true", XSD.BOOLEAN.text)
FALSE = Term.literal("false", XSD.BOOLEAN.text)


def boolean(value: bool) -> Term:
    return TRUE if value else FALSE
