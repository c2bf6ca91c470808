"""Recursive-descent parser producing the Neno AST."""

from __future__ import annotations

from . import ast_nodes as ast
from .lexer import NenoSyntaxError, Token, tokenize

_EXPR_START = {
    "IDENT", "QNAME", "INT", "STRING", "TYPED", "THIS", "URIREF", "LPAREN",
    "BANG", "NEW", "TRUE", "FALSE",
}

_COMPARISONS = {"LT": "<", "LE": "<=", "GT": ">", "GE": ">="}
_EQUALITIES = {"EQ": "==", "NEQ": "!="}
_ADDITIVE = {"PLUS": "+", "MINUS": "-"}
_MULTIPLICATIVE = {"STAR": "*", "SLASH": "/"}


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token helpers -----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at(self, *kinds: str) -> bool:
        return self.peek().kind in kinds

    def accept(self, kind: str) -> Token | None:
        if self.at(kind):
            return self.next()
        return None

    def expect(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            want = what or kind
            raise NenoSyntaxError(f"expected {want}, found {tok.text or tok.kind!r}", tok.line, tok.col)
        return self.next()

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise NenoSyntaxError(message, tok.line, tok.col)

    # -- entry points --------------------------------------------------------

    def parse_unit(self) -> ast.SourceUnit:
        prefixes: dict[str, str] = {}
        while self.at("PREFIX"):
            self.next()
            name = self.expect("IDENT", "prefix name")
            self.expect("COLON")
            uri = self.expect("URIANGLE", "namespace IRI in <...>")
            self.expect("SEMI")
            prefixes[name.text] = uri.text
        classes = []
        while not self.at("EOF"):
            classes.append(self.parse_class())
        return ast.SourceUnit(prefixes, classes)

    def parse_class(self) -> ast.ClassDecl:
        start = self.peek()
        superclass = self.type_name("superclass name")
        name = self.type_name("class name")
        if self.at("IDENT", "QNAME"):
            self.error("a class can only have a single parent")
        self.expect("LBRACE")
        fields: list[ast.FieldDecl] = []
        methods: list[ast.MethodDecl] = []
        while not self.at("RBRACE"):
            member = self.parse_member()
            if isinstance(member, ast.FieldDecl):
                fields.append(member)
            else:
                if member.kind == "destructor" and any(m.kind == "destructor" for m in methods):
                    self.error("a class can have at most one destructor", start)
                methods.append(member)
        self.expect("RBRACE")
        return ast.ClassDecl(superclass, name, fields, methods, pos=(start.line, start.col))

    def type_name(self, what: str = "type name") -> str:
        tok = self.peek()
        if tok.kind in ("IDENT", "QNAME"):
            self.next()
            return tok.text
        self.error(f"expected {what}, found {tok.text or tok.kind!r}")

    def parse_member(self):
        tok = self.peek()
        if tok.kind == "BANG":
            self.next()
            name = self.expect("IDENT", "constructor name").text
            params = self.parse_params()
            if self.at("IDENT", "QNAME"):
                self.error("constructor cannot declare a return type", tok)
            body = self.parse_block()
            return ast.MethodDecl("constructor", None, "!" + name, params, body,
                                  pos=(tok.line, tok.col))
        if tok.kind == "TILDE":
            self.next()
            name = self.expect("IDENT", "destructor name").text
            self.expect("LPAREN")
            if not self.at("RPAREN"):
                self.error("the destructor takes no arguments")
            self.expect("RPAREN")
            body = self.parse_block()
            return ast.MethodDecl("destructor", None, "~" + name, params=[], body=body,
                                  pos=(tok.line, tok.col))
        first = self.type_name("field or method declaration")
        if self.at("LPAREN"):
            if ":" in first:
                self.error("method name cannot be prefixed")
            params = self.parse_params()
            body = self.parse_block()
            return ast.MethodDecl("ordinary", None, first, params, body,
                                  pos=(tok.line, tok.col))
        name = self.expect("IDENT", "member name").text
        if self.at("LPAREN"):
            params = self.parse_params()
            body = self.parse_block()
            return ast.MethodDecl("ordinary", first, name, params, body,
                                  pos=(tok.line, tok.col))
        card = ast.SINGULAR
        if self.at("LBRACKET"):
            card = self.parse_cardinality()
        self.expect("SEMI")
        return ast.FieldDecl(first, name, card, pos=(tok.line, tok.col))

    def parse_params(self) -> list[ast.Param]:
        self.expect("LPAREN")
        params: list[ast.Param] = []
        while not self.at("RPAREN"):
            if params:
                self.expect("COMMA")
            ptype = self.type_name("parameter type")
            pname = self.expect("IDENT", "parameter name").text
            params.append(ast.Param(ptype, pname))
        self.expect("RPAREN")
        return params

    def parse_cardinality(self) -> ast.Cardinality:
        open_tok = self.expect("LBRACKET")
        lo_tok = self.peek()
        if lo_tok.kind != "INT":
            self.error("cardinality must start with an integer", open_tok)
        self.next()
        lo = int(lo_tok.text)
        if self.accept("RBRACKET"):
            return ast.Cardinality(lo, lo)
        self.expect("DOTDOT", "'..'")
        hi: int | None
        if self.accept("STAR"):
            hi = None
        else:
            hi_tok = self.expect("INT", "upper bound")
            hi = int(hi_tok.text)
        if not self.at("RBRACKET"):
            self.error("malformed cardinality")
        self.expect("RBRACKET")
        if hi is not None and lo > hi:
            self.error("cardinality lower bound exceeds upper bound", open_tok)
        return ast.Cardinality(lo, hi)

    # -- statements ----------------------------------------------------------

    def parse_block(self) -> ast.Block:
        start = self.expect("LBRACE")
        statements = []
        while not self.at("RBRACE"):
            statements.append(self.parse_statement())
        self.expect("RBRACE")
        return ast.Block(statements, pos=(start.line, start.col))

    def parse_statement(self) -> ast.Stmt:
        tok = self.peek()
        if tok.kind == "IF":
            return self.parse_if()
        if tok.kind == "WHILE":
            self.next()
            self.expect("LPAREN")
            cond = self.parse_expr()
            self.expect("RPAREN")
            body = self.parse_block()
            return ast.While(cond, body, pos=(tok.line, tok.col))
        if tok.kind == "FOR":
            return self.parse_for()
        if tok.kind == "RETURN":
            self.next()
            value = None
            if not self.at("SEMI"):
                value = self.parse_expr()
            self.expect("SEMI")
            return ast.Return(value, pos=(tok.line, tok.col))
        if tok.kind == "DELETE":
            self.next()
            value = self.parse_expr()
            self.expect("SEMI")
            return ast.Delete(value, pos=(tok.line, tok.col))
        stmt = self.parse_simple_statement()
        self.expect("SEMI")
        return stmt

    def parse_if(self) -> ast.If:
        tok = self.expect("IF")
        self.expect("LPAREN")
        cond = self.parse_expr()
        self.expect("RPAREN")
        then = self.parse_block()
        orelse = None
        if self.accept("ELSE"):
            orelse = self.parse_block()
        return ast.If(cond, then, orelse, pos=(tok.line, tok.col))

    def parse_for(self) -> ast.Stmt:
        tok = self.expect("FOR")
        self.expect("LPAREN")
        # for(Type name : path) {...} is a field loop
        if self.peek().kind in ("IDENT", "QNAME") and self.peek(1).kind == "IDENT" \
                and self.peek(2).kind == "COLON":
            type_name = self.type_name()
            var_name = self.next().text
            self.expect("COLON")
            path = self.parse_expr()
            self.expect("RPAREN")
            body = self.parse_block()
            return ast.ForEach(type_name, var_name, path, body, pos=(tok.line, tok.col))
        init = self.parse_simple_statement()
        self.expect("SEMI")
        cond = self.parse_expr()
        self.expect("SEMI")
        step = self.parse_simple_statement()
        self.expect("RPAREN")
        body = self.parse_block()
        return ast.For(init, cond, step, body, pos=(tok.line, tok.col))

    def parse_simple_statement(self) -> ast.Stmt:
        """A statement without its terminating ';': declaration, assignment,
        increment, or bare expression."""
        tok = self.peek()
        if tok.kind in ("IDENT", "QNAME") and self.peek(1).kind == "IDENT" \
                and self.peek(2).kind in ("LBRACKET", "ASSIGN", "SEMI", "NETQUERY"):
            return self.parse_var_decl()
        expr = self.parse_expr()
        op_tok = self.peek()
        if op_tok.kind in ("ASSIGN", "SETPLUS", "SETMINUS"):
            self.next()
            value = self.parse_expr()
            op = {"ASSIGN": "=", "SETPLUS": "=+", "SETMINUS": "=-"}[op_tok.kind]
            return ast.Assign(expr, op, value, pos=(op_tok.line, op_tok.col))
        if op_tok.kind == "SETCLEAR":
            self.next()
            return ast.SetClear(expr, pos=(op_tok.line, op_tok.col))
        if op_tok.kind == "NETQUERY":
            self.next()
            if not isinstance(expr, ast.Name):
                self.error("<? requires a variable on the left", op_tok)
            query = self.parse_expr()
            return ast.NetQueryAssign(expr.ident, query, pos=(op_tok.line, op_tok.col))
        if op_tok.kind == "PLUSPLUS":
            self.next()
            if not isinstance(expr, ast.Name):
                self.error("++ requires a variable", op_tok)
            return ast.Increment(expr.ident, pos=(op_tok.line, op_tok.col))
        return ast.ExprStmt(expr, pos=(tok.line, tok.col))

    def parse_var_decl(self) -> ast.VarDecl:
        tok = self.peek()
        type_name = self.type_name()
        name = self.expect("IDENT", "variable name").text
        card = None
        if self.at("LBRACKET"):
            card = self.parse_cardinality()
        init = None
        net_query = False
        if self.accept("ASSIGN"):
            init = self.parse_expr()
        elif self.accept("NETQUERY"):
            init = self.parse_expr()
            net_query = True
        return ast.VarDecl(type_name, name, card, init, net_query, pos=(tok.line, tok.col))

    # -- expressions -----------------------------------------------------------

    def parse_expr(self) -> ast.Expr:
        return self.parse_equality()

    def parse_equality(self) -> ast.Expr:
        left = self.parse_relational()
        while True:
            tok = self.peek()
            if tok.kind in _EQUALITIES:
                self.next()
                right = self.parse_relational()
                left = ast.Binary(_EQUALITIES[tok.kind], left, right, pos=(tok.line, tok.col))
            elif tok.kind == "SETQUERY":
                self.next()
                right = self.parse_relational()
                left = ast.FieldQuery(left, right, pos=(tok.line, tok.col))
            else:
                return left

    def parse_relational(self) -> ast.Expr:
        left = self.parse_additive()
        tok = self.peek()
        if tok.kind in _COMPARISONS:
            self.next()
            right = self.parse_additive()
            return ast.Binary(_COMPARISONS[tok.kind], left, right, pos=(tok.line, tok.col))
        return left

    def parse_additive(self) -> ast.Expr:
        left = self.parse_multiplicative()
        while self.peek().kind in _ADDITIVE:
            tok = self.next()
            right = self.parse_multiplicative()
            left = ast.Binary(_ADDITIVE[tok.kind], left, right, pos=(tok.line, tok.col))
        return left

    def parse_multiplicative(self) -> ast.Expr:
        left = self.parse_unary()
        while self.peek().kind in _MULTIPLICATIVE:
            if self.peek().kind == "STAR" and self.peek(1).kind not in _EXPR_START:
                break  # trailing * is a field count, handled in postfix
            tok = self.next()
            right = self.parse_unary()
            left = ast.Binary(_MULTIPLICATIVE[tok.kind], left, right, pos=(tok.line, tok.col))
        return left

    def parse_unary(self) -> ast.Expr:
        tok = self.peek()
        if tok.kind == "BANG":
            self.next()
            return ast.Not(self.parse_unary(), pos=(tok.line, tok.col))
        return self.parse_postfix()

    def parse_postfix(self) -> ast.Expr:
        expr = self.parse_primary()
        while True:
            tok = self.peek()
            if tok.kind == "DOT":
                self.next()
                name = self.expect("IDENT", "field or method name").text
                if self.at("LPAREN"):
                    args = self.parse_args()
                    expr = ast.MethodCall(expr, name, args, pos=(tok.line, tok.col))
                elif self.at("LBRACKET"):
                    self.next()
                    index = self.parse_expr()
                    self.expect("RBRACKET")
                    expr = ast.IndexedField(expr, name, index, pos=(tok.line, tok.col))
                elif self.at("STAR") and self.peek(1).kind not in _EXPR_START:
                    self.next()
                    expr = ast.FieldCount(expr, name, pos=(tok.line, tok.col))
                else:
                    expr = ast.FieldAccess(expr, name, pos=(tok.line, tok.col))
            elif tok.kind == "DOTDOT":
                self.next()
                field_name = self.expect("IDENT", "field name").text
                if self.at("DOT"):
                    self.next()
                    method = self.expect("IDENT", "method name").text
                    args = self.parse_args()
                    expr = ast.InverseMethodCall(expr, field_name, method, args,
                                                 pos=(tok.line, tok.col))
                else:
                    expr = ast.InverseFieldAccess(expr, field_name, pos=(tok.line, tok.col))
            elif tok.kind == "TYPEOF":
                self.next()
                class_name = self.type_name("class name")
                expr = ast.TypeOfExpr(expr, class_name, pos=(tok.line, tok.col))
            elif tok.kind == "TYPEOFQ":
                self.next()
                expr = ast.TypeOfQueryExpr(expr, pos=(tok.line, tok.col))
            else:
                return expr

    def parse_args(self) -> list[ast.Expr]:
        self.expect("LPAREN")
        args = []
        while not self.at("RPAREN"):
            if args:
                self.expect("COMMA")
            args.append(self.parse_expr())
        self.expect("RPAREN")
        return args

    def parse_primary(self) -> ast.Expr:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return ast.Literal(tok.text, None, pos=(tok.line, tok.col))
        if tok.kind == "STRING":
            self.next()
            return ast.Literal(tok.text, "xsd:string", pos=(tok.line, tok.col))
        if tok.kind == "TYPED":
            self.next()
            return ast.Literal(tok.text, tok.datatype, pos=(tok.line, tok.col))
        if tok.kind in ("TRUE", "FALSE"):
            self.next()
            return ast.Literal(tok.text, "xsd:boolean", pos=(tok.line, tok.col))
        if tok.kind == "THIS":
            self.next()
            return ast.This(pos=(tok.line, tok.col))
        if tok.kind == "URIREF":
            self.next()
            return ast.UriRef(tok.text, pos=(tok.line, tok.col))
        if tok.kind == "NEW":
            self.next()
            class_name = self.type_name("class name")
            args = self.parse_args()
            return ast.New(class_name, args, pos=(tok.line, tok.col))
        if tok.kind == "LPAREN":
            self.next()
            expr = self.parse_expr()
            self.expect("RPAREN")
            return expr
        if tok.kind in ("IDENT", "QNAME"):
            self.next()
            return ast.Name(tok.text, pos=(tok.line, tok.col))
        self.error(f"expected expression, found {tok.text or tok.kind!r}")


def parse(source: str) -> ast.SourceUnit:
    return Parser(tokenize(source)).parse_unit()


def parse_tokens(tokens: list[Token]) -> ast.SourceUnit:
    return Parser(tokens).parse_unit()
