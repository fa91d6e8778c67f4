"""Recursive-descent parser with precedence climbing for expressions.

Binding strength, loosest first::

    && ||          left
    == !=          left
    < > <= >=      left
    + -            left
    * /            left
    - ! sqrt ∇²    prefix
    ^              right; its right operand may carry a prefix sign (t^-2)
    -> [ ]         postfix
"""

from __future__ import annotations

from ..diagnostics import CompileError, Span
from . import nodes as N
from .lexer import Token, TokenKind, tokenize

K, OP, P = TokenKind.KEYWORD, TokenKind.OP, TokenKind.PUNCT

BINARY_LEVELS: list[tuple[str, ...]] = [
    ("&&", "||"),
    ("==", "!="),
    ("<", ">", "<=", ">="),
    ("+", "-"),
    ("*", "/"),
]
PREFIX_OPS = ("-", "!", "sqrt", "laplacian")
INTEGRATORS = ("euler", "rk4")
SCALAR_TYPES = ("int", "real", "bool", "string")
DECL_TYPES = SCALAR_TYPES + ("vector", "matrix", "field", "property", "particle", "displacement", "boundary")


def binding_power(op: str) -> int:
    """Relative strength of a binary operator (higher binds tighter)."""
    if op == "^":
        return len(BINARY_LEVELS) + 2
    for i, level in enumerate(BINARY_LEVELS):
        if op in level:
            return i + 1
    raise KeyError(op)


class ParseError(CompileError):
    code = "E2001"

    def __init__(self, message, span, expected=(), code=None):
        super().__init__(message, span, code)
        self.expected = frozenset(expected)


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind is TokenKind.EOF else repr(tok.lexeme)


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, kind, value=None) -> bool:
        return self.tok.is_(kind, value)

    def at_any(self, kind, values) -> bool:
        return self.tok.kind is kind and self.tok.value in values

    def advance(self) -> Token:
        t = self.tok
        if t.kind is not TokenKind.EOF:
            self.i += 1
        return t

    def accept(self, kind, value=None):
        if self.at(kind, value):
            return self.advance()
        return None

    def fail(self, *expected: str):
        tok = self.tok
        exp = ", ".join(sorted(expected))
        if tok.is_(K, "inline"):
            raise ParseError("inline foreign-code statements are not supported", tok.span, expected, "E2002")
        raise ParseError(f"expected {exp}; found {_describe(tok)}", tok.span, expected)

    def expect(self, kind, value=None) -> Token:
        if self.at(kind, value):
            return self.advance()
        self.fail(repr(value) if value is not None else kind.value)

    def ident(self) -> Token:
        return self.expect(TokenKind.IDENT)

    def adjacent(self) -> bool:
        """True if the current token starts exactly where the previous one ended."""
        prev = self.toks[self.i - 1]
        return self.tok.span.offset == prev.span.offset + len(prev.lexeme)

    # -- module
    def parse_module(self) -> N.SourceModule:
        self.skip_semis()
        start = self.expect(K, "module")
        name = self.ident().lexeme
        mod = N.SourceModule(name, span=start.span)
        self.skip_semis()
        if self.at(K, "dimensions"):
            self.parse_dimensions(mod)
        while not self.at(TokenKind.EOF):
            if self.at(K, "param"):
                mod.params.append(self.parse_param())
            elif self.at(K, "module"):
                raise ParseError("only one module per file", self.tok.span, (), "E2003")
            elif self.at(K, "dimensions"):
                raise ParseError("dimension declarations must precede all other items", self.tok.span, (), "E2004")
            else:
                mod.statements.append(self.parse_statement())
            self.skip_semis()
        return mod

    def skip_semis(self):
        while self.accept(P, ";"):
            pass

    def parse_dimensions(self, mod: N.SourceModule):
        self.advance()
        if self.accept(K, "from"):
            mod.dim_file = N.Literal("string", self.expect(TokenKind.STRING).lexeme).value
            self.skip_semis()
            return
        self.expect(P, "{")
        self.skip_semis()
        while not self.accept(P, "}"):
            mod.dimensions.append(self.parse_dimension_decl())
            self.skip_semis()

    def parse_dimension_decl(self) -> N.DimensionDecl:
        name = self.ident()
        definition = None
        description = None
        if self.accept(OP, "="):
            definition = self.parse_dim_expr()
        if self.at(TokenKind.STRING):
            description = N.Literal("string", self.advance().lexeme).value
        return N.DimensionDecl(name.lexeme, definition, description, span=name.span)

    def parse_dim_expr(self) -> N.DimExpr:
        start = self.tok.span
        factors: list[N.DimFactor] = []
        sign = 1
        while True:
            if self.at(TokenKind.INT) and self.tok.lexeme == "1":
                self.advance()  # dimensionless factor
            else:
                name = self.ident()
                exp = 1
                if self.accept(OP, "^"):
                    neg = self.accept(OP, "-") is not None
                    exp = int(self.expect(TokenKind.INT).lexeme) * (-1 if neg else 1)
                factors.append(N.DimFactor(name.lexeme, sign * exp, span=name.span))
            if self.accept(OP, "*"):
                sign = 1
            elif self.accept(OP, "/"):
                sign = -1
            else:
                return N.DimExpr(factors, span=start)

    def parse_param(self) -> N.ParamDecl:
        self.advance()
        ty = self.parse_type()
        dim = self.parse_opt_dim()
        name = self.ident()
        rng = default = None
        for _ in range(2):
            if rng is None and self.at(K, "in"):
                rng = self.parse_range()
            elif default is None and self.accept(OP, "="):
                default = self.parse_expr()
        return N.ParamDecl(ty, name.lexeme, dim, rng, default, span=name.span)

    # -- types, dims, ranges
    def parse_type(self) -> N.TypeExpr:
        tok = self.tok
        if not self.at_any(K, DECL_TYPES):
            self.fail("type")
        self.advance()
        name = tok.value
        if name in ("vector", "matrix"):
            self.expect(OP, "<")
            elem = self.parse_type()
            self.expect(OP, ">")
            return N.TypeExpr(name, elem, span=tok.span)
        if name in ("field", "property"):
            self.expect(OP, "<")
            elem = self.parse_type()
            self.expect(P, ",")
            arity = int(self.expect(TokenKind.INT).lexeme)
            self.expect(OP, ">")
            return N.TypeExpr(name, elem, arity, span=tok.span)
        return N.TypeExpr(name, span=tok.span)

    def parse_opt_dim(self):
        if self.accept(P, "{"):
            d = self.parse_dim_expr() if not self.at(P, "}") else N.DimExpr([], span=self.tok.span)
            self.expect(P, "}")
            return d
        return None

    def parse_range(self) -> N.Range:
        start = self.expect(K, "in")
        if self.accept(P, "["):
            lo_open = False
        elif self.accept(P, "("):
            lo_open = True
        else:
            self.fail("'['", "'('")
        lo = self.parse_bound()
        self.expect(P, ",")
        hi = self.parse_bound()
        if self.accept(P, "]"):
            hi_open = False
        elif self.accept(P, ")"):
            hi_open = True
        else:
            self.fail("']'", "')'")
        if not lo <= hi:
            raise ParseError(f"empty range: lower bound {lo} exceeds upper bound {hi}", start.span, (), "E2005")
        return N.Range(lo, hi, lo_open, hi_open, span=start.span)

    def parse_bound(self) -> float:
        neg = self.accept(OP, "-") is not None
        if self.at(TokenKind.IDENT, "inf"):
            self.advance()
            v = float("inf")
        elif self.at(TokenKind.INT) or self.at(TokenKind.REAL):
            v = float(self.advance().lexeme)
        else:
            self.fail("number", "'inf'")
        return -v if neg else v

    # -- statements
    def parse_block(self) -> list[N.Stmt]:
        self.expect(P, "{")
        body = []
        self.skip_semis()
        while not self.accept(P, "}"):
            if self.at(TokenKind.EOF):
                self.fail("'}'")
            body.append(self.parse_statement())
            self.skip_semis()
        return body

    def parse_pragmas(self) -> tuple:
        out = []
        while self.at(TokenKind.PRAGMA):
            out.append(self.advance().lexeme[1:])
        return tuple(out)

    def parse_statement(self) -> N.Stmt:
        pragmas = self.parse_pragmas()
        stmt = self._statement()
        stmt.pragmas = pragmas
        return stmt

    def _statement(self) -> N.Stmt:
        t = self.tok
        if t.kind is K:
            v = t.value
            if v == "topology":
                return self.parse_create_topology()
            if v == "particle_list":
                return self.parse_create_particles()
            if v == "neighlist":
                return self.parse_create_neighlist()
            if v in DECL_TYPES:
                return self.parse_var_decl()
            if v == "foreach":
                return self.parse_foreach()
            if v == "timeloop":
                return self.parse_timeloop()
            if v == "deqn":
                return self.parse_deqn()
            if v == "if":
                return self.parse_if()
            if v == "apply_bc":
                self.advance()
                self.expect(P, "(")
                name = self.ident()
                self.expect(P, ")")
                return N.ApplyBC(name.lexeme, span=t.span)
            if v == "update_neighlist":
                self.advance()
                self.expect(P, "(")
                name = self.ident()
                self.expect(P, ")")
                return N.UpdateNeighlist(name.lexeme, span=t.span)
            if v == "write":
                self.advance()
                self.expect(P, "(")
                name = self.ident()
                props = []
                while self.accept(P, ","):
                    props.append(self.ident().lexeme)
                self.expect(P, ")")
                return N.IoWrite(name.lexeme, props, span=t.span)
            if v == "inline":
                self.fail("statement")
        expr = self.parse_expr()
        if self.at(OP, "="):
            eq = self.advance()
            if not isinstance(expr, (N.Var, N.Access, N.Index)):
                raise ParseError("left side of assignment is not assignable", eq.span, (), "E2006")
            value = self.parse_expr()
            return N.Assign(expr, value, span=eq.span)
        return N.ExprStmt(expr, span=t.span)

    def parse_var_decl(self) -> N.VarDecl:
        ty = self.parse_type()
        dim = self.parse_opt_dim()
        name = self.ident()
        rng = init = on_list = None
        for _ in range(2):
            if rng is None and self.at(K, "in"):
                rng = self.parse_range()
            elif init is None and self.accept(OP, "="):
                init = self.parse_expr()
        if self.accept(K, "on"):
            on_list = self.ident().lexeme
        if ty.name in ("field", "property") and on_list is None:
            self.fail("'on'")
        return N.VarDecl(ty, name.lexeme, dim, rng, init, on_list, span=name.span)

    def _call_head(self, keyword: str):
        self.expect(OP, "=")
        self.expect(K, keyword)
        self.expect(P, "(")

    def parse_create_topology(self) -> N.CreateTopology:
        self.advance()
        name = self.ident()
        self._call_head("create_topology")
        ndim = self.parse_expr()
        self.expect(P, ",")
        lo = self.parse_expr()
        self.expect(P, ",")
        hi = self.parse_expr()
        self.expect(P, ",")
        bc = self.ident()
        if bc.lexeme not in ("periodic", "none"):
            raise ParseError(f"unknown boundary condition {bc.lexeme!r}", bc.span, ("'periodic'", "'none'"))
        self.expect(P, ")")
        return N.CreateTopology(name.lexeme, ndim, lo, hi, bc.lexeme, span=name.span)

    def parse_create_particles(self):
        self.advance()
        name = self.ident()
        self.expect(OP, "=")
        if self.accept(K, "load_particles"):
            self.expect(P, "(")
            topo = self.ident().lexeme
            self.expect(P, ",")
            path = N.Literal("string", self.expect(TokenKind.STRING).lexeme).value
            cols = []
            while self.accept(P, ","):
                c = self.ident()
                comp = None
                if self.accept(P, "["):
                    comp = int(self.expect(TokenKind.INT).lexeme)
                    self.expect(P, "]")
                cols.append(N.LoadColumn(c.lexeme, comp, span=c.span))
            self.expect(P, ")")
            return N.LoadParticles(name.lexeme, topo, path, cols, span=name.span)
        if not self.accept(K, "create_particles"):
            self.fail("'create_particles'", "'load_particles'")
        self.expect(P, "(")
        topo = self.ident().lexeme
        self.expect(P, ",")
        mode = self.ident()
        if mode.lexeme not in ("grid", "random"):
            raise ParseError(f"unknown distribution {mode.lexeme!r}", mode.span, ("'grid'", "'random'"))
        self.expect(P, ",")
        count = self.parse_expr()
        self.expect(P, ")")
        return N.CreateParticles(name.lexeme, topo, mode.lexeme, count, span=name.span)

    def parse_create_neighlist(self) -> N.CreateNeighlist:
        self.advance()
        name = self.ident()
        self._call_head("create_neighlist")
        plist = self.ident().lexeme
        self.expect(P, ",")
        cutoff = self.parse_expr()
        skin = None
        if self.accept(P, ","):
            skin = self.parse_expr()
        self.expect(P, ")")
        return N.CreateNeighlist(name.lexeme, plist, cutoff, skin, span=name.span)

    def parse_foreach(self) -> N.Foreach:
        start = self.advance()
        var = self.ident().lexeme
        self.expect(K, "in")
        if self.accept(K, "neighbors"):
            self.expect(P, "(")
            of = self.ident().lexeme
            self.expect(P, ",")
            nl = self.ident().lexeme
            self.expect(P, ")")
            return N.Foreach(var, nl, self.parse_block(), of, span=start.span)
        src = self.ident().lexeme
        return N.Foreach(var, src, self.parse_block(), span=start.span)

    def parse_timeloop(self) -> N.Timeloop:
        start = self.advance()
        var = self.ident().lexeme
        self.expect(K, "from")
        a = self.parse_expr()
        self.expect(K, "to")
        b = self.parse_expr()
        self.expect(K, "step")
        dt = self.parse_expr()
        return N.Timeloop(var, a, b, dt, self.parse_block(), span=start.span)

    def parse_deqn(self) -> N.Deqn:
        start = self.advance()
        self.expect(K, "on")
        target = self.ident().lexeme
        self.expect(K, "using")
        integ = self.ident()
        if integ.lexeme not in INTEGRATORS:
            raise ParseError(f"unknown integrator {integ.lexeme!r}", integ.span, ("'euler'", "'rk4'"), "E2007")
        self.expect(P, "{")
        eqs = []
        self.skip_semis()
        while not self.accept(P, "}"):
            eqs.append(self.parse_equation())
            self.skip_semis()
        return N.Deqn(target, integ.lexeme, eqs, span=start.span)

    def parse_equation(self) -> N.Equation:
        pragmas = self.parse_pragmas()
        if self.accept(K, "d_dt"):
            self.expect(P, "(")
            lhs = self.parse_expr()
            self.expect(P, ")")
        elif self.accept(OP, "∂"):
            lhs = self.parse_postfix()
            self.expect(OP, "/")
            self.expect(OP, "∂")
            self.ident()
        else:
            self.fail("'d_dt'", "'∂'")
        eq = self.expect(OP, "=")
        rhs = self.parse_expr()
        return N.Equation(lhs, rhs, pragmas, span=eq.span)

    def parse_if(self) -> N.If:
        start = self.advance()
        cond = self.parse_expr()
        then = self.parse_block()
        orelse: list[N.Stmt] = []
        if self.accept(K, "else"):
            if self.at(K, "if"):
                orelse = [self.parse_if()]
            else:
                orelse = self.parse_block()
        return N.If(cond, then, orelse, span=start.span)

    # -- expressions
    def parse_expr(self, level: int = 0) -> N.Expr:
        if level == len(BINARY_LEVELS):
            return self.parse_unary()
        left = self.parse_expr(level + 1)
        ops = BINARY_LEVELS[level]
        while self.at_any(OP, ops):
            op = self.advance()
            right = self.parse_expr(level + 1)
            left = N.Binary(op.value, left, right, span=op.span)
        return left

    def parse_unary(self) -> N.Expr:
        t = self.tok
        if (t.kind is OP and t.value in ("-", "!", "sqrt", "laplacian")) or (
            t.kind is K and t.value in ("sqrt", "laplacian")
        ):
            self.advance()
            operand = self.parse_unary()
            if t.value == "laplacian":
                return N.DiffOp("laplacian", operand, span=t.span)
            return N.Unary(t.value, operand, span=t.span)
        return self.parse_power()

    def parse_power(self) -> N.Expr:
        base = self.parse_postfix()
        if self.at(OP, "^"):
            op = self.advance()
            return N.Binary("^", base, self.parse_unary(), span=op.span)
        return base

    def parse_postfix(self) -> N.Expr:
        e = self.parse_primary()
        while True:
            if self.at(OP, "->"):
                arrow = self.advance()
                e = N.Access(e, self.ident().lexeme, span=arrow.span)
            elif self.at(P, "["):
                br = self.advance()
                idx = self.parse_expr()
                self.expect(P, "]")
                e = N.Index(e, idx, span=br.span)
            else:
                return e

    def parse_primary(self) -> N.Expr:
        t = self.tok
        if t.kind in (TokenKind.INT, TokenKind.REAL, TokenKind.STRING, TokenKind.BOOL):
            self.advance()
            kind = {TokenKind.INT: "int", TokenKind.REAL: "real", TokenKind.STRING: "string", TokenKind.BOOL: "bool"}[t.kind]
            return self.maybe_annotate(N.Literal(kind, t.lexeme, span=t.span))
        if t.kind is TokenKind.IDENT:
            self.advance()
            return N.Var(t.lexeme, span=t.span)
        if t.is_(P, "("):
            self.advance()
            inner = self.parse_expr()
            self.expect(P, ")")
            return self.maybe_annotate(N.Paren(inner, span=t.span))
        if t.is_(P, "["):
            self.advance()
            elems = []
            if not self.at(P, "]"):
                elems.append(self.parse_expr())
                while self.accept(P, ","):
                    elems.append(self.parse_expr())
            self.expect(P, "]")
            return self.maybe_annotate(N.VectorLit(elems, span=t.span))
        self.fail("expression")

    def maybe_annotate(self, e: N.Expr) -> N.Expr:
        # Only a brace glued to the literal is an annotation; `if x < 1 {` is a block.
        if self.at(P, "{") and self.adjacent():
            br = self.advance()
            dim = self.parse_dim_expr() if not self.at(P, "}") else N.DimExpr([], span=br.span)
            self.expect(P, "}")
            return N.Annotated(e, dim, span=br.span)
        return e


def parse_module(tokens) -> N.SourceModule:
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    return Parser(list(tokens)).parse_module()


def parse_expression(source: str) -> N.Expr:
    p = Parser(tokenize(source))
    e = p.parse_expr()
    if not p.at(TokenKind.EOF):
        p.fail("end of input")
    return e


def parse_dim_file(source: str) -> list[N.DimensionDecl]:
    """Parse a `.dim` file: one declaration per line."""
    p = Parser(tokenize(source))
    out = []
    p.skip_semis()
    while not p.at(TokenKind.EOF):
        out.append(p.parse_dimension_decl())
        p.skip_semis()
    return out
