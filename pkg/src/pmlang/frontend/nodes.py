"""AST node classes.

Spans are excluded from equality so that two parses of differently
formatted sources compare equal when their structure matches.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Iterator, Optional

from ..diagnostics import NO_SPAN, Span


def _span():
    return field(default=NO_SPAN, compare=False, repr=False)


class Node:
    span: Span

    def children(self) -> Iterator["Node"]:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Node):
                yield v
            elif isinstance(v, (list, tuple)):
                for item in v:
                    if isinstance(item, Node):
                        yield item

    def walk(self) -> Iterator["Node"]:
        """Pre-order traversal."""
        yield self
        for c in self.children():
            yield from c.walk()


# ---------------------------------------------------------------- dimensions

@dataclass(eq=True)
class DimFactor(Node):
    name: str
    exponent: int = 1
    span: Span = _span()


@dataclass(eq=True)
class DimExpr(Node):
    """Product of powers of dimension identifiers; empty means the empty dimension."""

    factors: list[DimFactor] = field(default_factory=list)
    span: Span = _span()


@dataclass(eq=True)
class DimensionDecl(Node):
    name: str
    definition: Optional[DimExpr] = None
    description: Optional[str] = None
    span: Span = _span()


# -------------------------------------------------------------- expressions

class Expr(Node):
    pass


@dataclass(eq=True)
class Literal(Expr):
    kind: str  # int | real | string | bool
    text: str
    span: Span = _span()

    @property
    def value(self):
        if self.kind == "int":
            return int(self.text)
        if self.kind == "real":
            return float(self.text)
        if self.kind == "bool":
            return self.text == "true"
        return self.text[1:-1].encode("latin-1", "backslashreplace").decode("unicode_escape")


@dataclass(eq=True)
class Var(Expr):
    name: str
    span: Span = _span()


@dataclass(eq=True)
class Paren(Expr):
    expr: Expr
    span: Span = _span()


@dataclass(eq=True)
class Unary(Expr):
    op: str  # - | ! | sqrt
    operand: Expr
    span: Span = _span()


@dataclass(eq=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr
    span: Span = _span()


@dataclass(eq=True)
class Access(Expr):
    """`target->name`: particle access or particle-list access, decided by typing."""

    target: Expr
    name: str
    span: Span = _span()


@dataclass(eq=True)
class Index(Expr):
    target: Expr
    index: Expr
    span: Span = _span()


@dataclass(eq=True)
class DiffOp(Expr):
    op: str  # laplacian
    operand: Expr
    span: Span = _span()


@dataclass(eq=True)
class VectorLit(Expr):
    elements: list[Expr]
    span: Span = _span()


@dataclass(eq=True)
class Annotated(Expr):
    expr: Expr
    dim: DimExpr
    span: Span = _span()


# --------------------------------------------------------------- statements

@dataclass(eq=True)
class TypeExpr(Node):
    name: str  # int real bool string vector matrix field property particle displacement boundary
    element: Optional["TypeExpr"] = None
    arity: Optional[int] = None
    span: Span = _span()


@dataclass(eq=True)
class Range(Node):
    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False
    span: Span = _span()

    def contains(self, x: float) -> bool:
        lo_ok = x > self.lo if self.lo_open else x >= self.lo
        hi_ok = x < self.hi if self.hi_open else x <= self.hi
        return lo_ok and hi_ok

    def __str__(self) -> str:
        def num(v):
            return "inf" if v == float("inf") else "-inf" if v == float("-inf") else repr(v)
        return f"{'(' if self.lo_open else '['}{num(self.lo)}, {num(self.hi)}{')' if self.hi_open else ']'}"


class Stmt(Node):
    pragmas: tuple


@dataclass(eq=True)
class VarDecl(Stmt):
    type: TypeExpr
    name: str
    dim: Optional[DimExpr] = None
    range: Optional[Range] = None
    init: Optional[Expr] = None
    on_list: Optional[str] = None  # set for field/property declarations
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class Assign(Stmt):
    target: Expr
    value: Expr
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class ExprStmt(Stmt):
    expr: Expr
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class If(Stmt):
    cond: Expr
    then: list[Stmt]
    orelse: list[Stmt] = field(default_factory=list)
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class Foreach(Stmt):
    var: str
    source: str  # particle list, or neighbor list when `of` is set
    body: list[Stmt]
    of: Optional[str] = None  # particle variable whose neighbors are iterated
    pragmas: tuple = ()
    span: Span = _span()

    @property
    def is_neighbor_loop(self) -> bool:
        return self.of is not None


@dataclass(eq=True)
class Timeloop(Stmt):
    var: str
    start: Expr
    end: Expr
    step: Expr
    body: list[Stmt]
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class Equation(Node):
    """`d_dt(list->field) = rhs`."""

    lhs: Expr
    rhs: Expr
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class Deqn(Stmt):
    target: str
    integrator: str
    equations: list[Equation]
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class CreateTopology(Stmt):
    name: str
    ndim: Expr
    lo: Expr
    hi: Expr
    boundary: str  # periodic | none
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class CreateParticles(Stmt):
    name: str
    topology: str
    mode: str  # grid | random
    count: Expr
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class LoadColumn(Node):
    prop: str
    component: Optional[int] = None
    span: Span = _span()


@dataclass(eq=True)
class LoadParticles(Stmt):
    name: str
    topology: str
    path: str
    columns: list[LoadColumn]
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class CreateNeighlist(Stmt):
    name: str
    plist: str
    cutoff: Expr
    skin: Optional[Expr] = None
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class ApplyBC(Stmt):
    plist: str
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class UpdateNeighlist(Stmt):
    neighlist: str
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class IoWrite(Stmt):
    plist: str
    props: list[str]
    pragmas: tuple = ()
    span: Span = _span()


@dataclass(eq=True)
class ParamDecl(Node):
    type: TypeExpr
    name: str
    dim: Optional[DimExpr] = None
    range: Optional[Range] = None
    default: Optional[Expr] = None
    span: Span = _span()


@dataclass(eq=True)
class SourceModule(Node):
    name: str
    dimensions: list[DimensionDecl] = field(default_factory=list)
    dim_file: Optional[str] = None
    params: list[ParamDecl] = field(default_factory=list)
    statements: list[Stmt] = field(default_factory=list)
    span: Span = _span()


def walk_statements(stmts) -> Iterator[Stmt]:
    """Pre-order over nested statement lists (not into expressions)."""
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from walk_statements(s.then)
            yield from walk_statements(s.orelse)
        elif isinstance(s, (Foreach, Timeloop)):
            yield from walk_statements(s.body)
