"""Physical dimensions in base form and the dimension inference rules.

A dimension is stored as its base form: a map from fundamental dimension
names to nonzero integer exponents.  The empty map is the dimensionless
dimension, written ∅.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .diagnostics import CompileError, Span
from .typesys import ERROR, LatticeType


@dataclass(frozen=True)
class Dimension:
    items: tuple[tuple[str, int], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[str, int] | None = None, **kw) -> "Dimension":
        merged: dict[str, int] = {}
        for src in (mapping or {}), kw:
            for k, v in src.items():
                merged[k] = merged.get(k, 0) + int(v)
        return cls(tuple(sorted((k, v) for k, v in merged.items() if v != 0)))

    @classmethod
    def base(cls, name: str) -> "Dimension":
        return cls(((name, 1),))

    def as_dict(self) -> dict[str, int]:
        return dict(self.items)

    @property
    def is_empty(self) -> bool:
        return not self.items

    def __mul__(self, other: "Dimension") -> "Dimension":
        d = self.as_dict()
        for k, v in other.items:
            d[k] = d.get(k, 0) + v
        return Dimension.of(d)

    def __truediv__(self, other: "Dimension") -> "Dimension":
        return self * other ** -1

    def __pow__(self, n: int) -> "Dimension":
        return Dimension.of({k: v * n for k, v in self.items})

    def sqrt(self) -> Optional["Dimension"]:
        if any(v % 2 for _, v in self.items):
            return None
        return Dimension.of({k: v // 2 for k, v in self.items})

    def __str__(self) -> str:
        if not self.items:
            return "∅"
        return "·".join(k if v == 1 else f"{k}^{v}" for k, v in self.items)


EMPTY = Dimension()


def dim_equal(d1: Dimension, d2: Dimension) -> bool:
    return d1 == d2


def dim_infer(op: str, d1: Dimension, d2=None) -> Optional[Dimension]:
    """Dimension of ``d1 op d2`` (or of ``op d1`` for unary operators); None is ⊥.

    For ``^`` the second argument is the integer exponent, or None when the
    exponent is not an integer literal.
    """
    if d2 is None and op in ("!", "neg", "sqrt"):
        if op == "sqrt":
            return d1.sqrt()
        return d1
    if op in ("+", "-"):
        return d1 if d1 == d2 else None
    if op == "*":
        return d1 * d2
    if op == "/":
        return d1 / d2
    if op == "^":
        if isinstance(d2, bool) or not isinstance(d2, int):
            return EMPTY if d1.is_empty else None
        return d1 ** d2
    if op in ("==", "!=", "<", ">", "<=", ">="):
        return EMPTY if d1 == d2 else None
    if op in ("&&", "||"):
        return EMPTY if d1.is_empty and d2.is_empty else None
    raise ValueError(f"unknown operator {op!r}")


@dataclass(frozen=True)
class AnnotatedType:
    """[τ; δ]. ``AnnotatedType(τ)`` is the same as [τ; ∅]."""

    type: LatticeType
    dim: Dimension = EMPTY

    @property
    def is_error(self) -> bool:
        return self.type == ERROR

    def __str__(self) -> str:
        if self.is_error:
            return "Error"
        return f"[{self.type}; {self.dim}]"


def error_type() -> AnnotatedType:
    return AnnotatedType(ERROR)


class UnknownDimension(CompileError):
    code = "E4007"


class CyclicDefinition(CompileError):
    code = "E4008"


class DuplicateDimension(CompileError):
    code = "E4009"


@dataclass(frozen=True)
class DimDecl:
    name: str
    definition: Optional[tuple[tuple[str, int], ...]] = None  # None: fundamental
    description: Optional[str] = None
    span: Span = Span(0, 0)


class DimensionTable:
    """Declared dimensions; derived ones expand to base form on demand."""

    def __init__(self, decls=()):
        self.decls: dict[str, DimDecl] = {}
        self._cache: dict[str, Dimension] = {}
        for d in decls:
            self.declare(d)

    def declare(self, decl: DimDecl):
        if decl.name in self.decls:
            raise DuplicateDimension(f"dimension {decl.name!r} declared twice", decl.span)
        self.decls[decl.name] = decl
        self._cache.clear()

    @classmethod
    def from_nodes(cls, nodes) -> "DimensionTable":
        tab = cls()
        for n in nodes:
            definition = None
            if n.definition is not None:
                definition = tuple((f.name, f.exponent) for f in n.definition.factors)
            tab.declare(DimDecl(n.name, definition, n.description, n.span))
        return tab

    def is_fundamental(self, name: str) -> bool:
        return self.decls[name].definition is None

    def expand_name(self, name: str, span: Span = Span(0, 0), _stack=()) -> Dimension:
        if name in self._cache:
            return self._cache[name]
        if name not in self.decls:
            raise UnknownDimension(f"unknown dimension {name!r}", span)
        if name in _stack:
            cycle = " -> ".join(_stack[_stack.index(name):] + (name,))
            raise CyclicDefinition(f"cyclic dimension definition: {cycle}", self.decls[name].span)
        decl = self.decls[name]
        if decl.definition is None:
            result = Dimension.base(name)
        else:
            result = EMPTY
            for fac, exp in decl.definition:
                result = result * self.expand_name(fac, decl.span, _stack + (name,)) ** exp
        self._cache[name] = result
        return result

    def expand(self, factors, span: Span = Span(0, 0)) -> Dimension:
        """Base form of a product of powers, given as (name, exponent) pairs or a DimExpr node."""
        if hasattr(factors, "factors"):
            pairs = [(f.name, f.exponent, f.span) for f in factors.factors]
        else:
            pairs = [(n, e, span) for n, e in factors]
        result = EMPTY
        for name, exp, sp in pairs:
            result = result * self.expand_name(name, sp) ** exp
        return result

    def check_all(self):
        """Expand every declaration, raising on the first unknown name or cycle."""
        for name in self.decls:
            self.expand_name(name)

    def pretty(self, d: Dimension) -> str:
        """Name a dimension after a matching declaration when one exists."""
        if d.is_empty:
            return "∅"
        for name in self.decls:
            try:
                if self.expand_name(name) == d:
                    return name
            except CompileError:
                continue
        return str(d)


def parse_dim_source(text: str) -> DimensionTable:
    """Build a table from `.dim` file contents."""
    from .frontend.parser import parse_dim_file

    return DimensionTable.from_nodes(parse_dim_file(text))


__all__ = [
    "AnnotatedType",
    "CyclicDefinition",
    "DimDecl",
    "Dimension",
    "DimensionTable",
    "DuplicateDimension",
    "EMPTY",
    "UnknownDimension",
    "dim_equal",
    "dim_infer",
    "error_type",
    "parse_dim_source",
]
