"""Type lattice, subtyping, least common supertype and the operator tables.

Tables return ``None`` (written ⊥ in messages) when an operation is
undefined.  The error type ``ERROR`` is absorbing and never appears as a
container element.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterator, Mapping, Optional

ARITH_OPS = ("+", "-", "*", "/", "^")
LOGIC_OPS = ("&&", "||")
REL_OPS = ("==", "!=", "<", ">", "<=", ">=")
UNARY_OPS = ("-", "!", "sqrt")


class LatticeType:
    def is_numeric(self) -> bool:
        return self in (INT, REAL)


@dataclass(frozen=True)
class Prim(LatticeType):
    name: str
    symbol: str

    def __str__(self) -> str:
        return self.symbol


@dataclass(frozen=True)
class Vector(LatticeType):
    elem: LatticeType

    def __str__(self) -> str:
        return f"Vector<{self.elem}>"


@dataclass(frozen=True)
class Matrix(LatticeType):
    elem: LatticeType

    def __str__(self) -> str:
        return f"Matrix<{self.elem}>"


@dataclass(frozen=True)
class FieldType(LatticeType):
    """ℰ⟨τ, n⟩: per-particle data of element type τ and arity n."""

    elem: LatticeType
    arity: int

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError("field arity must be positive")

    def __str__(self) -> str:
        return f"Field<{self.elem}, {self.arity}>"


STRING = Prim("String", "String")
BOOL = Prim("Boolean", "Boolean")
INT = Prim("Integer", "Integer")
REAL = Prim("Real", "Real")
PARTICLE = Prim("Particle", "Particle")
PARTICLE_LIST = Prim("ParticleList", "ParticleList")
DISPLACEMENT = Prim("Displacement", "Displacement")
TOPOLOGY = Prim("Topology", "Topology")
BOUNDARY = Prim("Boundary", "Boundary")
ERROR = Prim("Error", "Error")

PRIMITIVES = (STRING, BOOL, INT, REAL, PARTICLE, PARTICLE_LIST, DISPLACEMENT, TOPOLOGY, BOUNDARY)


def _containers(t):
    return isinstance(t, (Vector, Matrix, FieldType))


def subtype(t1: LatticeType, t2: LatticeType) -> bool:
    """t1 ≤ t2. The only primitive edge is Integer ≤ Real; containers are covariant."""
    if t1 == t2:
        return True
    if t1 == INT and t2 == REAL:
        return True
    if type(t1) is type(t2) and _containers(t1):
        if isinstance(t1, FieldType) and t1.arity != t2.arity:
            return False
        return subtype(t1.elem, t2.elem)
    return False


def lcs(t1: LatticeType, t2: LatticeType) -> Optional[LatticeType]:
    """Least common supertype ↑(t1, t2), or None when the types are unrelated."""
    if ERROR in (t1, t2):
        return None
    if subtype(t1, t2):
        return t2
    if subtype(t2, t1):
        return t1
    if type(t1) is type(t2) and _containers(t1):
        if isinstance(t1, FieldType):
            if t1.arity != t2.arity:
                return None
            e = lcs(t1.elem, t2.elem)
            return None if e is None else FieldType(e, t1.arity)
        e = lcs(t1.elem, t2.elem)
        return None if e is None else type(t1)(e)
    return None


def _wrap(kind, elem, arity=None):
    if elem is None:
        return None
    return FieldType(elem, arity) if kind is FieldType else kind(elem)


def _num(t):
    return t in (INT, REAL)


def _table_add_mul(op, t1, t2):
    # + - and * share the scalar rows and the scalar-vs-container cells.
    if _num(t1) and _num(t2):
        return lcs(t1, t2)
    if _num(t1) and isinstance(t2, Vector):
        return _wrap(Vector, lcs(t1, t2.elem))
    if _num(t1) and isinstance(t2, FieldType):
        return _wrap(FieldType, lcs(t1, t2.elem), t2.arity)
    if isinstance(t1, Vector) and _num(t2):
        return _wrap(Vector, lcs(t1.elem, t2))
    if isinstance(t1, FieldType) and _num(t2):
        return _wrap(FieldType, lcs(t1.elem, t2), t1.arity)
    if op in "+-":
        if isinstance(t1, Vector) and isinstance(t2, Vector):
            return _wrap(Vector, lcs(t1.elem, t2.elem))
        if isinstance(t1, FieldType) and isinstance(t2, FieldType) and t1.arity == t2.arity:
            return _wrap(FieldType, lcs(t1.elem, t2.elem), t2.arity)
    return None


def _table_div(t1, t2):
    if _num(t1) and _num(t2):
        return REAL
    if _num(t1) and isinstance(t2, Vector):
        return _wrap(Vector, _table_div(t1, t2.elem))
    if _num(t1) and isinstance(t2, FieldType):
        return _wrap(FieldType, _table_div(t1, t2.elem), t2.arity)
    if isinstance(t1, Vector) and _num(t2):
        return _wrap(Vector, _table_div(t1.elem, REAL))
    if isinstance(t1, FieldType) and _num(t2):
        return _wrap(FieldType, _table_div(t1.elem, REAL), t1.arity)
    return None


def _table_pow(t1, t2):
    if _num(t1) and _num(t2):
        return lcs(t1, t2)
    if isinstance(t1, Vector) and _num(t2):
        return _wrap(Vector, _table_pow(t1.elem, t2))
    if isinstance(t1, FieldType) and _num(t2):
        return _wrap(FieldType, _table_pow(t1.elem, REAL), t1.arity)
    return None


def arith_result(op: str, t1: LatticeType, t2: LatticeType) -> Optional[LatticeType]:
    if op in ("+", "-", "*"):
        return _table_add_mul(op, t1, t2)
    if op == "/":
        return _table_div(t1, t2)
    if op == "^":
        return _table_pow(t1, t2)
    raise ValueError(f"not an arithmetic operator: {op}")


def binary_result(op: str, t1: LatticeType, t2: LatticeType) -> Optional[LatticeType]:
    """Result type of ``t1 op t2`` or None (⊥)."""
    if ERROR in (t1, t2):
        return None
    if op in ARITH_OPS:
        return arith_result(op, t1, t2)
    if op in LOGIC_OPS:
        return BOOL if t1 == BOOL and t2 == BOOL else None
    if op in ("==", "!="):
        return BOOL if _table_add_mul("+", t1, t2) is not None else None
    if op in ("<", ">", "<=", ">="):
        return BOOL if _num(_table_add_mul("+", t1, t2)) else None
    raise ValueError(f"unknown binary operator: {op}")


def unary_result(op: str, t: LatticeType) -> Optional[LatticeType]:
    if op == "!":
        return BOOL if t == BOOL else None
    if op == "-":
        if _num(t):
            return t
        if isinstance(t, Vector):
            return _wrap(Vector, unary_result("-", t.elem))
        if isinstance(t, FieldType):
            return _wrap(FieldType, unary_result("-", t.elem), t.arity)
        return None
    if op == "sqrt":
        return REAL if _num(t) else None
    raise ValueError(f"unknown unary operator: {op}")


def element_type(t: FieldType) -> LatticeType:
    """Type of one particle's value of a field: τ for arity 1, Vector⟨τ⟩ otherwise."""
    return t.elem if t.arity == 1 else Vector(t.elem)


def type_universe(depth: int = 2, arities=(1, 2, 3)) -> Iterator[LatticeType]:
    """Finite sample of the lattice: primitives and containers nested up to ``depth``."""
    level = list(PRIMITIVES)
    seen = list(level)
    for _ in range(depth):
        nxt = []
        for e in level:
            nxt.append(Vector(e))
            nxt.append(Matrix(e))
            nxt.extend(FieldType(e, n) for n in arities)
        seen.extend(nxt)
        level = nxt
    return iter(seen)


# ----------------------------------------------------------------- environment

@dataclass(frozen=True)
class Binding:
    type: object  # AnnotatedType
    kind: str = "var"  # var | param | field | particle | plist | topology | loop
    owner: Optional[str] = None  # particle list of a particle variable


class TypingEnv:
    """Immutable stack of scopes; every update returns a new environment."""

    __slots__ = ("_scopes",)

    def __init__(self, scopes=()):
        self._scopes: tuple[Mapping[str, Binding], ...] = tuple(scopes) or (MappingProxyType({}),)

    @classmethod
    def of(cls, bindings: Mapping[str, object]) -> "TypingEnv":
        scope = {k: v if isinstance(v, Binding) else Binding(v) for k, v in bindings.items()}
        return cls((MappingProxyType(scope),))

    def push(self) -> "TypingEnv":
        return TypingEnv(self._scopes + (MappingProxyType({}),))

    def bind(self, name: str, binding) -> "TypingEnv":
        if not isinstance(binding, Binding):
            binding = Binding(binding)
        top = dict(self._scopes[-1])
        top[name] = binding
        return TypingEnv(self._scopes[:-1] + (MappingProxyType(top),))

    def lookup(self, name: str) -> Optional[Binding]:
        for scope in reversed(self._scopes):
            if name in scope:
                return scope[name]
        return None

    def __contains__(self, name: str) -> bool:
        return self.lookup(name) is not None

    def in_top_scope(self, name: str) -> bool:
        return name in self._scopes[-1]

    @property
    def depth(self) -> int:
        return len(self._scopes)

    def names(self) -> set[str]:
        out: set[str] = set()
        for s in self._scopes:
            out.update(s)
        return out
