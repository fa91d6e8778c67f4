"""Real-arithmetic expression trees used by the accuracy pass.

Trees are nested tuples so they hash and compare structurally:

    ("num", Fraction)        exact constant
    ("var", name)            free real variable
    ("neg", a) ("sqrt", a)
    ("+", a, b) ("-", a, b) ("*", a, b) ("/", a, b)
    ("pow", a, k)            integer power, k a Python int
    ("powr", a, b)           real power
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ..frontend import nodes as N
from ..frontend.printer import format_expr

BINOPS = ("+", "-", "*", "/")
PREC = {"+": 4, "-": 4, "*": 5, "/": 5, "pow": 7, "powr": 7, "neg": 6, "sqrt": 6}


class Unsupported(Exception):
    """The expression cannot be analysed as real arithmetic."""


def num(x) -> tuple:
    return ("num", Fraction(x))


def var(name: str) -> tuple:
    return ("var", name)


ZERO = num(0)
ONE = num(1)


def is_num(t, value=None) -> bool:
    return t[0] == "num" and (value is None or t[1] == value)


def size(t) -> int:
    """Number of operations (leaves are free)."""
    if t[0] in ("num", "var"):
        return 0
    if t[0] == "pow":
        return 1 + size(t[1])
    return 1 + sum(size(c) for c in t[1:])


def children(t):
    if t[0] in ("num", "var"):
        return ()
    if t[0] == "pow":
        return (t[1],)
    return t[1:]


def with_children(t, kids):
    if t[0] == "pow":
        return ("pow", kids[0], t[2])
    return (t[0],) + tuple(kids)


def free_vars(t) -> set:
    if t[0] == "var":
        return {t[1]}
    out = set()
    for c in children(t):
        out |= free_vars(c)
    return out


def positions(t, path=()):
    """Yield (path, subtree) for every node, root first."""
    yield path, t
    for i, c in enumerate(children(t)):
        yield from positions(c, path + (i,))


def replace_at(t, path, new):
    if not path:
        return new
    kids = list(children(t))
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return with_children(t, kids)


# ------------------------------------------------------------- printing

def format_number(q: Fraction) -> str:
    """Decimal text for q when exact, otherwise a quotient of two reals."""
    neg = q < 0
    q = abs(q)
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den == 1:
        scale = max(twos, fives)
        digits = str(q.numerator * (10**scale // q.denominator))
        if scale:
            digits = digits.rjust(scale + 1, "0")
            text = digits[:-scale] + "." + digits[-scale:].rstrip("0")
            text = text + "0" if text.endswith(".") else text
        else:
            text = digits + ".0"
        if len(text) > 24:
            text = repr(float(q)) if Fraction(repr(float(q))) == q else text
        return ("-" if neg else "") + text
    text = f"{q.numerator}.0 / {q.denominator}.0"
    return f"-({text})" if neg else f"({text})"


def to_text(t, parent: int = 0, right: bool = False) -> str:
    op = t[0]
    if op == "num":
        s = format_number(t[1])
        return f"({s})" if s.startswith("-") and parent else s
    if op == "var":
        return t[1]
    p = PREC[op]
    if op == "neg":
        inner = to_text(t[1], p)
        s = f"-{inner}" if not inner.startswith("-") else f"- {inner}"
    elif op == "sqrt":
        s = f"sqrt({to_text(t[1])})"
        return s
    elif op == "pow":
        s = f"{to_text(t[1], 10)}^{t[2]}"
    elif op == "powr":
        s = f"{to_text(t[1], 10)}^{to_text(t[2], p)}"
    else:
        left = to_text(t[1], p)
        rgt = to_text(t[2], p + 1)
        s = f"{left} {op} {rgt}"
    return f"({s})" if p < parent or (p == parent and right) else s


# -------------------------------------------------------- AST conversion

@dataclass
class VarInfo:
    name: str
    node: N.Expr  # what the variable stands for in the source
    range: Optional[N.Range] = None


@dataclass
class Abstraction:
    """Mapping between free variables and the source expressions they replace."""

    vars: dict = field(default_factory=dict)  # name -> VarInfo
    by_key: dict = field(default_factory=dict)

    def bind(self, key: str, node: N.Expr) -> tuple:
        name = self.by_key.get(key)
        if name is None:
            name = key
            i = 1
            while name in self.vars:
                i += 1
                name = f"{key}_{i}"
            self.by_key[key] = name
            self.vars[name] = VarInfo(name, node)
        return var(name)


def _leaf_key(e: N.Expr) -> str:
    e = _unparen(e)
    if isinstance(e, N.Var):
        return e.name
    if isinstance(e, N.Access):
        return f"{_leaf_key(e.target)}_{e.name}"
    if isinstance(e, N.Index):
        idx = _unparen(e.index)
        if isinstance(idx, N.Literal) and idx.kind == "int":
            return f"{_leaf_key(e.target)}_{idx.value}"
        raise Unsupported("array index must be an integer literal")
    if isinstance(e, N.DiffOp):
        inner = _unparen(e.operand)
        if isinstance(inner, N.Access):
            return f"d{inner.name}"
        return "d" + _leaf_key(inner)
    raise Unsupported(f"cannot abstract {type(e).__name__}")


def _unparen(e):
    while isinstance(e, (N.Paren, N.Annotated)):
        e = e.expr
    return e


def from_ast(e: N.Expr, ab: Abstraction | None = None):
    """Convert a numeric AST expression; particle accesses become free variables."""
    ab = ab if ab is not None else Abstraction()

    def go(x):
        x = _unparen(x)
        if isinstance(x, N.Literal):
            if x.kind not in ("int", "real"):
                raise Unsupported(f"{x.kind} literal in a numeric expression")
            return ("num", Fraction(x.text))
        if isinstance(x, (N.Var, N.Access, N.Index, N.DiffOp)):
            if isinstance(x, N.Var) and x.name == "random":
                raise Unsupported("'random' has no fixed value")
            return ab.bind(_leaf_key(x), x)
        if isinstance(x, N.Unary):
            if x.op == "-":
                return ("neg", go(x.operand))
            if x.op == "sqrt":
                return ("sqrt", go(x.operand))
            raise Unsupported(f"operator '{x.op}' is not numeric")
        if isinstance(x, N.Binary):
            if x.op in BINOPS:
                return (x.op, go(x.left), go(x.right))
            if x.op == "^":
                r = _unparen(x.right)
                if isinstance(r, N.Literal) and r.kind == "int":
                    return ("pow", go(x.left), int(r.value))
                if isinstance(r, N.Unary) and r.op == "-" and isinstance(_unparen(r.operand), N.Literal) and _unparen(r.operand).kind == "int":
                    return ("pow", go(x.left), -int(_unparen(r.operand).value))
                return ("powr", go(x.left), go(x.right))
            raise Unsupported(f"operator '{x.op}' is not numeric")
        raise Unsupported(f"{type(x).__name__} is not supported")

    return go(e), ab


def to_ast(t, ab: Abstraction) -> N.Expr:
    """Rebuild a source expression, restoring the original leaves."""
    from ..frontend.parser import parse_expression

    def go(x):
        op = x[0]
        if op == "num":
            s = format_number(x[1])
            return parse_expression(s)
        if op == "var":
            return ab.vars[x[1]].node
        if op == "neg":
            return N.Unary("-", _wrap(go(x[1]), 6))
        if op == "sqrt":
            return N.Unary("sqrt", N.Paren(go(x[1])))
        if op == "pow":
            k = x[2]
            exp = N.Literal("int", str(k)) if k >= 0 else N.Unary("-", N.Literal("int", str(-k)))
            return N.Binary("^", _wrap(go(x[1]), 10), exp)
        if op == "powr":
            return N.Binary("^", _wrap(go(x[1]), 10), _wrap(go(x[2]), 6))
        p = PREC[op]
        return N.Binary(op, _wrap(go(x[1]), p), _wrap(go(x[2]), p + 1))

    return go(t)


def _strength(e) -> int:
    from ..frontend.parser import binding_power

    if isinstance(e, N.Binary):
        return binding_power(e.op)
    if isinstance(e, (N.Unary, N.DiffOp)):
        return 6
    if isinstance(e, N.Literal) and e.text.startswith("-"):
        return 6
    return 10


def _wrap(e, need):
    return N.Paren(e) if _strength(e) < need else e


def source_text(e: N.Expr) -> str:
    return format_expr(e)
