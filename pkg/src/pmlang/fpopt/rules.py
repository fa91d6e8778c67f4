"""Rewrite rules and the simplifier.

A rule maps one node to zero or more replacements.  Each replacement comes
with side conditions ``(predicate, subtree)`` that must hold on every sample
for the rewrite to be equivalent there ("nonzero" or "nonneg").
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Callable

from .expr import ONE, ZERO, is_num, num

Conds = tuple
Result = list  # of (tree, conds)


@dataclass(frozen=True)
class Rule:
    name: str
    fn: Callable

    def apply(self, t) -> Result:
        return self.fn(t)


def _nz(*ts):
    return tuple(("nonzero", t) for t in ts if not (is_num(t) and t[1] != 0))


def _nn(*ts):
    return tuple(("nonneg", t) for t in ts if not (is_num(t) and t[1] >= 0))


def _op(t, *ops):
    return t[0] in ops


# ---------------------------------------------------------------- rules

def r_commute(t):
    if _op(t, "+", "*"):
        return [((t[0], t[2], t[1]), ())]
    return []


def r_assoc(t):
    out = []
    op = t[0]
    if op not in ("+", "-", "*", "/"):
        return out
    a, b = t[1], t[2]
    if op == "+":
        if b[0] == "+":
            out.append((("+", ("+", a, b[1]), b[2]), ()))
        if b[0] == "-":
            out.append((("-", ("+", a, b[1]), b[2]), ()))
        if a[0] == "+":
            out.append((("+", a[1], ("+", a[2], b)), ()))
        if a[0] == "-":
            out.append((("-", a[1], ("-", a[2], b)), ()))
    elif op == "-":
        if a[0] == "+":
            out.append((("+", a[1], ("-", a[2], b)), ()))
        if a[0] == "-":
            out.append((("-", a[1], ("+", a[2], b)), ()))
        if b[0] == "+":
            out.append((("-", ("-", a, b[1]), b[2]), ()))
        if b[0] == "-":
            out.append((("+", ("-", a, b[1]), b[2]), ()))
    elif op == "*":
        if b[0] == "*":
            out.append((("*", ("*", a, b[1]), b[2]), ()))
        if b[0] == "/":
            out.append((("/", ("*", a, b[1]), b[2]), ()))
        if a[0] == "*":
            out.append((("*", a[1], ("*", a[2], b)), ()))
        if a[0] == "/":
            out.append((("/", ("*", a[1], b), a[2]), ()))
    elif op == "/":
        if a[0] == "*":
            out.append((("*", a[1], ("/", a[2], b)), ()))
        if a[0] == "/":
            out.append((("/", a[1], ("*", a[2], b)), _nz(a[2], b)))
        if b[0] == "*":
            out.append((("/", ("/", a, b[1]), b[2]), _nz(b[1], b[2])))
        if b[0] == "/":
            out.append((("/", ("*", a, b[2]), b[1]), _nz(b[2])))
    return out


def r_distribute(t):
    out = []
    op = t[0]
    if op == "*":
        a, b = t[1], t[2]
        if b[0] in ("+", "-"):
            out.append(((b[0], ("*", a, b[1]), ("*", a, b[2])), ()))
        if a[0] in ("+", "-"):
            out.append(((a[0], ("*", a[1], b), ("*", a[2], b)), ()))
    elif op == "/" and t[1][0] in ("+", "-"):
        a, c = t[1], t[2]
        out.append(((a[0], ("/", a[1], c), ("/", a[2], c)), ()))
    elif op == "neg" and t[1][0] == "+":
        out.append((("-", ("neg", t[1][1]), t[1][2]), ()))
    elif op == "neg" and t[1][0] == "-":
        out.append((("-", t[1][2], t[1][1]), ()))
    return out


def r_factor(t):
    out = []
    if t[0] not in ("+", "-"):
        return out
    op, a, b = t
    if a[0] == "*" and b[0] == "*":
        if a[1] == b[1]:
            out.append((("*", a[1], (op, a[2], b[2])), ()))
        if a[2] == b[2]:
            out.append((("*", (op, a[1], b[1]), a[2]), ()))
    if a[0] == "/" and b[0] == "/" and a[2] == b[2]:
        out.append((("/", (op, a[1], b[1]), a[2]), ()))
    if a[0] == "*" and a[1] == b:
        out.append((("*", b, (op, a[2], ONE)), ()))
    if b[0] == "*" and b[1] == a:
        out.append((("*", a, (op, ONE, b[2])), ()))
    return out


def r_fraction(t):
    out = []
    if t[0] not in ("+", "-"):
        return out
    op, a, b = t
    if a[0] == "/" and b[0] == "/":
        out.append((("/", (op, ("*", a[1], b[2]), ("*", a[2], b[1])), ("*", a[2], b[2])), _nz(a[2], b[2])))
    elif b[0] == "/":
        out.append((("/", (op, ("*", a, b[2]), b[1]), b[2]), _nz(b[2])))
    elif a[0] == "/":
        out.append((("/", (op, a[1], ("*", a[2], b)), a[2]), _nz(a[2])))
    return out


def r_conjugate(t):
    """x - y = (x^2 - y^2) / (x + y), applied when either side is a square root."""
    if t[0] != "-":
        return []
    a, b = t[1], t[2]
    if a[0] == "sqrt" and b[0] == "sqrt":
        den = ("+", a, b)
        return [(("/", ("-", a[1], b[1]), den), _nn(a[1], b[1]) + _nz(den))]
    if b[0] == "sqrt":
        den = ("+", a, b)
        return [(("/", ("-", ("pow", a, 2), b[1]), den), _nn(b[1]) + _nz(den))]
    if a[0] == "sqrt":
        den = ("+", a, b)
        return [(("/", ("-", a[1], ("pow", b, 2)), den), _nn(a[1]) + _nz(den))]
    return []


def r_power(t):
    out = []
    op = t[0]
    if op == "pow":
        x, k = t[1], t[2]
        if k >= 2:
            out.append((("*", ("pow", x, k - 1), x), ()))
            for f in range(2, k):
                if k % f == 0:
                    out.append((("pow", ("pow", x, f), k // f), ()))
        if k < 0:
            out.append((("/", ONE, ("pow", x, -k)), _nz(x)))
        if x[0] in ("*", "/"):
            out.append(((x[0], ("pow", x[1], k), ("pow", x[2], k)), _nz(x[2]) if x[0] == "/" else ()))
        if x[0] == "pow":
            out.append((("pow", x[1], x[2] * k), ()))
    elif op == "*":
        a, b = t[1], t[2]
        if a == b:
            out.append((("pow", a, 2), ()))
        if a[0] == "pow" and a[1] == b:
            out.append((("pow", b, a[2] + 1), ()))
        if b[0] == "pow" and b[1] == a:
            out.append((("pow", a, b[2] + 1), ()))
        if a[0] == "pow" and b[0] == "pow":
            if a[1] == b[1]:
                out.append((("pow", a[1], a[2] + b[2]), _nz(a[1]) if min(a[2], b[2]) < 0 else ()))
            if a[2] == b[2]:
                out.append((("pow", ("*", a[1], b[1]), a[2]), ()))
    elif op == "/":
        a, b = t[1], t[2]
        if a[0] == "pow" and b[0] == "pow":
            if a[1] == b[1]:
                d = a[2] - b[2]
                rep = ("pow", a[1], d) if d > 0 else ("/", ONE, ("pow", a[1], -d))
                out.append((rep, _nz(a[1])))
            if a[2] == b[2]:
                out.append((("pow", ("/", a[1], b[1]), a[2]), _nz(b[1])))
        if is_num(a, 1) and b[0] == "pow":
            out.append((("pow", b[1], -b[2]), _nz(b[1])))
    return out


def r_negation(t):
    out = []
    op = t[0]
    if op == "-":
        out.append((("+", t[1], ("neg", t[2])), ()))
    if op == "+" and t[2][0] == "neg":
        out.append((("-", t[1], t[2][1]), ()))
    if op == "+" and t[1][0] == "neg":
        out.append((("-", t[2], t[1][1]), ()))
    if op in ("*", "/") and t[1][0] == "neg":
        out.append((("neg", (op, t[1][1], t[2])), ()))
    return out


RULES = (
    Rule("commute", r_commute),
    Rule("associate", r_assoc),
    Rule("distribute", r_distribute),
    Rule("factor", r_factor),
    Rule("fraction", r_fraction),
    Rule("conjugate", r_conjugate),
    Rule("power", r_power),
    Rule("negation", r_negation),
)


# ------------------------------------------------------------ simplifier

def _fold(t):
    """Value of an all-constant node, or None."""
    op = t[0]
    if op in ("num", "var"):
        return None
    kids = t[1:] if op != "pow" else (t[1],)
    if not all(is_num(k) for k in kids):
        return None
    if op == "neg":
        return num(-t[1][1])
    if op == "sqrt":
        q = t[1][1]
        if q < 0:
            return None
        n, d = isqrt(q.numerator), isqrt(q.denominator)
        return num(Fraction(n, d)) if n * n == q.numerator and d * d == q.denominator else None
    if op == "pow":
        q, k = t[1][1], t[2]
        if q == 0 and k < 0:
            return None
        if abs(k) > 64:
            return None
        return num(q**k)
    if op == "powr":
        return None
    a, b = t[1][1], t[2][1]
    if op == "+":
        return num(a + b)
    if op == "-":
        return num(a - b)
    if op == "*":
        return num(a * b)
    if op == "/":
        return None if b == 0 else num(a / b)
    return None


def _simplify_node(t):
    """One local simplification at the root, or None."""
    if t[0] in ("num", "var"):
        return None
    v = _fold(t)
    if v is not None:
        return v, ()
    op = t[0]
    if op == "neg":
        a = t[1]
        if a[0] == "neg":
            return a[1], ()
    if op == "pow":
        if t[2] == 1:
            return t[1], ()
        if t[2] == 0:
            return ONE, _nz(t[1])
    if op not in ("+", "-", "*", "/"):
        return None
    a, b = t[1], t[2]
    if op == "+":
        if is_num(a, 0):
            return b, ()
        if is_num(b, 0):
            return a, ()
        if b[0] == "neg":
            return ("-", a, b[1]), ()
        if a[0] == "-" and a[2] == b:
            return a[1], ()
        if b[0] == "-" and b[2] == a:
            return b[1], ()
        if is_num(a) and b[0] == "+" and is_num(b[1]):
            return ("+", num(a[1] + b[1][1]), b[2]), ()
    elif op == "-":
        if is_num(b, 0):
            return a, ()
        if is_num(a, 0):
            return ("neg", b), ()
        if a == b:
            return ZERO, ()
        if b[0] == "neg":
            return ("+", a, b[1]), ()
        if a[0] == "+" and a[1] == b:
            return a[2], ()
        if a[0] == "+" and a[2] == b:
            return a[1], ()
        if b[0] == "+" and b[1] == a:
            return ("neg", b[2]), ()
        if b[0] == "+" and b[2] == a:
            return ("neg", b[1]), ()
        if a[0] == "+" and b[0] == "+" and a[1] == b[1]:
            return ("-", a[2], b[2]), ()
    elif op == "*":
        if is_num(a, 1):
            return b, ()
        if is_num(b, 1):
            return a, ()
        if is_num(a, 0) or is_num(b, 0):
            return ZERO, ()
        if is_num(a, -1):
            return ("neg", b), ()
        if is_num(a) and b[0] == "*" and is_num(b[1]):
            return ("*", num(a[1] * b[1][1]), b[2]), ()
        if is_num(b) and a[0] == "*" and is_num(a[1]):
            return ("*", num(a[1][1] * b[1]), a[2]), ()
        if b[0] == "/" and b[2] == a:
            return b[1], _nz(a)
        if a[0] == "/" and a[2] == b:
            return a[1], _nz(b)
    elif op == "/":
        if is_num(b, 1):
            return a, ()
        if is_num(a, 0):
            return ZERO, _nz(b)
        if a == b:
            return ONE, _nz(a)
        if a[0] == "*" and a[1] == b:
            return a[2], _nz(b)
        if a[0] == "*" and a[2] == b:
            return a[1], _nz(b)
        if is_num(b) and b[1] != 0 and a[0] == "*" and is_num(a[1]):
            return ("*", num(a[1][1] / b[1]), a[2]), ()
    return None


def simplify(t, limit: int = 200):
    """Apply local simplifications bottom-up to a fixed point; returns (tree, conds)."""
    conds: list = []

    def go(x, budget):
        if x[0] in ("num", "var"):
            return x
        if x[0] == "pow":
            x = ("pow", go(x[1], budget), x[2])
        else:
            x = (x[0],) + tuple(go(c, budget) for c in x[1:])
        for _ in range(budget):
            r = _simplify_node(x)
            if r is None:
                break
            x, c = r
            conds.extend(c)
            if x[0] not in ("num", "var"):
                x = go(x, max(1, budget // 2)) if x[0] != "pow" else ("pow", go(x[1], budget // 2), x[2])
        return x

    out = go(t, limit)
    return out, tuple(conds)
