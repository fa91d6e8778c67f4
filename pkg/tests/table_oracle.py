"""The four binary-operation inference tables, transcribed cell by cell.

Rows are the left operand type, columns the right one.  Each cell is a
function of the element types X (column) and Y (row) and the arities n
(column) and m (row); it returns None for ⊥.  Only ``up`` (least common
supertype) is shared, and it is written out independently of the library.
"""

from pmlang import typesys as T

Z, R = T.INT, T.REAL
KINDS = ("Z", "R", "V", "E")


def up(a, b):
    if a is None or b is None:
        return None
    if a == b:
        return a
    if {a, b} == {Z, R}:
        return R
    if isinstance(a, T.Vector) and isinstance(b, T.Vector):
        e = up(a.elem, b.elem)
        return None if e is None else T.Vector(e)
    return None


def V(x):
    return None if x is None else T.Vector(x)


def E(x, n):
    return None if x is None else T.FieldType(x, n)


def div(a, b):
    """τ_/ on element types."""
    if a in (Z, R) and b in (Z, R):
        return R
    return None


def pw(a, b):
    """τ_{a^b} on element types."""
    if a in (Z, R) and b in (Z, R):
        return up(a, b)
    return None


# cell(X, Y, n, m) for row kind r and column kind c
ADD = {
    ("Z", "Z"): lambda X, Y, n, m: Z,
    ("Z", "R"): lambda X, Y, n, m: R,
    ("Z", "V"): lambda X, Y, n, m: V(up(Z, X)),
    ("Z", "E"): lambda X, Y, n, m: E(up(Z, X), n),
    ("R", "Z"): lambda X, Y, n, m: R,
    ("R", "R"): lambda X, Y, n, m: R,
    ("R", "V"): lambda X, Y, n, m: V(up(R, X)),
    ("R", "E"): lambda X, Y, n, m: E(up(R, X), n),
    ("V", "Z"): lambda X, Y, n, m: V(up(Y, Z)),
    ("V", "R"): lambda X, Y, n, m: V(up(Y, R)),
    ("V", "V"): lambda X, Y, n, m: V(up(Y, X)),
    ("V", "E"): lambda X, Y, n, m: None,
    ("E", "Z"): lambda X, Y, n, m: E(up(Y, Z), m),
    ("E", "R"): lambda X, Y, n, m: E(up(Y, R), m),
    ("E", "V"): lambda X, Y, n, m: None,
    ("E", "E"): lambda X, Y, n, m: E(up(Y, X), n) if n == m else None,  # footnote: if n = m
}

MUL = dict(ADD)
MUL.update({
    ("V", "V"): lambda X, Y, n, m: None,
    ("V", "E"): lambda X, Y, n, m: None,
    ("E", "V"): lambda X, Y, n, m: None,
    ("E", "E"): lambda X, Y, n, m: None,
})

DIV = {
    ("Z", "Z"): lambda X, Y, n, m: R,
    ("Z", "R"): lambda X, Y, n, m: R,
    ("Z", "V"): lambda X, Y, n, m: V(div(Z, X)),
    ("Z", "E"): lambda X, Y, n, m: E(div(Z, X), n),
    ("R", "Z"): lambda X, Y, n, m: R,
    ("R", "R"): lambda X, Y, n, m: R,
    ("R", "V"): lambda X, Y, n, m: V(div(R, X)),
    ("R", "E"): lambda X, Y, n, m: E(div(R, X), n),
    ("V", "Z"): lambda X, Y, n, m: V(div(Y, R)),
    ("V", "R"): lambda X, Y, n, m: V(div(Y, R)),
    ("V", "V"): lambda X, Y, n, m: None,
    ("V", "E"): lambda X, Y, n, m: None,
    ("E", "Z"): lambda X, Y, n, m: E(div(Y, R), m),
    ("E", "R"): lambda X, Y, n, m: E(div(Y, R), m),
    ("E", "V"): lambda X, Y, n, m: None,
    ("E", "E"): lambda X, Y, n, m: None,
}

POW = {
    ("Z", "Z"): lambda X, Y, n, m: Z,
    ("Z", "R"): lambda X, Y, n, m: R,
    ("Z", "V"): lambda X, Y, n, m: None,
    ("Z", "E"): lambda X, Y, n, m: None,
    ("R", "Z"): lambda X, Y, n, m: R,
    ("R", "R"): lambda X, Y, n, m: R,
    ("R", "V"): lambda X, Y, n, m: None,
    ("R", "E"): lambda X, Y, n, m: None,
    ("V", "Z"): lambda X, Y, n, m: V(pw(Y, Z)),
    ("V", "R"): lambda X, Y, n, m: V(pw(Y, R)),
    ("V", "V"): lambda X, Y, n, m: None,
    ("V", "E"): lambda X, Y, n, m: None,
    ("E", "Z"): lambda X, Y, n, m: E(pw(Y, R), m),
    ("E", "R"): lambda X, Y, n, m: E(pw(Y, R), m),
    ("E", "V"): lambda X, Y, n, m: None,
    ("E", "E"): lambda X, Y, n, m: None,
}

TABLES = {"+": ADD, "-": ADD, "*": MUL, "/": DIV, "^": POW}

# element types the symbolic X and Y range over, including ones that make ↑ undefined
ELEMS = (Z, R, T.BOOL, T.STRING)
ARITIES = (1, 2, 3)


def make(kind, elem, arity):
    if kind == "Z":
        return Z
    if kind == "R":
        return R
    return T.Vector(elem) if kind == "V" else T.FieldType(elem, arity)


def instances(row, col):
    """(t1, t2, X, Y, n, m) for every instantiation of one cell."""
    ys = ELEMS if row in ("V", "E") else (None,)
    xs = ELEMS if col in ("V", "E") else (None,)
    ms = ARITIES if row == "E" else (None,)
    ns = ARITIES if col == "E" else (None,)
    for Y in ys:
        for X in xs:
            for m in ms:
                for n in ns:
                    yield make(row, Y, m), make(col, X, n), X, Y, n, m
