import itertools

import pytest

from pmlang import typesys as T

from table_oracle import KINDS, TABLES, instances


@pytest.mark.parametrize("op", ["+", "-", "*", "/", "^"])
@pytest.mark.parametrize("row,col", list(itertools.product(KINDS, KINDS)))
def test_table_cell(op, row, col):
    cell = TABLES[op][(row, col)]
    for t1, t2, X, Y, n, m in instances(row, col):
        assert T.binary_result(op, t1, t2) == cell(X, Y, n, m), (op, t1, t2)


def test_footnote_arity_mismatch_is_bottom():
    a, b = T.FieldType(T.REAL, 2), T.FieldType(T.REAL, 3)
    assert T.binary_result("+", a, b) is None
    assert T.binary_result("+", a, T.FieldType(T.INT, 2)) == a


def test_subtype_and_lcs():
    assert T.subtype(T.INT, T.REAL) and not T.subtype(T.REAL, T.INT)
    assert T.subtype(T.Vector(T.INT), T.Vector(T.REAL))
    assert T.lcs(T.INT, T.REAL) == T.REAL
    assert T.lcs(T.BOOL, T.REAL) is None
    assert T.lcs(T.FieldType(T.INT, 2), T.FieldType(T.REAL, 2)) == T.FieldType(T.REAL, 2)
    assert T.lcs(T.FieldType(T.INT, 2), T.FieldType(T.REAL, 3)) is None


def test_subtype_is_a_partial_order():
    ts = list(T.type_universe(depth=1))
    for a in ts:
        assert T.subtype(a, a)
        for b in ts:
            if T.subtype(a, b) and T.subtype(b, a):
                assert a == b
            for c in ts:
                if T.subtype(a, b) and T.subtype(b, c):
                    assert T.subtype(a, c)


@pytest.mark.parametrize(
    "op, t, want",
    [
        ("-", T.INT, T.INT),
        ("-", T.REAL, T.REAL),
        ("-", T.Vector(T.INT), T.Vector(T.INT)),
        ("-", T.BOOL, None),
        ("!", T.BOOL, T.BOOL),
        ("!", T.REAL, None),
        ("sqrt", T.INT, T.REAL),
        ("sqrt", T.REAL, T.REAL),
        ("sqrt", T.STRING, None),
    ],
)
def test_unary(op, t, want):
    assert T.unary_result(op, t) == want


def test_logic_and_relational():
    assert T.binary_result("&&", T.BOOL, T.BOOL) == T.BOOL
    assert T.binary_result("||", T.BOOL, T.INT) is None
    assert T.binary_result("<", T.INT, T.REAL) == T.BOOL
    assert T.binary_result("<", T.STRING, T.REAL) is None


def test_error_absorbs():
    assert T.binary_result("+", T.ERROR, T.INT) is None
