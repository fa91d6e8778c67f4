import pytest

from pmlang.dimsys import (
    EMPTY,
    CyclicDefinition,
    Dimension,
    DuplicateDimension,
    UnknownDimension,
    dim_infer,
    parse_dim_source,
)

from conftest import errors
from deduction import ACC, REAL, TT, VEL, annotated, deduce


def test_base_form_and_algebra():
    tab = parse_dim_source('l "length"\nt "time"\nv = l * t^-1\na = v * t^-1\n')
    assert tab.expand_name("a") == Dimension.of(l=1, t=-2)
    assert tab.expand([("a", 1), ("t", 2)]) == Dimension.of(l=1)
    assert (Dimension.of(l=2)).sqrt() == Dimension.of(l=1)
    assert Dimension.of(l=1).sqrt() is None
    assert Dimension.of(l=1) / Dimension.of(l=1) == EMPTY


@pytest.mark.parametrize(
    "text, exc",
    [
        ('l "x"\nl "y"\n', DuplicateDimension),
        ("a = b\nb = a\n", CyclicDefinition),
        ("a = q\n", UnknownDimension),
    ],
)
def test_bad_dimension_files(text, exc):
    with pytest.raises(exc):
        parse_dim_source(text).check_all()


def test_dim_infer_rules():
    l, t = Dimension.base("l"), Dimension.base("t")
    assert dim_infer("+", l, l) == l
    assert dim_infer("+", l, t) is None
    assert dim_infer("*", l, t) == l * t
    assert dim_infer("/", l, t) == l / t
    assert dim_infer("^", l, 3) == l**3
    assert dim_infer("^", l, None) is None
    assert dim_infer("^", EMPTY, None) == EMPTY
    assert dim_infer("<", l, l) == EMPTY
    assert dim_infer("<", l, t) is None
    assert dim_infer("sqrt", l * l) == l
    assert dim_infer("neg", t) == t


def test_deduction_steps_with_exponent_two():
    comp, outer, steps = deduce(2)
    got = [annotated(comp, s) for s in steps]
    assert [g.type for g in got] == [REAL] * 4
    assert [g.dim for g in got] == [ACC, ACC, ACC, ACC * TT**2]
    assert annotated(comp, outer).is_error
    errs = errors(comp)
    assert len(errs) == 1 and errs[0].code == "E4001"
    assert errs[0].span == outer.span


def test_deduction_with_exponent_one():
    comp, outer, _ = deduce(1)
    assert comp.ok
    at = annotated(comp, outer)
    assert at.type == REAL and at.dim == VEL


def test_erased_dimensions_give_same_lattice_types():
    from pmlang.checker import check_module

    comp, outer, steps = deduce(2)
    plain = check_module(comp.module, dims=False, base_dir=None)
    for node in steps + [outer]:
        assert plain.types[id(node)].type == REAL
    assert plain.ok
