import dataclasses

import pytest

from pmlang.checker import check_module
from pmlang.frontend import nodes as N
from pmlang.pipeline import compile_file

from conftest import CORPUS, PROGRAMS, check_text, errors

ERROR_CASES = sorted((CORPUS / "errors").glob("*.pm"))
VALID = sorted(PROGRAMS.glob("*.pm"))


def golden(path):
    pos, code = path.with_suffix(".golden").read_text().split()
    line, col = map(int, pos.split(":"))
    return line, col, code


def test_corpus_size():
    assert len(ERROR_CASES) == 25


@pytest.mark.parametrize("path", ERROR_CASES, ids=lambda p: p.stem)
def test_error_corpus_golden(path):
    comp = compile_file(path)
    errs = errors(comp)
    assert len(errs) == 1, errs
    d = errs[0]
    assert (d.span.line, d.span.col, d.code) == golden(path)


@pytest.mark.parametrize("path", VALID, ids=lambda p: p.stem)
def test_shipped_programs_check(path):
    comp = compile_file(path)
    assert comp.ok, comp.diagnostics


def erase_dims(node):
    """Drop every dimension annotation in place."""
    if isinstance(node, list):
        for i, x in enumerate(node):
            node[i] = erase_dims(x)
        return node
    if not dataclasses.is_dataclass(node):
        return node
    if isinstance(node, N.Annotated):
        return erase_dims(node.expr)
    if isinstance(node, N.SourceModule):
        node.dimensions = []
        node.dim_file = None
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if f.name == "dim" and isinstance(v, N.DimExpr):
            setattr(node, f.name, None)
        elif isinstance(v, (list, N.Node)):
            setattr(node, f.name, erase_dims(v))
    return node


def _all_exprs(node, out):
    if isinstance(node, list):
        for x in node:
            _all_exprs(x, out)
    elif dataclasses.is_dataclass(node):
        if isinstance(node, N.Expr):
            out.append(node)
        for f in dataclasses.fields(node):
            _all_exprs(getattr(node, f.name), out)
    return out


@pytest.mark.parametrize("path", VALID + ERROR_CASES, ids=lambda p: p.stem)
def test_erasing_dimensions_agrees_with_plain_typing(path):
    comp = compile_file(path)
    if comp.module is None:
        pytest.skip("does not parse")
    module = erase_dims(comp.module)
    with_dims = check_module(module, dims=True)
    plain = check_module(module, dims=False)
    assert not [d for d in with_dims.diagnostics if d.code.startswith("E4")]
    for e in _all_exprs(module.statements, []):
        if id(e) in plain.types:
            assert with_dims.types[id(e)].type == plain.types[id(e)].type


def test_lj_velocity_update_dimension_error_reported_once():
    text = (PROGRAMS / "lennard_jones.pm").read_text()
    bad = text.replace("p->F / mass) * delta_t\n", "p->F / mass) * delta_t^2\n")
    assert bad != text
    comp = check_text(bad)
    errs = errors(comp)
    assert len(errs) == 1 and errs[0].code.startswith("E4")


def test_errors_recover_and_continue():
    comp = check_text("module m\nreal a = 1.0 + true\nreal b = !2\nreal c = a\n")
    codes = [d.code for d in errors(comp)]
    assert codes == ["E3003", "E3002"]


def test_check_result_tables():
    comp = compile_file(PROGRAMS / "gray_scott.pm")
    res = comp.checked
    assert [f for f in res.fields if f != "pos"] == ["U", "V"]
    assert res.neighlists == {"nl": "c"}
    assert set(res.params) >= {"k", "F", "Du", "Dv"}
