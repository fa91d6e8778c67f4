import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmlang.diagnostics import CompileError
from pmlang.frontend import format_expr, format_module, parse_expression, parse_module, tokenize
from pmlang.frontend import nodes as N
from pmlang.frontend.lexer import LexError
from pmlang.frontend.parser import ParseError

from conftest import PROGRAMS


def shape(e):
    """Structure of an expression with spans and parentheses dropped."""
    if isinstance(e, N.Paren):
        return shape(e.expr)
    if isinstance(e, N.Binary):
        return (e.op, shape(e.left), shape(e.right))
    if isinstance(e, N.Unary):
        return (e.op, shape(e.operand))
    if isinstance(e, N.Var):
        return e.name
    if isinstance(e, N.Literal):
        return e.text
    if isinstance(e, N.Access):
        return ("->", shape(e.target), e.name)
    if isinstance(e, N.Index):
        return ("[]", shape(e.target), shape(e.index))
    if isinstance(e, N.DiffOp):
        return (e.op, shape(e.operand))
    return type(e).__name__


@pytest.mark.parametrize(
    "src, expected",
    [
        ("a + b * c", ("+", "a", ("*", "b", "c"))),
        ("a - b - c", ("-", ("-", "a", "b"), "c")),
        ("a ^ b ^ c", ("^", "a", ("^", "b", "c"))),
        ("-a^2", ("-", ("^", "a", "2"))),
        ("!a && b || c", ("||", ("&&", ("!", "a"), "b"), "c")),
        ("a < b == true", ("==", ("<", "a", "b"), "true")),
        ("p->F / mass", ("/", ("->", "p", "F"), "mass")),
        ("v[0]^2", ("^", ("[]", "v", "0"), "2")),
        ("(a + b) * c", ("*", ("+", "a", "b"), "c")),
    ],
)
def test_precedence_and_associativity(src, expected):
    assert shape(parse_expression(src)) == expected


def test_laplacian_spellings_agree():
    a = parse_expression("∇²c->U")
    b = parse_expression("laplacian(c->U)")
    assert shape(a) == shape(b) == ("laplacian", ("->", "c", "U"))


def test_lex_error_has_position():
    with pytest.raises(LexError) as ei:
        tokenize("a $ b")
    assert ei.value.code == "E1001"
    assert (ei.value.span.line, ei.value.span.col) == (1, 3)


@pytest.mark.parametrize(
    "src, code",
    [
        ("module m\nreal x = \n", "E2001"),
        ("module m\nmodule n\n", "E2003"),
        ("module m\nparam real a = 1.0 in [2.0, 1.0]\n", "E2005"),
        ("module m\n1.0 = 2.0\n", "E2006"),
    ],
)
def test_parse_errors(src, code):
    with pytest.raises(ParseError) as ei:
        parse_module(tokenize(src))
    assert ei.value.code == code


@pytest.mark.parametrize("name", ["gray_scott", "lennard_jones", "nbody", "gray_scott_diffusion", "coverage"])
def test_module_round_trip(name):
    text = (PROGRAMS / f"{name}.pm").read_text()
    once = format_module(parse_module(tokenize(text)))
    twice = format_module(parse_module(tokenize(once)))
    assert once == twice


names = st.sampled_from(["a", "b", "x1", "p->U", "v[0]", "2", "1.5"])


@st.composite
def exprs(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(names)
    kind = draw(st.sampled_from(["bin", "neg", "sqrt", "paren"]))
    if kind == "bin":
        op = draw(st.sampled_from(["+", "-", "*", "/", "^"]))
        return f"{draw(exprs(depth - 1))} {op} {draw(exprs(depth - 1))}"
    if kind == "neg":
        return f"-{draw(exprs(depth - 1))}"
    if kind == "sqrt":
        return f"sqrt({draw(exprs(depth - 1))})"
    return f"({draw(exprs(depth - 1))})"


@settings(max_examples=200, deadline=None)
@given(exprs())
def test_printer_preserves_structure(src):
    e = parse_expression(src)
    assert shape(parse_expression(format_expr(e))) == shape(e)


def test_compile_error_is_base():
    assert issubclass(ParseError, CompileError) and issubclass(LexError, CompileError)
