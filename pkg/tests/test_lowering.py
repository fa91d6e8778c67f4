import re

import numpy as np
import pytest

from pmlang.diagnostics import CompileError
from pmlang.frontend import nodes as N
from pmlang.frontend.printer import format_stmt
from pmlang.fpopt.evaluate import fpow
from pmlang.lowering import emit_ir, extract_rhs, lower, rewrite_pla_to_pa
from pmlang.runtime import Interpreter, RunOptions

from conftest import check_text, plan_of, program

HEAD = """module m
topology topo = create_topology(2, 0.0, 1.0, periodic)
particle_list c = create_particles(topo, grid, 8)
property<real, 1> a on c
property<real, 1> b on c
neighlist nl = create_neighlist(c, 0.3)
"""


def lowering_error(body):
    comp = check_text(HEAD + body)
    assert comp.ok, comp.diagnostics
    with pytest.raises(CompileError) as ei:
        lower(comp.checked)
    return ei.value.code


@pytest.mark.parametrize(
    "body, code",
    [
        ("foreach p in c {\n foreach q in neighbors(p, nl) {\n  q->a = 1.0\n }\n}\n", "E2303"),
        ("foreach p in c {\n p->a = 1.0\n foreach q in neighbors(p, nl) {\n  p->b = p->b + q->a\n }\n}\n", "E2304"),
        ("foreach p in c {\n foreach q in neighbors(p, nl) {\n  p->a = q->b\n }\n}\n", "E2305"),
        ("real s = 0.0\nforeach p in c {\n s = p->a\n}\n", "E2306"),
        ("foreach p in c {\n foreach q in c {\n  p->a = 1.0\n }\n}\n", "E2307"),
        ("deqn on c using euler {\n d_dt(c->a) = 1.0\n}\n", "E2308"),
        ("timeloop t from 0.0 to 1.0 step 0.5 {\n deqn on c using euler {\n  d_dt(c->a) = laplacian(c->a)\n }\n}\n", None),
    ],
)
def test_lowering_rejections(body, code):
    if code is None:
        # the same deqn lowers fine when a neighbor list exists
        lower(check_text(HEAD + body).checked)
    else:
        assert lowering_error(body) == code


def test_diffop_needs_neighbor_list():
    text = HEAD.replace("neighlist nl = create_neighlist(c, 0.3)\n", "")
    body = "timeloop t from 0.0 to 1.0 step 0.5 {\n deqn on c using euler {\n  d_dt(c->a) = laplacian(c->a)\n }\n}\n"
    comp = check_text(text + body)
    with pytest.raises(CompileError) as ei:
        lower(comp.checked)
    assert ei.value.code == "E2311"


def test_lowering_twice_is_rejected():
    plan = plan_of("gray_scott")
    with pytest.raises(CompileError) as ei:
        lower(plan)
    assert ei.value.code == "E2309"


def test_extract_rhs_gray_scott():
    (rhs,) = extract_rhs(program("gray_scott").checked)
    assert rhs.target == "c" and rhs.integrator == "rk4"
    assert rhs.writes == ("U", "V")
    assert rhs.reads == frozenset({"U", "V"})
    assert [(s.op, s.field, s.name) for s in rhs.slots] == [("laplacian", "U", "dU"), ("laplacian", "V", "dV")]
    pa = rewrite_pla_to_pa(rhs, {"c", "U", "V"})
    assert pa.loop_var == "p"
    assert [a.target.name for a in pa.body] == ["ddt_U", "ddt_V"]
    with pytest.raises(CompileError):
        rewrite_pla_to_pa(pa)


def brute_force_sets(loop: N.Foreach):
    """Read/write sets from the printed loop text."""
    p = loop.var
    writes, reads = set(), set()
    for line in format_stmt(loop)[1:]:
        line = line.strip()
        m = re.match(rf"^{p}->(\w+)(\[[^\]]*\])?\s*=(?!=)(.*)$", line)
        if m:
            writes.add(m.group(1))
            line = (m.group(2) or "") + m.group(3)
        else:
            m = re.match(r"^[\w<>, ]+\{?[^=]*\}?\s+\w+(\s+in\s+\S+\s+\S+)?\s*=(?!=)(.*)$", line)
            if m and not line.startswith(("if", "foreach", "}")):
                line = m.group(2)
        reads |= set(re.findall(rf"\b{p}->(\w+)", line))
    return writes, reads


@pytest.mark.parametrize("name", ["lennard_jones", "nbody", "coverage", "gray_scott"])
def test_kernel_sets_match_brute_force(name):
    plan = plan_of(name)
    kernels = [s for s in plan.iter_steps() if s.kind == "kernel"]
    assert kernels
    for st in kernels:
        w, r = brute_force_sets(st.node)
        assert st.kernel.writes == w, format_stmt(st.node)
        assert st.kernel.reads == r, format_stmt(st.node)
        assert st.kernel.writes_pos == ("pos" in w)


def test_auto_steps_after_position_writes():
    plan = plan_of("nbody")
    loop = next(s for s in plan.steps if s.kind == "timeloop")
    kinds = [(s.kind, s.auto) for s in loop.children]
    i = next(i for i, s in enumerate(loop.children) if s.kind == "kernel" and s.kernel.writes_pos)
    assert kinds[i + 1] == ("apply-bc", True)


def test_ir_text():
    ir = emit_ir(plan_of("gray_scott"))
    assert ir.startswith("plan gray_scott\n")
    assert "discretize laplacian on c via nl kernel=pse fields=[U, V]" in ir
    assert "rhs-integrate c using rk4 state=[U, V]" in ir
    assert "p->ddt_U = Du * p->dU - p->U * p->V^2 + F * (1.0 - p->U)" in ir


def _eval_pla(e, env, A):
    """Whole-list evaluation of a deqn right-hand side."""
    while isinstance(e, N.Paren):
        e = e.expr
    if isinstance(e, N.Literal):
        return np.float64(float(e.text))
    if isinstance(e, N.Var):
        return env[e.name]
    if isinstance(e, N.Access):
        return env[e.name]
    if isinstance(e, N.DiffOp):
        return A @ _eval_pla(e.operand, env, A)
    if isinstance(e, N.Unary):
        return -_eval_pla(e.operand, env, A)
    a = _eval_pla(e.left, env, A)
    if e.op == "^":
        return fpow(a, int(e.right.text))
    b = _eval_pla(e.right, env, A)
    return {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}[e.op](a, b)


def test_lowered_rhs_bitwise_equals_whole_list_evaluation():
    plan = plan_of("gray_scott")
    it = Interpreter(plan, {"n": 24}, RunOptions())
    for st in plan.steps:
        if st.kind == "timeloop":
            break
        it.run_step(st)
    ps = it.particles["c"]
    state = {"U": ps.get("U").copy(), "V": ps.get("V").copy()}
    got = it.rates(plan.rhs[0], state, 0.0)
    A = it.operators[("laplacian", "c")].matrix
    env = {k: float(it.top.vars[k][0]) for k in ("Du", "Dv", "F", "k")}
    env.update(state)
    deqn = next(s for s in N.walk_statements(plan.module.statements) if isinstance(s, N.Deqn))
    for eq, f in zip(deqn.equations, ["U", "V"]):
        want = _eval_pla(eq.rhs, env, A)
        assert np.array_equal(got[f], want), f
