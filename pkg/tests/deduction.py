"""The velocity-update deduction used by the dimension tests."""

from pmlang import typesys as T
from pmlang.dimsys import Dimension
from pmlang.frontend import nodes as N

from conftest import check_text

SOURCE = """module deduction
dimensions from "md.dim"
param real{{m}} mass = 1.0{{m}}
param real{{t}} delta_t = 0.1{{t}}
topology topo = create_topology(2, 0.0{{l}}, 1.0{{l}}, periodic)
particle_list parts = create_particles(topo, grid, 4)
property<real, 1>{{v}} v on parts
property<real, 1>{{a}} a on parts
property<real, 1>{{m * a}} F on parts
foreach p in parts {{
    p->v = p->v + 0.5 * (p->a + p->F / mass) * delta_t^{k}
}}
"""

L, TT, M = Dimension.base("l"), Dimension.base("t"), Dimension.base("m")
VEL = L / TT
ACC = VEL / TT


def deduce(k: int):
    """(check result, outer '+' node, [step1..step4 nodes])."""
    comp = check_text(SOURCE.format(k=k))
    loop = comp.module.statements[-1]
    rhs = loop.body[0].value
    outer = rhs
    mul_dt = outer.right  # (0.5 * (...)) * delta_t^k
    half = mul_dt.left  # 0.5 * (...)
    inner_sum = half.right
    while isinstance(inner_sum, N.Paren):
        inner_sum = inner_sum.expr
    div = inner_sum.right  # p->F / mass
    return comp, outer, [div, inner_sum, half, mul_dt]


def annotated(comp, node):
    return comp.checked.types.get(id(node))


REAL = T.REAL
