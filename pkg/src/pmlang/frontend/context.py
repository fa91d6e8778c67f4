"""Post-parse structural checks that the grammar alone cannot express."""

from __future__ import annotations

from ..diagnostics import Diagnostic
from . import nodes as N


def validate_context(module: N.SourceModule) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def visit_expr(e: N.Expr, in_deqn: bool):
        for node in e.walk():
            if isinstance(node, N.DiffOp) and not in_deqn:
                diags.append(
                    Diagnostic("E2101", f"differential operator '{node.op}' is only allowed inside a deqn body", node.span)
                )

    def exprs_of(s: N.Stmt):
        for c in s.children():
            if isinstance(c, N.Expr):
                yield c

    timeloops = 0
    for s in N.walk_statements(module.statements):
        if isinstance(s, N.Timeloop):
            timeloops += 1
            if timeloops == 2:
                diags.append(Diagnostic("E2102", "a module may contain at most one timeloop", s.span))
        if isinstance(s, N.Deqn):
            for eq in s.equations:
                visit_expr(eq.lhs, False)
                visit_expr(eq.rhs, True)
        else:
            for e in exprs_of(s):
                visit_expr(e, False)
    for p in module.params:
        if p.default is not None:
            visit_expr(p.default, False)
    return diags
