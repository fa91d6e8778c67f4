"""Finding ``@optimize`` marks, writing annotation files and applying winners."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..checker import check_module
from ..diagnostics import CompileError, Span
from ..frontend import nodes as N
from ..frontend.printer import format_expr
from .evaluate import SamplePlan, VarRange
from .expr import Abstraction, Unsupported, _unparen, from_ast, to_ast
from .search import AnalysisResult, optimize

MARK = "optimize"


class AnnotationMissing(CompileError):
    code = "E7001"


class RecheckFailed(CompileError):
    code = "E7002"


@dataclass
class Mark:
    id: int
    owner: N.Node  # statement or equation holding the expression
    slot: str  # attribute of ``owner`` that holds it
    expr: N.Expr
    label: str

    @property
    def span(self) -> Span:
        return self.owner.span


def _marked_nodes(module: N.SourceModule):
    for s in N.walk_statements(module.statements):
        if MARK in s.pragmas:
            yield s
        if isinstance(s, N.Deqn):
            for eq in s.equations:
                if MARK in eq.pragmas:
                    yield eq


def _slot(node) -> tuple[str, str]:
    if isinstance(node, N.VarDecl):
        if node.init is None:
            raise Unsupported(f"'{node.name}' has no initializer to analyse")
        return "init", node.name
    if isinstance(node, N.Assign):
        return "value", format_expr(node.target)
    if isinstance(node, N.Equation):
        return "rhs", format_expr(node.lhs)
    if isinstance(node, N.ExprStmt):
        return "expr", "expression"
    raise Unsupported(f"@{MARK} cannot be attached to {type(node).__name__}")


def find_marks(module: N.SourceModule) -> list[Mark]:
    """Marked expressions in source order, numbered from 1."""
    out = []
    for i, node in enumerate(_marked_nodes(module), start=1):
        slot, label = _slot(node)
        out.append(Mark(i, node, slot, getattr(node, slot), label))
    return out


def _declared_ranges(module: N.SourceModule) -> dict:
    """Range annotations by name: parameters, locals and properties (keyed ``prop:<name>``)."""
    out = {}
    for p in module.params:
        if p.range is not None:
            out[p.name] = p.range
    for s in N.walk_statements(module.statements):
        if isinstance(s, N.VarDecl) and s.range is not None:
            out[f"prop:{s.name}" if s.on_list else s.name] = s.range
    return out


def _range_for(node: N.Expr, declared: dict) -> Optional[N.Range]:
    node = _unparen(node)
    if isinstance(node, N.Var):
        return declared.get(node.name)
    if isinstance(node, N.Access):
        return declared.get(f"prop:{node.name}")
    if isinstance(node, N.Index):
        return _range_for(node.target, declared)
    return None


@dataclass
class MarkedExpr:
    mark: Mark
    tree: tuple
    abstraction: Abstraction

    @property
    def id(self) -> int:
        return self.mark.id

    def sample_plan(self, samples: int = 256, seed: int = 0, use_ranges: bool = True) -> SamplePlan:
        ranges = {}
        if use_ranges:
            for name, info in self.abstraction.vars.items():
                if info.range is not None:
                    ranges[name] = VarRange.from_node(info.range)
        return SamplePlan(ranges, samples, seed)


def collect_marked(module: N.SourceModule) -> list[MarkedExpr]:
    """Marked expressions with their free variables and declared ranges.

    Raises Unsupported if a marked expression is not plain real arithmetic.
    """
    declared = _declared_ranges(module)
    out = []
    for m in find_marks(module):
        tree, ab = from_ast(m.expr)
        for info in ab.vars.values():
            info.range = _range_for(info.node, declared)
        out.append(MarkedExpr(m, tree, ab))
    return out


# ----------------------------------------------------------- application

def _substitute(module: N.SourceModule, ident: int, tree) -> N.SourceModule:
    new = copy.deepcopy(module)
    marks = {m.id: m for m in collect_marked(new)}
    target = marks[ident]
    setattr(target.mark.owner, target.mark.slot, to_ast(tree, target.abstraction))
    return new


def substitute_checked(module: N.SourceModule, ident: int, tree, base_dir: Path | None = None):
    """Module with the marked expression replaced, or None if it no longer checks."""
    new = _substitute(module, ident, tree)
    res = check_module(new, base_dir=base_dir)
    return new if res.ok else None


def apply_annotation(
    module: N.SourceModule,
    annotations: dict,
    ident: int,
    base_dir: Path | None = None,
) -> N.SourceModule:
    """Copy of ``module`` with the winner of annotation ``ident`` in place of the marked expression."""
    ann = annotations.get(ident)
    if ann is None:
        raise AnnotationMissing(f"no annotation for expression #{ident}")
    new = _substitute(module, ident, ann.winner)
    res = check_module(new, base_dir=base_dir)
    if not res.ok:
        first = next(d for d in res.diagnostics if d.is_error)
        raise RecheckFailed(f"rewritten expression #{ident} does not check: {first.message}", first.span)
    return new


def apply_all(module, annotations: dict, base_dir: Path | None = None) -> N.SourceModule:
    for ident in sorted(annotations):
        if annotations[ident].improved:
            module = apply_annotation(module, annotations, ident, base_dir)
    return module


def analyse_module(
    module: N.SourceModule,
    samples: int = 256,
    seed: int = 0,
    base_dir: Path | None = None,
    use_ranges: bool = True,
) -> dict:
    """Run the accuracy pass on every marked expression; returns id -> AnalysisResult.

    A candidate only wins if the module still type- and dimension-checks with it.
    """
    out = {}
    for me in collect_marked(module):
        plan = me.sample_plan(samples, seed, use_ranges)

        def admissible(t, _id=me.id):
            return substitute_checked(module, _id, t, base_dir) is not None

        res = optimize(me.tree, plan, me.id, admissible)
        res.label = me.mark.label
        res.line = me.mark.span.line
        res.original_text = format_expr(me.mark.expr)
        res.winner_text = format_expr(to_ast(res.winner, me.abstraction))
        out[me.id] = res
    return out


def format_annotations(name: str, results: dict) -> str:
    lines = [f"# accuracy annotations for {name}"]
    for ident in sorted(results):
        r: AnalysisResult = results[ident]
        lines += [
            "",
            f"[{ident}] line {r.line}: {r.label}",
            f"  original:    {r.original_text}",
            f"  winner:      {r.winner_text}",
            f"  input bits:  {r.input_bits:.6f}",
            f"  output bits: {r.output_bits:.6f}",
            f"  rules:       {', '.join(r.rules) if r.rules else '-'}",
            f"  samples:     {r.samples} (seed {r.seed})",
        ]
        if r.ranges:
            lines.append("  ranges:      " + ", ".join(f"{k} in {v}" for k, v in sorted(r.ranges.items())))
        lines.append(f"  status:      {r.note}")
    return "\n".join(lines) + "\n"


def write_annotations(path: Path, name: str, results: dict) -> Path:
    path = Path(path)
    path.write_text(format_annotations(name, results), encoding="utf-8")
    return path
