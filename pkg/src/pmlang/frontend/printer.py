"""Pretty printer producing source that parses back to an equal AST."""

from __future__ import annotations

from . import nodes as N
from .parser import binding_power

_POSTFIX = 10
_POWER = 7
_PREFIX = 6


def _strength(e: N.Expr) -> int:
    if isinstance(e, N.Binary):
        return binding_power(e.op)
    if isinstance(e, (N.Unary, N.DiffOp)):
        return _PREFIX
    return _POSTFIX


def format_dim(d: N.DimExpr) -> str:
    if not d.factors:
        return "1"
    parts = []
    for i, f in enumerate(d.factors):
        exp = f.exponent
        if i == 0:
            sep = ""
        else:
            sep = " / " if exp < 0 else " * "
            exp = abs(exp)
        parts.append(sep + (f.name if exp == 1 else f"{f.name}^{exp}"))
    return "".join(parts)


def format_expr(e: N.Expr) -> str:
    if isinstance(e, N.Literal):
        return e.text
    if isinstance(e, N.Var):
        return e.name
    if isinstance(e, N.Paren):
        return f"({format_expr(e.expr)})"
    if isinstance(e, N.Annotated):
        return f"{format_expr(e.expr)}{{{format_dim(e.dim)}}}"
    if isinstance(e, N.VectorLit):
        return "[" + ", ".join(format_expr(x) for x in e.elements) + "]"
    if isinstance(e, N.Access):
        return f"{_wrap(e.target, _POSTFIX)}->{e.name}"
    if isinstance(e, N.Index):
        return f"{_wrap(e.target, _POSTFIX)}[{format_expr(e.index)}]"
    if isinstance(e, (N.Unary, N.DiffOp)):
        op = e.op
        inner = e.operand
        body = _wrap(inner, _PREFIX)
        if op in ("sqrt", "laplacian"):
            return f"{op}{body}" if body.startswith("(") else f"{op} {body}"
        # `- -x` must not print as the decrement-looking `--x`; keep a space.
        return f"{op}{body}" if not body.startswith(("-", "!")) else f"{op} {body}"
    if isinstance(e, N.Binary):
        bp = binding_power(e.op)
        if e.op == "^":
            left = _wrap(e.left, _POSTFIX)
            right = _wrap(e.right, _PREFIX)
            return f"{left}^{right}"
        left = _wrap(e.left, bp)
        right = _wrap(e.right, bp + 1)
        return f"{left} {e.op} {right}"
    raise TypeError(f"cannot format {type(e).__name__}")


def _wrap(e: N.Expr, need: int) -> str:
    s = format_expr(e)
    return f"({s})" if _strength(e) < need else s


def format_type(t: N.TypeExpr) -> str:
    if t.name in ("vector", "matrix"):
        return f"{t.name}<{format_type(t.element)}>"
    if t.name in ("field", "property"):
        return f"{t.name}<{format_type(t.element)}, {t.arity}>"
    return t.name


def _pragmas(s, ind) -> list[str]:
    return [f"{ind}@{p}" for p in getattr(s, "pragmas", ())]


def format_stmt(s: N.Stmt, depth: int = 0) -> list[str]:
    ind = "    " * depth
    out = _pragmas(s, ind)

    def block(body, d):
        lines = []
        for st in body:
            lines.extend(format_stmt(st, d))
        return lines

    if isinstance(s, N.VarDecl):
        text = format_type(s.type)
        if s.dim is not None:
            text += f"{{{format_dim(s.dim)}}}"
        text += f" {s.name}"
        if s.range is not None:
            text += f" in {s.range}"
        if s.init is not None:
            text += f" = {format_expr(s.init)}"
        if s.on_list is not None:
            text += f" on {s.on_list}"
        out.append(ind + text)
    elif isinstance(s, N.Assign):
        out.append(f"{ind}{format_expr(s.target)} = {format_expr(s.value)}")
    elif isinstance(s, N.ExprStmt):
        out.append(ind + format_expr(s.expr))
    elif isinstance(s, N.If):
        out.append(f"{ind}if {format_expr(s.cond)} {{")
        out += block(s.then, depth + 1)
        if s.orelse:
            out.append(f"{ind}}} else {{")
            out += block(s.orelse, depth + 1)
        out.append(ind + "}")
    elif isinstance(s, N.Foreach):
        src = f"neighbors({s.of}, {s.source})" if s.of else s.source
        out.append(f"{ind}foreach {s.var} in {src} {{")
        out += block(s.body, depth + 1)
        out.append(ind + "}")
    elif isinstance(s, N.Timeloop):
        out.append(
            f"{ind}timeloop {s.var} from {format_expr(s.start)} to {format_expr(s.end)} step {format_expr(s.step)} {{"
        )
        out += block(s.body, depth + 1)
        out.append(ind + "}")
    elif isinstance(s, N.Deqn):
        out.append(f"{ind}deqn on {s.target} using {s.integrator} {{")
        for eq in s.equations:
            out += _pragmas(eq, ind + "    ")
            out.append(f"{ind}    d_dt({format_expr(eq.lhs)}) = {format_expr(eq.rhs)}")
        out.append(ind + "}")
    elif isinstance(s, N.CreateTopology):
        out.append(
            f"{ind}topology {s.name} = create_topology({format_expr(s.ndim)}, {format_expr(s.lo)}, "
            f"{format_expr(s.hi)}, {s.boundary})"
        )
    elif isinstance(s, N.CreateParticles):
        out.append(f"{ind}particle_list {s.name} = create_particles({s.topology}, {s.mode}, {format_expr(s.count)})")
    elif isinstance(s, N.LoadParticles):
        cols = "".join(
            f", {c.prop}" + (f"[{c.component}]" if c.component is not None else "") for c in s.columns
        )
        path = s.path.replace("\\", "\\\\").replace('"', '\\"')
        out.append(f'{ind}particle_list {s.name} = load_particles({s.topology}, "{path}"{cols})')
    elif isinstance(s, N.CreateNeighlist):
        skin = f", {format_expr(s.skin)}" if s.skin is not None else ""
        out.append(f"{ind}neighlist {s.name} = create_neighlist({s.plist}, {format_expr(s.cutoff)}{skin})")
    elif isinstance(s, N.ApplyBC):
        out.append(f"{ind}apply_bc({s.plist})")
    elif isinstance(s, N.UpdateNeighlist):
        out.append(f"{ind}update_neighlist({s.neighlist})")
    elif isinstance(s, N.IoWrite):
        out.append(f"{ind}write({', '.join([s.plist, *s.props])})")
    else:
        raise TypeError(f"cannot format {type(s).__name__}")
    return out


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_module(m: N.SourceModule) -> str:
    lines = [f"module {m.name}"]
    if m.dim_file is not None:
        lines.append(f"dimensions from {_quote(m.dim_file)}")
    elif m.dimensions:
        lines.append("dimensions {")
        for d in m.dimensions:
            text = f"    {d.name}"
            if d.definition is not None:
                text += f" = {format_dim(d.definition)}"
            if d.description is not None:
                text += f" {_quote(d.description)}"
            lines.append(text)
        lines.append("}")
    for p in m.params:
        text = f"param {format_type(p.type)}"
        if p.dim is not None:
            text += f"{{{format_dim(p.dim)}}}"
        text += f" {p.name}"
        if p.default is not None:
            text += f" = {format_expr(p.default)}"
        if p.range is not None:
            text += f" in {p.range}"
        lines.append(text)
    for s in m.statements:
        lines.extend(format_stmt(s))
    return "\n".join(lines) + "\n"
