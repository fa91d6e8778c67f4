"""Lowering of a checked module to an execution plan.

Stages: right-hand sides are extracted from ``deqn`` blocks (each
Laplacian becomes an intermediate ``d<F>``), particle-list accesses are
rewritten into accesses of a fresh loop variable, and the module's
statements become ordered plan steps.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .checker import CheckResult
from .diagnostics import CompileError, Span
from .frontend import nodes as N
from .frontend.printer import format_expr, format_stmt


class LoweringError(CompileError):
    code = "E2301"


# ------------------------------------------------------------------ helpers

def transform(e: N.Expr, fn: Callable[[N.Expr], N.Expr]) -> N.Expr:
    """Rebuild ``e`` bottom-up, applying ``fn`` to every node after its children."""
    if isinstance(e, N.Paren):
        e = replace(e, expr=transform(e.expr, fn))
    elif isinstance(e, N.Annotated):
        e = replace(e, expr=transform(e.expr, fn))
    elif isinstance(e, N.Unary):
        e = replace(e, operand=transform(e.operand, fn))
    elif isinstance(e, N.DiffOp):
        e = replace(e, operand=transform(e.operand, fn))
    elif isinstance(e, N.Binary):
        e = replace(e, left=transform(e.left, fn), right=transform(e.right, fn))
    elif isinstance(e, N.Access):
        e = replace(e, target=transform(e.target, fn))
    elif isinstance(e, N.Index):
        e = replace(e, target=transform(e.target, fn), index=transform(e.index, fn))
    elif isinstance(e, N.VectorLit):
        e = replace(e, elements=[transform(x, fn) for x in e.elements])
    return fn(e)


def strip_parens(e: N.Expr) -> N.Expr:
    while isinstance(e, N.Paren):
        e = e.expr
    return e


def list_access(e: N.Expr, lname: str) -> Optional[str]:
    """Field name if ``e`` is ``lname->field``."""
    e = strip_parens(e)
    if isinstance(e, N.Access) and isinstance(e.target, N.Var) and e.target.name == lname:
        return e.name
    return None


def names_in(e: N.Node) -> set[str]:
    return {n.name for n in e.walk() if isinstance(n, N.Var)}


def all_names(module: N.SourceModule) -> set[str]:
    out = {p.name for p in module.params}
    for s in N.walk_statements(module.statements):
        out |= names_in(s)
        for attr in ("name", "var"):
            v = getattr(s, attr, None)
            if isinstance(v, str):
                out.add(v)
        if isinstance(s, N.Deqn):
            for eq in s.equations:
                out |= names_in(eq)
                out |= {n.name for n in eq.walk() if isinstance(n, N.Access)}
        out |= {n.name for n in s.walk() if isinstance(n, N.Access)}
    return out


def fresh_name(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


# ------------------------------------------------------------- rhs programs

@dataclass(frozen=True)
class DiffSlot:
    op: str
    field: str
    name: str


@dataclass(frozen=True)
class RhsProgram:
    target: str
    integrator: str
    slots: tuple[DiffSlot, ...]
    reads: frozenset
    writes: tuple[str, ...]
    equations: tuple  # (field, rhs) with Laplacians replaced by list->d<F>
    body: tuple = ()  # per-particle assignments p->ddt_<F> = rhs after PLA->PA
    loop_var: Optional[str] = None
    span: Span = Span(0, 0)
    pragmas: tuple = ()  # per equation

    def slot_for(self, fieldname: str) -> Optional[DiffSlot]:
        for s in self.slots:
            if s.field == fieldname:
                return s
        return None


RATE_PREFIX = "ddt_"


def extract_rhs(checked: CheckResult) -> list[RhsProgram]:
    if not checked.ok:
        raise LoweringError("module has unresolved diagnostics", checked.module.span, "E2300")
    module = checked.module
    taken = all_names(module) | set(checked.fields)
    order = list(checked.fields)  # declaration order
    out = []
    for s in N.walk_statements(module.statements):
        if not isinstance(s, N.Deqn):
            continue
        lname = s.target
        on_list = checked.lists[lname].fields
        slots: dict[tuple[str, str], DiffSlot] = {}
        reads: set[str] = set()
        eqs = []
        writes = []
        for eq in s.equations:
            fname = list_access(eq.lhs, lname)
            if fname is None:
                raise LoweringError(f"equation left side must be d_dt({lname}->field)", eq.span, "E2302")
            if fname not in on_list:
                raise LoweringError(f"'{fname}' is not a field of particle list '{lname}'", eq.span, "E2302")
            if fname in writes:
                raise LoweringError(f"field '{fname}' has two equations", eq.span, "E2302")
            writes.append(fname)

            def lower(node: N.Expr) -> N.Expr:
                if isinstance(node, N.Access) and isinstance(node.target, N.Var):
                    if node.target.name == lname:
                        reads.add(node.name)
                    elif node.target.name in checked.lists:
                        raise LoweringError(
                            f"equation on '{lname}' reads list '{node.target.name}'", node.span, "E2302"
                        )
                if isinstance(node, N.DiffOp):
                    f = list_access(node.operand, lname)
                    if f is None:
                        raise LoweringError("differential operator needs an operand of the form list->field", node.span, "E2302")
                    key = (node.op, f)
                    if key not in slots:
                        name = fresh_name("d" + f, taken)
                        taken.add(name)
                        slots[key] = DiffSlot(node.op, f, name)
                    return N.Access(N.Var(lname, span=node.span), slots[key].name, span=node.span)
                return node

            eqs.append((fname, transform(eq.rhs, lower)))
        writes.sort(key=order.index)
        eqs.sort(key=lambda fe: order.index(fe[0]))
        out.append(
            RhsProgram(
                lname,
                s.integrator,
                tuple(slots.values()),
                frozenset(reads),
                tuple(writes),
                tuple(eqs),
                span=s.span,
                pragmas=tuple(eq.pragmas for eq in s.equations),
            )
        )
    return out


def rewrite_pla_to_pa(rhs: RhsProgram, taken: set[str] = frozenset()) -> RhsProgram:
    """Turn every ``list->f`` into ``p->f`` under an inserted loop over the list."""
    if rhs.loop_var is not None:
        raise LoweringError("right-hand side was already rewritten", rhs.span, "E2309")
    used = set(taken) | {rhs.target}
    for _, e in rhs.equations:
        used |= names_in(e)
    p = fresh_name("p", used)

    def to_pa(node):
        if isinstance(node, N.Access) and isinstance(node.target, N.Var) and node.target.name == rhs.target:
            return N.Access(N.Var(p, span=node.target.span), node.name, span=node.span)
        return node

    body = tuple(
        N.Assign(N.Access(N.Var(p), RATE_PREFIX + f), transform(e, to_pa), span=e.span) for f, e in rhs.equations
    )
    return replace(rhs, body=body, loop_var=p)


# ---------------------------------------------------------- kernel analysis

@dataclass
class KernelInfo:
    plist: str
    writes: set = field(default_factory=set)  # fields written through the loop variable
    reads: set = field(default_factory=set)
    writes_pos: bool = False


def _is_accumulation(s: N.Assign) -> Optional[N.Expr]:
    """The increment ``e`` when ``s`` reads ``x = x + e`` or ``x = x - e``."""
    v = strip_parens(s.value)
    if isinstance(v, N.Binary) and v.op in ("+", "-") and strip_parens(v.left) == s.target:
        if s.target not in list(v.right.walk()):
            return v.right
    return None


def analyze_kernel(loop: N.Foreach, global_names: set[str]) -> KernelInfo:
    """Check that a particle loop can run in lockstep over all particles.

    Every iteration may write only its own particle; a neighbor loop may
    only accumulate into its particle and never reads data the enclosing
    loop writes.
    """
    info = KernelInfo(loop.source)
    p = loop.var

    def owner_field(e) -> Optional[tuple[str, str]]:
        e = strip_parens(e)
        while isinstance(e, N.Index):
            e = strip_parens(e.target)
        if isinstance(e, N.Access) and isinstance(e.target, N.Var):
            return e.target.name, e.name
        if isinstance(e, N.Var):
            return None, e.name
        return None

    def writes_in(stmts, var):
        out = set()
        for s in N.walk_statements(stmts):
            if isinstance(s, N.Assign):
                of = owner_field(s.target)
                if of and of[0] == var:
                    out.add(of[1])
        return out

    info.writes = writes_in(loop.body, p)
    info.writes_pos = "pos" in info.writes

    def scan(stmts, locals_: set[str], in_neighbors: Optional[N.Foreach], outer_locals: set[str]):
        for s in stmts:
            if isinstance(s, (N.Timeloop, N.Deqn, N.CreateTopology, N.CreateParticles, N.LoadParticles,
                              N.CreateNeighlist, N.IoWrite, N.ApplyBC, N.UpdateNeighlist)):
                raise LoweringError("statement is not allowed inside a particle loop", s.span, "E2308")
            if isinstance(s, N.Foreach):
                if not s.is_neighbor_loop or s.of != p or in_neighbors is not None:
                    raise LoweringError(
                        f"inside a loop over particles only 'foreach q in neighbors({p}, ...)' may be nested",
                        s.span, "E2307",
                    )
                scan(s.body, set(), s, locals_)
                continue
            if isinstance(s, N.VarDecl):
                locals_.add(s.name)
            if isinstance(s, N.If):
                scan(s.then, set(locals_), in_neighbors, outer_locals)
                scan(s.orelse, set(locals_), in_neighbors, outer_locals)
            exprs = [c for c in s.children() if isinstance(c, N.Expr)]
            if in_neighbors is not None:
                q = in_neighbors.var
                for e in exprs:
                    for n in e.walk():
                        if isinstance(n, N.Access) and isinstance(n.target, N.Var) and n.target.name == q:
                            if n.name in info.writes:
                                raise LoweringError(
                                    f"'{q}->{n.name}' reads a property that the enclosing loop writes",
                                    n.span, "E2304",
                                )
            if not isinstance(s, N.Assign):
                continue
            of = owner_field(s.target)
            target_owner, name = of if of else (None, None)
            if in_neighbors is not None and target_owner == in_neighbors.var:
                raise LoweringError(f"a neighbor loop cannot write to '{target_owner}->{name}'", s.span, "E2303")
            accumulated = _is_accumulation(s) is not None
            if in_neighbors is not None and target_owner == p:
                if not accumulated or not isinstance(strip_parens(s.target), N.Access):
                    raise LoweringError(
                        f"inside a neighbor loop '{p}->{name}' may only be accumulated ({p}->{name} = {p}->{name} + ...)",
                        s.span, "E2305",
                    )
            elif target_owner is None and name not in locals_:
                if in_neighbors is not None and name in outer_locals:
                    if not accumulated:
                        raise LoweringError(
                            f"inside a neighbor loop '{name}' may only be accumulated", s.span, "E2305"
                        )
                elif name in global_names or name not in outer_locals:
                    if not accumulated or not isinstance(strip_parens(s.target), N.Var):
                        raise LoweringError(
                            f"a particle loop may only accumulate into the outer variable '{name}'", s.span, "E2306"
                        )
        if in_neighbors is not None:
            # Accumulated properties must not be read elsewhere inside the neighbor loop.
            acc = writes_in(stmts, p)
            for s in N.walk_statements(stmts):
                if isinstance(s, N.Assign) and _is_accumulation(s) is not None and (owner_field(s.target) or (0,))[0] == p:
                    exprs = [s.value.right if isinstance(strip_parens(s.value), N.Binary) else s.value]
                else:
                    exprs = [c for c in s.children() if isinstance(c, N.Expr)]
                for e in exprs:
                    for n in e.walk():
                        if isinstance(n, N.Access) and isinstance(n.target, N.Var) and n.target.name == p and n.name in acc:
                            raise LoweringError(
                                f"'{p}->{n.name}' is accumulated in this neighbor loop and cannot be read here",
                                n.span, "E2305",
                            )

    scan(loop.body, set(), None, set())
    info.reads = _reads_of(loop.body, p)
    return info


def _reads_of(stmts, p: str) -> set[str]:
    """Fields of ``p`` whose current value the statements use.

    A plain assignment target is not a read; an accumulation target is.
    """
    out = set()

    def note(e):
        for n in e.walk():
            if isinstance(n, N.Access) and isinstance(n.target, N.Var) and n.target.name == p:
                out.add(n.name)

    for s in N.walk_statements(stmts):
        if isinstance(s, N.Assign):
            note(s.value)
            t = strip_parens(s.target)
            while isinstance(t, N.Index):
                note(t.index)
                t = strip_parens(t.target)
        else:
            for c in s.children():
                if isinstance(c, N.Expr):
                    note(c)
    return out


# ------------------------------------------------------------------- plans

@dataclass
class PlanStep:
    kind: str
    node: Optional[N.Node] = None
    target: Optional[str] = None
    children: list = field(default_factory=list)
    rhs: Optional[RhsProgram] = None
    kernel: Optional[KernelInfo] = None
    defs: frozenset = frozenset()
    uses: frozenset = frozenset()
    auto: bool = False  # inserted by lowering rather than written in the source


@dataclass
class ExecutionPlan:
    module: N.SourceModule
    checked: CheckResult
    steps: list
    rhs: list

    def iter_steps(self):
        for s in self.steps:
            yield s
            yield from s.children


def _expr_uses(node: N.Node) -> set[str]:
    return names_in(node)


def _body_steps(stmts, checked: CheckResult, rhs_by_node, globals_: set[str], inside_timeloop: bool):
    steps = []
    for s in stmts:
        if isinstance(s, N.Deqn):
            if not inside_timeloop:
                raise LoweringError("a deqn block must be inside the timeloop", s.span, "E2308")
            steps.append(PlanStep("rhs-integrate", s, s.target, rhs=rhs_by_node[id(s)]))
        elif isinstance(s, N.Foreach):
            if s.is_neighbor_loop:
                raise LoweringError("neighbor loops must be nested in a loop over particles", s.span, "E2307")
            k = analyze_kernel(s, globals_)
            steps.append(PlanStep("kernel", s, s.source, kernel=k))
        elif isinstance(s, N.ApplyBC):
            steps.append(PlanStep("apply-bc", s, s.plist))
        elif isinstance(s, N.UpdateNeighlist):
            steps.append(PlanStep("remap-neighbors", s, s.neighlist))
        elif isinstance(s, N.IoWrite):
            steps.append(PlanStep("io-write", s, s.plist))
        elif isinstance(s, (N.CreateTopology, N.CreateParticles, N.LoadParticles, N.CreateNeighlist, N.Timeloop)):
            if inside_timeloop:
                raise LoweringError("creation statements must be at module level", s.span, "E2308")
            kind = {
                N.CreateTopology: "setup",
                N.CreateParticles: "create-particles",
                N.LoadParticles: "load-particles",
                N.CreateNeighlist: "create-neighlist",
                N.Timeloop: "timeloop",
            }[type(s)]
            step = PlanStep(kind, s, getattr(s, "name", None))
            if isinstance(s, N.Timeloop):
                step.children = _body_steps(s.body, checked, rhs_by_node, globals_, True)
            steps.append(step)
        elif isinstance(s, N.If) and any(not isinstance(x, (N.VarDecl, N.Assign, N.ExprStmt, N.If)) for x in N.walk_statements([s])):
            raise LoweringError("only plain statements may appear inside a module-level if", s.span, "E2308")
        else:
            steps.append(PlanStep("let", s))
    return steps


def _insert_bc(steps: list[PlanStep], checked: CheckResult) -> list[PlanStep]:
    """After any step that moves particles, make sure boundaries and neighbor lists follow."""
    out: list[PlanStep] = []
    i = 0
    while i < len(steps):
        st = steps[i]
        if st.children:
            st.children = _insert_bc(st.children, checked)
        out.append(st)
        i += 1
        if st.kind == "kernel" and st.kernel.writes_pos:
            run = []
            while i < len(steps) and steps[i].kind in ("apply-bc", "remap-neighbors"):
                run.append(steps[i])
                i += 1
            lname = st.target
            if not any(s.kind == "apply-bc" and s.target == lname for s in run):
                run.insert(0, PlanStep("apply-bc", None, lname, auto=True))
            for nl, owner in checked.neighlists.items():
                if owner == lname and not any(s.kind == "remap-neighbors" and s.target == nl for s in run):
                    run.append(PlanStep("remap-neighbors", None, nl, auto=True))
            out.extend(run)
    return out


def _defs_uses(st: PlanStep, checked: CheckResult):
    s = st.node
    defs: set[str] = set()
    uses: set[str] = set()
    if isinstance(s, N.CreateTopology):
        defs.add(s.name)
        uses |= _expr_uses(s)
    elif isinstance(s, (N.CreateParticles, N.LoadParticles)):
        defs.add(s.name)
        uses.add(s.topology)
        uses |= _expr_uses(s)
    elif isinstance(s, N.CreateNeighlist):
        defs.add(s.name)
        uses.add(s.plist)
        uses |= _expr_uses(s)
    elif isinstance(s, N.VarDecl):
        if s.on_list is None:
            defs.add(s.name)
        uses |= _expr_uses(s)
    elif st.kind == "discretize":
        defs.add(f"{st.target}:{st.rhs_slot_key}")
        uses |= {st.target, st.extra_nl}
    elif s is not None:
        uses |= _expr_uses(s)
        for n in N.walk_statements([s]) if isinstance(s, N.Stmt) else []:
            for attr in ("source", "plist", "target", "neighlist"):
                v = getattr(n, attr, None)
                if isinstance(v, str):
                    uses.add(v)
        if st.kind == "timeloop":
            for c in st.children:
                if c.kind == "rhs-integrate":
                    uses |= {f"{c.target}:{sl.op}" for sl in c.rhs.slots}
    known = set(checked.params)
    return frozenset(defs), frozenset(u for u in uses if u not in known)


def build_plan(checked: CheckResult, rhs: list[RhsProgram]) -> ExecutionPlan:
    module = checked.module
    deqns = [s for s in N.walk_statements(module.statements) if isinstance(s, N.Deqn)]
    rhs_by_node = {id(d): r for d, r in zip(deqns, rhs)}
    globals_ = {s.name for s in module.statements if isinstance(s, N.VarDecl) and s.on_list is None}
    steps = _body_steps(module.statements, checked, rhs_by_node, globals_, False)
    steps = [s for s in steps if not (s.kind == "let" and isinstance(s.node, N.VarDecl) and s.node.on_list)]

    creates = [s for s in steps if s.kind in ("create-particles", "load-particles")]
    if any(s.kind == "timeloop" for s in steps) and not creates:
        raise LoweringError("the timeloop has no particles to act on; create a particle list first", module.span, "E2310")

    # One discretization step per (operator, particle list), placed after the neighbor list.
    needed: dict[tuple[str, str], list[str]] = {}
    for r in rhs:
        for sl in r.slots:
            needed.setdefault((sl.op, r.target), []).append(sl.field)
    for (op, lname), flds in needed.items():
        nls = [s for s in steps if s.kind == "create-neighlist" and s.node.plist == lname]
        if not nls:
            raise LoweringError(
                f"'{op}' on '{lname}' needs a neighbor list; add create_neighlist({lname}, cutoff)",
                module.span, "E2311",
            )
        d = PlanStep("discretize", None, lname, auto=True)
        d.rhs_slot_key = op
        d.extra_nl = nls[0].node.name
        d.op = op
        d.fields = tuple(dict.fromkeys(flds))
        steps.insert(steps.index(nls[0]) + 1, d)

    for st in steps:
        if st.kind != "discretize":
            st.rhs_slot_key = st.extra_nl = None
        st.defs, st.uses = _defs_uses(st, checked)
    steps = _toposort(steps)
    steps = _insert_bc(steps, checked)
    return ExecutionPlan(module, checked, steps, rhs)


def _toposort(steps: list[PlanStep]) -> list[PlanStep]:
    """Kahn's algorithm, breaking ties by source position so order is stable."""
    n = len(steps)
    first_def: dict[str, int] = {}
    for i, st in enumerate(steps):
        for d in st.defs:
            first_def.setdefault(d, i)
    succ = [set() for _ in range(n)]
    indeg = [0] * n
    for i, st in enumerate(steps):
        for u in st.uses:
            j = first_def.get(u)
            if j is not None and j != i and i not in succ[j]:
                succ[j].add(i)
                indeg[i] += 1
    heap = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        i = heapq.heappop(heap)
        order.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(heap, j)
    if len(order) != n:
        stuck = [steps[i] for i in range(n) if i not in order]
        span = next((s.node.span for s in stuck if s.node is not None), Span(0, 0))
        raise LoweringError("cyclic dependency between module-level steps", span, "E2312")
    return [steps[i] for i in order]


def lower(checked: CheckResult) -> ExecutionPlan:
    if isinstance(checked, ExecutionPlan):
        raise LoweringError("plan is already lowered", checked.module.span, "E2309")
    module = checked.module
    taken = {p.name for p in module.params} | set(checked.fields) | set(checked.lists)
    taken |= {s.name for s in module.statements if isinstance(s, N.VarDecl)}
    rhs = [rewrite_pla_to_pa(r, taken) for r in extract_rhs(checked)]
    return build_plan(checked, rhs)


# ---------------------------------------------------------------- IR dump

def _step_lines(st: PlanStep, depth: int) -> list[str]:
    ind = "  " * depth
    s = st.node
    auto = "  [inserted]" if st.auto else ""
    if st.kind == "setup":
        head = (
            f"setup {s.name} dim={format_expr(s.ndim)} box=[{format_expr(s.lo)}, {format_expr(s.hi)}] bc={s.boundary}"
        )
    elif st.kind == "create-particles":
        head = f"create-particles {s.name} on {s.topology} {s.mode} {format_expr(s.count)}"
    elif st.kind == "load-particles":
        cols = ", ".join(c.prop + (f"[{c.component}]" if c.component is not None else "") for c in s.columns)
        head = f'load-particles {s.name} on {s.topology} from "{s.path}" columns [{cols}]'
    elif st.kind == "create-neighlist":
        skin = f" skin={format_expr(s.skin)}" if s.skin is not None else ""
        head = f"create-neighlist {s.name} on {s.plist} cutoff={format_expr(s.cutoff)}{skin}"
    elif st.kind == "discretize":
        head = f"discretize {st.op} on {st.target} via {st.extra_nl} kernel=pse fields=[{', '.join(st.fields)}]"
    elif st.kind == "timeloop":
        head = f"timeloop {s.var} from {format_expr(s.start)} to {format_expr(s.end)} step {format_expr(s.step)}"
    elif st.kind == "rhs-integrate":
        r = st.rhs
        slots = ", ".join(f"{sl.name}={sl.op}({sl.field})" for sl in r.slots)
        head = (
            f"rhs-integrate {r.target} using {r.integrator} state=[{', '.join(r.writes)}] "
            f"reads=[{', '.join(sorted(r.reads))}] slots=[{slots}]"
        )
        lines = [ind + head, f"{ind}  foreach {r.loop_var} in {r.target}"]
        for a in r.body:
            lines.append(f"{ind}    {format_expr(a.target)} = {format_expr(a.value)}")
        return lines
    elif st.kind == "kernel":
        k = st.kernel
        head = f"kernel foreach {s.var} in {s.source} writes=[{', '.join(sorted(k.writes))}]"
        lines = [ind + head]
        for b in s.body:
            lines.extend("  " * (depth + 1) + x for x in format_stmt(b, 0))
        return lines
    elif st.kind == "apply-bc":
        head = f"apply-bc {st.target}{auto}"
    elif st.kind == "remap-neighbors":
        head = f"remap-neighbors {st.target}{auto}"
    elif st.kind == "io-write":
        head = f"io-write {s.plist} [{', '.join(s.props)}]"
    elif st.kind == "let":
        return [ind + "let " + x.strip() for x in format_stmt(s, 0)[:1]] + [
            ind + "    " + x for x in format_stmt(s, 0)[1:]
        ]
    else:
        head = st.kind
    lines = [ind + head]
    for c in st.children:
        lines.extend(_step_lines(c, depth + 1))
    return lines


def emit_ir(plan: ExecutionPlan) -> str:
    lines = [f"plan {plan.module.name}"]
    for st in plan.steps:
        lines.extend(_step_lines(st, 1))
    return "\n".join(lines) + "\n"
