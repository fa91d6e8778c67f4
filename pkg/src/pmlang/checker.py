"""Type and dimension checking of expressions, statements and modules.

One pass computes annotated types [τ; δ].  With ``dims=False`` every
dimension is treated as ∅, which reduces the pass to plain type inference.
An expression that fails gets the error type; exactly one diagnostic is
reported, at the innermost node whose own rule fails, and enclosing nodes
stay silent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import typesys as T
from .diagnostics import CompileError, Diagnostic, Severity, Span, sort_diagnostics
from .dimsys import EMPTY, AnnotatedType, Dimension, DimensionTable, dim_infer, error_type
from .frontend import nodes as N
from .frontend.context import validate_context

ERR = error_type()

_SCALARS = {"int": T.INT, "real": T.REAL, "bool": T.BOOL, "string": T.STRING}
_OPAQUE = {"particle": T.PARTICLE, "displacement": T.DISPLACEMENT, "boundary": T.BOUNDARY}

RULE_NAMES = {"&&": "BinLog", "||": "BinLog"}
for _op in T.REL_OPS:
    RULE_NAMES[_op] = "BinRel"
for _op in T.ARITH_OPS:
    RULE_NAMES[_op] = "BinAri"

# Builtin variables visible everywhere.  `random` draws a fresh uniform
# number in [0, 1) each time it is evaluated.
BUILTINS = {"random": AnnotatedType(T.REAL)}


def lattice_of(t: N.TypeExpr) -> T.LatticeType:
    if t.name in _SCALARS:
        return _SCALARS[t.name]
    if t.name in _OPAQUE:
        return _OPAQUE[t.name]
    if t.name == "vector":
        return T.Vector(lattice_of(t.element))
    if t.name == "matrix":
        return T.Matrix(lattice_of(t.element))
    if t.name in ("field", "property"):
        return T.FieldType(lattice_of(t.element), t.arity)
    raise ValueError(t.name)


@dataclass
class FieldInfo:
    name: str
    type: T.FieldType
    dim: Dimension
    lists: set = field(default_factory=set)
    span: Span = Span(0, 0)


@dataclass
class ListInfo:
    name: str
    topology: str
    ndim: int
    fields: dict = field(default_factory=dict)  # name -> FieldInfo
    created: bool = False


@dataclass
class TopologyInfo:
    name: str
    ndim: int
    length_dim: Dimension


@dataclass
class Ctx:
    """Where an expression sits: inside a deqn body, and which particle variables are live."""

    deqn_list: Optional[str] = None


@dataclass
class CheckResult:
    module: N.SourceModule
    diagnostics: list
    types: dict  # id(expr) -> AnnotatedType
    dims: DimensionTable
    fields: dict
    lists: dict
    topologies: dict
    neighlists: dict  # name -> particle list
    params: dict  # name -> (AnnotatedType, ParamDecl)
    time_dim: Dimension = EMPTY

    @property
    def ok(self) -> bool:
        return not any(d.is_error for d in self.diagnostics)

    def type_of(self, expr) -> AnnotatedType:
        return self.types[id(expr)]


class Checker:
    def __init__(self, dims: bool = True, table: DimensionTable | None = None):
        self.use_dims = dims
        self.table = table or DimensionTable()
        self.diags: list[Diagnostic] = []
        self.types: dict[int, AnnotatedType] = {}
        self.fields: dict[str, FieldInfo] = {}
        self.lists: dict[str, ListInfo] = {}
        self.topologies: dict[str, TopologyInfo] = {}
        self.neighlists: dict[str, str] = {}
        self.params: dict = {}
        self.time_dim: Dimension = EMPTY

    # ------------------------------------------------------------ reporting
    def error(self, code: str, msg: str, span: Span):
        self.diags.append(Diagnostic(code, msg, span))
        return ERR

    def warn(self, code: str, msg: str, span: Span):
        self.diags.append(Diagnostic(code, msg, span, Severity.WARNING))

    def dimstr(self, d: Dimension) -> str:
        return self.table.pretty(d)

    def dim_of(self, d: Optional[N.DimExpr]) -> Dimension:
        if d is None or not self.use_dims:
            return EMPTY
        try:
            return self.table.expand(d)
        except CompileError as e:
            self.diags.append(e.diagnostic())
            return EMPTY

    def record(self, e: N.Expr, at: AnnotatedType) -> AnnotatedType:
        self.types[id(e)] = at
        return at

    # ---------------------------------------------------------- expressions
    def infer(self, e: N.Expr, env: T.TypingEnv, ctx: Ctx = Ctx()) -> AnnotatedType:
        return self.record(e, self._infer(e, env, ctx))

    def _infer(self, e: N.Expr, env: T.TypingEnv, ctx: Ctx) -> AnnotatedType:
        if isinstance(e, N.Literal):
            return AnnotatedType({"int": T.INT, "real": T.REAL, "bool": T.BOOL, "string": T.STRING}[e.kind])
        if isinstance(e, N.Var):
            b = env.lookup(e.name)
            if b is None:
                if e.name in BUILTINS:
                    return BUILTINS[e.name]
                return self.error("E3001", f"Var: unknown variable '{e.name}'", e.span)
            return b.type
        if isinstance(e, N.Paren):
            return self.infer(e.expr, env, ctx)
        if isinstance(e, N.Annotated):
            inner = self.infer(e.expr, env, ctx)
            if inner.is_error:
                return ERR
            want = self.dim_of(e.dim)
            if inner.dim.is_empty or inner.dim == want:
                return AnnotatedType(inner.type, want)
            return self.error(
                "E4006",
                f"ErrDim: annotation {{{self.dimstr(want)}}} conflicts with inferred dimension {self.dimstr(inner.dim)}",
                e.span,
            )
        if isinstance(e, N.Unary):
            return self._unary(e, env, ctx)
        if isinstance(e, N.Binary):
            return self._binary(e, env, ctx)
        if isinstance(e, N.Access):
            return self._access(e, env, ctx)
        if isinstance(e, N.Index):
            return self._index(e, env, ctx)
        if isinstance(e, N.DiffOp):
            return self._diffop(e, env, ctx)
        if isinstance(e, N.VectorLit):
            return self._vector(e, env, ctx)
        raise TypeError(f"unknown expression node {type(e).__name__}")

    def _unary(self, e: N.Unary, env, ctx) -> AnnotatedType:
        inner = self.infer(e.operand, env, ctx)
        if inner.is_error:
            return ERR
        t = T.unary_result(e.op, inner.type)
        if t is None:
            return self.error("E3002", f"ErrUnary: '{e.op}' undefined for {inner.type}", e.span)
        d = dim_infer("neg" if e.op == "-" else e.op, inner.dim)
        if d is None:
            return self.error(
                "E4003", f"ErrDim: sqrt of {self.dimstr(inner.dim)} has a fractional exponent", e.span
            )
        return AnnotatedType(t, d)

    @staticmethod
    def literal_exponent(e: N.Expr) -> Optional[int]:
        """Integer value of an exponent written as a (possibly negated or parenthesized) literal."""
        sign = 1
        while True:
            if isinstance(e, N.Paren):
                e = e.expr
            elif isinstance(e, N.Unary) and e.op == "-":
                sign, e = -sign, e.operand
            else:
                break
        if isinstance(e, N.Literal) and e.kind == "int":
            return sign * e.value
        return None

    def _binary(self, e: N.Binary, env, ctx) -> AnnotatedType:
        left = self.infer(e.left, env, ctx)
        right = self.infer(e.right, env, ctx)
        if left.is_error or right.is_error:
            return ERR
        t = T.binary_result(e.op, left.type, right.type)
        if t is None:
            code = {"BinLog": "E3004", "BinRel": "E3005"}.get(RULE_NAMES[e.op], "E3003")
            return self.error(
                code, f"ErrBin: '{e.op}' undefined for {left.type} and {right.type} ({RULE_NAMES[e.op]})", e.span
            )
        if e.op == "^":
            n = self.literal_exponent(e.right)
            if n is not None and n < 0 and T.INT in (left.type, getattr(left.type, "elem", None)):
                self.warn("W3001", "integer base raised to a negative exponent yields a real value at run time", e.span)
            if not right.dim.is_empty:
                return self.error("E4002", f"ErrDim: exponent must be dimensionless, found {self.dimstr(right.dim)}", e.span)
            d = dim_infer("^", left.dim, n)
            if d is None:
                return self.error(
                    "E4002",
                    f"ErrDim: base of dimension {self.dimstr(left.dim)} needs an integer literal exponent",
                    e.span,
                )
            return AnnotatedType(t, d)
        d = dim_infer(e.op, left.dim, right.dim)
        if d is None:
            return self.error(
                "E4001",
                f"ErrDim: I_{e.op}({self.dimstr(left.dim)}, {self.dimstr(right.dim)}) is undefined",
                e.span,
            )
        return AnnotatedType(t, d)

    def _field_for(self, name: str, env: T.TypingEnv):
        b = env.lookup(name)
        if b is None or not isinstance(b.type.type, T.FieldType):
            return None
        return b.type

    def _access(self, e: N.Access, env, ctx) -> AnnotatedType:
        target = self.infer(e.target, env, ctx)
        if target.is_error:
            return ERR
        owner = None
        if isinstance(e.target, N.Var):
            b = env.lookup(e.target.name)
            owner = b.owner if b is not None else None
        if target.type == T.PARTICLE:
            f = self._field_for(e.name, env)
            if f is None:
                return self.error("E3006", f"PartAcc: '{e.name}' is not a field or property", e.span)
            if owner is not None and owner in self.lists and e.name not in self.lists[owner].fields:
                return self.error("E3006", f"PartAcc: '{e.name}' is not declared on particle list '{owner}'", e.span)
            return AnnotatedType(T.element_type(f.type), f.dim)
        if target.type == T.PARTICLE_LIST:
            lname = e.target.name if isinstance(e.target, N.Var) else None
            f = self._field_for(e.name, env)
            if f is None or (lname in self.lists and e.name not in self.lists[lname].fields):
                return self.error("E3006", f"PartAcc: '{e.name}' is not declared on particle list '{lname}'", e.span)
            if ctx.deqn_list is not None:
                return AnnotatedType(T.element_type(f.type), f.dim)
            return f
        return self.error("E3007", f"PartAcc: '->' needs a particle or particle list, found {target.type}", e.span)

    def _index(self, e: N.Index, env, ctx) -> AnnotatedType:
        target = self.infer(e.target, env, ctx)
        idx = self.infer(e.index, env, ctx)
        if target.is_error or idx.is_error:
            return ERR
        if not isinstance(target.type, (T.Vector, T.Matrix)):
            return self.error("E3009", f"VecAcc: {target.type} cannot be indexed", e.span)
        if idx.type != T.INT:
            rule = "MatAcc" if isinstance(target.type, T.Matrix) else "VecAcc"
            return self.error("E3008", f"{rule}: index must be Integer, found {idx.type}", e.span)
        if not idx.dim.is_empty:
            return self.error("E4013", f"ErrDim: index must be dimensionless, found {self.dimstr(idx.dim)}", e.span)
        lit = self.literal_exponent(e.index)
        if lit is not None and lit < 0:
            return self.error("E3008", "VecAcc: index must be non-negative", e.span)
        if isinstance(target.type, T.Matrix):
            return AnnotatedType(T.Vector(target.type.elem), target.dim)
        return AnnotatedType(target.type.elem, target.dim)

    def _diffop(self, e: N.DiffOp, env, ctx) -> AnnotatedType:
        inner = self.infer(e.operand, env, ctx)
        if inner.is_error:
            return ERR
        op = e.operand
        while isinstance(op, N.Paren):
            op = op.expr
        is_pla = (
            isinstance(op, N.Access)
            and isinstance(op.target, N.Var)
            and (b := env.lookup(op.target.name)) is not None
            and b.type.type == T.PARTICLE_LIST
        )
        if not is_pla:
            return self.error("E3019", "DiffOp: laplacian applies to a particle-list field such as c->U", e.span)
        t = inner.type
        if isinstance(t, T.FieldType):
            # outside a deqn body c->U names the whole field; the context
            # check reports the misplaced operator, so type it per element
            t = T.element_type(t)
        if not (t in (T.INT, T.REAL) or (isinstance(t, T.Vector) and t.elem in (T.INT, T.REAL))):
            return self.error("E3019", f"DiffOp: laplacian undefined for {t}", e.span)
        rt = T.REAL if t in (T.INT, T.REAL) else T.Vector(T.REAL)
        lname = op.target.name
        pos_dim = EMPTY
        if lname in self.lists:
            pos_dim = self.topologies[self.lists[lname].topology].length_dim
        return AnnotatedType(rt, inner.dim / pos_dim ** 2)

    def _vector(self, e: N.VectorLit, env, ctx) -> AnnotatedType:
        if not e.elements:
            return self.error("E3016", "vector literal needs at least one element", e.span)
        ts = [self.infer(x, env, ctx) for x in e.elements]
        if any(t.is_error for t in ts):
            return ERR
        elem = ts[0].type
        for t in ts[1:]:
            elem = T.lcs(elem, t.type)
            if elem is None:
                return self.error("E3016", f"vector literal elements have no common type ({ts[0].type}, {t.type})", e.span)
        if not all(t.dim == ts[0].dim for t in ts):
            return self.error("E4012", "ErrDim: vector literal elements differ in dimension", e.span)
        if isinstance(elem, T.Vector):
            return AnnotatedType(T.Matrix(elem.elem), ts[0].dim)
        if elem not in (T.INT, T.REAL, T.BOOL, T.STRING):
            return self.error("E3016", f"vector literal elements of type {elem} are not allowed", e.span)
        return AnnotatedType(T.Vector(elem), ts[0].dim)

    # ------------------------------------------------------------ statements
    def check_assignable(self, got: AnnotatedType, want: AnnotatedType, code_t, code_d, rule, span) -> bool:
        if got.is_error or want.is_error:
            return False
        if not T.subtype(got.type, want.type):
            self.error(code_t, f"{rule}: value of type {got.type} is not a subtype of {want.type}", span)
            return False
        if got.dim != want.dim:
            self.error(code_d, f"ErrDim: {rule} expects dimension {self.dimstr(want.dim)}, found {self.dimstr(got.dim)}", span)
            return False
        return True

    def declare(self, env: T.TypingEnv, name: str, binding: T.Binding, span: Span) -> T.TypingEnv:
        if env.in_top_scope(name):
            self.error("E3012", f"'{name}' is already declared in this scope", span)
            return env
        return env.bind(name, binding)

    def check_block(self, stmts, env: T.TypingEnv, ctx: Ctx) -> T.TypingEnv:
        for s in stmts:
            env = self.check_stmt(s, env, ctx)
        return env

    def expect_scalar(self, e: N.Expr, env, want, what: str, dim=None):
        at = self.infer(e, env)
        if at.is_error:
            return at
        if not T.subtype(at.type, want):
            self.error("E3021", f"{what} must be {want}, found {at.type}", e.span)
            return ERR
        if dim is not None and at.dim != dim:
            self.error("E4011", f"ErrDim: {what} must have dimension {self.dimstr(dim)}, found {self.dimstr(at.dim)}", e.span)
            return ERR
        return at

    def check_stmt(self, s: N.Stmt, env: T.TypingEnv, ctx: Ctx = Ctx()) -> T.TypingEnv:
        if isinstance(s, N.VarDecl):
            return self._var_decl(s, env, ctx)
        if isinstance(s, N.Assign):
            self._assign(s, env, ctx)
            return env
        if isinstance(s, N.ExprStmt):
            self.infer(s.expr, env, ctx)
            return env
        if isinstance(s, N.If):
            c = self.infer(s.cond, env, ctx)
            if not c.is_error and c.type != T.BOOL:
                self.error("E3013", f"if condition must be Boolean, found {c.type}", s.cond.span)
            self.check_block(s.then, env.push(), ctx)
            self.check_block(s.orelse, env.push(), ctx)
            return env
        if isinstance(s, N.Foreach):
            return self._foreach(s, env, ctx)
        if isinstance(s, N.Timeloop):
            return self._timeloop(s, env, ctx)
        if isinstance(s, N.Deqn):
            self._deqn(s, env)
            return env
        if isinstance(s, N.CreateTopology):
            return self._topology(s, env)
        if isinstance(s, (N.CreateParticles, N.LoadParticles)):
            return self._particles(s, env)
        if isinstance(s, N.CreateNeighlist):
            return self._neighlist(s, env)
        if isinstance(s, N.ApplyBC):
            self.require_list(s.plist, s.span)
            return env
        if isinstance(s, N.UpdateNeighlist):
            if s.neighlist not in self.neighlists:
                self.error("E3014", f"unknown neighbor list '{s.neighlist}'", s.span)
            return env
        if isinstance(s, N.IoWrite):
            if self.require_list(s.plist, s.span):
                for p in s.props:
                    if p not in self.lists[s.plist].fields:
                        self.error("E3006", f"'{p}' is not declared on particle list '{s.plist}'", s.span)
            return env
        raise TypeError(f"unknown statement {type(s).__name__}")

    def require_list(self, name: str, span: Span) -> bool:
        if name not in self.lists or not self.lists[name].created:
            self.error("E3014", f"unknown particle list '{name}'", span)
            return False
        return True

    def _var_decl(self, s: N.VarDecl, env, ctx):
        declared = AnnotatedType(lattice_of(s.type), self.dim_of(s.dim))
        if s.on_list is not None:
            # Field declarations were registered up front; only the name binding happens here.
            if s.name in self.fields and s.on_list in self.fields[s.name].lists:
                if not env.in_top_scope(s.name):
                    env = env.bind(s.name, T.Binding(declared, "field"))
            return env
        if s.type.name in ("field", "property"):
            self.error("E3021", "field declarations need 'on <particle list>'", s.span)
        if s.init is not None:
            got = self.infer(s.init, env, ctx)
            self.check_assignable(got, declared, "E3010", "E4004", "VarInit", s.span)
        return self.declare(env, s.name, T.Binding(declared, "var"), s.span)

    def _assign(self, s: N.Assign, env, ctx):
        tgt = s.target
        if isinstance(tgt, N.Var):
            b = env.lookup(tgt.name)
            if b is None:
                if tgt.name in BUILTINS:
                    self.error("E3015", f"builtin '{tgt.name}' cannot be assigned", tgt.span)
                else:
                    self.error("E3001", f"Var: unknown variable '{tgt.name}'", tgt.span)
                self.infer(s.value, env, ctx)
                return
            if b.kind not in ("var",):
                self.error("E3015", f"{b.kind} '{tgt.name}' cannot be assigned", tgt.span)
                self.infer(s.value, env, ctx)
                return
            want = self.record(tgt, b.type)
        else:
            want = self.infer(tgt, env, ctx)
        got = self.infer(s.value, env, ctx)
        self.check_assignable(got, want, "E3011", "E4005", "Assign", s.span)

    def _foreach(self, s: N.Foreach, env, ctx):
        inner = env.push()
        if s.is_neighbor_loop:
            pb = env.lookup(s.of)
            if s.source not in self.neighlists:
                self.error("E3014", f"unknown neighbor list '{s.source}'", s.span)
                owner = None
            else:
                owner = self.neighlists[s.source]
            if pb is None or pb.type.type != T.PARTICLE:
                self.error("E3022", f"neighbors() needs a particle variable, '{s.of}' is not one", s.span)
            elif owner is not None and pb.owner is not None and pb.owner != owner:
                self.error("E3022", f"'{s.of}' iterates '{pb.owner}' but '{s.source}' belongs to '{owner}'", s.span)
        else:
            owner = s.source if self.require_list(s.source, s.span) else None
        inner = inner.bind(s.var, T.Binding(AnnotatedType(T.PARTICLE), "particle", owner))
        self.check_block(s.body, inner, ctx)
        return env

    def _timeloop(self, s: N.Timeloop, env, ctx):
        a = self.infer(s.start, env)
        b = self.infer(s.end, env)
        dt = self.infer(s.step, env)
        tdim = EMPTY
        parts = [(x, at) for x, at in ((s.start, a), (s.end, b), (s.step, dt)) if not at.is_error]
        for x, at in parts:
            if not T.subtype(at.type, T.REAL):
                self.error("E3021", f"timeloop bounds must be numeric, found {at.type}", x.span)
        if parts:
            tdim = parts[-1][1].dim
            for x, at in parts:
                if at.dim != tdim:
                    self.error(
                        "E4011",
                        f"ErrDim: timeloop bounds and step must share one dimension, found {self.dimstr(at.dim)} and {self.dimstr(tdim)}",
                        x.span,
                    )
                    break
        self.time_dim = tdim
        inner = env.push().bind(s.var, T.Binding(AnnotatedType(T.REAL, tdim), "loop"))
        self.check_block(s.body, inner, ctx)
        return env

    def _deqn(self, s: N.Deqn, env):
        if not self.require_list(s.target, s.span):
            return
        ctx = Ctx(deqn_list=s.target)
        for eq in s.equations:
            lhs = eq.lhs
            if not (
                isinstance(lhs, N.Access)
                and isinstance(lhs.target, N.Var)
                and lhs.target.name == s.target
                and lhs.name in self.lists[s.target].fields
            ):
                self.error("E3017", f"equation must define d_dt({s.target}->field) for a field on '{s.target}'", eq.span)
                self.infer(eq.rhs, env, ctx)
                continue
            if lhs.name == "pos":
                self.error("E3017", "positions cannot be evolved by a deqn block", eq.span)
                continue
            want = self.infer(lhs, env, ctx)
            got = self.infer(eq.rhs, env, ctx)
            if want.is_error or got.is_error:
                continue
            want = AnnotatedType(want.type, want.dim / self.time_dim)
            self.check_assignable(got, want, "E3018", "E4010", "deqn", eq.span)

    def _topology(self, s: N.CreateTopology, env):
        nd = s.ndim
        ndim = nd.value if isinstance(nd, N.Literal) and nd.kind == "int" else None
        self.expect_scalar(nd, env, T.INT, "topology dimension")
        if ndim not in (2, 3):
            self.error("E3020", "topology dimension must be the integer literal 2 or 3", nd.span)
            ndim = 2
        lo = self.expect_scalar(s.lo, env, T.REAL, "domain lower bound")
        hi = self.expect_scalar(s.hi, env, T.REAL, "domain upper bound")
        ldim = EMPTY
        if not lo.is_error and not hi.is_error:
            if lo.dim != hi.dim:
                self.error("E4011", "ErrDim: domain bounds differ in dimension", s.hi.span)
            ldim = hi.dim
        self.topologies[s.name] = TopologyInfo(s.name, ndim, ldim)
        return self.declare(env, s.name, T.Binding(AnnotatedType(T.TOPOLOGY), "topology"), s.span)

    def _particles(self, s, env):
        topo = self.topologies.get(s.topology)
        if topo is None:
            self.error("E3014", f"unknown topology '{s.topology}'", s.span)
            topo = self.topologies[s.topology] = TopologyInfo(s.topology, 2, EMPTY)
        info = self.lists.get(s.name)
        if info is None:  # registered during the field pre-pass when fields exist
            info = self.lists[s.name] = ListInfo(s.name, topo.name, topo.ndim)
        elif info.created:
            self.error("E3012", f"'{s.name}' is already declared", s.span)
        info.topology, info.ndim, info.created = topo.name, topo.ndim, True
        pos = self._register_field("pos", T.FieldType(T.REAL, topo.ndim), topo.length_dim, s.name, s.span, builtin=True)
        if isinstance(s, N.CreateParticles):
            self.expect_scalar(s.count, env, T.INT, "particle count")
        else:
            for c in s.columns:
                f = info.fields.get(c.prop)
                if f is None:
                    self.error("E3006", f"'{c.prop}' is not declared on particle list '{s.name}'", c.span)
                    continue
                if f.type.elem not in (T.INT, T.REAL):
                    self.error("E3021", f"column '{c.prop}' must be numeric", c.span)
                elif c.component is None and f.type.arity != 1:
                    self.error("E3021", f"'{c.prop}' has {f.type.arity} components; name one with [i]", c.span)
                elif c.component is not None and not 0 <= c.component < f.type.arity:
                    self.error("E3021", f"component {c.component} out of range for '{c.prop}'", c.span)
        env = self.declare(env, s.name, T.Binding(AnnotatedType(T.PARTICLE_LIST), "plist"), s.span)
        if pos is not None and not env.in_top_scope("pos"):
            env = env.bind("pos", T.Binding(AnnotatedType(pos.type, pos.dim), "field"))
        return env

    def _neighlist(self, s: N.CreateNeighlist, env):
        if self.require_list(s.plist, s.span):
            self.neighlists[s.name] = s.plist
            ldim = self.topologies[self.lists[s.plist].topology].length_dim
        else:
            ldim = None
        self.expect_scalar(s.cutoff, env, T.REAL, "cutoff radius", ldim)
        if s.skin is not None:
            self.expect_scalar(s.skin, env, T.REAL, "skin", ldim)
        if s.name in self.neighlists and self.neighlists[s.name] != s.plist:
            self.error("E3012", f"'{s.name}' is already declared", s.span)
        return env

    def _register_field(self, name, ftype, dim, plist, span, builtin=False) -> Optional[FieldInfo]:
        existing = self.fields.get(name)
        if existing is not None:
            if existing.type != ftype or existing.dim != dim:
                self.error("E3012", f"'{name}' is already declared with type {existing.type}", span)
                return None
            if plist in existing.lists and not builtin:
                self.error("E3012", f"'{name}' is already declared on '{plist}'", span)
                return existing
            existing.lists.add(plist)
        else:
            existing = self.fields[name] = FieldInfo(name, ftype, dim, {plist}, span)
        info = self.lists.setdefault(plist, ListInfo(plist, "", 2))
        info.fields[name] = existing
        return existing

    # --------------------------------------------------------------- module
    def check_module(self, m: N.SourceModule, base_dir: Path | None = None) -> CheckResult:
        self.diags.extend(validate_context(m))
        self._load_dims(m, base_dir)
        env = T.TypingEnv()

        for p in m.params:
            at = AnnotatedType(lattice_of(p.type), self.dim_of(p.dim))
            if at.type not in (T.INT, T.REAL, T.BOOL, T.STRING):
                self.error("E3021", f"parameter '{p.name}' must have a scalar type", p.span)
            if p.default is not None:
                got = self.infer(p.default, env)
                if not got.is_error and not T.subtype(got.type, at.type):
                    self.error("E3010", f"VarInit: default of type {got.type} is not a subtype of {at.type}", p.span)
            if p.range is not None and at.type not in (T.INT, T.REAL):
                self.error("E3021", f"range annotation on non-numeric parameter '{p.name}'", p.range.span)
            if p.range is not None and p.default is not None and isinstance(p.default, N.Literal) and p.default.kind in ("int", "real"):
                if not p.range.contains(float(p.default.value)):
                    self.error("E5001", f"default of '{p.name}' lies outside {p.range}", p.default.span)
            self.params[p.name] = (at, p)
            env = self.declare(env, p.name, T.Binding(at, "param"), p.span)

        # Field and property declarations are visible to the whole module.
        list_names = {s.name for s in m.statements if isinstance(s, (N.CreateParticles, N.LoadParticles))}
        for s in N.walk_statements(m.statements):
            if isinstance(s, N.VarDecl) and s.on_list is not None:
                if s.on_list not in list_names:
                    self.error("E3014", f"unknown particle list '{s.on_list}'", s.span)
                    continue
                if s.init is not None:
                    self.error("E3021", "field declarations cannot have an initializer; use a foreach", s.span)
                ft = lattice_of(s.type)
                if not isinstance(ft, T.FieldType):
                    self.error("E3021", f"only field or property types can be declared on a particle list", s.span)
                    continue
                if ft.elem not in (T.INT, T.REAL, T.BOOL):
                    self.error("E3021", f"field element type must be int, real or bool, found {ft.elem}", s.span)
                    continue
                if s.name == "pos":
                    self.error("E3012", "'pos' is a builtin property", s.span)
                    continue
                self._register_field(s.name, ft, self.dim_of(s.dim), s.on_list, s.span)
        for info in self.fields.values():
            if not env.in_top_scope(info.name):
                env = env.bind(info.name, T.Binding(AnnotatedType(info.type, info.dim), "field"))

        self.check_block(m.statements, env, Ctx())
        return CheckResult(
            m,
            sort_diagnostics(self.diags),
            self.types,
            self.table,
            self.fields,
            self.lists,
            self.topologies,
            self.neighlists,
            self.params,
            self.time_dim,
        )

    def _load_dims(self, m: N.SourceModule, base_dir: Path | None):
        if not self.use_dims:
            return
        try:
            if m.dim_file is not None:
                from .frontend.parser import parse_dim_file

                path = Path(m.dim_file)
                if not path.is_absolute() and base_dir is not None:
                    path = base_dir / path
                decls = parse_dim_file(path.read_text(encoding="utf-8"))
            else:
                decls = m.dimensions
            self.table = DimensionTable.from_nodes(decls)
            self.table.check_all()
        except OSError as e:
            raise DimFileError(f"cannot read dimension file: {e}", m.span) from e
        except CompileError as e:
            self.diags.append(e.diagnostic())
            self.table = DimensionTable()


class DimFileError(CompileError):
    code = "E2201"


def infer(expr: N.Expr, env: T.TypingEnv):
    """Lattice type of ``expr`` plus diagnostics; dimensions are ignored."""
    c = Checker(dims=False)
    at = c.infer(expr, env)
    return at.type, c.diags


def infer_annotated(expr: N.Expr, env: T.TypingEnv, table: DimensionTable | None = None):
    """Annotated type of ``expr`` plus diagnostics; also returns per-node types."""
    c = Checker(dims=True, table=table)
    at = c.infer(expr, env)
    return at, c.diags, c.types


def check_stmt(stmt: N.Stmt, env: T.TypingEnv, dims: bool = False):
    c = Checker(dims=dims)
    new_env = c.check_stmt(stmt, env)
    return new_env, c.diags


def check_module(m: N.SourceModule, dims: bool = True, base_dir: Path | None = None) -> CheckResult:
    return Checker(dims=dims).check_module(m, base_dir)
