"""Plan interpreter.

Particle loops run in lockstep: every statement of a ``foreach`` body is
evaluated for all particles at once as numpy arrays.  Each value carries a
leading lane axis of length n (one lane per particle or neighbor pair) or 1
(the same value in every lane).  ``if`` inside a loop narrows the active
lanes with a mask; a neighbor loop opens one lane per (p, q) pair.
"""

from __future__ import annotations

import json
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .. import typesys as T
from ..checker import lattice_of
from ..diagnostics import NO_SPAN, CompileError
from ..frontend import nodes as N
from ..lowering import RATE_PREFIX, ExecutionPlan, PlanStep, RhsProgram, _is_accumulation, strip_parens
from .integrate import integrate
from .neighbors import CellList, build_cell_list, neighbor_pairs
from .particles import (
    DomainBox,
    IoError,
    NonFinite,
    ParticleSet,
    RuntimeFault,
    apply_bc,
    create_grid,
    create_random,
    load_particles,
)
from .pse import PseOperator, pse_matrix


class ParamError(CompileError):
    code = "E5001"


class EvalError(RuntimeFault):
    code = "E6006"


DEFAULT_EVERY = 100


@dataclass
class RunOptions:
    out_dir: Optional[Path] = None  # no snapshot files when None
    every: int = DEFAULT_EVERY
    seed: int = 0
    threads: int = 1
    base_dir: Optional[Path] = None  # resolves relative data paths
    renormalize: bool = True
    on_step: Optional[Callable] = None  # called as on_step(step, t, interpreter)
    write_stats: bool = True


@dataclass
class RunResult:
    particles: dict
    variables: dict
    steps: int
    t: float
    stats: dict
    snapshots: list = field(default_factory=list)


def _dtype(t: T.LatticeType):
    base = t
    while isinstance(base, (T.Vector, T.Matrix, T.FieldType)):
        base = base.elem
    return {T.INT: np.int64, T.BOOL: np.bool_, T.STRING: object}.get(base, np.float64)


# ----------------------------------------------------------------- frames

@dataclass
class PVar:
    plist: str
    idx: np.ndarray  # particle index per lane
    own: bool  # lanes hold distinct particles that this frame may write
    ref: Optional[np.ndarray] = None  # partner particle per lane, for minimum-image positions

    def take(self, mask):
        return PVar(self.plist, self.idx[mask], self.own, None if self.ref is None else self.ref[mask])


class Frame:
    __slots__ = ("n", "vars", "pvars", "parent", "gather")

    def __init__(self, n, parent=None, gather=None, pvars=None, vars=None):
        self.n = n
        self.parent = parent
        self.gather = gather  # lane -> parent lane; None broadcasts a single-lane parent
        self.pvars = pvars or {}
        self.vars = vars if vars is not None else {}

    def find(self, name):
        """(frame holding ``name``, lane index into it or None)."""
        f, idx = self, None
        broadcast = False
        while f is not None:
            if name in f.vars:
                return f, (None if broadcast else idx)
            if f.gather is None:
                broadcast = True
            elif not broadcast:
                idx = f.gather if idx is None else f.gather[idx]
            f = f.parent
        return None, None

    def masked(self, mask) -> "Frame":
        gather = None if self.gather is None else self.gather[mask]
        return Frame(
            int(mask.sum()),
            self.parent,
            gather,
            {k: v.take(mask) for k, v in self.pvars.items()},
            {k: v[mask] for k, v in self.vars.items()},
        )


def _lanes(v: np.ndarray, n: int) -> np.ndarray:
    return v if v.shape[0] == n else np.broadcast_to(v, (n,) + v.shape[1:])


def _scatter_add(arr, lanes, vals, sign):
    """arr[lanes] += sign * vals, summing repeated lanes in order."""
    if arr.dtype.kind != "f":
        (np.add if sign > 0 else np.subtract).at(arr, lanes, vals)
        return
    n = arr.shape[0]
    if arr.ndim == 1:
        tot = np.bincount(lanes, weights=vals, minlength=n)
        arr += tot if sign > 0 else -tot
        return
    flat = vals.reshape(vals.shape[0], -1)
    view = arr.reshape(n, -1)
    for j in range(flat.shape[1]):
        tot = np.bincount(lanes, weights=flat[:, j], minlength=n)
        view[:, j] += tot if sign > 0 else -tot


def _align(a, b):
    ra, rb = a.ndim, b.ndim
    if ra < rb:
        a = a.reshape(a.shape[:1] + (1,) * (rb - ra) + a.shape[1:])
    elif rb < ra:
        b = b.reshape(b.shape[:1] + (1,) * (ra - rb) + b.shape[1:])
    return a, b


_ARITH = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.true_divide}
_CMP = {"<": np.less, ">": np.greater, "<=": np.less_equal, ">=": np.greater_equal}


# ----------------------------------------------------------- interpreter

class Interpreter:
    def __init__(self, plan: ExecutionPlan, params: dict | None = None, options: RunOptions | None = None):
        self.plan = plan
        self.checked = plan.checked
        self.module = plan.module
        self.opts = options or RunOptions()
        self.rng = np.random.Generator(np.random.PCG64(self.opts.seed))
        self.top = Frame(1)
        self.boxes: dict[str, DomainBox] = {}
        self.particles: dict[str, ParticleSet] = {}
        self.nlists: dict[str, tuple[str, CellList]] = {}
        self.operators: dict[tuple[str, str], PseOperator] = {}
        self.overlay: dict[str, dict] = {}
        self._discretize_nl: dict[tuple[str, str], str] = {}
        self._acc_cache: dict[int, tuple] = {}
        self.decl_types: dict[str, T.LatticeType] = {}
        self.step = 0
        self.n_steps = 0
        self.t = 0.0
        self.stats: dict[str, float] = defaultdict(float)
        self.snapshots: list[Path] = []
        written = {s.plist for s in N.walk_statements(self.module.statements) if isinstance(s, N.IoWrite)}
        self.multi_list_output = len(written) > 1
        self.bind_params(params or {})

    # -------------------------------------------------------- parameters
    def bind_params(self, overrides: dict):
        declared = {p.name: p for p in self.module.params}
        for name in overrides:
            if name not in declared:
                raise ParamError(f"unknown parameter '{name}'", NO_SPAN, "E5002")
        for p in self.module.params:
            t = lattice_of(p.type)
            if p.name in overrides:
                value = self._coerce_param(p, t, overrides[p.name])
            elif p.default is not None:
                value = self.ev(p.default, self.top)
            else:
                raise ParamError(f"parameter '{p.name}' has no default and no value was given", p.span, "E5002")
            value = np.asarray(value).reshape(1).astype(_dtype(t))
            if p.range is not None and not p.range.contains(float(value[0])):
                raise ParamError(f"parameter '{p.name}' = {value[0]} lies outside {p.range}", p.span)
            self.top.vars[p.name] = value
            self.decl_types[p.name] = t

    @staticmethod
    def _coerce_param(p, t, raw):
        if not isinstance(raw, str):
            return raw
        text = raw.strip()
        try:
            if t == T.INT:
                return int(text)
            if t == T.REAL:
                return float(text)
            if t == T.BOOL:
                if text in ("true", "false"):
                    return text == "true"
                raise ValueError
        except ValueError:
            raise ParamError(f"parameter '{p.name}' expects {t}, got '{raw}'", p.span, "E5002") from None
        return text

    # -------------------------------------------------------- expressions
    def ev(self, e: N.Expr, fr: Frame) -> np.ndarray:
        m = getattr(self, "_ev_" + type(e).__name__)
        return m(e, fr)

    def _ev_Literal(self, e, fr):
        v = e.value
        if e.kind == "string":
            return np.array([v], dtype=object)
        return np.array([v])

    def _ev_Paren(self, e, fr):
        return self.ev(e.expr, fr)

    def _ev_Annotated(self, e, fr):
        return self.ev(e.expr, fr)

    def _ev_Var(self, e, fr):
        holder, idx = fr.find(e.name)
        if holder is not None:
            v = holder.vars[e.name]
            return v if idx is None else v[idx]
        if e.name == "random":
            return self.rng.random(fr.n)
        raise EvalError(f"'{e.name}' has no value here", e.span)

    def _store(self, plist: str) -> dict:
        ov = self.overlay.get(plist)
        ps = self.particles.get(plist)
        if ps is None:
            raise EvalError(f"particle list '{plist}' does not exist yet")
        return ov, ps

    def _prop(self, plist, name, span):
        ov, ps = self._store(plist)
        if ov is not None and name in ov:
            return ov[name]
        try:
            return ps.get(name)
        except RuntimeFault as exc:
            raise exc.located(span) from None

    def _ev_Access(self, e, fr):
        tgt = strip_parens(e.target)
        if not isinstance(tgt, N.Var):
            raise EvalError("'->' needs a particle or particle list on its left", e.span)
        pv = fr.pvars.get(tgt.name)
        if pv is None:
            if tgt.name in self.particles:  # whole-list access
                return self._prop(tgt.name, e.name, e.span)
            raise EvalError(f"'{tgt.name}' is not a particle here", e.span)
        arr = self._prop(pv.plist, e.name, e.span)
        if e.name == "pos" and pv.ref is not None:
            xp = arr[pv.ref]
            return xp - self.particles[pv.plist].box.minimum_image(xp - arr[pv.idx])
        return arr[pv.idx]

    def _ev_Index(self, e, fr):
        v = self.ev(e.target, fr)
        i = self.ev(e.index, fr)
        if v.ndim < 2:
            raise EvalError("value is not indexable", e.span)
        size = v.shape[1]
        if i.dtype.kind not in "iu":
            raise EvalError("index must be an integer", e.index.span)
        if np.any(i < 0) or np.any(i >= size):
            bad = int(i[(i < 0) | (i >= size)][0])
            raise EvalError(f"index {bad} out of range for length {size}", e.index.span)
        if i.shape[0] == 1:
            return v[:, int(i[0])]
        n = max(v.shape[0], i.shape[0])
        v = _lanes(v, n)
        return v[np.arange(n), i]

    def _ev_VectorLit(self, e, fr):
        parts = [self.ev(x, fr) for x in e.elements]
        n = max(p.shape[0] for p in parts)
        return np.stack([_lanes(p, n) for p in parts], axis=1)

    def _ev_Unary(self, e, fr):
        v = self.ev(e.operand, fr)
        if e.op == "-":
            return np.negative(v)
        if e.op == "!":
            return np.logical_not(v)
        if e.op == "sqrt":
            return np.sqrt(v.astype(float))
        raise EvalError(f"unknown operator {e.op}", e.span)

    def _ev_DiffOp(self, e, fr):
        raise EvalError("differential operators are evaluated only through their deqn block", e.span)

    def _ev_Binary(self, e, fr):
        op = e.op
        a = self.ev(e.left, fr)
        b = self.ev(e.right, fr)
        if op in ("&&", "||"):
            return (np.logical_and if op == "&&" else np.logical_or)(a, b)
        a, b = _align(a, b)
        if op in _ARITH:
            return _ARITH[op](a, b)
        if op == "^":
            return self._power(a, b, e)
        if op in _CMP:
            return _CMP[op](a, b)
        if op in ("==", "!="):
            eq = np.equal(a, b)
            if eq.ndim > 1:
                eq = eq.reshape(eq.shape[0], -1).all(axis=1)
            return eq if op == "==" else np.logical_not(eq)
        raise EvalError(f"unknown operator {op}", e.span)

    @staticmethod
    def _power(a, b, e):
        if b.size == 1 and b.dtype.kind in "iu":
            k = int(b.reshape(-1)[0])
            if k == 1:
                return a.copy()
            if k == 2:
                return a * a
            if a.dtype.kind in "iu":
                if k < 0:
                    raise EvalError("negative power of an integer", e.span)
                return np.power(a, k)
            return np.power(a, float(k))
        if a.dtype.kind in "iu" and b.dtype.kind in "iu":
            if np.any(b < 0):
                raise EvalError("negative power of an integer", e.span)
            return np.power(a, b)
        return np.power(a.astype(float), b)

    # --------------------------------------------------------- statements
    def exec_block(self, stmts, fr: Frame):
        shadowed = {}
        fresh = []
        for s in stmts:
            if isinstance(s, N.VarDecl) and s.on_list is None:
                if s.name in fr.vars and s.name not in shadowed and s.name not in fresh:
                    shadowed[s.name] = fr.vars[s.name]
                elif s.name not in fr.vars:
                    fresh.append(s.name)
            self.exec(s, fr)
        for k in fresh:
            fr.vars.pop(k, None)
        fr.vars.update(shadowed)

    def exec(self, s: N.Stmt, fr: Frame):
        try:
            getattr(self, "_ex_" + type(s).__name__)(s, fr)
        except RuntimeFault as exc:
            raise exc.located(s.span, self.step) from None

    def _ex_VarDecl(self, s, fr):
        if s.on_list is not None:
            return
        t = lattice_of(s.type)
        self.decl_types[s.name] = t
        if s.init is not None:
            v = self.ev(s.init, fr)
        elif isinstance(t, T.Vector):
            v = np.zeros((1, self.default_ndim))
        else:
            v = np.zeros(1)
        fr.vars[s.name] = np.array(_lanes(v, fr.n), dtype=_dtype(t))

    @property
    def default_ndim(self) -> int:
        return next(iter(self.boxes.values())).d if self.boxes else 2

    def _ex_ExprStmt(self, s, fr):
        self.ev(s.expr, fr)

    def _ex_If(self, s, fr):
        c = self.ev(s.cond, fr)
        if c.shape[0] == 1:
            self.exec_block(s.then if c[0] else s.orelse, fr)
            return
        for mask, body in ((c, s.then), (~c, s.orelse)):
            if body and mask.any():
                sub = fr.masked(mask)
                self.exec_block(body, sub)
                for k, v in fr.vars.items():
                    v[mask] = sub.vars[k]

    def _ex_Foreach(self, s, fr):
        if s.is_neighbor_loop:
            return self._neighbor_loop(s, fr)
        ps = self.particles.get(s.source)
        if ps is None:
            raise EvalError(f"particle list '{s.source}' does not exist yet", s.span)
        sub = Frame(ps.n, fr, None, {s.var: PVar(s.source, np.arange(ps.n), True)})
        self.exec_block(s.body, sub)

    def _neighbor_loop(self, s, fr):
        pv = fr.pvars[s.of]
        plist, nl = self.nlists[s.source]
        ps = self.particles[plist]
        P, Q = neighbor_pairs(ps, nl)
        lane_of = np.full(ps.n, -1, dtype=np.int64)
        lane_of[pv.idx] = np.arange(pv.idx.size)
        lanes = lane_of[P]
        keep = lanes >= 0
        if not keep.all():
            P, Q, lanes = P[keep], Q[keep], lanes[keep]
        sub = Frame(
            P.size,
            fr,
            lanes,
            {s.of: PVar(plist, P, False), s.var: PVar(plist, Q, True, ref=P)},
        )
        self.exec_block(s.body, sub)

    def _ex_Assign(self, s, fr):
        target = strip_parens(s.target)
        path = []
        while isinstance(target, N.Index):
            path.append(target.index)
            target = strip_parens(target.target)
        path.reverse()
        if isinstance(target, N.Var):
            holder, idx = fr.find(target.name)
            if holder is None:
                raise EvalError(f"'{target.name}' is not declared", s.span)
            if holder is fr:
                self._store_local(fr, target.name, path, self.ev(s.value, fr), s)
            else:
                self._accumulate_var(fr, holder, idx, target.name, path, s)
            return
        if isinstance(target, N.Access):
            owner = strip_parens(target.target)
            pv = fr.pvars.get(owner.name) if isinstance(owner, N.Var) else None
            if pv is None:
                raise EvalError("only properties of a loop particle can be assigned", s.span)
            arr = self._prop(pv.plist, target.name, s.span)
            if pv.own:
                value = self.ev(s.value, fr)
                keys = self._index_keys(path, fr, pv.idx)
                if arr.dtype.kind == "f" and not np.isfinite(value).all():
                    raise NonFinite(f"property '{target.name}' became non-finite", s.span)
                arr[keys] = _lanes(value, fr.n) if fr.n else value[:0]
            else:
                inc, sign = self._accumulation(s)
                if inc is None:
                    raise EvalError(f"'{owner.name}->{target.name}' may only be accumulated here", s.span)
                vals = _lanes(self.ev(inc, fr), fr.n)
                if arr.dtype.kind == "f" and not np.isfinite(vals).all():
                    raise NonFinite(f"accumulation into '{target.name}' is non-finite", s.span)
                if path:
                    keys = self._index_keys(path, fr, pv.idx)
                    (np.add if sign > 0 else np.subtract).at(arr, keys, vals)
                else:
                    _scatter_add(arr, pv.idx, vals, sign)
            if target.name == "pos":
                self.particles[pv.plist].touch_positions()
            return
        raise EvalError("invalid assignment target", s.span)

    def _index_keys(self, path, fr, lanes):
        keys = [lanes]
        for ix in path:
            i = self.ev(ix, fr)
            keys.append(int(i[0]) if i.shape[0] == 1 else i)
        return tuple(keys)

    def _store_local(self, fr, name, path, value, s):
        cur = fr.vars[name]
        if not path:
            fr.vars[name] = np.array(_lanes(value, fr.n), dtype=cur.dtype)
            return
        keys = self._index_keys(path, fr, np.arange(fr.n))
        cur[keys] = _lanes(value, fr.n)

    def _accumulation(self, s):
        """(increment expression, +1 or -1) for ``x = x ± e``; (None, 0) otherwise."""
        hit = self._acc_cache.get(id(s))
        if hit is None:
            inc = _is_accumulation(s)
            sign = 0 if inc is None else (1 if strip_parens(s.value).op == "+" else -1)
            hit = self._acc_cache[id(s)] = (inc, sign)
        return hit

    def _accumulate_var(self, fr, holder, idx, name, path, s):
        inc, sign = self._accumulation(s)
        if inc is None:
            raise EvalError(f"'{name}' belongs to an enclosing scope and may only be accumulated", s.span)
        vals = _lanes(self.ev(inc, fr), fr.n)
        arr = holder.vars[name]
        if idx is not None:
            if path:
                keys = (idx,) + tuple(int(self.ev(i, fr)[0]) for i in path)
                (np.add if sign > 0 else np.subtract).at(arr, keys, vals)
            else:
                _scatter_add(arr, idx, vals, sign)
            return
        if sign < 0:
            vals = np.negative(vals)
        # Single-lane holder: sum lane contributions in order.
        cur = arr[(0,) + tuple(int(self.ev(i, fr)[0]) for i in path)]
        seq = np.concatenate([np.asarray(cur)[None], vals.astype(np.result_type(cur, vals))])
        arr[(0,) + tuple(int(self.ev(i, fr)[0]) for i in path)] = np.cumsum(seq, axis=0)[-1]

    # --------------------------------------------------------- plan steps
    def run_step(self, st: PlanStep):
        t0 = time.perf_counter()
        try:
            getattr(self, "_step_" + st.kind.replace("-", "_"))(st)
        except RuntimeFault as exc:
            raise exc.located(st.node.span if st.node is not None else None, self.step) from None
        finally:
            if st.kind != "timeloop":
                self.stats[st.kind] += time.perf_counter() - t0

    def _step_setup(self, st):
        s = st.node
        d = int(self.ev(s.ndim, self.top)[0])
        lo = float(self.ev(s.lo, self.top)[0])
        hi = float(self.ev(s.hi, self.top)[0])
        self.boxes[s.name] = DomainBox.cube(d, lo, hi, s.boundary == "periodic")

    def _list_props(self, name):
        info = self.checked.lists[name]
        return {
            f: (fi.type.arity, _dtype(fi.type.elem)) for f, fi in info.fields.items() if f != "pos"
        }

    def _step_create_particles(self, st):
        s = st.node
        box = self.boxes[s.topology]
        n = self.ev(s.count, self.top)[0]
        ps = create_grid(box, n) if s.mode == "grid" else create_random(box, n, self.rng)
        for f, (arity, dt) in self._list_props(s.name).items():
            ps.add_property(f, arity, dt)
        self.particles[s.name] = ps

    def _step_load_particles(self, st):
        s = st.node
        path = Path(s.path)
        if not path.is_absolute() and self.opts.base_dir is not None:
            path = Path(self.opts.base_dir) / path
        cols = [(c.prop, c.component) for c in s.columns]
        self.particles[s.name] = load_particles(self.boxes[s.topology], path, cols, self._list_props(s.name))

    def _step_create_neighlist(self, st):
        s = st.node
        cutoff = float(self.ev(s.cutoff, self.top)[0])
        skin = float(self.ev(s.skin, self.top)[0]) if s.skin is not None else 0.0
        ps = self.particles[s.plist]
        self.nlists[s.name] = (s.plist, build_cell_list(ps, cutoff, skin))

    def _operator(self, op: str, plist: str) -> PseOperator:
        ps = self.particles[plist]
        cur = self.operators.get((op, plist))
        if cur is None or cur.pos_version != ps.pos_version:
            nlname = self._discretize_nl[(op, plist)]
            cur = self.operators[(op, plist)] = pse_matrix(
                ps, self.nlists[nlname][1], renormalize=self.opts.renormalize
            )
        return cur

    def _step_discretize(self, st):
        self._discretize_nl[(st.op, st.target)] = st.extra_nl
        self._operator(st.op, st.target)

    def _step_let(self, st):
        self.exec(st.node, self.top)

    def _step_kernel(self, st):
        self.exec(st.node, self.top)

    def _step_apply_bc(self, st):
        apply_bc(self.particles[st.target])

    def _step_remap_neighbors(self, st):
        plist, nl = self.nlists[st.target]
        ps = self.particles[plist]
        if ps.pos_version == nl.pos_version:
            return
        if nl.skin > 0.0:
            moved = ps.box.minimum_image(ps.pos - nl.ref_pos)
            if np.max(np.einsum("ij,ij->i", moved, moved), initial=0.0) <= (0.5 * nl.skin) ** 2:
                return
        self.nlists[st.target] = (plist, build_cell_list(ps, nl.cutoff, nl.skin))

    def _step_io_write(self, st):
        inside = self.n_steps > 0
        if inside and not (self.step % self.opts.every == 0 or self.step == self.n_steps):
            return
        if self.opts.out_dir is None:
            return
        s = st.node
        self.snapshots.append(self.write_snapshot(s.plist, s.props))

    def _step_rhs_integrate(self, st):
        rhs: RhsProgram = st.rhs
        ps = self.particles[rhs.target]
        state = {f: ps.get(f).astype(float) for f in rhs.writes}
        out = integrate(rhs.integrator, lambda y, tt: self.rates(rhs, y, tt), state, self.t, self.dt, self.step)
        for f, v in out.items():
            ps.set(f, v.astype(ps.get(f).dtype))

    def rates(self, rhs: RhsProgram, state: dict, t: float) -> dict:
        """d(state)/dt for one deqn block, evaluated per particle."""
        ps = self.particles[rhs.target]
        ov = dict(state)
        by_op: dict[str, list] = defaultdict(list)
        for sl in rhs.slots:
            by_op[sl.op].append(sl)
        for op, slots in by_op.items():
            A = self._operator(op, rhs.target).matrix
            cols = [ov.get(sl.field, ps.get(sl.field)) for sl in slots]
            if len(cols) == 1:
                ov[slots[0].name] = A @ cols[0]
            else:
                res = A @ np.column_stack(cols)
                for j, sl in enumerate(slots):
                    ov[sl.name] = res[:, j]
        self.overlay[rhs.target] = ov
        saved_t = self._set_time(t)
        try:
            fr = Frame(ps.n, self.top, None, {rhs.loop_var: PVar(rhs.target, np.arange(ps.n), True)})
            out = {}
            for a in rhs.body:
                fname = a.target.name[len(RATE_PREFIX):]
                v = self.ev(a.value, fr)
                out[fname] = np.array(_lanes(v, ps.n), dtype=float).reshape(state[fname].shape)
        finally:
            self.overlay.pop(rhs.target, None)
            self._restore_time(saved_t)
        return out

    def _set_time(self, t):
        var = self._loop_var
        if var is None:
            return None
        old = self.top.vars.get(var)
        self.top.vars[var] = np.array([t])
        return old

    def _restore_time(self, old):
        if self._loop_var is not None and old is not None:
            self.top.vars[self._loop_var] = old

    _loop_var: Optional[str] = None
    dt: float = 0.0

    def _step_timeloop(self, st):
        s = st.node
        start = float(self.ev(s.start, self.top)[0])
        end = float(self.ev(s.end, self.top)[0])
        dt = float(self.ev(s.step, self.top)[0])
        if not dt > 0:
            raise RuntimeFault(f"time step must be positive, got {dt}", s.step.span)
        self.n_steps = max(0, int(round((end - start) / dt)))
        self.dt = dt
        self._loop_var = s.var
        for it in range(self.n_steps):
            self.step = it + 1
            self.t = start + it * dt
            self.top.vars[s.var] = np.array([self.t])
            for child in st.children:
                self.run_step(child)
            self.t = start + self.step * dt
            if self.opts.on_step is not None:
                self.opts.on_step(self.step, self.t, self)
        self.top.vars[s.var] = np.array([start + self.n_steps * dt])

    # ------------------------------------------------------------ output
    def snapshot_path(self, plist: str) -> Path:
        name = self.module.name
        stem = f"{name}_{plist}_{self.step}" if self.multi_list_output else f"{name}_{self.step}"
        return Path(self.opts.out_dir) / f"{stem}.csv"

    def write_snapshot(self, plist: str, props) -> Path:
        ps = self.particles[plist]
        cols = [np.full(ps.n, self.step), np.full(ps.n, self.t), ps.ids]
        header = ["step", "t", "id"] + ["xyz"[a] for a in range(ps.d)]
        fmts = ["%d", "%.17g", "%d"] + ["%.17g"] * ps.d
        cols += [ps.pos[:, a] for a in range(ps.d)]
        for p in props:
            arr = ps.get(p)
            fmt = "%d" if arr.dtype.kind in "iub" else "%.17g"
            if arr.ndim == 1:
                header.append(p)
                cols.append(arr)
                fmts.append(fmt)
            else:
                for j in range(arr.shape[1]):
                    header.append(f"{p}_{j}")
                    cols.append(arr[:, j])
                    fmts.append(fmt)
        path = self.snapshot_path(plist)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            table = np.column_stack([np.asarray(c, dtype=float) for c in cols])
            np.savetxt(path, table, fmt=fmts, delimiter=",", header=",".join(header), comments="")
        except OSError as exc:
            raise IoError(f"cannot write '{path}': {exc.strerror or exc}") from None
        return path

    def write_stats(self) -> Optional[Path]:
        if self.opts.out_dir is None or not self.opts.write_stats:
            return None
        path = Path(self.opts.out_dir) / f"{self.module.name}.stats.json"
        data = {f"time.{k}": round(v, 6) for k, v in sorted(self.stats.items())}
        data.update(steps=self.n_steps, particles={k: v.n for k, v in self.particles.items()})
        data["params"] = {p.name: self.top.vars[p.name][0].item() for p in self.module.params}
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise IoError(f"cannot write '{path}': {exc.strerror or exc}") from None
        return path

    # --------------------------------------------------------------- run
    def run(self) -> RunResult:
        t0 = time.perf_counter()
        with np.errstate(all="ignore"):
            for st in self.plan.steps:
                self.run_step(st)
        self.stats["total"] = time.perf_counter() - t0
        self.write_stats()
        variables = {k: v[0] for k, v in self.top.vars.items()}
        return RunResult(self.particles, variables, self.n_steps, self.t, dict(self.stats), self.snapshots)


def run(plan: ExecutionPlan, params: dict | None = None, options: RunOptions | None = None, **kw) -> RunResult:
    """Execute ``plan``; keyword arguments fill a RunOptions when none is given."""
    if options is None:
        options = RunOptions(**kw)
    return Interpreter(plan, params, options).run()
