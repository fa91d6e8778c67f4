"""Particle storage, simulation domain, creation and boundary conditions."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..diagnostics import Span


class RuntimeFault(Exception):
    """Failure while executing a plan.  Carries the step index and a source span when known."""

    code = "E6000"

    def __init__(self, message: str, span: Optional[Span] = None, step: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.span = span
        self.step = step

    def located(self, span: Optional[Span] = None, step: Optional[int] = None) -> "RuntimeFault":
        if self.span is None:
            self.span = span
        if self.step is None:
            self.step = step
        return self

    def __str__(self) -> str:
        where = f" at step {self.step}" if self.step is not None else ""
        return f"{self.message}{where}"


class NonFinite(RuntimeFault):
    code = "E6001"


class StaleList(RuntimeFault):
    code = "E6002"


class CutoffTooLarge(RuntimeFault):
    code = "E6003"


class IoError(RuntimeFault):
    code = "E6004"


class BadSpec(RuntimeFault):
    code = "E6005"


@dataclass(frozen=True)
class DomainBox:
    lo: np.ndarray
    hi: np.ndarray
    periodic: tuple

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size not in (2, 3):
            raise BadSpec("domain must have 2 or 3 axes")
        if not np.all(hi > lo):
            raise BadSpec("domain upper corner must exceed the lower corner on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))

    @classmethod
    def cube(cls, d: int, lo: float = 0.0, hi: float = 1.0, periodic: bool = True) -> "DomainBox":
        return cls(np.full(d, float(lo)), np.full(d, float(hi)), (periodic,) * d)

    @property
    def d(self) -> int:
        return self.lo.size

    @property
    def edges(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.edges))

    def minimum_image(self, disp: np.ndarray) -> np.ndarray:
        """Shift displacement vectors to their nearest periodic copy."""
        out = np.array(disp, dtype=float, copy=True)
        for a in range(self.d):
            if self.periodic[a]:
                L = self.edges[a]
                out[..., a] -= L * np.round(out[..., a] / L)
        return out


@dataclass
class ParticleSet:
    """Structure of arrays: positions plus named per-particle properties."""

    box: DomainBox
    pos: np.ndarray
    props: dict = field(default_factory=dict)
    spacing: Optional[float] = None  # grid spacing h, when created on a grid
    pos_version: int = 0

    def __post_init__(self):
        self.pos = np.ascontiguousarray(self.pos, dtype=float).reshape(-1, self.box.d)
        self.ids = np.arange(self.n)
        self.dx = np.zeros_like(self.pos)
        self.dw: dict[str, np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.pos.shape[0]

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def h(self) -> float:
        """Mean particle spacing (volume per particle)^(1/d)."""
        if self.spacing is not None:
            return self.spacing
        return (self.box.volume / max(self.n, 1)) ** (1.0 / self.d)

    def add_property(self, name: str, arity: int = 1, dtype=float) -> np.ndarray:
        if name == "pos":
            return self.pos
        shape = (self.n,) if arity == 1 else (self.n, arity)
        arr = self.props.get(name)
        if arr is None or arr.shape != shape:
            arr = self.props[name] = np.zeros(shape, dtype=dtype)
        return arr

    def get(self, name: str) -> np.ndarray:
        if name == "pos":
            return self.pos
        try:
            return self.props[name]
        except KeyError:
            raise RuntimeFault(f"particles have no property '{name}'") from None

    def set(self, name: str, values: np.ndarray):
        if name == "pos":
            self.pos = values
            self.pos_version += 1
        else:
            self.props[name] = values

    def touch_positions(self):
        self.pos_version += 1

    def zero_deltas(self):
        self.dx[:] = 0.0
        for v in self.dw.values():
            v[...] = 0

    def copy(self) -> "ParticleSet":
        ps = ParticleSet(self.box, self.pos.copy(), {k: v.copy() for k, v in self.props.items()}, self.spacing)
        ps.pos_version = self.pos_version
        return ps


# ------------------------------------------------------------------ creation

def grid_positions(box: DomainBox, n: int) -> np.ndarray:
    """Cell-centred lattice with n points per axis, x varying fastest."""
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise BadSpec(f"grid needs at least 2 particles per axis, got {n}")
    n = int(n)
    d = box.d
    idx = np.indices((n,) * d).reshape(d, -1)[::-1].T
    h = box.edges / n
    return box.lo + (idx + 0.5) * h


def create_grid(box: DomainBox, n: int) -> ParticleSet:
    pos = grid_positions(box, n)
    edges = box.edges
    spacing = float(edges[0] / n) if np.allclose(edges, edges[0]) else None
    return ParticleSet(box, pos, spacing=spacing)


def create_random(box: DomainBox, n: int, rng: np.random.Generator) -> ParticleSet:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise BadSpec(f"random distribution needs a positive particle count, got {n}")
    pos = box.lo + rng.random((int(n), box.d)) * box.edges
    return ParticleSet(box, pos)


_SPLIT = re.compile(r"[,\s]+")


def read_table(path: Path) -> np.ndarray:
    """Whitespace- or comma-separated numeric table; '#' starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read particle data '{path}': {exc.strerror or exc}") from None
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(x) for x in _SPLIT.split(line) if x])
        except ValueError:
            raise IoError(f"{path}:{lineno}: non-numeric entry") from None
    if not rows:
        raise IoError(f"'{path}' contains no particle rows")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise IoError(f"'{path}': rows have differing column counts {sorted(width)}")
    return np.array(rows, dtype=float)


def load_particles(box: DomainBox, path: Path, columns, props: dict) -> ParticleSet:
    """Fill positions and properties column by column.

    ``columns`` is a sequence of (property, component) pairs; ``props`` maps
    property names to (arity, dtype) for every property on the list.
    """
    table = read_table(path)
    if table.shape[1] < len(columns):
        raise IoError(f"'{path}' has {table.shape[1]} columns but {len(columns)} are mapped")
    got_pos = [False] * box.d
    pos = np.zeros((table.shape[0], box.d))
    ps = ParticleSet(box, pos)
    for name, (arity, dtype) in props.items():
        ps.add_property(name, arity, dtype)
    for j, (name, comp) in enumerate(columns):
        col = table[:, j]
        arr = ps.get(name)
        if arr.ndim == 1:
            if comp not in (None, 0):
                raise BadSpec(f"'{name}' has a single component")
            arr[:] = col
        else:
            if comp is None:
                raise BadSpec(f"'{name}' needs a component index")
            arr[:, comp] = col
            if name == "pos":
                got_pos[comp] = True
    if not all(got_pos):
        raise BadSpec("particle data must provide every position component")
    return ps


# --------------------------------------------------------------- boundaries

def apply_bc(ps: ParticleSet, box: Optional[DomainBox] = None) -> ParticleSet:
    """Wrap positions into [lo, hi) on periodic axes; other axes are left alone."""
    box = box or ps.box
    x = ps.pos
    changed = False
    for a in range(box.d):
        if not box.periodic[a]:
            continue
        lo, L = box.lo[a], box.edges[a]
        col = x[:, a]
        out = (col < lo) | (col >= box.hi[a])
        if out.any():
            w = lo + np.mod(col[out] - lo, L)
            # mod can round up to exactly L for tiny negative offsets
            w[w >= box.hi[a]] = lo
            col[out] = w
            changed = True
    if changed:
        ps.touch_positions()
    return ps
