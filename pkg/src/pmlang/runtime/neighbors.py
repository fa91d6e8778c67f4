"""Cell-list neighbor search with minimum-image distances."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .particles import CutoffTooLarge, DomainBox, ParticleSet, StaleList

# Pairs at the cutoff distance up to this relative slack count as neighbors,
# so lattice points lying exactly on the cutoff circle are kept.
CUTOFF_RTOL = 1e-10


@dataclass
class CellList:
    cutoff: float
    skin: float
    ncells: np.ndarray  # cells per axis
    cell_of: np.ndarray  # linear cell index per particle
    ptr: np.ndarray  # CSR row pointers into nbr
    nbr: np.ndarray  # neighbor indices, ascending within each row
    ref_pos: np.ndarray  # positions at build time
    pos_version: int
    _cache: tuple = (None, None, None)  # (pos_version, P, Q) of the last cutoff filter

    @property
    def n(self) -> int:
        return self.ptr.size - 1

    def neighbors(self, p: int) -> np.ndarray:
        return self.nbr[self.ptr[p]:self.ptr[p + 1]]

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """All (p, q) index pairs, sorted by p then q."""
        counts = np.diff(self.ptr)
        return np.repeat(np.arange(self.n), counts), self.nbr

    def check_fresh(self, ps: ParticleSet):
        if ps.pos_version == self.pos_version:
            return
        if ps.n != self.n:
            raise StaleList("particle count changed since the neighbor list was built")
        if self.skin <= 0.0:
            raise StaleList("particles moved since the neighbor list was built; call update_neighlist")
        moved = ps.box.minimum_image(ps.pos - self.ref_pos)
        if np.max(np.einsum("ij,ij->i", moved, moved), initial=0.0) > (0.5 * self.skin) ** 2:
            raise StaleList("particles moved beyond half the skin since the neighbor list was built")


def _check_cutoff(box: DomainBox, reach: float):
    if not reach > 0.0:
        raise CutoffTooLarge(f"cutoff must be positive, got {reach}")
    half = 0.5 * float(np.min(box.edges))
    if reach > half * (1 + CUTOFF_RTOL):
        raise CutoffTooLarge(f"cutoff {reach} exceeds half the smallest box edge ({half})")


def _within(d2: np.ndarray, reach: float) -> np.ndarray:
    return d2 <= reach * reach * (1 + CUTOFF_RTOL)


def build_cell_list(ps: ParticleSet, cutoff: float, skin: float = 0.0) -> CellList:
    box = ps.box
    reach = float(cutoff) + float(skin)
    _check_cutoff(box, reach)
    d = box.d
    x = ps.pos
    ncells = np.maximum(1, np.floor(box.edges / reach).astype(np.int64))
    rel = (x - box.lo) / box.edges
    coords = np.clip(np.floor(rel * ncells).astype(np.int64), 0, ncells - 1)
    strides = np.cumprod(np.concatenate(([1], ncells[:-1])))
    cell_of = coords @ strides
    ntot = int(np.prod(ncells))
    order = np.argsort(cell_of, kind="stable")
    counts = np.bincount(cell_of, minlength=ntot)
    start = np.concatenate(([0], np.cumsum(counts)[:-1]))

    offsets = []
    for a in range(d):
        if ncells[a] >= 3:
            offsets.append((-1, 0, 1))
        elif box.periodic[a]:
            offsets.append(tuple(range(ncells[a])))  # every cell exactly once
        else:
            offsets.append((-1, 0, 1) if ncells[a] > 1 else (0,))
    ps_all, qs_all = [], []
    pidx = np.arange(ps.n)
    for off in itertools.product(*offsets):
        nc = coords + np.array(off)
        valid = np.ones(ps.n, dtype=bool)
        for a in range(d):
            if box.periodic[a]:
                nc[:, a] %= ncells[a]
            else:
                valid &= (nc[:, a] >= 0) & (nc[:, a] < ncells[a])
        lin = nc[valid] @ strides
        p_ok = pidx[valid]
        cnt = counts[lin]
        total = int(cnt.sum())
        if total == 0:
            continue
        p_rep = np.repeat(p_ok, cnt)
        first = np.repeat(start[lin], cnt)
        within = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        q_rep = order[first + within]
        ps_all.append(p_rep)
        qs_all.append(q_rep)
    if ps_all:
        P = np.concatenate(ps_all)
        Q = np.concatenate(qs_all)
        keep = P != Q
        P, Q = P[keep], Q[keep]
        disp = box.minimum_image(x[P] - x[Q])
        keep = _within(np.einsum("ij,ij->i", disp, disp), reach)
        P, Q = P[keep], Q[keep]
        o = np.lexsort((Q, P))
        P, Q = P[o], Q[o]
    else:
        P = Q = np.zeros(0, dtype=np.int64)
    ptr = np.concatenate(([0], np.cumsum(np.bincount(P, minlength=ps.n)))).astype(np.int64)
    return CellList(float(cutoff), float(skin), ncells, cell_of, ptr, Q.astype(np.int64), x.copy(), ps.pos_version)


def neighbor_pairs(ps: ParticleSet, nl: CellList) -> tuple[np.ndarray, np.ndarray]:
    """Current (p, q) pairs within the cutoff, sorted by p then ascending q."""
    nl.check_fresh(ps)
    if nl._cache[0] == ps.pos_version:
        return nl._cache[1], nl._cache[2]
    P, Q = nl.pairs()
    if nl.skin > 0.0:
        disp = ps.box.minimum_image(ps.pos[P] - ps.pos[Q])
        keep = _within(np.einsum("ij,ij->i", disp, disp), nl.cutoff)
        P, Q = P[keep], Q[keep]
    nl._cache = (ps.pos_version, P, Q)
    return P, Q


def neighbors(p: int, nl: CellList, ps: ParticleSet | None = None) -> np.ndarray:
    if ps is None or nl.skin <= 0.0:
        if ps is not None:
            nl.check_fresh(ps)
        return nl.neighbors(p)
    nl.check_fresh(ps)
    cand = nl.neighbors(p)
    disp = ps.box.minimum_image(ps.pos[p] - ps.pos[cand])
    return cand[_within(np.einsum("ij,ij->i", disp, disp), nl.cutoff)]


def brute_force_neighbors(ps: ParticleSet, cutoff: float) -> list[set]:
    """O(N^2) minimum-image reference."""
    disp = ps.box.minimum_image(ps.pos[:, None, :] - ps.pos[None, :, :])
    d2 = np.einsum("ijk,ijk->ij", disp, disp)
    inside = _within(d2, cutoff)
    np.fill_diagonal(inside, False)
    return [set(np.flatnonzero(row).tolist()) for row in inside]
