"""Built-in interaction kernels and the pairwise accumulation loop.

These are reference implementations.  Programs express the same physics in
the language itself; tests compare the two.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .neighbors import CellList, neighbor_pairs
from .particles import NonFinite, ParticleSet

# K(x_p, x_q, w_p, w_q) -> (Kx, {name: Kw}).  x_q is the minimum image of q
# relative to p; w_* map property names to per-pair values.
KernelFn = Callable[[np.ndarray, np.ndarray, dict, dict], tuple]


@dataclass(frozen=True)
class InteractionKernel:
    fn: KernelFn
    reads: tuple = ()  # properties passed in w_p / w_q
    writes: tuple = ()  # property deltas produced

    def __call__(self, xp, xq, wp, wq):
        return self.fn(xp, xq, wp, wq)


def pairwise_accumulate(ps: ParticleSet, nl: CellList, kernel: InteractionKernel):
    """Sum kernel contributions over each particle's neighbors into ``ps.dx`` and ``ps.dw``.

    Contributions are added in ascending q for every p, so results are
    reproducible bit for bit.
    """
    P, Q = neighbor_pairs(ps, nl)
    xp = ps.pos[P]
    xq = xp - ps.box.minimum_image(xp - ps.pos[Q])
    wp = {k: ps.get(k)[P] for k in kernel.reads}
    wq = {k: ps.get(k)[Q] for k in kernel.reads}
    kx, kw = kernel(xp, xq, wp, wq)
    ps.zero_deltas()
    if kx is not None:
        np.add.at(ps.dx, P, kx)
    for name, vals in kw.items():
        vals = np.asarray(vals, dtype=float)
        acc = ps.dw.get(name)
        if acc is None or acc.shape[1:] != vals.shape[1:]:
            acc = ps.dw[name] = np.zeros((ps.n,) + vals.shape[1:])
        else:
            acc[...] = 0.0
        np.add.at(acc, P, vals)
    for name, acc in [("dx", ps.dx), *ps.dw.items()]:
        if not np.isfinite(acc).all():
            raise NonFinite(f"interaction produced a non-finite '{name}'")
    return ps


def lj_force(disp: np.ndarray, eps: float, sigma: float) -> np.ndarray:
    """F = 24 eps r (2 sigma^12 / r_s^7 - sigma^6 / r_s^4) with r_s = |r|^2."""
    rs = np.einsum("...i,...i->...", disp, disp)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = 24.0 * eps * (2.0 * sigma**12 / rs**7 - sigma**6 / rs**4)
    return disp * mag[..., None]


def lj_energy(r: np.ndarray, eps: float, sigma: float) -> np.ndarray:
    """Pair potential 4 eps ((sigma/r)^12 - (sigma/r)^6)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        s6 = (sigma / np.asarray(r, dtype=float)) ** 6
        return 4.0 * eps * (s6 * s6 - s6)


def lj_kernel(eps: float, sigma: float, r_c: float) -> InteractionKernel:
    """Force on p from q, and half of the pair energy (the other half goes to q)."""

    def fn(xp, xq, wp, wq):
        disp = xp - xq
        r = np.sqrt(np.einsum("ij,ij->i", disp, disp))
        inside = r <= r_c
        force = np.where(inside[:, None], lj_force(disp, eps, sigma), 0.0)
        energy = np.where(inside, 0.5 * lj_energy(r, eps, sigma), 0.0)
        return None, {"F": force, "Epot": energy}

    return InteractionKernel(fn, (), ("F", "Epot"))


def gray_scott_rhs(U, V, dU, dV, Du: float, Dv: float, F: float, k: float):
    """Reaction-diffusion rates given the Laplacians dU and dV."""
    UV2 = U * V**2
    return Du * dU - UV2 + F * (1.0 - U), Dv * dV + UV2 - (F + k) * V
