"""Particle storage, neighbor search, discretization, integration and the plan interpreter."""

from .integrate import INTEGRATORS, integrate
from .interp import EvalError, Interpreter, ParamError, RunOptions, RunResult, run
from .kernels import InteractionKernel, gray_scott_rhs, lj_energy, lj_force, lj_kernel, pairwise_accumulate
from .neighbors import CellList, brute_force_neighbors, build_cell_list, neighbor_pairs, neighbors
from .particles import (
    BadSpec,
    CutoffTooLarge,
    DomainBox,
    IoError,
    NonFinite,
    ParticleSet,
    RuntimeFault,
    StaleList,
    apply_bc,
    create_grid,
    create_random,
    load_particles,
)
from .pse import PseOperator, pse_laplacian, pse_matrix

__all__ = [
    "BadSpec", "CellList", "CutoffTooLarge", "DomainBox", "EvalError", "INTEGRATORS", "InteractionKernel",
    "Interpreter", "IoError", "NonFinite", "ParamError", "ParticleSet", "PseOperator", "RunOptions",
    "RunResult", "RuntimeFault", "StaleList", "apply_bc", "brute_force_neighbors", "build_cell_list",
    "create_grid", "create_random", "gray_scott_rhs", "integrate", "lj_energy", "lj_force", "lj_kernel",
    "load_particles", "neighbor_pairs", "neighbors", "pairwise_accumulate", "pse_laplacian", "pse_matrix", "run",
]
