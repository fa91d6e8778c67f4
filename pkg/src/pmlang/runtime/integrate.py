"""Explicit time integrators over a dictionary of state arrays."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .particles import NonFinite

State = dict  # field name -> ndarray
RateFn = Callable[[State, float], State]

INTEGRATORS = ("euler", "rk4")


def _axpy(state: State, rate: State, a: float) -> State:
    return {k: state[k] + a * rate[k] for k in state}


def check_finite(state: State, step=None):
    for k, v in state.items():
        if v.dtype.kind == "f" and not np.isfinite(v).all():
            raise NonFinite(f"field '{k}' became non-finite", step=step)


def integrate(method: str, f: RateFn, state: State, t: float, dt: float, step=None) -> State:
    """Advance ``state`` by one step of size ``dt``; ``f`` returns d(state)/dt."""
    if not dt > 0:
        raise ValueError("time step must be positive")
    if method == "euler":
        k1 = f(state, t)
        out = _axpy(state, k1, dt)
    elif method == "rk4":
        k1 = f(state, t)
        k2 = f(_axpy(state, k1, 0.5 * dt), t + 0.5 * dt)
        k3 = f(_axpy(state, k2, 0.5 * dt), t + 0.5 * dt)
        k4 = f(_axpy(state, k3, dt), t + dt)
        out = {
            k: state[k] + (dt / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
            for k in state
        }
    else:
        raise ValueError(f"unknown integrator {method!r}")
    check_finite(out, step)
    return out
