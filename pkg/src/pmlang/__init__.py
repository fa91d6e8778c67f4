"""pmlang: a small language for particle simulations.

The pipeline is frontend (parse) -> check (types and dimensions) ->
lowering (execution plan) -> runtime, with an optional floating-point
accuracy pass in :mod:`pmlang.fpopt`.
"""

__version__ = "0.1.0"
