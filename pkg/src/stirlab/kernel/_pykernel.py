"""Pure-Python walk kernel (fallback backend).

Delegates to the generic event-driven engine; exists so the package is
fully functional without the compiled extension and so the compiled
kernel has a bit-identical reference to be checked against.
"""
from __future__ import annotations

import numpy as np

from .._rng import spawn_seed
from ..clocks import ClockStore
from ..graph import Lattice, Torus
from ..walk import CyclicTime, simulate_cyclic_walk

BACKEND = "python"


def _topology(d: int, L: int):
    return Lattice(d) if L == 0 else Torus(d, L)


def run_trajectory(d, beta, seed, horizon_k, horizon_s=0.0,
                   stop_at_closure=True, L=0):
    topology = _topology(d, L)
    store = ClockStore(topology, beta, seed)
    origin = (0,) * d
    return simulate_cyclic_walk(origin, CyclicTime(horizon_k, horizon_s),
                                store, stop_at_closure=stop_at_closure)


def run_batch(d, beta, base_seed, n, horizon_k, horizon_s=0.0,
              stop_at_closure=True, L=0):
    endpoints = np.zeros((n, d), dtype=np.int64)
    n_jumps = np.zeros(n, dtype=np.int64)
    closed = np.zeros(n, dtype=bool)
    tau_reg_k = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        out = run_trajectory(d, beta, spawn_seed(base_seed, i), horizon_k,
                             horizon_s, stop_at_closure, L)
        endpoints[i] = out.trajectory.end_site()
        n_jumps[i] = out.trajectory.n_jumps()
        closed[i] = out.closed
        if out.closed:
            tau_reg_k[i] = out.tau_reg.k
    return {"endpoints": endpoints, "n_jumps": n_jumps,
            "closed": closed, "tau_reg_k": tau_reg_k}
