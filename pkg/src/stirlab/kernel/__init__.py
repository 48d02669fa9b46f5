"""Walk kernel backend selection.

The compiled Cython kernel is used when available; the pure-Python
fallback otherwise.  Set STIRLAB_KERNEL=python to force the fallback
(used by the benchmark and the equivalence tests).  Both backends are
bit-identical by construction and by test.
"""
from __future__ import annotations

import os

from ..graph import Lattice, Torus
from ..walk import CyclicTime, Trajectory, WalkOutcome
from . import _pykernel

_ck = None
if os.environ.get("STIRLAB_KERNEL", "").lower() != "python":
    try:
        from . import _ckernel as _ck  # type: ignore
    except ImportError:
        _ck = None

BACKEND = _ck.BACKEND if _ck is not None else _pykernel.BACKEND


def run_batch(d, beta, base_seed, n, horizon_k, horizon_s=0.0,
              stop_at_closure=True, L=0, backend=None):
    """Ensemble of origin walks; replica i is seeded by spawn_seed(base_seed, i).

    Returns arrays: endpoints (n x d), n_jumps, closed, tau_reg_k.
    """
    impl = _resolve(backend)
    if impl is _pykernel:
        return _pykernel.run_batch(d, beta, base_seed, n, horizon_k,
                                   horizon_s, stop_at_closure, L)
    return _ck.run_batch(d, beta, base_seed, n, horizon_k, horizon_s,
                         stop_at_closure, L)


def run_trajectory(d, beta, seed, horizon_k, horizon_s=0.0,
                   stop_at_closure=True, L=0, backend=None) -> WalkOutcome:
    """One origin walk with its full jump record."""
    impl = _resolve(backend)
    if impl is _pykernel:
        return _pykernel.run_trajectory(d, beta, seed, horizon_k, horizon_s,
                                        stop_at_closure, L)
    jumps_k, jumps_s, sites, tau, end_k, end_s = _ck.run_trajectory_raw(
        d, beta, seed, horizon_k, horizon_s, stop_at_closure, L)
    topology = Lattice(d) if L == 0 else Torus(d, L)
    origin = (0,) * d
    jumps = [(CyclicTime(int(jumps_k[i]), float(jumps_s[i])),
              tuple(int(c) for c in sites[i]))
             for i in range(len(jumps_k))]
    traj = Trajectory(topology, float(beta), origin, jumps,
                      CyclicTime(int(end_k), float(end_s)))
    tau_reg = CyclicTime(int(tau), 0.0) if tau >= 0 else None
    return WalkOutcome(traj, tau_reg, tau_reg is not None)


def _resolve(backend):
    if backend == "python" or (backend is None and _ck is None):
        return _pykernel
    if backend in (None, "cython"):
        if _ck is None:
            raise RuntimeError("compiled kernel not available")
        return _ck
    raise ValueError(f"unknown backend {backend!r}")
