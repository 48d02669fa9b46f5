"""The cyclic time random walk.

Three constructions are provided:

* the exposure construction, driven directly by the edge ring schedules
  of a :class:`~stirlab.clocks.ClockStore`,
* the driven construction, which builds the same walk in law from an
  independent simple random walk by suppressing jumps into the history
  and forcing jumps when the history jumps into the walk,
* the regenerated walk, which chains independent cyclic walks at their
  closure times.

Times are kept as exact (period, offset) pairs; the total k*beta + s is
only ever formed transiently for statistics, never accumulated.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .clocks import ClockStore
from .graph import Site


@dataclass(frozen=True, order=True)
class CyclicTime:
    """Exact time pair: period index k and offset s in [0, beta)."""

    k: int
    s: float

    def total(self, beta: float) -> float:
        return self.k * beta + self.s


ZERO = CyclicTime(0, 0.0)


def add_offset(t: CyclicTime, ds: float, beta: float) -> CyclicTime:
    """t advanced by ds >= 0 (ds < beta per carry step)."""
    k, s = t.k, t.s + ds
    while s >= beta:
        s -= beta
        k += 1
    return CyclicTime(k, s)


def add_times(t1: CyclicTime, t2: CyclicTime, beta: float) -> CyclicTime:
    k = t1.k + t2.k
    s = t1.s + t2.s
    if s >= beta:
        s -= beta
        k += 1
    return CyclicTime(k, s)


@dataclass
class Trajectory:
    """Piecewise-constant path: start site plus ordered jump events."""

    topology: object
    beta: float
    start: Site
    jumps: list  # [(CyclicTime, Site), ...] strictly increasing times
    horizon: CyclicTime
    regen_marks: list = field(default_factory=list)
    _keys: list = field(default=None, repr=False)

    def __post_init__(self):
        if self._keys is None:
            self._keys = [t for t, _ in self.jumps]

    def position(self, t: CyclicTime) -> Site:
        """Cadlag position at time t (a jump at t is already taken)."""
        i = bisect_right(self._keys, t)
        return self.jumps[i - 1][1] if i else self.start

    def end_site(self) -> Site:
        return self.jumps[-1][1] if self.jumps else self.start

    def n_jumps(self) -> int:
        return len(self.jumps)

    def alpha(self, t: CyclicTime) -> CyclicTime:
        """Most recent regeneration mark <= t (time zero if none)."""
        best = ZERO
        for m in self.regen_marks:
            if m <= t:
                best = m
            else:
                break
        return best

    def n_regens(self, t: CyclicTime) -> int:
        return sum(1 for m in self.regen_marks if m <= t)

    # -- dense views ---------------------------------------------------

    def jump_totals(self) -> np.ndarray:
        return np.array([t.total(self.beta) for t in self._keys], dtype=float)

    def site_array(self) -> np.ndarray:
        """(n_jumps + 1) x d array of sites, row 0 = start."""
        rows = [self.start] + [s for _, s in self.jumps]
        return np.asarray(rows, dtype=np.int64)

    def segments(self):
        """Yield (t_lo, t_hi, site) totals covering [0, horizon]."""
        beta = self.beta
        lo = 0.0
        pos = self.start
        for t, site in self.jumps:
            hi = t.total(beta)
            yield (lo, hi, pos)
            lo, pos = hi, site
        yield (lo, self.horizon.total(beta), pos)

    def position_total(self, x: float) -> Site:
        totals = self.jump_totals()
        i = int(np.searchsorted(totals, x, side="right"))
        return self.jumps[i - 1][1] if i else self.start

    def to_json(self) -> dict:
        return {
            "start": list(self.start) if isinstance(self.start, tuple) else self.start,
            "beta": self.beta,
            "jumps": [[t.k, t.s, list(s) if isinstance(s, tuple) else s]
                      for t, s in self.jumps],
            "regen": [[m.k, m.s] for m in self.regen_marks],
            "horizon": [self.horizon.k, self.horizon.s],
        }


@dataclass
class WalkOutcome:
    trajectory: Trajectory
    tau_reg: CyclicTime | None
    closed: bool


# --- exposure construction -------------------------------------------


def _next_event(store: ClockStore, incident, s: float):
    """Earliest (cyclically) next ring among the incident edges.

    Returns (time, wrapped, index into incident) or None if every
    incident schedule is empty.  Ties break to the lowest index, i.e.
    canonical edge order.
    """
    ci = min(int(s), store.n_cells - 1)
    for c in range(ci, store.n_cells):
        best = None
        for idx, (edge, _) in enumerate(incident):
            for t in store.rings_in_cell(edge, c):
                if c > ci or t > s:
                    if best is None or t < best[0]:
                        best = (t, idx)
                    break
        if best is not None:
            return (best[0], False, best[1])
    for c in range(0, ci + 1):
        best = None
        for idx, (edge, _) in enumerate(incident):
            rings = store.rings_in_cell(edge, c)
            if rings and (best is None or rings[0] < best[0]):
                best = (rings[0], idx)
        if best is not None:
            return (best[0], True, best[1])
    return None


def simulate_cyclic_walk(start: Site, horizon: CyclicTime, store: ClockStore,
                         stop_at_closure: bool = True) -> WalkOutcome:
    """Run the exposure construction from `start` until min(horizon, closure).

    The walk is a deterministic function of the ClockStore.  With
    ``stop_at_closure=False`` the walk continues periodically past its
    first closure (it then repeats its past verbatim).
    """
    return _run_exposure(store, start, 0, 0.0, horizon, start, stop_at_closure)


def _run_exposure(store, pos, k, s, horizon, closure_site, stop_at_closure):
    topology = store.topology
    beta = store.beta
    jumps = []
    start = pos
    tau_reg = None
    end = horizon
    while True:
        incident = topology.incident(pos)
        ev = _next_event(store, incident, s)
        if ev is None:
            # every incident schedule is silent: the walk is frozen here
            if pos == closure_site and tau_reg is None:
                cand = CyclicTime(k + 1, 0.0)
                if cand <= horizon:
                    tau_reg = cand
                    if stop_at_closure:
                        end = cand
            break
        t, wrapped, idx = ev
        if wrapped:
            boundary = CyclicTime(k + 1, 0.0)
            if boundary > horizon:
                break
            if pos == closure_site and tau_reg is None:
                tau_reg = boundary
                if stop_at_closure:
                    end = boundary
                    break
        event = CyclicTime(k + 1 if wrapped else k, t)
        if event > horizon:
            break
        pos = incident[idx][1]
        jumps.append((event, pos))
        k, s = event.k, event.s
    traj = Trajectory(topology, beta, start, jumps, end)
    return WalkOutcome(traj, tau_reg, tau_reg is not None)


def continue_cyclic_walk(store: ClockStore, pos: Site, t: CyclicTime,
                         horizon: CyclicTime, closure_site: Site | None = None,
                         stop_at_closure: bool = False) -> WalkOutcome:
    """Resume an exposure walk from state (pos, t) until horizon.

    Used for conditional (resampled-future) estimates: the store carries
    the conditioning through its frozen schedules.
    """
    site = closure_site if closure_site is not None else pos
    return _run_exposure(store, pos, t.k, t.s, horizon, site, stop_at_closure)


# --- driven construction ---------------------------------------------


@dataclass
class DriverSample:
    """Jump attempts of an independent rate-2d simple walk.

    ``attempts`` is a list of (CyclicTime, neighbor index) following the
    deterministic order of ``topology.neighbors``; ``horizon`` is the
    time up to which the sample is complete.
    """

    attempts: list
    horizon: CyclicTime


def sample_driver(seed: int, topology, horizon: CyclicTime, beta: float) -> DriverSample:
    """Sample a simple continuous-time walk driver up to the horizon."""
    d = topology.d
    rate = 2.0 * d
    key = _rng.fold(seed, _rng.TAG_DRIVER)
    ctr = 0
    k, s = 0, 0.0
    out = []
    while True:
        u = ((_rng.u64_at(key, ctr) >> 11) + 0.5) * 2.0 ** -53
        ctr += 1
        s += -math.log(u) / rate
        while s >= beta:
            s -= beta
            k += 1
        t = CyclicTime(k, s)
        if t > horizon:
            return DriverSample(out, horizon)
        direction = min(int(_rng.unif_at(key, ctr) * rate), 2 * d - 1)
        ctr += 1
        out.append((t, direction))


def simulate_driven_walk(driver: DriverSample, horizon: CyclicTime, topology,
                         beta: float, start: Site,
                         stop_at_closure: bool = True) -> WalkOutcome:
    """Build the cyclic walk from an independent simple-walk sample.

    An attempted jump at time t is suppressed when its target equals
    W(t - k*beta) for some k >= 1; a jump is forced whenever the history
    jumped at the same offset in an earlier period out of the current
    position's counterpart (the walk then replays that jump backwards,
    i.e. swaps across the historical edge).  History lookups use exact
    offset equality: offsets are copied, never recomputed.
    """
    if driver.horizon < horizon:
        raise ValueError("driver horizon shorter than requested")
    attempts = driver.attempts
    nbr_table = {}

    def neighbors_of(p):
        if p not in nbr_table:
            nbr_table[p] = topology.neighbors(p)
        return nbr_table[p]

    jumps = []
    keys = []
    history = {}  # offset -> [(period, pre site, post site)]

    def pos_at(t: CyclicTime):
        i = bisect_right(keys, t)
        return jumps[i - 1][1] if i else start

    def record(t, pre, post):
        jumps.append((t, post))
        keys.append(t)
        history.setdefault(t.s, []).append((t.k, pre, post))

    pos = start
    k = 0
    tau_reg = None
    end = horizon
    di = 0
    done = False
    while not done:
        # events of period k: driver attempts plus forced-candidate offsets
        events = []
        while di < len(attempts) and attempts[di][0].k == k:
            events.append((attempts[di][0].s, 0, attempts[di][1]))
            di += 1
        for off, entries in history.items():
            if any(p < k for p, _, _ in entries):
                events.append((off, 1, None))
        events.sort(key=lambda e: (e[0], e[1]))
        for off, kind, payload in events:
            t = CyclicTime(k, off)
            if t > horizon:
                done = True
                break
            if kind == 1:
                for p, pre, post in history[off]:
                    if p < k and post == pos:
                        record(t, pos, pre)
                        pos = pre
                        break
            else:
                target = topology.wrap(neighbors_of(pos)[payload])
                suppressed = any(pos_at(CyclicTime(k - kk, off)) == target
                                 for kk in range(1, k + 1))
                if not suppressed:
                    record(t, pos, target)
                    pos = target
        if done:
            break
        boundary = CyclicTime(k + 1, 0.0)
        if boundary > horizon:
            break
        if pos == start and tau_reg is None:
            tau_reg = boundary
            if stop_at_closure:
                end = boundary
                break
        k += 1
    traj = Trajectory(topology, beta, start, jumps, end)
    # drop any jumps recorded past a closure stop
    if tau_reg is not None and stop_at_closure:
        traj.jumps = [(t, s) for t, s in traj.jumps if t <= tau_reg]
        traj._keys = [t for t, _ in traj.jumps]
    return WalkOutcome(traj, tau_reg, tau_reg is not None)


# --- regenerated walk -------------------------------------------------


def simulate_regenerated_walk(start: Site, horizon: CyclicTime, topology,
                              beta: float, seed: int) -> Trajectory:
    """Chain independent cyclic walks at their closure times.

    Each segment runs on a fresh ClockStore derived from (seed, segment
    index); closures are recorded as regeneration marks (offset 0,
    position = start).
    """
    jumps = []
    marks = []
    shift_k = 0
    segment = 0
    while True:
        sub_horizon = CyclicTime(horizon.k - shift_k, horizon.s)
        store = ClockStore(topology, beta, _rng.spawn_seed(seed, segment))
        out = simulate_cyclic_walk(start, sub_horizon, store,
                                   stop_at_closure=True)
        for t, site in out.trajectory.jumps:
            jumps.append((CyclicTime(t.k + shift_k, t.s), site))
        if not out.closed:
            break
        shift_k += out.tau_reg.k
        mark = CyclicTime(shift_k, 0.0)
        if mark >= horizon:
            break
        marks.append(mark)
        segment += 1
    return Trajectory(topology, beta, start, jumps, horizon, regen_marks=marks)


# --- concatenation ----------------------------------------------------


def concatenate(trajs: list[Trajectory]) -> Trajectory:
    """Piecewise concatenation with translation.

    The i-th trajectory is translated so that it starts where the
    previous one ended, and its jump times are shifted by the total
    duration so far.  Regeneration marks are kept when the shift leaves
    them at offset zero (i.e. when durations are multiples of beta).
    """
    if not trajs:
        raise ValueError("cannot concatenate an empty list")
    first = trajs[0]
    beta = first.beta
    if any(t.beta != beta or t.topology != first.topology for t in trajs):
        raise ValueError("trajectories must share topology and beta")
    jumps = []
    marks = []
    shift = ZERO
    anchor = first.start
    for traj in trajs:
        delta = tuple(a - b for a, b in zip(anchor, traj.start))
        for t, site in traj.jumps:
            moved = first.topology.wrap(tuple(c + dc for c, dc in zip(site, delta)))
            jumps.append((add_times(shift, t, beta), moved))
        for m in traj.regen_marks:
            sm = add_times(shift, m, beta)
            if sm.s == 0.0:
                marks.append(sm)
        anchor = first.topology.wrap(
            tuple(c + dc for c, dc in zip(traj.end_site(), delta)))
        shift = add_times(shift, traj.horizon, beta)
    return Trajectory(first.topology, beta, first.start, jumps, shift,
                      regen_marks=marks)
