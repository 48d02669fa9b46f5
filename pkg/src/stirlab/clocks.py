"""Lazy, memoized, seeded Poisson ring schedules per edge.

Each edge of the topology carries a rate-1 Poisson process on [0, beta),
repeated cyclically.  The period is split into unit cells and the rings
of each cell are a pure function of (seed, canonical edge, epoch, cell)
via the counter-based stream in :mod:`stirlab._rng`.  This keeps
sampling lazy (a walk only materializes the cells it looks at) while
remaining completely independent of query order.
"""
from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field

from . import _rng
from .graph import Complete, Edge, edge_key


@dataclass(frozen=True)
class RingSchedule:
    """Sorted ring times in [0, beta) for one edge."""

    times: tuple[float, ...]
    beta: float

    def next_after(self, s: float):
        """Smallest ring time > s, with a wrap flag.

        Returns (time, wrapped) where wrapped means the ring belongs to
        the next period; None if the schedule is empty.  The inequality
        is strict so a jump taken at s is not re-fired at s.
        """
        if not self.times:
            return None
        i = bisect_right(self.times, s)
        if i < len(self.times):
            return (self.times[i], False)
        return (self.times[0], True)

    def __len__(self):
        return len(self.times)


def n_cells(beta: float) -> int:
    return max(1, math.ceil(beta))


def cell_bounds(beta: float, c: int) -> tuple[float, float]:
    return (float(c), min(float(c + 1), beta))


class ClockStore:
    """Memoized source of ring schedules for one replica.

    A schedule is a pure function of (seed, canonical edge, epoch);
    identical (seed, edge) always yields an identical schedule and
    permuting the query order changes nothing.  ``frozen`` pins the
    schedules inherited from a parent store (conditional resampling).
    """

    def __init__(self, topology, beta: float, seed: int, epoch: int = 0,
                 frozen: dict[Edge, tuple[float, ...]] | None = None,
                 default_silent: bool = False):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.topology = topology
        self.beta = float(beta)
        self.seed = int(seed)
        self.epoch = int(epoch)
        self.frozen = dict(frozen) if frozen else {}
        # with default_silent, non-frozen edges never ring (hand-built tests)
        self.default_silent = default_silent
        self.n_cells = n_cells(self.beta)
        self._cells: dict[Edge, list] = {}
        self._schedules: dict[Edge, RingSchedule] = {}
        self._spawned = 0

    # -- sampling ------------------------------------------------------

    def rings_in_cell(self, edge: Edge, c: int) -> tuple[float, ...]:
        """Rings of one unit cell [c, min(c+1, beta)), materialized lazily."""
        if edge in self.frozen:
            a, b = cell_bounds(self.beta, c)
            return tuple(t for t in self.frozen[edge] if a <= t < b)
        if self.default_silent:
            return ()
        cells = self._cells.get(edge)
        if cells is None:
            cells = [None] * self.n_cells
            self._cells[edge] = cells
        rings = cells[c]
        if rings is None:
            ek = edge_key(self.seed, self.epoch, self.topology, edge)
            a, b = cell_bounds(self.beta, c)
            rings = _rng.cell_rings(_rng.cell_key(ek, c), a, b)
            cells[c] = rings
        return rings

    def schedule(self, edge: Edge) -> RingSchedule:
        """The full ring schedule of an edge (memoized object)."""
        sched = self._schedules.get(edge)
        if sched is None:
            if edge in self.frozen:
                times = self.frozen[edge]
            else:
                times = tuple(
                    t for c in range(self.n_cells)
                    for t in self.rings_in_cell(edge, c)
                )
            sched = RingSchedule(times, self.beta)
            self._schedules[edge] = sched
        return sched

    def next_ring_lazy(self, edge: Edge, s: float):
        """Same contract as RingSchedule.next_after but only materializes
        cells until the answer is known."""
        ci = min(int(s), self.n_cells - 1)
        for t in self.rings_in_cell(edge, ci):
            if t > s:
                return (t, False)
        for c in range(ci + 1, self.n_cells):
            rings = self.rings_in_cell(edge, c)
            if rings:
                return (rings[0], False)
        for c in range(0, ci + 1):
            rings = self.rings_in_cell(edge, c)
            if rings:
                return (rings[0], True)
        return None

    # -- conditioning --------------------------------------------------

    def discovered_edges(self) -> set[Edge]:
        """Edges whose schedule has been (at least partly) looked at."""
        out = set(self.frozen)
        out.update(e for e, cells in self._cells.items()
                   if any(c is not None for c in cells))
        return out

    def resample_undiscovered(self) -> "ClockStore":
        """A store sharing every discovered schedule, with a fresh epoch
        for all other edges.  Repeated calls give independent futures."""
        pinned = dict(self.frozen)
        for e in self.discovered_edges():
            pinned[e] = self.schedule(e).times
        self._spawned += 1
        child_epoch = _rng.fold(self.epoch, self._spawned)
        return ClockStore(self.topology, self.beta, self.seed,
                          epoch=child_epoch, frozen=pinned)

    # -- serialization -------------------------------------------------

    def dump_jsonl(self, fileobj) -> None:
        """One JSON line {edge, times} per discovered edge, for replay."""
        for e in sorted(self.discovered_edges(), key=repr):
            rec = {"edge": _edge_json(e), "times": list(self.schedule(e).times)}
            fileobj.write(json.dumps(rec) + "\n")

    @classmethod
    def load_jsonl(cls, topology, beta, seed, fileobj, epoch=0) -> "ClockStore":
        frozen = {}
        for line in fileobj:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            frozen[_edge_from_json(topology, rec["edge"])] = tuple(rec["times"])
        return cls(topology, beta, seed, epoch=epoch, frozen=frozen)


def _edge_json(edge: Edge):
    base, second = edge
    if isinstance(base, tuple):
        return [list(base), second]
    return [base, second]


def _edge_from_json(topology, rec):
    base, second = rec
    if isinstance(topology, Complete):
        return (base, second)
    return (tuple(base), second)
