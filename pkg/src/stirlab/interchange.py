"""Interchange process on finite graphs and cycle-structure statistics.

The time-beta permutation is built by composing the edge transpositions
in global ring order; its cycle decomposition feeds the Poisson-
Dirichlet comparison (GEM(1) stick breaking is the oracle).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .clocks import ClockStore


@dataclass
class InterchangeResult:
    """Time-beta permutation on an indexed vertex set.

    ``perm[i]`` is the index of the final position of the particle that
    started at vertex index i.
    """

    perm: np.ndarray
    n_rings: int
    vertices: list
    index: dict

    def apply(self, vertex):
        return self.vertices[self.perm[self.index[vertex]]]


def build_permutation(store: ClockStore) -> InterchangeResult:
    """Compose all ring transpositions of a finite topology in time order.

    Simultaneous rings (float ties) are broken by canonical edge order.
    """
    topology = store.topology
    if not topology.finite:
        raise ValueError("build_permutation needs a finite vertex set")
    vertices = list(topology.vertices())
    index = {v: i for i, v in enumerate(vertices)}
    events = []
    for edge in topology.edges():
        for t in store.schedule(edge).times:
            events.append((t, edge))
    events.sort()
    n = len(vertices)
    pos = np.arange(n)   # particle -> current site index
    at = np.arange(n)    # site index -> particle
    for _, edge in events:
        if isinstance(edge[0], tuple):
            base, axis = edge
            other = topology.wrap(
                base[:axis] + (base[axis] + 1,) + base[axis + 1:])
            a, b = index[base], index[other]
        else:
            a, b = index[edge[0]], index[edge[1]]
        pa, pb = at[a], at[b]
        at[a], at[b] = pb, pa
        pos[pa], pos[pb] = b, a
    return InterchangeResult(pos, len(events), vertices, index)


def compose_uniform_transpositions(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Permutation of 0..n-1 from `count` uniform random transpositions."""
    pos = np.arange(n)
    at = np.arange(n)
    for _ in range(count):
        a = int(rng.integers(n))
        b = int(rng.integers(n - 1))
        if b >= a:
            b += 1
        pa, pb = at[a], at[b]
        at[a], at[b] = pb, pa
        pos[pa], pos[pb] = b, a
    return pos


def cycle_decomposition(perm: np.ndarray) -> list[list[int]]:
    """Cycles of a permutation, longest first (ties: smallest element)."""
    perm = np.asarray(perm)
    n = len(perm)
    if sorted(perm.tolist()) != list(range(n)):
        raise ValueError("not a bijection on 0..n-1")
    seen = np.zeros(n, dtype=bool)
    cycles = []
    for v in range(n):
        if seen[v]:
            continue
        cyc = []
        u = v
        while not seen[u]:
            seen[u] = True
            cyc.append(u)
            u = int(perm[u])
        cycles.append(cyc)
    cycles.sort(key=lambda c: (-len(c), min(c)))
    return cycles


def permutation_sign(perm: np.ndarray) -> int:
    cycles = cycle_decomposition(perm)
    return -1 if (len(perm) - len(cycles)) % 2 else 1


@dataclass
class PdReport:
    mass_fraction: float            # alpha-hat: mass in cycles >= cutoff
    cutoff: int
    top_normalized: list[float]     # top-10 cycle lengths / (alpha-hat * V)
    no_macroscopic_mass: bool


def default_cutoff(n_vertices: int) -> int:
    return max(2, int(round(n_vertices ** (2.0 / 3.0))))


def pd_statistics(cycles: list[list[int]], cutoff: int | None = None) -> PdReport:
    """Macroscopic-mass fraction and normalized top cycle lengths."""
    n = sum(len(c) for c in cycles)
    if cutoff is None:
        cutoff = default_cutoff(n)
    lengths = sorted((len(c) for c in cycles), reverse=True)
    mass = sum(l for l in lengths if l >= cutoff)
    alpha_hat = mass / n
    if alpha_hat == 0.0:
        return PdReport(0.0, cutoff, [], True)
    top = [l / (alpha_hat * n) for l in lengths[:10]]
    return PdReport(alpha_hat, cutoff, top, False)


def sample_gem_largest(samples: int, rng: np.random.Generator,
                       tail: float = 1e-12) -> np.ndarray:
    """Largest part of GEM(1)/PD(1) via stick breaking, Monte Carlo."""
    out = np.empty(samples)
    for i in range(samples):
        remaining = 1.0
        largest = 0.0
        while remaining > tail and remaining > largest:
            v = rng.random()
            stick = v * remaining
            remaining -= stick
            if stick > largest:
                largest = stick
        out[i] = largest
    return out


def pd_comparison(top_fractions: np.ndarray, gem_samples: np.ndarray) -> float:
    """KS distance between empirical largest normalized cycle lengths
    and the Monte Carlo law of the largest GEM(1) part."""
    res = stats.ks_2samp(top_fractions, gem_samples)
    return float(res.statistic)
