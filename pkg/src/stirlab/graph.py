"""Topologies, canonical edges and dyadic block geometry.

Three topologies are supported: the infinite lattice Z^d, the discrete
torus of side L, and the complete graph K_n.  Lattice sites are tuples
of signed integers; complete-graph vertices are plain integers.

Conventions (recorded in run metadata by the CLI):
  * block neighborhoods use the L-infinity distance,
  * displacement statistics elsewhere use the L2 norm.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from ._rng import TAG_LATTICE_EDGE, TAG_PAIR_EDGE, fold

Site = tuple
# A lattice/torus edge is (base site, axis) with the base at the lower
# end of the positive axis direction; a complete-graph edge is a sorted
# vertex pair (i, j).
Edge = tuple


@dataclass(frozen=True)
class Lattice:
    """Infinite lattice Z^d."""

    d: int

    @property
    def finite(self) -> bool:
        return False

    def wrap(self, site: Site) -> Site:
        return site

    def neighbors(self, site: Site) -> list[Site]:
        if len(site) != self.d:
            raise ValueError(f"site {site} has wrong dimension for d={self.d}")
        out = []
        for a in range(self.d):
            for step in (-1, 1):
                out.append(site[:a] + (site[a] + step,) + site[a + 1:])
        return out

    def incident(self, site: Site) -> list[tuple[Edge, Site]]:
        """Incident (canonical edge, other endpoint) pairs, in the same
        deterministic order as :meth:`neighbors`."""
        out = []
        for a in range(self.d):
            down = site[:a] + (site[a] - 1,) + site[a + 1:]
            up = site[:a] + (site[a] + 1,) + site[a + 1:]
            out.append(((down, a), down))
            out.append(((site, a), up))
        return out

    def canonical_edge(self, u: Site, v: Site) -> Edge:
        diff = [(b - a) for a, b in zip(u, v)]
        axes = [a for a, x in enumerate(diff) if x != 0]
        if len(axes) != 1 or abs(diff[axes[0]]) != 1:
            raise ValueError(f"{u} and {v} are not lattice neighbors")
        a = axes[0]
        base = u if diff[a] > 0 else v
        return (base, a)

    def edge_words(self, edge: Edge) -> tuple[int, ...]:
        base, axis = edge
        return (TAG_LATTICE_EDGE, 0, axis) + base


@dataclass(frozen=True)
class Torus:
    """Torus of side L in d dimensions; coordinates live in [0, L)."""

    d: int
    L: int

    def __post_init__(self):
        if self.L < 3:
            raise ValueError("torus side must be >= 3 (no double edges)")

    @property
    def finite(self) -> bool:
        return True

    def wrap(self, site: Site) -> Site:
        return tuple(c % self.L for c in site)

    def neighbors(self, site: Site) -> list[Site]:
        if len(site) != self.d:
            raise ValueError(f"site {site} has wrong dimension for d={self.d}")
        out = []
        for a in range(self.d):
            for step in (-1, 1):
                out.append(self.wrap(site[:a] + (site[a] + step,) + site[a + 1:]))
        return out

    def incident(self, site: Site) -> list[tuple[Edge, Site]]:
        out = []
        for a in range(self.d):
            down = self.wrap(site[:a] + (site[a] - 1,) + site[a + 1:])
            up = self.wrap(site[:a] + (site[a] + 1,) + site[a + 1:])
            out.append(((down, a), down))
            out.append(((self.wrap(site), a), up))
        return out

    def canonical_edge(self, u: Site, v: Site) -> Edge:
        u, v = self.wrap(u), self.wrap(v)
        for (edge, nbr) in self.incident(u):
            if nbr == v:
                return edge
        raise ValueError(f"{u} and {v} are not torus neighbors")

    def edge_words(self, edge: Edge) -> tuple[int, ...]:
        base, axis = edge
        return (TAG_LATTICE_EDGE, self.L, axis) + base

    def vertices(self) -> Iterator[Site]:
        def rec(prefix):
            if len(prefix) == self.d:
                yield tuple(prefix)
                return
            for c in range(self.L):
                yield from rec(prefix + [c])

        yield from rec([])

    def edges(self) -> Iterator[Edge]:
        for v in self.vertices():
            for a in range(self.d):
                yield (v, a)


@dataclass(frozen=True)
class Complete:
    """Complete graph K_n on vertices 0..n-1."""

    n: int

    @property
    def finite(self) -> bool:
        return True

    def wrap(self, site):
        return site

    def neighbors(self, site: int) -> list[int]:
        if not 0 <= site < self.n:
            raise ValueError(f"vertex {site} out of range for K_{self.n}")
        return [v for v in range(self.n) if v != site]

    def incident(self, site: int) -> list[tuple[Edge, int]]:
        return [(self.canonical_edge(site, v), v) for v in self.neighbors(site)]

    def canonical_edge(self, u: int, v: int) -> Edge:
        if u == v:
            raise ValueError("self loop")
        return (u, v) if u < v else (v, u)

    def edge_words(self, edge: Edge) -> tuple[int, ...]:
        i, j = edge
        return (TAG_PAIR_EDGE, self.n, i, j)

    def vertices(self) -> Iterator[int]:
        return iter(range(self.n))

    def edges(self) -> Iterator[Edge]:
        for i in range(self.n):
            for j in range(i + 1, self.n):
                yield (i, j)


Topology = Lattice | Torus | Complete


def edge_key(seed: int, epoch: int, topology, edge: Edge) -> int:
    """64-bit RNG key of a canonical edge."""
    return fold(seed, epoch, *topology.edge_words(edge))


# --- dyadic blocks -----------------------------------------------------

BlockId = tuple  # (level n, corner tuple in 2^n Z^d)


def block_of(site: Site, level: int) -> BlockId:
    """The partition block of side 2^level containing the site.

    Corners are multiples of 2^level; floor semantics hold for negative
    coordinates.
    """
    if level < 1:
        raise ValueError("block level must be >= 1")
    corner = tuple((c >> level) << level for c in site)
    return (level, corner)


def block_distance(site: Site, block: BlockId) -> int:
    """L-infinity distance from a site to a block (0 if inside)."""
    level, corner = block
    side = 1 << level
    dist = 0
    for c, lo in zip(site, corner):
        hi = lo + side
        if c < lo:
            dist = max(dist, lo - c)
        elif c >= hi:
            dist = max(dist, c - (hi - 1))
    return dist


def in_neighborhood(site: Site, block: BlockId, x: int) -> bool:
    """Whether the site is within L-infinity distance x of the block."""
    return block_distance(site, block) <= x
