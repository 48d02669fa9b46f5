"""Counter-based keyed random streams.

All process randomness in this package is derived from a splitmix64-style
construction: a 64-bit key is folded from (seed, purpose tag, payload
words) and the i-th variate of the stream is a pure function of
(key, i).  Nothing is stateful, so sampling is independent of query
order and reproducible across the compiled and pure-Python backends
(both use IEEE doubles and the same libm exp).
"""
from __future__ import annotations

import math

MASK = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15

RNG_NAME = "splitmix64-counter"

# purpose tags for key folding
TAG_LATTICE_EDGE = 1
TAG_PAIR_EDGE = 2
TAG_DRIVER = 3
TAG_SPAWN = 4


def mix64(z: int) -> int:
    """Finalizer of splitmix64 (Stafford mix13)."""
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def fold(*words: int) -> int:
    """Fold a sequence of (possibly signed) integer words into a key."""
    h = 0x8BADF00D5EEDC0DE
    for w in words:
        h = mix64((h ^ (w & MASK)) & MASK)
    return h


def u64_at(key: int, i: int) -> int:
    """The i-th 64-bit value of the stream with the given key."""
    return mix64((key + (i + 1) * GOLDEN) & MASK)


def unif_at(key: int, i: int) -> float:
    """The i-th uniform [0,1) variate of the stream."""
    return (u64_at(key, i) >> 11) * 2.0 ** -53


def poisson_knuth(key: int, ctr: int, exp_neg_lam: float) -> tuple[int, int]:
    """Poisson count by Knuth's product method.

    Returns (count, next counter).  Uses a variable number of uniforms,
    which is fine because the stream is counter-based per key.
    """
    k = 0
    p = 1.0
    while True:
        p *= unif_at(key, ctr)
        ctr += 1
        if p <= exp_neg_lam:
            return k, ctr
        k += 1


def cell_rings(key: int, a: float, b: float) -> tuple[float, ...]:
    """Rings of a rate-1 Poisson process on [a, b), sorted ascending.

    Pure function of the key; the count is Poisson(b - a) and positions
    are i.i.d. uniform on [a, b).
    """
    n, ctr = poisson_knuth(key, 0, math.exp(a - b))
    width = b - a
    return tuple(sorted(a + unif_at(key, ctr + j) * width for j in range(n)))


def cell_key(edge_key: int, cell: int) -> int:
    return mix64((edge_key + (cell + 1) * GOLDEN) & MASK)


def spawn_seed(seed: int, index: int) -> int:
    """Disjoint per-replica seed derived from a base seed."""
    return fold(seed, TAG_SPAWN, index)
