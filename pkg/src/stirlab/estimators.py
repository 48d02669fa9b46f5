"""Monte Carlo estimators for walk and cycle statistics.

Every estimator is a pure function of its seed: rerunning with the same
arguments gives bit-identical results.  Confidence intervals use the
normal approximation, switching to Wilson intervals for proportions
near 0 or 1 where the normal interval misbehaves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ._rng import spawn_seed
from .clocks import ClockStore
from .graph import Complete
from .kernel import run_batch
from .walk import CyclicTime, Trajectory, add_offset, continue_cyclic_walk

Z95 = 1.959963984540054


@dataclass
class Estimate:
    value: float
    stderr: float
    samples: int
    ci95: tuple

    @classmethod
    def from_samples(cls, x) -> "Estimate":
        x = np.asarray(x, dtype=float)
        n = len(x)
        m = float(np.mean(x))
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return cls(m, se, n, (m - Z95 * se, m + Z95 * se))

    @classmethod
    def proportion(cls, k: int, n: int) -> "Estimate":
        p = k / n
        se = math.sqrt(p * (1.0 - p) / n)
        if 0.1 < p < 0.9 and n * p * (1.0 - p) > 25.0:
            ci = (p - Z95 * se, p + Z95 * se)
        else:
            ci = wilson_interval(k, n)
        return cls(p, se, n, ci)


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple:
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _horizon_parts(t: float, beta: float) -> tuple[int, float]:
    k = int(t // beta)
    s = t - k * beta
    if s >= beta:
        k, s = k + 1, 0.0
    return k, s


# --- transition probability -------------------------------------------


@dataclass
class TransitionReport:
    sup: Estimate            # probability of the empirical mode
    argmax: tuple
    bound: float             # t^(-d/2 + 0.1)
    passes_bound: bool       # upper CI edge of the mode <= bound
    origin: Estimate         # probability of the exact-kernel argmax (origin)
    sparse_warning: bool     # mode count too small to be meaningful


def transition_probability_sup(d: int, beta: float, t: float, samples: int,
                               seed: int, backend=None) -> TransitionReport:
    """Empirical sup_u P(W(t) = u) from an endpoint histogram.

    The mode of the histogram is an upward-biased estimate of the sup
    (it is a maximum over many noisy cells), so the report also carries
    the unbiased estimate at the origin, where the exact kernel is
    maximal by symmetry and unimodality; oracle comparisons should use
    that one.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    hk, hs = _horizon_parts(t, beta)
    batch = run_batch(d, beta, seed, samples, hk, hs,
                      stop_at_closure=False, backend=backend)
    pts = batch["endpoints"]
    _, counts = np.unique(pts, axis=0, return_counts=True)
    order = np.argmax(counts)
    uniq = np.unique(pts, axis=0)
    mode_count = int(counts[order])
    argmax = tuple(int(c) for c in uniq[order])
    sup = Estimate.proportion(mode_count, samples)
    origin_count = int(np.sum(np.all(pts == 0, axis=1)))
    origin = Estimate.proportion(origin_count, samples)
    bound = t ** (-d / 2 + 0.1)
    return TransitionReport(sup, argmax, bound, sup.ci95[1] <= bound,
                            origin, mode_count < 10)


def exact_transition_sup(d: int, t: float, radius: int | None = None):
    """sup_u P(W(t) = u) for the free walk phase (t <= beta), exactly.

    Per coordinate the walk jumps +1 and -1 at rate 1 each, so the
    d-dimensional kernel factorizes and its sup sits at the origin:
    sup = p1(0)^d with p1 the one-dimensional kernel.  p1 is computed
    by exponentiating the tridiagonal generator on a box of radius
    about 6*sqrt(t) with absorbing boundary; the returned truncation
    bound is the total mass absorbed, inflated to d dimensions.
    """
    if radius is None:
        radius = max(8, int(math.ceil(6.0 * math.sqrt(t))))
    m = 2 * radius + 1
    gen = np.zeros((m, m))
    idx = np.arange(m - 1)
    gen[idx, idx + 1] = 1.0
    gen[idx + 1, idx] = 1.0
    np.fill_diagonal(gen, -2.0)
    p1 = expm(gen * t)[radius]
    lost = max(0.0, 1.0 - float(np.sum(p1)))
    value = float(p1[radius]) ** d
    return value, d * lost


# --- displacement moments ---------------------------------------------


@dataclass
class MomentsReport:
    mean: np.ndarray
    mean_stderr: np.ndarray
    cov: np.ndarray
    cov_stderr: np.ndarray
    sigma_hat: float
    max_mean_z: float        # max |mean_i| / stderr_i
    max_offdiag_z: float     # max |cov_ij| / stderr_ij over i < j
    diag_spread: float       # (max - min) / mean of diagonal
    samples: int


def displacement_moments(d: int, beta: float, t: float, samples: int,
                         seed: int, backend=None) -> MomentsReport:
    """Empirical mean, covariance and diffusivity of W(t)."""
    hk, hs = _horizon_parts(t, beta)
    batch = run_batch(d, beta, seed, samples, hk, hs,
                      stop_at_closure=False, backend=backend)
    x = batch["endpoints"].astype(float)
    n = len(x)
    mean = x.mean(axis=0)
    mean_se = x.std(axis=0, ddof=1) / math.sqrt(n)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    prods = centered[:, :, None] * centered[:, None, :]
    cov_se = prods.std(axis=0, ddof=1) / math.sqrt(n)
    diag = np.diag(cov)
    sigma_hat = math.sqrt(float(np.mean(diag)) / t)
    off = ~np.eye(d, dtype=bool)
    max_off_z = float(np.max(np.abs(cov[off]) / cov_se[off])) if d > 1 else 0.0
    return MomentsReport(
        mean, mean_se, cov, cov_se, sigma_hat,
        float(np.max(np.abs(mean) / mean_se)),
        max_off_z,
        float((diag.max() - diag.min()) / diag.mean()),
        n)


# --- closure probability ----------------------------------------------


@dataclass
class SweepReport:
    points: list             # [(beta, Estimate)]
    loglog_slope: float | None


def closure_probability(d: int, beta: float, k_max: int, samples: int,
                        seed: int, backend=None) -> Estimate:
    """Fraction of cyclic walks closing within k_max periods.

    A certified lower bound of the closing probability, non-decreasing
    in k_max on a fixed seed (the events are nested)."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    batch = run_batch(d, beta, seed, samples, k_max,
                      stop_at_closure=True, backend=backend)
    return Estimate.proportion(int(np.sum(batch["closed"])), samples)


def closure_sweep(d: int, betas, k_max: int, samples: int, seed: int,
                  backend=None) -> SweepReport:
    """Closure probability across beta values, with the log-log slope.

    The same base seed is reused at every beta so that trend checks
    compare matched replica streams."""
    points = [(b, closure_probability(d, b, k_max, samples, seed, backend))
              for b in betas]
    slope = None
    if len(points) >= 2 and all(e.value > 0 for _, e in points):
        lx = np.log([b for b, _ in points])
        ly = np.log([e.value for _, e in points])
        slope = float(np.polyfit(lx, ly, 1)[0])
    return SweepReport(points, slope)


# --- escape probability -----------------------------------------------


def escape_probability(store: ClockStore, traj: Trajectory, t: CyclicTime,
                       k: int, resamples: int) -> "EscapeReport":
    """Conditional chance of moving at least k*2^k within time k^3*4^k.

    The conditioning on the walk's past is carried by the store: every
    schedule the walk has discovered stays frozen, everything else is
    resampled independently per replica, and the walk is continued from
    its state at t.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    duration = float(k ** 3 * 4 ** k)
    threshold2 = float(k * 2 ** k) ** 2
    pos = traj.position(t)
    horizon = add_offset(t, duration, store.beta)
    hits = 0
    for _ in range(resamples):
        child = store.resample_undiscovered()
        out = continue_cyclic_walk(child, pos, t, horizon)
        end = out.trajectory.end_site()
        disp2 = sum((a - b) * (a - b) for a, b in zip(end, pos))
        if disp2 >= threshold2:
            hits += 1
    return EscapeReport(Estimate.proportion(hits, resamples),
                        k, duration, math.sqrt(threshold2),
                        resamples < 30)


@dataclass
class EscapeReport:
    estimate: Estimate
    k: int
    duration: float
    threshold: float
    wide_ci_warning: bool


# --- ring percolation -------------------------------------------------


@dataclass
class ClusterReport:
    sites: list
    size: int
    cap_exceeded: bool


def percolation_cluster(store: ClockStore, origin, cap: int) -> ClusterReport:
    """Connected cluster of the origin under "edge rang at least once".

    Each edge is open independently with probability 1 - e^(-beta).
    Exploration is a lazy breadth-first search; it stops with a flag
    once more than cap sites are found (possible infinite cluster).
    Passing the store of a walk gives the exact percolation environment
    that walk moved through.
    """
    seen = {origin}
    queue = [origin]
    capped = False
    while queue and not capped:
        site = queue.pop()
        for edge, nb in store.topology.incident(site):
            if nb in seen:
                continue
            if len(store.schedule(edge)) == 0:
                continue
            seen.add(nb)
            queue.append(nb)
            if len(seen) > cap:
                capped = True
                break
    return ClusterReport(sorted(seen), len(seen), capped)


def origin_site(topology):
    return 0 if isinstance(topology, Complete) else (0,) * topology.d


def percolation_ensemble(topology, beta: float, seed: int, replicas: int,
                         cap: int):
    """Independent origin clusters, one store per replica."""
    origin = origin_site(topology)
    out = []
    for i in range(replicas):
        store = ClockStore(topology, beta, spawn_seed(seed, i))
        out.append(percolation_cluster(store, origin, cap))
    return out
