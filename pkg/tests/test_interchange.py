import numpy as np
import pytest

from stirlab._rng import spawn_seed
from stirlab.clocks import ClockStore
from stirlab.graph import Complete, Torus
from stirlab.interchange import (build_permutation, compose_uniform_transpositions,
                                 cycle_decomposition, default_cutoff,
                                 pd_statistics, permutation_sign,
                                 sample_gem_largest)
from stirlab.walk import CyclicTime, simulate_cyclic_walk


class TestBuildPermutation:
    def test_silent_clocks_identity(self):
        store = ClockStore(Torus(2, 4), 1.0, 0, default_silent=True)
        res = build_permutation(store)
        assert np.array_equal(res.perm, np.arange(16))
        assert res.n_rings == 0

    def test_single_ring_is_transposition(self):
        t = Torus(1, 3)
        store = ClockStore(t, 1.0, 0, default_silent=True,
                           frozen={(((0,), 0)): (0.5,)})
        res = build_permutation(store)
        assert res.apply((0,)) == (1,)
        assert res.apply((1,)) == (0,)
        assert res.apply((2,)) == (2,)

    def test_three_rings_compose_in_time_order(self):
        # rings (0-1)@0.1, (1-2)@0.2, (0-1)@0.3 give the 3-cycle 0->2
        t = Torus(1, 3)
        store = ClockStore(t, 1.0, 0, default_silent=True,
                           frozen={((0,), 0): (0.1, 0.3), ((1,), 0): (0.2,)})
        res = build_permutation(store)
        assert res.apply((0,)) == (2,)
        assert res.apply((1,)) == (1,)
        assert res.apply((2,)) == (0,)

    def test_sign_matches_ring_parity(self):
        for seed in range(20):
            store = ClockStore(Torus(2, 3), 1.5, seed)
            res = build_permutation(store)
            assert permutation_sign(res.perm) == (-1) ** (res.n_rings % 2)

    def test_infinite_topology_rejected(self):
        from stirlab.graph import Lattice
        with pytest.raises(ValueError):
            build_permutation(ClockStore(Lattice(2), 1.0, 0))


class TestWalkConsistency:
    def test_permutation_equals_walk_everywhere(self):
        # the time-beta permutation applied to v equals the cyclic walk
        # started at v evaluated at time beta, sharing one clock store
        t = Torus(2, 3)
        for seed in range(10):
            store = ClockStore(t, 1.0, spawn_seed(60, seed))
            res = build_permutation(store)
            for v in t.vertices():
                out = simulate_cyclic_walk(v, CyclicTime(1, 0.0), store,
                                           stop_at_closure=False)
                assert res.apply(v) == out.trajectory.position(CyclicTime(1, 0.0))


class TestCycles:
    def test_decomposition_roundtrip(self):
        perm = np.array([1, 2, 0, 4, 3])
        cycles = cycle_decomposition(perm)
        assert sorted(map(len, cycles), reverse=True) == [3, 2]
        assert sum(map(len, cycles)) == 5

    def test_rejects_non_bijection(self):
        with pytest.raises(ValueError):
            cycle_decomposition(np.array([0, 0, 1]))

    def test_uniform_transpositions_are_permutations(self):
        rng = np.random.default_rng(3)
        perm = compose_uniform_transpositions(50, 200, rng)
        assert sorted(perm.tolist()) == list(range(50))

    def test_one_transposition_sign(self):
        rng = np.random.default_rng(0)
        perm = compose_uniform_transpositions(10, 1, rng)
        assert permutation_sign(perm) == -1


class TestPdStatistics:
    def test_identity_permutation_no_mass(self):
        cycles = [[i] for i in range(100)]
        rep = pd_statistics(cycles)
        assert rep.mass_fraction == 0.0
        assert rep.no_macroscopic_mass

    def test_single_giant_cycle(self):
        rep = pd_statistics([list(range(100))])
        assert rep.mass_fraction == 1.0
        assert rep.top_normalized[0] == 1.0

    def test_cutoff_default(self):
        assert default_cutoff(400) == round(400 ** (2 / 3))

    def test_gem_largest_in_range_and_mean(self):
        rng = np.random.default_rng(5)
        xs = sample_gem_largest(20_000, rng)
        assert np.all(xs > 0) and np.all(xs <= 1)
        # mean of the largest PD(1) part is the Golomb-Dickman constant
        assert abs(xs.mean() - 0.6243) < 0.01
