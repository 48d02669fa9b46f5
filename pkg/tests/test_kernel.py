import numpy as np
import pytest

from stirlab import kernel

needs_compiled = pytest.mark.skipif(kernel.BACKEND != "cython",
                                    reason="compiled kernel not built")

CASES = [(2, 1.0, 4, 0), (5, 8.0, 2, 0), (1, 2.5, 6, 0), (2, 0.5, 3, 4)]


@needs_compiled
@pytest.mark.parametrize("d,beta,hk,L", CASES)
def test_batches_bit_identical(d, beta, hk, L):
    n = 50
    a = kernel.run_batch(d, beta, 4242, n, hk, L=L, backend="python")
    b = kernel.run_batch(d, beta, 4242, n, hk, L=L, backend="cython")
    for key in a:
        assert np.array_equal(a[key], b[key]), key


@needs_compiled
@pytest.mark.parametrize("d,beta,hk,L", CASES)
def test_trajectories_bit_identical(d, beta, hk, L):
    for seed in range(10):
        a = kernel.run_trajectory(d, beta, seed, hk, L=L, backend="python")
        b = kernel.run_trajectory(d, beta, seed, hk, L=L, backend="cython")
        assert a.trajectory.jumps == b.trajectory.jumps
        assert a.tau_reg == b.tau_reg
        assert a.trajectory.horizon == b.trajectory.horizon


def test_open_walk_flags():
    out = kernel.run_batch(5, 8.0, 1, 20, 1)
    open_mask = ~out["closed"]
    assert np.all(out["tau_reg_k"][open_mask] == -1)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernel.run_batch(1, 1.0, 0, 1, 1, backend="fortran")


def test_batch_rows_match_individual_trajectories():
    from stirlab._rng import spawn_seed
    batch = kernel.run_batch(2, 2.0, 31, 5, 3, stop_at_closure=False)
    for i in range(5):
        out = kernel.run_trajectory(2, 2.0, spawn_seed(31, i), 3,
                                    stop_at_closure=False)
        assert tuple(batch["endpoints"][i]) == out.trajectory.end_site()
        assert batch["n_jumps"][i] == out.trajectory.n_jumps()
