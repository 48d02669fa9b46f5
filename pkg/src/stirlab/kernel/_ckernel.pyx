# cython: boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled walk kernel for lattice and torus topologies.

Mirrors the pure-Python engine bit for bit: same counter-based keyed
RNG (splitmix64), same per-cell Poisson schedules, same event loop and
tie-breaking.  The equivalence is enforced by tests.
"""
from libc.math cimport ceil, exp, log
from libc.stdint cimport int64_t, uint64_t
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector
from libcpp.algorithm cimport sort

import numpy as np

BACKEND = "cython"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t FOLD_INIT = 0x8BADF00D5EEDC0DEULL
cdef double INV53 = 1.0 / 9007199254740992.0
cdef int MAX_D = 32


cdef inline uint64_t mix64(uint64_t z):
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double unif_at(uint64_t key, uint64_t i):
    return <double>(mix64(key + (i + 1) * GOLDEN) >> 11) * INV53


cdef inline uint64_t spawn_seed_c(uint64_t seed, uint64_t index):
    cdef uint64_t h = FOLD_INIT
    h = mix64(h ^ seed)
    h = mix64(h ^ <uint64_t>4)   # TAG_SPAWN
    h = mix64(h ^ index)
    return h


cdef inline uint64_t edge_key_c(uint64_t seed, int64_t L, int axis,
                                int64_t* base, int d):
    cdef uint64_t h = FOLD_INIT
    cdef int i
    h = mix64(h ^ seed)
    h = mix64(h ^ <uint64_t>0)   # epoch
    h = mix64(h ^ <uint64_t>1)   # TAG_LATTICE_EDGE
    h = mix64(h ^ <uint64_t>L)
    h = mix64(h ^ <uint64_t>axis)
    for i in range(d):
        h = mix64(h ^ <uint64_t>base[i])
    return h


cdef const vector[double]* get_cell(unordered_map[uint64_t, vector[double]]& cache,
                                    uint64_t ekey, int c, double beta):
    cdef uint64_t ckey = mix64(ekey + <uint64_t>(c + 1) * GOLDEN)
    cdef unordered_map[uint64_t, vector[double]].iterator it = cache.find(ckey)
    if it != cache.end():
        return &(cache[ckey])
    cdef double a = <double>c
    cdef double b = beta if beta < <double>(c + 1) else <double>(c + 1)
    cdef double lam_exp = exp(a - b)
    cdef uint64_t ctr = 0
    cdef double p = 1.0
    cdef int n = 0
    while True:
        p *= unif_at(ckey, ctr)
        ctr += 1
        if p <= lam_exp:
            break
        n += 1
    cdef vector[double] v
    cdef int j
    for j in range(n):
        v.push_back(a + unif_at(ckey, ctr + j) * (b - a))
    sort(v.begin(), v.end())
    cache[ckey] = v
    return &(cache[ckey])


cdef inline int64_t mod_l(int64_t x, int64_t L):
    cdef int64_t r = x % L
    return r + L if r < 0 else r


cdef int _walk(int d, double beta, uint64_t seed, int64_t HK, double HS,
               bint stop_at_closure, int64_t L,
               unordered_map[uint64_t, vector[double]]& cache,
               bint record,
               vector[int64_t]& out_k, vector[double]& out_s,
               vector[int64_t]& out_sites,
               int64_t* pos, int64_t* end_k, double* end_s,
               int64_t* tau_k, int64_t* njumps):
    """Exposure-construction event loop from the origin.

    pos must point at d zeroed int64 slots; on return it holds the final
    position.  tau_k is -1 while the cycle is open.
    """
    cdef int64_t k = 0
    cdef double s = 0.0
    cdef int ncells = <int>ceil(beta)
    if ncells < 1:
        ncells = 1
    cdef int64_t base[32]
    cdef int i, c, ci, idx, axis, found, wrapped, best_idx, at_origin
    cdef double best_t, t
    cdef int64_t ek
    cdef uint64_t ekey
    cdef const vector[double]* rings
    cdef size_t r

    tau_k[0] = -1
    njumps[0] = 0
    end_k[0] = HK
    end_s[0] = HS

    while True:
        ci = <int>s
        if ci > ncells - 1:
            ci = ncells - 1
        found = 0
        wrapped = 0
        best_idx = -1
        best_t = 0.0
        for c in range(ci, ncells):
            best_idx = -1
            for idx in range(2 * d):
                axis = idx >> 1
                for i in range(d):
                    base[i] = pos[i]
                if (idx & 1) == 0:
                    base[axis] -= 1
                if L:
                    base[axis] = mod_l(base[axis], L)
                ekey = edge_key_c(seed, L, axis, base, d)
                rings = get_cell(cache, ekey, c, beta)
                for r in range(rings.size()):
                    t = rings[0][r]
                    if c > ci or t > s:
                        if best_idx < 0 or t < best_t:
                            best_t = t
                            best_idx = idx
                        break
            if best_idx >= 0:
                found = 1
                wrapped = 0
                break
        if not found:
            for c in range(0, ci + 1):
                best_idx = -1
                for idx in range(2 * d):
                    axis = idx >> 1
                    for i in range(d):
                        base[i] = pos[i]
                    if (idx & 1) == 0:
                        base[axis] -= 1
                    if L:
                        base[axis] = mod_l(base[axis], L)
                    ekey = edge_key_c(seed, L, axis, base, d)
                    rings = get_cell(cache, ekey, c, beta)
                    if rings.size() > 0:
                        t = rings[0][0]
                        if best_idx < 0 or t < best_t:
                            best_t = t
                            best_idx = idx
                if best_idx >= 0:
                    found = 1
                    wrapped = 1
                    break
        at_origin = 1
        for i in range(d):
            if pos[i] != 0:
                at_origin = 0
                break
        if not found:
            # silent neighborhood: frozen here forever
            if at_origin and tau_k[0] < 0 and k + 1 <= HK:
                tau_k[0] = k + 1
                if stop_at_closure:
                    end_k[0] = k + 1
                    end_s[0] = 0.0
            return 0
        if wrapped:
            if k + 1 > HK:
                return 0
            if at_origin and tau_k[0] < 0:
                tau_k[0] = k + 1
                if stop_at_closure:
                    end_k[0] = k + 1
                    end_s[0] = 0.0
                    return 0
        ek = k + 1 if wrapped else k
        if ek > HK or (ek == HK and best_t > HS):
            return 0
        axis = best_idx >> 1
        if (best_idx & 1) == 0:
            pos[axis] -= 1
        else:
            pos[axis] += 1
        if L:
            pos[axis] = mod_l(pos[axis], L)
        njumps[0] += 1
        if record:
            out_k.push_back(ek)
            out_s.push_back(best_t)
            for i in range(d):
                out_sites.push_back(pos[i])
        k = ek
        s = best_t


def run_batch(int d, double beta, object base_seed, Py_ssize_t n,
              int64_t horizon_k, double horizon_s=0.0,
              bint stop_at_closure=True, int64_t L=0):
    """Endpoint-only ensemble: replica i uses spawn_seed(base_seed, i)."""
    if d < 1 or d > MAX_D:
        raise ValueError("dimension out of range")
    endpoints = np.zeros((n, d), dtype=np.int64)
    n_jumps = np.zeros(n, dtype=np.int64)
    closed = np.zeros(n, dtype=np.uint8)
    tau_reg_k = np.full(n, -1, dtype=np.int64)
    cdef int64_t[:, ::1] ep = endpoints
    cdef int64_t[::1] nj = n_jumps
    cdef unsigned char[::1] cl = closed
    cdef int64_t[::1] tk = tau_reg_k
    cdef unordered_map[uint64_t, vector[double]] cache
    cdef vector[int64_t] dk
    cdef vector[double] ds
    cdef vector[int64_t] dsites
    cdef int64_t pos[32]
    cdef int64_t end_k, tau, jumps
    cdef double end_s
    cdef uint64_t seed0 = <uint64_t>(int(base_seed) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t i
    cdef int j
    for i in range(n):
        cache.clear()
        for j in range(d):
            pos[j] = 0
        _walk(d, beta, spawn_seed_c(seed0, <uint64_t>i), horizon_k, horizon_s,
              stop_at_closure, L, cache, 0, dk, ds, dsites,
              pos, &end_k, &end_s, &tau, &jumps)
        for j in range(d):
            ep[i, j] = pos[j]
        nj[i] = jumps
        cl[i] = 1 if tau >= 0 else 0
        tk[i] = tau
    return {"endpoints": endpoints, "n_jumps": n_jumps,
            "closed": closed.astype(bool), "tau_reg_k": tau_reg_k}


def run_trajectory_raw(int d, double beta, object seed, int64_t horizon_k,
                       double horizon_s=0.0, bint stop_at_closure=True,
                       int64_t L=0):
    """Full jump record of one walk from the origin.

    Returns (jumps_k, jumps_s, sites, tau_reg_k, end_k, end_s) where
    sites has one row per jump (row i = position after jump i) and
    tau_reg_k is -1 for an open cycle.
    """
    if d < 1 or d > MAX_D:
        raise ValueError("dimension out of range")
    cdef unordered_map[uint64_t, vector[double]] cache
    cdef vector[int64_t] dk
    cdef vector[double] ds
    cdef vector[int64_t] dsites
    cdef int64_t pos[32]
    cdef int64_t end_k, tau, jumps
    cdef double end_s
    cdef int j
    for j in range(d):
        pos[j] = 0
    _walk(d, beta, <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF),
          horizon_k, horizon_s, stop_at_closure, L, cache, 1,
          dk, ds, dsites, pos, &end_k, &end_s, &tau, &jumps)
    cdef Py_ssize_t nj = dk.size()
    jumps_k = np.empty(nj, dtype=np.int64)
    jumps_s = np.empty(nj, dtype=np.float64)
    sites = np.empty((nj, d), dtype=np.int64)
    cdef int64_t[::1] jkv = jumps_k
    cdef double[::1] jsv = jumps_s
    cdef int64_t[:, ::1] stv = sites
    cdef Py_ssize_t i
    for i in range(nj):
        jkv[i] = dk[i]
        jsv[i] = ds[i]
        for j in range(d):
            stv[i, j] = dsites[i * d + j]
    return jumps_k, jumps_s, sites, tau, end_k, end_s
