"""Batch experiment runner.

Reads a JSON config, dispatches one experiment, and writes a run
directory whose name and contents are a pure function of the resolved
config: rerunning the same config produces byte-identical outputs.
Every artifact embeds the resolved config, the seed, the RNG
identifier, the norm conventions and any caps in force.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__, diagnostics, estimators
from ._rng import RNG_NAME, spawn_seed
from .clocks import ClockStore
from .graph import Complete, Lattice, Torus
from .interchange import build_permutation, cycle_decomposition, pd_statistics
from .kernel import BACKEND, run_batch, run_trajectory
from .walk import CyclicTime

SCHEMA_VERSION = 1
EXPERIMENTS = ("interchange", "cyclic-walk", "diagnostics", "sweep",
               "percolation", "pair-proximity")
NORMS = {"blocks": "Linf", "displacement": "L2"}


class ConfigError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


@dataclass
class ExperimentConfig:
    experiment: str
    topology: dict
    beta: float | None
    betas: list | None
    horizon_k: int
    samples: int
    seed: int
    k_max: int
    cap: int
    threads: int
    out: str
    proximity_n: int

    def resolved(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "topology": self.topology,
            "beta": self.beta,
            "betas": self.betas,
            "horizon_k": self.horizon_k,
            "samples": self.samples,
            "seed": self.seed,
            "k_max": self.k_max,
            "cap": self.cap,
            "threads": self.threads,
            "proximity_n": self.proximity_n,
        }

    def build_topology(self):
        kind = self.topology["kind"]
        if kind == "lattice":
            return Lattice(self.topology["d"])
        if kind == "torus":
            return Torus(self.topology["d"], self.topology["L"])
        return Complete(self.topology["n"])


def _require(raw, field, types, positive=False):
    if field not in raw:
        raise ConfigError(field, "missing")
    v = raw[field]
    if not isinstance(v, types) or isinstance(v, bool):
        raise ConfigError(field, f"expected {types}, got {type(v).__name__}")
    if positive and v <= 0:
        raise ConfigError(field, "must be positive")
    return v


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    exp = _require(raw, "experiment", str)
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}")
    seed = _require(raw, "seed", int)
    topo = raw.get("topology", {"kind": "lattice", "d": 1})
    if not isinstance(topo, dict) or "kind" not in topo:
        raise ConfigError("topology", "must be an object with a 'kind'")
    kind = topo["kind"]
    if kind not in ("lattice", "torus", "complete"):
        raise ConfigError("topology.kind", "must be lattice, torus or complete")
    if kind in ("lattice", "torus"):
        _require(topo, "d", int, positive=True)
    if kind == "torus":
        _require(topo, "L", int, positive=True)
    if kind == "complete":
        _require(topo, "n", int, positive=True)

    beta = raw.get("beta")
    betas = raw.get("betas")
    if exp == "sweep":
        if not isinstance(betas, list) or not betas or \
                any(not isinstance(b, (int, float)) or b <= 0 for b in betas):
            raise ConfigError("betas", "sweep needs a list of positive betas")
    elif exp != "interchange" or kind != "complete":
        if not isinstance(beta, (int, float)) or isinstance(beta, bool) or beta <= 0:
            raise ConfigError("beta", "must be a positive number")
    if beta is None and exp == "interchange" and kind == "complete":
        beta = raw.get("beta", 1.0)

    samples = _require(raw, "samples", int, positive=True)
    horizon_k = raw.get("horizon_k", 1)
    if not isinstance(horizon_k, int) or horizon_k <= 0:
        raise ConfigError("horizon_k", "must be a positive integer")
    k_max = raw.get("k_max", horizon_k)
    if not isinstance(k_max, int) or k_max <= 0:
        raise ConfigError("k_max", "must be a positive integer")
    cap = raw.get("cap", 10 ** 5)
    if not isinstance(cap, int) or cap <= 0:
        raise ConfigError("cap", "must be a positive integer")
    threads = raw.get("threads", 1)
    if not isinstance(threads, int) or threads <= 0:
        raise ConfigError("threads", "must be a positive integer")
    prox_n = raw.get("proximity_n", 2)
    if not isinstance(prox_n, int) or prox_n <= 0:
        raise ConfigError("proximity_n", "must be a positive integer")
    out = raw.get("out", "runs")
    if not isinstance(out, str):
        raise ConfigError("out", "must be a string path")
    return ExperimentConfig(exp, topo, float(beta) if beta is not None else None,
                            list(betas) if betas else None, horizon_k, samples,
                            seed, k_max, cap, threads, out, prox_n)


# --- output plumbing --------------------------------------------------


def _version_string() -> str:
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty"],
                              capture_output=True, text=True, timeout=5,
                              cwd=os.path.dirname(__file__))
        if desc.returncode == 0:
            return f"{__version__}+{desc.stdout.strip()}"
    except OSError:
        pass
    return __version__


def run_metadata(cfg: ExperimentConfig) -> dict:
    return {
        "config": cfg.resolved(),
        "seed": cfg.seed,
        "rng": RNG_NAME,
        "norms": NORMS,
        "k_max": cfg.k_max,
        "cap": cfg.cap,
        "kernel_backend": BACKEND,
        "version": _version_string(),
    }


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.resolved(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


class RunWriter:
    """Writes artifacts into the run directory and records a manifest."""

    def __init__(self, cfg: ExperimentConfig, meta: dict):
        self.dir = os.path.join(cfg.out, f"{cfg.experiment}-{config_hash(cfg)}")
        os.makedirs(self.dir, exist_ok=True)
        self.meta = meta
        self.files = []

    def write_json(self, name: str, payload: dict) -> None:
        path = os.path.join(self.dir, name)
        with open(path, "w") as f:
            json.dump({"meta": self.meta, **payload}, f, indent=2,
                      sort_keys=True)
            f.write("\n")
        self.files.append(name)

    def write_csv(self, name: str, header: list, rows: list) -> None:
        path = os.path.join(self.dir, name)
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.meta, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        with open(path, "w") as f:
            f.write(buf.getvalue())
        self.files.append(name)

    def finish(self) -> None:
        path = os.path.join(self.dir, "manifest.json")
        with open(path, "w") as f:
            json.dump({"meta": self.meta, "artifacts": sorted(self.files)},
                      f, indent=2, sort_keys=True)
            f.write("\n")


def _pmap(fn, items, threads):
    """Worker pool over replicas with deterministic result order."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


# --- experiments ------------------------------------------------------


def _run_interchange(cfg: ExperimentConfig, w: RunWriter):
    topology = cfg.build_topology()
    if not topology.finite:
        raise ConfigError("topology", "interchange needs a finite topology")
    rows = []
    for i in range(cfg.samples):
        store = ClockStore(topology, cfg.beta, spawn_seed(cfg.seed, i))
        perm = build_permutation(store)
        cycles = cycle_decomposition(perm.perm)
        pd = pd_statistics(cycles)
        rows.append([i, perm.n_rings, len(cycles),
                     _fmt(max(len(c) for c in cycles)),
                     _fmt(pd.mass_fraction)])
    w.write_csv("interchange.csv",
                ["replica", "rings", "cycles", "largest_cycle",
                 "mass_fraction_above_cutoff"], rows)


def _run_cyclic_walk(cfg: ExperimentConfig, w: RunWriter):
    topo = cfg.topology
    L = topo.get("L", 0) if topo["kind"] == "torus" else 0
    if topo["kind"] == "complete":
        raise ConfigError("topology", "cyclic-walk needs a lattice or torus")
    batch = run_batch(topo["d"], cfg.beta, cfg.seed, cfg.samples,
                      cfg.horizon_k, stop_at_closure=True, L=L)
    closed = int(np.sum(batch["closed"]))
    w.write_csv("endpoints.csv",
                [f"x{i}" for i in range(topo["d"])] + ["n_jumps", "closed",
                                                       "tau_reg_k"],
                [[*map(int, batch["endpoints"][i]), int(batch["n_jumps"][i]),
                  int(batch["closed"][i]), int(batch["tau_reg_k"][i])]
                 for i in range(cfg.samples)])
    est = estimators.Estimate.proportion(closed, cfg.samples)
    w.write_json("summary.json", {
        "closed_fraction": est.value, "stderr": est.stderr,
        "ci95": list(est.ci95), "samples": cfg.samples,
    })


def _run_sweep(cfg: ExperimentConfig, w: RunWriter):
    topo = cfg.topology
    if topo["kind"] != "lattice":
        raise ConfigError("topology", "sweep runs on the infinite lattice")
    rep = estimators.closure_sweep(topo["d"], cfg.betas, cfg.k_max,
                                   cfg.samples, cfg.seed)
    rows = [[_fmt(b), _fmt(e.value), _fmt(e.stderr),
             _fmt(e.ci95[0]), _fmt(e.ci95[1]), e.samples]
            for b, e in rep.points]
    w.write_csv("sweep.csv",
                ["beta", "closure_probability", "stderr", "ci_lo", "ci_hi",
                 "samples"], rows)
    w.write_json("summary.json", {"loglog_slope": rep.loglog_slope})


def _run_percolation(cfg: ExperimentConfig, w: RunWriter):
    topology = cfg.build_topology()
    reps = estimators.percolation_ensemble(topology, cfg.beta, cfg.seed,
                                           cfg.samples, cfg.cap)
    rows = [[i, r.size, int(r.cap_exceeded)] for i, r in enumerate(reps)]
    w.write_csv("percolation.csv", ["replica", "cluster_size", "cap_exceeded"],
                rows)
    sizes = [r.size for r in reps]
    w.write_json("summary.json", {
        "mean_size": float(np.mean(sizes)),
        "max_size": int(max(sizes)),
        "capped": int(sum(r.cap_exceeded for r in reps)),
        "open_probability": 1.0 - float(np.exp(-cfg.beta)),
    })


def _run_diagnostics(cfg: ExperimentConfig, w: RunWriter):
    topo = cfg.topology
    if topo["kind"] == "complete":
        raise ConfigError("topology", "diagnostics needs a lattice or torus")
    L = topo.get("L", 0) if topo["kind"] == "torus" else 0

    def one(i):
        out = run_trajectory(topo["d"], cfg.beta, spawn_seed(cfg.seed, i),
                             cfg.horizon_k, stop_at_closure=False, L=L)
        traj = out.trajectory
        rel = diagnostics.relaxed_times(traj)
        hb = diagnostics.heavy_blocks(traj, traj.horizon)
        tf = diagnostics.tau_fast(traj, 5.0)
        return [i, traj.n_jumps(), _fmt(rel.fraction),
                int(rel.is_relaxed_path) if rel.is_relaxed_path is not None else "",
                len(hb.entries),
                sum(1 for e in hb.entries if e.super_heavy),
                _fmt(tf.total(cfg.beta)) if tf is not None else ""]

    rows = _pmap(one, range(cfg.samples), cfg.threads)
    w.write_csv("diagnostics.csv",
                ["replica", "n_jumps", "relaxed_fraction", "relaxed_path",
                 "heavy_blocks", "super_heavy_blocks", "tau_fast_L5"], rows)


def _run_pair_proximity(cfg: ExperimentConfig, w: RunWriter):
    topo = cfg.topology
    if topo["kind"] == "complete":
        raise ConfigError("topology", "pair-proximity needs a lattice or torus")
    L = topo.get("L", 0) if topo["kind"] == "torus" else 0
    params = diagnostics.ProximityParams(n=cfg.proximity_n)

    def one(i):
        o1 = run_trajectory(topo["d"], cfg.beta, spawn_seed(cfg.seed, 2 * i),
                            cfg.horizon_k, stop_at_closure=True, L=L)
        o2 = run_trajectory(topo["d"], cfg.beta, spawn_seed(cfg.seed, 2 * i + 1),
                            cfg.horizon_k, stop_at_closure=True, L=L)
        rep = diagnostics.pair_proximity(o1.trajectory, o2.trajectory, params,
                                         tau1=o1.tau_reg, tau2=o2.tau_reg)
        return [i, _fmt(rep.measure),
                _fmt(rep.merge_time) if rep.merge_time is not None else "",
                int(rep.closed1), int(rep.closed2), int(rep.non_merge),
                int(rep.exceeds_budget)]

    rows = _pmap(one, range(cfg.samples), cfg.threads)
    w.write_csv("proximity.csv",
                ["pair", "proximity_measure", "merge_time", "closed1",
                 "closed2", "non_merge", "exceeds_budget"], rows)


RUNNERS = {
    "interchange": _run_interchange,
    "cyclic-walk": _run_cyclic_walk,
    "sweep": _run_sweep,
    "percolation": _run_percolation,
    "diagnostics": _run_diagnostics,
    "pair-proximity": _run_pair_proximity,
}


# --- entry point ------------------------------------------------------


def run(cfg: ExperimentConfig) -> str:
    """Execute one experiment; returns the run directory path."""
    w = RunWriter(cfg, run_metadata(cfg))
    RUNNERS[cfg.experiment](cfg, w)
    w.finish()
    return w.dir


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="stirlab",
        description="Interchange-process and cyclic-walk experiment runner")
    ap.add_argument("--config", required=True, help="JSON config path")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--threads", type=int, help="override the thread count")
    ap.add_argument("--out", help="override the output directory")
    args = ap.parse_args(argv)

    try:
        with open(args.config) as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": "config-unreadable", "detail": str(exc)}),
              file=sys.stderr)
        return 2

    # CLI flags win over env vars win over the config file
    for field, flag, env in (("seed", args.seed, "STIRLAB_SEED"),
                             ("threads", args.threads, "STIRLAB_THREADS")):
        if flag is not None:
            raw[field] = flag
        elif os.environ.get(env):
            raw[field] = int(os.environ[env])
    if args.out is not None:
        raw["out"] = args.out
    elif os.environ.get("STIRLAB_OUT"):
        raw["out"] = os.environ["STIRLAB_OUT"]

    try:
        cfg = parse_config(raw)
    except ConfigError as exc:
        print(json.dumps({"error": "schema", "field": exc.field,
                          "detail": str(exc)}), file=sys.stderr)
        return 2
    try:
        rundir = run(cfg)
    except ConfigError as exc:
        print(json.dumps({"error": "schema", "field": exc.field,
                          "detail": str(exc)}), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "io", "detail": str(exc)}), file=sys.stderr)
        return 3
    print(rundir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
