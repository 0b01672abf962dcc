"""Detuning sweeps, size scaling and single-trajectory dumps, with CSV + JSON metadata output."""

import csv
import dataclasses
import io
import json
import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .core import ground_state
from .dynamics import LindbladModel, mcwf_run, steady_state_direct, steady_state_mcwf
from .errors import ArgumentError, SolverError
from .model import (
    ChainParams,
    blockade_jump_ops,
    build_hamiltonian,
    pump_jump_ops,
    rk_jump_ops,
)
from .observables import ObservableSpec, evaluate, fidelity, target_state, trajectory_observable

log = logging.getLogger(__name__)

EXPERIMENTS = ("rk-sweep", "rk-scaling", "w-sweep", "trajectory")
METHODS = ("direct", "mcwf", "auto")

# per-experiment defaults layered under user configuration
EXPERIMENT_DEFAULTS = {
    "rk-sweep": {"n": 5, "V": 100.0, "delta_min": -4.0, "delta_max": 0.0, "delta_step": 0.25},
    "rk-scaling": {"n_list": [5, 7, 9, 11], "V": 100.0, "delta": -2.0},
    "w-sweep": {"n_list": [3, 4, 5, 6, 7, 8], "V": 1e4, "delta_min": -6.0, "delta_max": 0.0,
                "delta_step": 0.25},
    "trajectory": {"n": 3, "V": 100.0, "delta": -2.0, "t_final": 100.0},
}


@dataclass
class RunConfig:
    experiment: str
    n: int = 5
    n_list: list = None
    omega: float = 1.5
    delta: float = -2.0
    V: float = 100.0
    kappa: float = 1.0
    pump: float = 0.02
    xi: float = 1.0
    delta_min: float = None
    delta_max: float = None
    delta_step: float = None
    family: str = None  # jump operators: "rk" or "w"; defaults from the experiment
    method: str = "auto"
    auto_threshold: int = 8  # method=auto uses trajectories from this many sites on
    max_dim: int = 2**20  # superoperator dimension guard for the direct method
    n_traj: int = 100
    t_burn: float = None  # defaults to 20 / slowest rate
    t_avg: float = None  # defaults to 100 / slowest rate
    n_samples: int = 200
    seed: int = 0
    tol: float = 1e-8
    propagator: str = "spectral"
    t_final: float = 100.0
    threads: int = 1
    output: str = None

    @classmethod
    def from_mapping(cls, experiment, values):
        """Build a config from defaults, then ``values`` (config file merged with CLI flags)."""
        if experiment not in EXPERIMENTS:
            raise ArgumentError(f"unknown experiment {experiment!r}")
        known = {f.name for f in fields(cls)}
        merged = dict(EXPERIMENT_DEFAULTS[experiment])
        for key, value in values.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ArgumentError(f"unknown configuration key {key!r}")
            if value is not None:
                merged[key] = value
        merged["experiment"] = experiment
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self):
        if self.method not in METHODS:
            raise ArgumentError(f"method must be one of {METHODS}")
        if self.propagator not in ("rk45", "spectral"):
            raise ArgumentError("propagator must be rk45 or spectral")
        if self.family not in (None, "rk", "w"):
            raise ArgumentError("family must be rk or w")
        if self.experiment in ("rk-sweep", "w-sweep"):
            if not self.delta_step or self.delta_step <= 0 or self.delta_max < self.delta_min:
                raise ArgumentError("delta grid needs delta_step > 0 and delta_max >= delta_min")
        if self.experiment in ("rk-scaling", "w-sweep") and not self.sizes():
            raise ArgumentError("n_list must not be empty")
        if any(int(n) != n or n < 1 for n in self.sizes()):
            raise ArgumentError("site counts must be positive integers")
        if self.n_traj < 2:
            raise ArgumentError("n_traj must be at least 2")
        if self.method == "direct":
            for n in self.sizes():
                if 4**n > self.max_dim:
                    raise ArgumentError(
                        f"method=direct with N={n} exceeds the superoperator limit {self.max_dim}")
        self.chain(self.sizes()[0])  # parameter validation

    def sizes(self):
        if self.experiment in ("rk-scaling", "w-sweep"):
            return [int(n) for n in (self.n_list or [])]
        return [int(self.n)]

    def deltas(self):
        if self.experiment in ("rk-scaling", "trajectory"):
            return [float(self.delta)]
        count = int(np.floor((self.delta_max - self.delta_min) / self.delta_step + 1e-9)) + 1
        return [float(self.delta_min + i * self.delta_step) for i in range(count)]

    def jump_family(self):
        if self.family:
            return self.family
        return "w" if self.experiment == "w-sweep" else "rk"

    def chain(self, n, delta=None):
        return ChainParams(n_sites=int(n), omega=self.omega,
                           delta=self.delta if delta is None else delta, V=self.V,
                           kappa=self.kappa, pump=self.pump, xi=self.xi)

    def windows(self):
        slowest = self.pump if self.pump > 0 else (self.kappa if self.kappa > 0 else 1.0)
        t_burn = 20 / slowest if self.t_burn is None else self.t_burn
        t_avg = 100 / slowest if self.t_avg is None else self.t_avg
        return t_burn, t_avg

    def method_for(self, n):
        if self.method == "auto":
            return "mcwf" if n >= self.auto_threshold else "direct"
        return self.method

    def resolved(self):
        out = dataclasses.asdict(self)
        out["t_burn"], out["t_avg"] = self.windows()
        out["n_list"] = self.sizes()
        out["delta_grid"] = self.deltas()
        out["family"] = self.jump_family()
        return out


@dataclass
class SweepRow:
    delta: float
    N: int
    method: str
    fidelity: float
    fidelity_stderr: float
    energy_ss: float
    energy_gs: float
    excitation_density: float
    runtime_seconds: float


ROW_FIELDS = [f.name for f in fields(SweepRow)]


class SweepError(SolverError):
    """A sweep point failed; ``rows`` holds every completed row before it."""

    def __init__(self, message, rows):
        super().__init__(message)
        self.rows = rows


def build_model(p, family):
    jumps = rk_jump_ops(p) if family == "rk" else blockade_jump_ops(p)
    return LindbladModel(build_hamiltonian(p), jumps + pump_jump_ops(p))


def _fidelity_spec(family):
    # the jump operators stabilize the xi = 1 RK state regardless of cfg.xi
    return ObservableSpec("fidelity_rk", xi=1.0) if family == "rk" else ObservableSpec("fidelity_w")


def solve_point(cfg, n, delta, family, seed_offset=0):
    """Steady state of one (N, delta) point, summarized as a :class:`SweepRow`.

    Returns ``(row, info)`` with solver diagnostics in ``info``.
    """
    start = time.perf_counter()
    p = cfg.chain(n, delta)
    model = build_model(p, family)
    method = cfg.method_for(n)
    fid_spec = _fidelity_spec(family)
    e_gs, _ = ground_state(model.H)
    info = {"N": n, "delta": delta}
    if method == "direct":
        res = steady_state_direct(model, max_dim=cfg.max_dim)
        fid = fidelity(res.rho, target_state(fid_spec, n))
        stderr = 0.0
        e_ss = evaluate(ObservableSpec("energy_full"), res.rho, p)
        dens = evaluate(ObservableSpec("excitation_density"), res.rho, p)
        info["diagnostics"] = res.diagnostics
    else:
        t_burn, t_avg = cfg.windows()
        obs = {
            "fidelity": trajectory_observable(fid_spec, p),
            "energy": trajectory_observable(ObservableSpec("energy_full"), p),
            "density": trajectory_observable(ObservableSpec("excitation_density"), p),
        }
        psi0 = np.zeros(p.dim, dtype=complex)
        psi0[0] = 1
        res = steady_state_mcwf(model, psi0, obs, n_traj=cfg.n_traj, t_burn=t_burn, t_avg=t_avg,
                                base_seed=cfg.seed + seed_offset, tol=cfg.tol,
                                n_samples=cfg.n_samples, threads=cfg.threads,
                                accumulate_rho=False, propagator=cfg.propagator)
        fid, stderr = res.estimates["fidelity"], res.stderr["fidelity"]
        e_ss, dens = res.estimates["energy"], res.estimates["density"]
        info["diagnostics"] = {
            "base_seed": cfg.seed + seed_offset,
            "seeds": res.diagnostics["seeds"],
            "stderr": res.stderr,
            "mean_jumps": float(np.mean(res.diagnostics["n_jumps"])),
        }
    info["warnings"] = list(res.warnings)
    row = SweepRow(delta=float(delta), N=int(n), method=method, fidelity=float(fid),
                   fidelity_stderr=float(stderr), energy_ss=float(e_ss), energy_gs=float(e_gs),
                   excitation_density=float(dens), runtime_seconds=time.perf_counter() - start)
    return row, info


def _run_grid(cfg, family):
    points = [(n, d) for n in sorted(cfg.sizes()) for d in sorted(cfg.deltas())]
    rows, infos = [], []

    def work(index_point):
        index, (n, d) = index_point
        try:
            return solve_point(cfg, n, d, family, seed_offset=index)
        except SolverError as exc:
            raise SolverError(f"N={n}, delta={d}: {exc}") from exc

    pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 and cfg.method != "mcwf" else None
    results = pool.map(work, enumerate(points)) if pool else map(work, enumerate(points))
    try:
        for row, info in results:
            log.info("N=%d delta=%+.3f F=%.6f (%s, %.1fs)", row.N, row.delta, row.fidelity,
                     row.method, row.runtime_seconds)
            rows.append(row)
            infos.append(info)
    except SolverError as exc:
        raise SweepError(str(exc), rows) from exc
    finally:
        if pool:
            pool.shutdown()
    return rows, infos


def run_rk_sweep(cfg):
    """RK fidelity, steady-state and ground-state energy across the detuning grid."""
    return _run_grid(cfg, cfg.jump_family())


def run_rk_scaling(cfg):
    """RK fidelity at fixed detuning for each system size."""
    return _run_grid(cfg, cfg.jump_family())


def run_w_sweep(cfg):
    """W fidelity for every (N, delta) grid point."""
    return _run_grid(cfg, cfg.jump_family())


def peak_table(rows):
    """Per-N best grid point: ``{N: {"delta": ..., "fidelity": ..., "fidelity_stderr": ...}}``."""
    peaks = {}
    for row in rows:
        best = peaks.get(row.N)
        if best is None or row.fidelity > best["fidelity"]:
            peaks[row.N] = {"delta": row.delta, "fidelity": row.fidelity,
                            "fidelity_stderr": row.fidelity_stderr}
    return dict(sorted(peaks.items()))


def run_trajectory(cfg):
    """Single quantum-jump trajectory for seed ``cfg.seed``, sampled on a uniform grid."""
    n = cfg.sizes()[0]
    family = cfg.jump_family()
    p = cfg.chain(n)
    model = build_model(p, family)
    psi0 = np.zeros(p.dim, dtype=complex)
    psi0[0] = 1
    grid = np.linspace(0.0, cfg.t_final, max(cfg.n_samples, 2))
    obs = {
        "fidelity": trajectory_observable(_fidelity_spec(family), p),
        "energy": trajectory_observable(ObservableSpec("energy_full"), p),
        "excitation_density": trajectory_observable(ObservableSpec("excitation_density"), p),
    }
    record = mcwf_run(model, psi0, cfg.t_final, cfg.seed, tol=cfg.tol, observables=obs,
                      sample_times=grid, propagator=cfg.propagator)
    out = record.to_dict()
    out["n_channels"] = len(model.jumps)
    return out


def format_float(x):
    return format(float(x), ".17g")


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for row in sorted(rows, key=lambda r: (r.N, r.delta)):
        writer.writerow([format_float(v) if isinstance(v, float) else v
                         for v in dataclasses.astuple(row)])
    return buf.getvalue()


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        out = []
        for rec in reader:
            out.append(SweepRow(
                delta=float(rec["delta"]), N=int(rec["N"]), method=rec["method"],
                fidelity=float(rec["fidelity"]), fidelity_stderr=float(rec["fidelity_stderr"]),
                energy_ss=float(rec["energy_ss"]), energy_gs=float(rec["energy_gs"]),
                excitation_density=float(rec["excitation_density"]),
                runtime_seconds=float(rec["runtime_seconds"])))
    return out


def metadata_path(output):
    return Path(str(output) + ".meta.json")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def write_outputs(output, body, cfg, wall_time, extra=None):
    """Write the main output (CSV or JSON text) and its ``.meta.json`` sidecar."""
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(body, encoding="utf-8", newline="\n")
    meta = {
        "artifact": "rydprep",
        "version": __version__,
        "config": cfg.resolved(),
        "wall_time_seconds": wall_time,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
    meta.update(extra or {})
    metadata_path(output).write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8", newline="\n")
