"""Monte-Carlo wave-function (quantum jump) trajectories.

Waiting-time algorithm: draw r in (0, 1), evolve the unnormalized state with
the non-Hermitian drift until its squared norm falls to r, then apply jump i
with probability ||c_i psi||^2 / sum_j ||c_j psi||^2 and renormalize.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ..errors import ArgumentError, IntegratorError, NumericalConsistencyError
from . import _dopri
from .lindblad import SteadyStateResult

AVERAGED_RHO_MAX_DIM = 64


class PrecisionWarning(UserWarning):
    """Trajectory statistics did not reach the requested standard error."""


@dataclass
class TrajectoryRecord:
    seed: int
    jump_events: list = field(default_factory=list)  # (time, channel)
    jump_norms: list = field(default_factory=list)  # (||psi||^2 at the jump, drawn threshold)
    samples: dict = field(default_factory=dict)  # "t" plus one array per observable
    averages: dict = field(default_factory=dict)
    final_state: np.ndarray = None
    n_steps: int = 0

    def to_dict(self):
        return {
            "seed": int(self.seed),
            "jump_events": [[float(t), int(c)] for t, c in self.jump_events],
            "jump_norms": [[float(a), float(b)] for a, b in self.jump_norms],
            "samples": {k: [float(x) for x in np.asarray(v)] for k, v in self.samples.items()},
            "averages": {k: float(v) for k, v in self.averages.items()},
            "n_steps": int(self.n_steps),
        }


def trajectory_seeds(base_seed, n_traj):
    """Independent 64-bit seeds for trajectories 0..n_traj-1, a pure function of ``base_seed``."""
    children = np.random.SeedSequence(int(base_seed)).spawn(n_traj)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _draw_threshold(rng):
    r = 0.0
    while r == 0.0:
        r = 1.0 - rng.random()  # (0, 1]
    return r if r < 1.0 else np.nextafter(1.0, 0.0)


def trapezoid_weights(times):
    """Weights w with sum(w * f(times)) the trapezoidal time average over [times[0], times[-1]]."""
    times = np.asarray(times, dtype=float)
    if times.size == 1:
        return np.ones(1)
    dt = np.diff(times)
    w = np.zeros_like(times)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w / (times[-1] - times[0])


class _RungeKuttaPropagator:
    """Adaptive Dormand-Prince integration with bisection on the continuous extension."""

    def __init__(self, m, tol):
        drift = (-1j * m.h_nh).tocsr()
        self.data = drift.data.astype(np.complex128)
        self.indices = drift.indices.astype(np.int64)
        self.indptr = drift.indptr.astype(np.int64)
        self.rtol, self.atol = tol, tol * 1e-2
        self.h = 1e-3
        self.steps = 0

    def advance(self, psi, t, t_stop, threshold):
        out = np.empty_like(psi)
        status, t_end, self.h, steps = _dopri.propagate(
            self.data, self.indices, self.indptr, psi, t, t_stop, threshold,
            self.rtol, self.atol, self.h, _dopri.DENSE, out)
        self.steps += steps
        if status == _dopri.STATUS_UNDERFLOW:
            raise IntegratorError(f"step size underflow at t = {t_end}")
        return status == _dopri.STATUS_CROSSED, t_end, out


class _SpectralPropagator:
    """Exact propagation in the eigenbasis of the non-Hermitian drift.

    The jump time is the root of ||psi(t)||^2 - r, found with Brent's method
    to an absolute time tolerance of 1e-13.
    """

    def __init__(self, m, tol):
        self.lam, self.R, self.Rinv = m.drift_eig
        scale = max(np.abs(self.lam).max(), 1.0)
        resid = np.abs(m.h_nh @ self.R - self.R * self.lam).max()
        if not resid <= 1e-8 * scale * max(1.0, np.abs(self.R).max()):
            raise IntegratorError("drift eigendecomposition is inaccurate; use the rk45 propagator")
        self.gram = self.R.conj().T @ self.R
        self.steps = 0

    def _coeffs(self, a, s):
        return np.exp(-1j * self.lam * s) * a

    def _norm_sq(self, a, s):
        self.steps += 1
        c = self._coeffs(a, s)
        return float(np.vdot(c, self.gram @ c).real)

    def advance(self, psi, t, t_stop, threshold):
        a = self.Rinv @ psi
        span = t_stop - t
        if self._norm_sq(a, span) > threshold:
            return False, t_stop, self.R @ self._coeffs(a, span)
        s = brentq(lambda x: self._norm_sq(a, x) - threshold, 0.0, span, xtol=1e-13, rtol=1e-15,
                   maxiter=200)
        return True, t + s, self.R @ self._coeffs(a, s)


PROPAGATORS = {"rk45": _RungeKuttaPropagator, "spectral": _SpectralPropagator}


def mcwf_run(m, psi0, t_final, seed, tol=1e-8, observables=None, sample_times=None,
             accumulate_rho=False, propagator="rk45"):
    """One quantum-jump trajectory on ``[0, t_final]``.

    ``observables`` maps names to callables evaluated on the normalized state at
    each of ``sample_times``; the trapezoidal average over the sampling grid
    goes to ``record.averages``. With ``accumulate_rho`` the same weights
    average |psi><psi| into ``record.samples["rho"]``.
    ``propagator="rk45"`` integrates the drift with an adaptive Dormand-Prince
    pair at relative tolerance ``tol``; ``"spectral"`` propagates exactly in the
    eigenbasis of the drift, which is much faster for stiff, large models.
    Identical ``(m, psi0, t_final, seed, tol, sample_times, propagator)`` give
    identical records.
    """
    psi = np.array(psi0, dtype=np.complex128)
    if psi.shape != (m.dim,):
        raise ArgumentError(f"initial state has shape {psi.shape}, expected ({m.dim},)")
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise ArgumentError("initial state must be normalized")
    if not t_final > 0:
        raise ArgumentError("t_final must be positive")
    observables = observables or {}
    sample_times = np.array([] if sample_times is None else sample_times, dtype=float)
    if sample_times.size and (np.any(np.diff(sample_times) <= 0) or sample_times[0] < 0
                              or sample_times[-1] > t_final):
        raise ArgumentError("sample_times must be increasing and inside [0, t_final]")

    if propagator not in PROPAGATORS:
        raise ArgumentError(f"unknown propagator {propagator!r}")
    prop = PROPAGATORS[propagator](m, tol)
    jumps = m.jumps
    rng = np.random.default_rng(seed)
    record = TrajectoryRecord(seed=int(seed))
    values = {name: np.empty(sample_times.size) for name in observables}
    rho_acc = np.zeros((m.dim, m.dim), dtype=complex) if accumulate_rho else None
    weights = trapezoid_weights(sample_times) if sample_times.size else None

    stops = list(sample_times)
    if not stops or stops[-1] < t_final:
        stops.append(t_final)
    t = 0.0
    r = _draw_threshold(rng)
    sample_idx = 0
    for t_stop in stops:
        while True:
            crossed = False
            if t_stop > t:
                crossed, t, psi = prop.advance(psi, t, t_stop, r)
            if not crossed:
                t = t_stop
                break
            # jump
            norm_sq = float(np.vdot(psi, psi).real)
            candidates = [c @ psi for c in jumps]
            rates = np.array([np.vdot(v, v).real for v in candidates])
            total = rates.sum()
            if not total > 0:
                raise NumericalConsistencyError(f"all jump rates vanish at t = {t}")
            channel = int(np.searchsorted(np.cumsum(rates), rng.random() * total, side="right"))
            channel = min(channel, len(jumps) - 1)
            while rates[channel] == 0:  # guard against landing on a zero-rate channel at a boundary
                channel -= 1
            record.jump_events.append((t, channel))
            record.jump_norms.append((norm_sq, r))
            psi = candidates[channel] / np.sqrt(rates[channel])
            r = _draw_threshold(rng)
        if sample_idx < sample_times.size and t == sample_times[sample_idx]:
            phi = psi / np.linalg.norm(psi)
            for name, f in observables.items():
                values[name][sample_idx] = f(phi)
            if rho_acc is not None:
                rho_acc += weights[sample_idx] * np.outer(phi, phi.conj())
            sample_idx += 1

    record.n_steps = prop.steps
    record.final_state = psi / np.linalg.norm(psi)
    if sample_times.size:
        record.samples = {"t": sample_times, **values}
        record.averages = {name: float(weights @ v) for name, v in values.items()}
        if rho_acc is not None:
            record.samples["rho"] = rho_acc
    return record


def steady_state_mcwf(m, psi0, observables, n_traj, t_burn, t_avg, base_seed=0, tol=1e-8,
                      n_samples=200, target_stderr=None, threads=1, accumulate_rho=None,
                      propagator="rk45"):
    """Trajectory estimate of steady-state observables.

    Each trajectory is time-averaged over ``[t_burn, t_burn + t_avg]`` on a grid
    of ``n_samples`` (>= 100) points; the result holds the mean and standard
    error across trajectories. Seeds come from :func:`trajectory_seeds` and the
    reduction runs in trajectory-index order, so results do not depend on
    ``threads``.
    """
    if n_traj < 2:
        raise ArgumentError("need at least two trajectories for a standard error")
    if not t_avg > 0 or t_burn < 0:
        raise ArgumentError("need t_avg > 0 and t_burn >= 0")
    n_samples = max(int(n_samples), 100)
    grid = np.linspace(t_burn, t_burn + t_avg, n_samples)
    if accumulate_rho is None:
        accumulate_rho = m.dim <= AVERAGED_RHO_MAX_DIM
    if propagator == "spectral":
        m.drift_eig  # decompose once before any worker threads start
    seeds = trajectory_seeds(base_seed, n_traj)

    def run(seed):
        return mcwf_run(m, psi0, t_burn + t_avg, seed, tol=tol, observables=observables,
                        sample_times=grid, accumulate_rho=accumulate_rho, propagator=propagator)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run, seeds))
    else:
        records = [run(s) for s in seeds]

    estimates, stderr = {}, {}
    for name in observables:
        per_traj = np.array([rec.averages[name] for rec in records])
        estimates[name] = float(per_traj.mean())
        stderr[name] = float(per_traj.std(ddof=1) / np.sqrt(n_traj))
    rho = None
    if accumulate_rho:
        rho = sum(rec.samples["rho"] for rec in records) / n_traj
        rho = 0.5 * (rho + rho.conj().T)
    notes = []
    if target_stderr is not None:
        loose = {k: v for k, v in stderr.items() if v > target_stderr}
        if loose:
            msg = f"standard error above target {target_stderr}: {loose}"
            warnings.warn(msg, PrecisionWarning, stacklevel=2)
            notes.append(msg)
    return SteadyStateResult(
        method="mcwf",
        rho=rho,
        estimates=estimates,
        stderr=stderr,
        diagnostics={
            "n_traj": n_traj,
            "seeds": seeds,
            "n_jumps": [len(rec.jump_events) for rec in records],
            "n_steps": [rec.n_steps for rec in records],
            "per_trajectory": {name: [rec.averages[name] for rec in records] for name in observables},
        },
        warnings=notes,
    )
