"""Fidelities, energies and density diagnostics of steady states and trajectory states."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import expectation, occupations
from .errors import ArgumentError, PositivityError
from .model import build_h3body, build_hamiltonian, rk_state, w_state

KINDS = ("fidelity_rk", "fidelity_w", "energy_full", "energy_3body", "excitation_density",
         "nn_correlation")
CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class ObservableSpec:
    kind: str
    xi: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown observable kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("fidelity_rk", "energy_3body") and not self.xi > 0:
            raise ArgumentError("xi must be positive")


def _clamp_unit(value):
    if value < -CLAMP_TOL or value > 1 + CLAMP_TOL:
        raise PositivityError(f"fidelity {value!r} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def fidelity(rho, psi):
    """<psi|rho|psi>; values within 1e-9 of [0, 1] are clamped, larger violations raise."""
    rho = rho.toarray() if sp.issparse(rho) else np.asarray(rho)
    psi = np.asarray(psi)
    if rho.shape != (psi.shape[0], psi.shape[0]):
        raise ArgumentError(f"density matrix {rho.shape} and state {psi.shape} do not match")
    return _clamp_unit(float(np.vdot(psi, rho @ psi).real))


def fidelity_pure(psi1, psi2):
    psi1, psi2 = np.asarray(psi1), np.asarray(psi2)
    if psi1.shape != psi2.shape:
        raise ArgumentError(f"state dimensions {psi1.shape} and {psi2.shape} differ")
    return _clamp_unit(float(abs(np.vdot(psi1, psi2)) ** 2))


def _diagonal_observable(values, state):
    # expectation of a diagonal operator given by its diagonal ``values``
    state = state.toarray() if sp.issparse(state) else np.asarray(state)
    if state.ndim == 1:
        return float(np.sum(values * np.abs(state) ** 2))
    return float(np.sum(values * np.diagonal(state).real))


def excitation_density_values(n_sites):
    return occupations(n_sites).mean(axis=1)


def nn_correlation_values(n_sites):
    occ = occupations(n_sites)
    if n_sites < 2:
        raise ArgumentError("nn_correlation needs at least two sites")
    return (occ[:, 1:] & occ[:, :-1]).sum(axis=1) / (n_sites - 1)


def target_state(spec, n_sites):
    if spec.kind == "fidelity_rk":
        return rk_state(n_sites, spec.xi)
    if spec.kind == "fidelity_w":
        return w_state(n_sites)
    raise ArgumentError(f"{spec.kind} has no target state")


def evaluate(spec, state, p):
    """Value of the observable ``spec`` for a ket or density matrix on the chain ``p``.

    Energies use the chain parameters of ``p`` (full driven Hamiltonian or the
    three-body projector Hamiltonian with ``spec.xi``).
    """
    dim = state.shape[0]
    if dim != p.dim:
        raise ArgumentError(f"state dimension {dim} does not match {p.n_sites} sites")
    N = p.n_sites
    if spec.kind in ("fidelity_rk", "fidelity_w"):
        target = target_state(spec, N)
        if state.ndim == 1:
            return fidelity_pure(state, target)
        return fidelity(state, target)
    if spec.kind == "energy_full":
        return expectation(build_hamiltonian(p), state).real
    if spec.kind == "energy_3body":
        return expectation(build_h3body(p.with_(xi=spec.xi)), state).real
    if spec.kind == "excitation_density":
        return _diagonal_observable(excitation_density_values(N), state)
    return _diagonal_observable(nn_correlation_values(N), state)


def trajectory_observable(spec, p):
    """Fast callable ``f(psi)`` for normalized trajectory states, for use with MCWF sampling."""
    N = p.n_sites
    if spec.kind in ("fidelity_rk", "fidelity_w"):
        target = target_state(spec, N)
        return lambda psi: float(abs(np.vdot(target, psi)) ** 2)
    if spec.kind in ("energy_full", "energy_3body"):
        op = build_hamiltonian(p) if spec.kind == "energy_full" else build_h3body(p.with_(xi=spec.xi))
        return lambda psi: float(np.vdot(psi, op @ psi).real)
    values = (excitation_density_values(N) if spec.kind == "excitation_density"
              else nn_correlation_values(N))
    return lambda psi: float(np.sum(values * np.abs(psi) ** 2))
