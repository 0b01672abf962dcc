import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from rydprep.core import NUMBER, SIGMA_MINUS, SIGMA_X
from rydprep.dynamics import LindbladModel, mcwf_run, steady_state_direct, steady_state_mcwf
from rydprep.dynamics.mcwf import PrecisionWarning, trajectory_seeds, trapezoid_weights
from rydprep.errors import ArgumentError, NumericalConsistencyError
from rydprep.experiments import build_model
from rydprep.model import ChainParams
from rydprep.observables import ObservableSpec, trajectory_observable

PROPAGATORS = ["rk45", "spectral"]


def decay_model(kappa=1.0, omega=0.0):
    return LindbladModel(sp.csr_matrix(omega * SIGMA_X),
                         [sp.csr_matrix(np.sqrt(kappa) * SIGMA_MINUS)])


def n_expect(psi):
    return float(abs(psi[1]) ** 2)


@pytest.mark.parametrize("propagator", PROPAGATORS)
def test_no_jump_evolution_is_unitary_phase(propagator):
    delta, t = 0.7, 3.0
    m = LindbladModel(sp.csr_matrix(delta * NUMBER), [sp.csr_matrix((2, 2), dtype=complex)])
    rec = mcwf_run(m, np.array([0, 1], dtype=complex), t, seed=5, propagator=propagator)
    assert not rec.jump_events
    assert abs(rec.final_state[1] - np.exp(-1j * delta * t)) <= 1e-8


@pytest.mark.parametrize("propagator", PROPAGATORS)
def test_first_jump_times_are_exponential(propagator):
    kappa = 2.0
    m = decay_model(kappa)
    psi0 = np.array([0, 1], dtype=complex)
    times = [mcwf_run(m, psi0, 50.0, seed=s, propagator=propagator).jump_events[0][0]
             for s in trajectory_seeds(3, 2000)]
    assert np.mean(times) == pytest.approx(1 / kappa, rel=0.08)


@pytest.mark.parametrize("propagator", PROPAGATORS)
def test_jump_happens_where_norm_meets_threshold(propagator):
    m = build_model(ChainParams(n_sites=3), "rk")
    psi0 = np.zeros(8, dtype=complex)
    psi0[0] = 1
    rec = mcwf_run(m, psi0, 40.0, seed=11, propagator=propagator)
    assert rec.jump_events
    norms = np.array(rec.jump_norms)
    assert np.max(np.abs(norms[:, 0] - norms[:, 1])) <= 1e-9
    assert all(0 <= ch < len(m.jumps) for _, ch in rec.jump_events)


@given(st.integers(0, 2**63 - 1), st.sampled_from(PROPAGATORS))
@settings(max_examples=10, deadline=None)
def test_same_seed_same_record(seed, propagator):
    m = build_model(ChainParams(n_sites=2), "rk")
    psi0 = np.array([1, 0, 0, 0], dtype=complex)
    grid = np.linspace(0, 30, 101)
    obs = {"n": lambda psi: float(abs(psi[1]) ** 2)}
    a = mcwf_run(m, psi0, 30.0, seed, observables=obs, sample_times=grid, propagator=propagator)
    b = mcwf_run(m, psi0, 30.0, seed, observables=obs, sample_times=grid, propagator=propagator)
    assert repr(a.to_dict()) == repr(b.to_dict())
    assert np.array_equal(a.final_state, b.final_state)


def test_input_validation():
    m = decay_model()
    with pytest.raises(ArgumentError):
        mcwf_run(m, np.array([1, 1], dtype=complex), 1.0, 0)
    with pytest.raises(ArgumentError):
        mcwf_run(m, np.array([1, 0], dtype=complex), 0.0, 0)
    with pytest.raises(ArgumentError):
        mcwf_run(m, np.array([1, 0], dtype=complex), 1.0, 0, propagator="euler")
    with pytest.raises(ArgumentError):
        steady_state_mcwf(m, np.array([1, 0], dtype=complex), {}, 1, 0.0, 1.0)


def test_vanishing_rates_at_jump_raise():
    # a decaying norm with jump operators that annihilate the state
    h = sp.csr_matrix(np.diag([-0.5j, 0.0]))
    m = LindbladModel(sp.csr_matrix((2, 2), dtype=complex), [sp.csr_matrix((2, 2), dtype=complex)])
    m.h_nh = h
    with pytest.raises(NumericalConsistencyError):
        mcwf_run(m, np.array([1, 0], dtype=complex), 200.0, 0)


def test_seeds_are_deterministic_and_distinct():
    a, b = trajectory_seeds(7, 50), trajectory_seeds(7, 50)
    assert a == b and len(set(a)) == 50
    assert trajectory_seeds(8, 50) != a


def test_trapezoid_weights_average_linear_function_exactly():
    t = np.sort(np.random.default_rng(0).uniform(0, 5, 37))
    w = trapezoid_weights(t)
    assert w.sum() == pytest.approx(1)
    assert w @ (3 * t + 1) == pytest.approx(3 * (t[0] + t[-1]) / 2 + 1)


def test_pure_decay_steady_state_estimate():
    res = steady_state_mcwf(decay_model(), np.array([0, 1], dtype=complex), {"n": n_expect},
                            n_traj=50, t_burn=30.0, t_avg=10.0)
    assert abs(res.estimates["n"]) <= 3 * res.stderr["n"] + 1e-12


def test_estimates_independent_of_thread_count():
    m = decay_model(omega=0.8)
    psi0 = np.array([1, 0], dtype=complex)
    kw = dict(n_traj=8, t_burn=2.0, t_avg=10.0, base_seed=4)
    one = steady_state_mcwf(m, psi0, {"n": n_expect}, threads=1, **kw)
    four = steady_state_mcwf(m, psi0, {"n": n_expect}, threads=4, **kw)
    assert one.estimates == four.estimates and one.stderr == four.stderr
    assert np.array_equal(one.rho, four.rho)


@pytest.mark.parametrize("propagator", PROPAGATORS)
def test_agrees_with_direct_solver(propagator):
    p = ChainParams(n_sites=2, pump=0.2)
    m = build_model(p, "rk")
    exact = steady_state_direct(m).rho
    spec = ObservableSpec("fidelity_rk")
    obs = {"F": trajectory_observable(spec, p)}
    psi0 = np.array([1, 0, 0, 0], dtype=complex)
    res = steady_state_mcwf(m, psi0, obs, n_traj=40, t_burn=20.0, t_avg=200.0,
                            base_seed=1, propagator=propagator)
    from rydprep.model import rk_state
    psi = rk_state(2)
    f_exact = float(np.vdot(psi, exact @ psi).real)
    assert abs(res.estimates["F"] - f_exact) <= 4 * res.stderr["F"]


def test_precision_warning_is_not_fatal():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = steady_state_mcwf(decay_model(omega=1.0), np.array([1, 0], dtype=complex),
                                {"n": n_expect}, n_traj=4, t_burn=0.0, t_avg=5.0,
                                target_stderr=1e-9)
    assert any(issubclass(w.category, PrecisionWarning) for w in caught)
    assert res.warnings
