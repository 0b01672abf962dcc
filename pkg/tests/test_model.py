import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydprep.core import (
    IDENTITY, KET_MINUS, KET_PLUS, NUMBER, SIGMA_X, basis_state, embed_local, embed_multi,
    expectation, ground_state, occupations,
)
from rydprep.errors import ArgumentError, EliminationError
from rydprep.model import (
    ChainParams, LevelScheme, blockade_jump_ops, blockade_radius, build_h3body, build_hamiltonian,
    build_hk, effective_operators, optical_pumping_scheme, pump_jump_ops, pump_local_matrices,
    rk_jump_ops, rk_state, rk_state_product, single_level_pumping_scheme, w_state,
)

PLUS_PROJ = np.outer(KET_PLUS, KET_PLUS)


def test_chain_params_validation():
    with pytest.raises(ArgumentError):
        ChainParams(n_sites=0)
    with pytest.raises(ArgumentError):
        ChainParams(n_sites=2, kappa=-1)
    with pytest.raises(ArgumentError):
        ChainParams(n_sites=2, xi=0)
    p = ChainParams(n_sites=3)
    assert p.dim == 8 and p.with_(delta=1.0).delta == 1.0


@pytest.mark.parametrize("c6, omega, expected", [(1, 1, 1), (64, 1, 2), (100, 1.5, (100 / 1.5) ** (1 / 6))])
def test_blockade_radius(c6, omega, expected):
    assert blockade_radius(c6, omega) == pytest.approx(expected, rel=1e-12)


def test_blockade_radius_rejects_nonpositive():
    with pytest.raises(ArgumentError):
        blockade_radius(0, 1)


def test_hamiltonian_small_cases():
    p1 = ChainParams(n_sites=1, omega=0.7, delta=-0.3)
    assert np.allclose(build_hamiltonian(p1).toarray(), 0.7 * SIGMA_X - 0.3 * NUMBER)
    p2 = ChainParams(n_sites=2, omega=0.7, delta=-0.3, V=5.0)
    expected = (0.7 * (np.kron(SIGMA_X, IDENTITY) + np.kron(IDENTITY, SIGMA_X))
                - 0.3 * (np.kron(NUMBER, IDENTITY) + np.kron(IDENTITY, NUMBER))
                + 5.0 * np.kron(NUMBER, NUMBER))
    assert np.allclose(build_hamiltonian(p2).toarray(), expected)


def test_hamiltonian_diagonal_tail():
    p = ChainParams(n_sites=3, omega=1.5, delta=-2.0, V=100.0)
    assert expectation(build_hamiltonian(p), basis_state([1, 0, 1])).real == pytest.approx(-2.4375)


def test_ground_state_of_chain_matches_dense():
    H = build_hamiltonian(ChainParams(n_sites=3))
    e0, _ = ground_state(H)
    assert e0 == pytest.approx(np.linalg.eigvalsh(H.toarray())[0], abs=1e-8)


def test_hk_single_site():
    h = build_hk(1, ChainParams(n_sites=1, xi=1.0)).toarray()
    assert np.allclose(h, np.sqrt(2) * PLUS_PROJ)
    with pytest.raises(ArgumentError):
        build_hk(2, ChainParams(n_sites=1))


def test_h3body_single_site():
    H = build_h3body(ChainParams(n_sites=1, omega=1.0, xi=1.0)).toarray()
    assert np.allclose(H, 2 * PLUS_PROJ)


@pytest.mark.parametrize("xi", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("n", range(2, 9))
def test_rk_state_annihilated_by_every_hk(n, xi):
    p = ChainParams(n_sites=n, xi=xi)
    psi = rk_state(n, xi)
    for k in range(1, n + 1):
        assert np.linalg.norm(build_hk(k, p) @ psi) <= 1e-10


@given(st.integers(1, 6), st.floats(0.2, 3.0), st.floats(0.1, 4.0))
@settings(max_examples=25, deadline=None)
def test_h3body_psd_and_linear_in_omega(n, xi, omega):
    H = build_h3body(ChainParams(n_sites=n, xi=xi, omega=omega)).toarray()
    H1 = build_h3body(ChainParams(n_sites=n, xi=xi, omega=1.0)).toarray()
    assert np.allclose(H, omega * H1)
    assert np.linalg.eigvalsh(H)[0] >= -1e-10


def test_rk_state_small_cases():
    assert np.allclose(rk_state(1), [1 / np.sqrt(2), -1 / np.sqrt(2)])
    assert np.allclose(rk_state(2), np.array([1, -1, -1, 0]) / np.sqrt(3))
    assert np.allclose(rk_state(3), np.array([1, -1, -1, 0, -1, 1, 0, 0]) / np.sqrt(5))


@pytest.mark.parametrize("xi", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("n", range(1, 11))
def test_rk_closed_form_equals_product(n, xi):
    assert np.max(np.abs(rk_state(n, xi) - rk_state_product(n, xi))) <= 1e-12


@given(st.integers(2, 10), st.floats(0.1, 5.0))
@settings(max_examples=25, deadline=None)
def test_rk_state_has_no_adjacent_excitations(n, xi):
    psi = rk_state(n, xi)
    occ = occupations(n)
    adjacent = (occ[:, 1:] & occ[:, :-1]).any(axis=1)
    assert np.all(psi[adjacent] == 0)
    assert np.linalg.norm(psi) == pytest.approx(1)


def test_w_state():
    assert np.allclose(w_state(1), [1 / np.sqrt(2), -1 / np.sqrt(2)])
    expected = np.zeros(8)
    expected[[0b000, 0b100, 0b010, 0b001]] = [1, -1, -1, -1]
    assert np.allclose(w_state(3), expected / 2)


def test_single_site_jump_ops():
    p = ChainParams(n_sites=1, kappa=2.0)
    expected = np.sqrt(2.0) * np.outer(KET_MINUS, KET_PLUS)
    assert np.allclose(rk_jump_ops(p)[0].toarray(), expected)
    assert np.allclose(blockade_jump_ops(p)[0].toarray(), expected)


@pytest.mark.parametrize("n", range(2, 9))
def test_dark_states(n):
    p = ChainParams(n_sites=n)
    assert max(np.linalg.norm(c @ rk_state(n, 1.0)) for c in rk_jump_ops(p)) <= 1e-10
    assert max(np.linalg.norm(c @ w_state(n)) for c in blockade_jump_ops(p)) <= 1e-10


def test_blockade_jump_blocked_by_other_excitation():
    c2 = blockade_jump_ops(ChainParams(n_sites=3))[1]
    assert np.linalg.norm(c2 @ basis_state([1, 1, 0])) == 0


def test_rk_jump_acts_only_with_ground_neighbours():
    c2 = rk_jump_ops(ChainParams(n_sites=3))[1]
    assert np.linalg.norm(c2 @ basis_state([0, 0, 1])) == 0
    assert np.linalg.norm(c2 @ basis_state([0, 0, 0])) > 0


def test_pump_local_matrices():
    first, second = pump_local_matrices()
    assert np.max(np.abs(first - np.array([[0, 1], [0, 1]]))) <= 1e-12
    assert np.max(np.abs(second - np.array([[0, 0], [-1, 1]]))) <= 1e-12


def test_pump_ops_ordering_and_scale():
    p = ChainParams(n_sites=2, pump=0.5)
    ops = pump_jump_ops(p)
    first, second = pump_local_matrices()
    assert len(ops) == 4
    assert np.allclose(ops[0].toarray(), np.sqrt(0.5) * np.kron(first, IDENTITY))
    assert np.allclose(ops[3].toarray(), np.sqrt(0.5) * np.kron(IDENTITY, second))
    assert all(op.nnz == 0 for op in pump_jump_ops(p.with_(pump=0.0)))


def test_elimination_without_coupling():
    h_g = np.array([[0.3, 0.1], [0.1, -0.2]])
    s = LevelScheme(["0", "1"], ["e"], h_g, np.zeros((1, 1)), np.zeros((1, 2)),
                    [np.array([[1.0], [0.0]])])
    eff = effective_operators(s)
    assert np.allclose(eff.h_eff, h_g)
    assert all(np.allclose(L, 0) for L in eff.l_eff)


def test_elimination_single_level_scheme():
    omega_p, gamma = 0.3, 2.0
    eff = effective_operators(single_level_pumping_scheme(omega_p, gamma))
    pref = 1j * omega_p / np.sqrt(gamma)
    assert np.max(np.abs(eff.l_eff[0] - pref * np.array([[1, 1], [0, 0]]))) <= 1e-12
    assert np.max(np.abs(eff.l_eff[1] - pref * np.array([[0, 0], [1, 1]]))) <= 1e-12
    assert np.max(np.abs(eff.h_eff)) <= 1e-12


def test_elimination_optical_pumping_scheme():
    omega_p, gamma = 0.3, 2.0
    eff = effective_operators(optical_pumping_scheme(omega_p, gamma))
    pref = 1j * omega_p / np.sqrt(gamma)
    assert np.max(np.abs(eff.l_eff[0] - pref * np.array([[1, 1], [0, 0]]))) <= 1e-12
    assert np.max(np.abs(eff.l_eff[1] - pref * np.array([[0, 1], [0, 1]]))) <= 1e-12
    assert np.max(np.abs(eff.h_eff)) <= 1e-12


def test_elimination_singular_manifold():
    s = LevelScheme(["0"], ["e"], np.zeros((1, 1)), np.zeros((1, 1)), np.ones((1, 1)), [])
    with pytest.raises(EliminationError):
        effective_operators(s)


def test_level_scheme_shape_checks():
    with pytest.raises(ArgumentError):
        LevelScheme(["0", "1"], ["e"], np.zeros((2, 2)), np.zeros((1, 1)), np.ones((2, 1)), [])
    with pytest.raises(ArgumentError):
        LevelScheme(["0"], ["e"], np.zeros((1, 1)), np.array([[1j]]), np.ones((1, 1)), [])


def test_multi_site_embedding_used_by_jumps():
    # c_1 for N=2 is sqrt(kappa) |-><+| (x) P_g
    p = ChainParams(n_sites=2, kappa=1.0)
    c1 = rk_jump_ops(p)[0]
    ref = embed_multi([(1, np.outer(KET_MINUS, KET_PLUS)), (2, IDENTITY - NUMBER)], 2)
    assert abs(c1 - ref).max() < 1e-14
    assert embed_local(IDENTITY, 2, 3).shape == (8, 8)
