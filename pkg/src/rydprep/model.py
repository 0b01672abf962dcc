"""Hamiltonians, target states and jump-operator families for the driven Rydberg chain.

All rates and energies are in units of the correlated jump rate ``kappa``
(hbar = 1). Open boundary conditions: a neighbour projector that would fall
outside the chain is replaced by the identity.
"""

from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .core import (
    MINUS_PLUS,
    NUMBER,
    P_GROUND,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    canonical,
    embed_multi,
    occupations,
)
from .errors import ArgumentError, EliminationError


@dataclass(frozen=True)
class ChainParams:
    """Parameters of the driven, dissipative Rydberg chain.

    Defaults are the RK-state parameters (Omega = 1.5, V = 100, pump = 0.02,
    in units of kappa). ``pump`` is the composite rate Omega'^2 / gamma of the
    optical-pumping channels; Omega' and gamma never enter separately.
    """

    n_sites: int
    omega: float = 1.5
    delta: float = -2.0
    V: float = 100.0
    kappa: float = 1.0
    pump: float = 0.02
    xi: float = 1.0

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ArgumentError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        for name in ("omega", "V", "kappa", "pump"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ArgumentError(f"{name} must be finite and >= 0, got {value!r}")
        if not np.isfinite(self.delta):
            raise ArgumentError(f"delta must be finite, got {self.delta!r}")
        if not (np.isfinite(self.xi) and self.xi > 0):
            raise ArgumentError(f"xi must be > 0, got {self.xi!r}")

    @property
    def dim(self):
        return 2**self.n_sites

    def with_(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return asdict(self)


def blockade_radius(c6, omega):
    """Distance at which the van der Waals shift equals the Rabi frequency, (C6/Omega)^(1/6)."""
    if not (c6 > 0 and omega > 0):
        raise ArgumentError("blockade_radius needs C6 > 0 and Omega > 0")
    return (c6 / omega) ** (1 / 6)


def build_hamiltonian(p):
    """Driven chain with full 1/r^6 interactions between every pair of sites."""
    N = p.n_sites
    occ = occupations(N).astype(float)
    diag = p.delta * occ.sum(axis=1)
    for k in range(N):
        for m in range(k + 1, N):
            diag += p.V / (m - k) ** 6 * occ[:, k] * occ[:, m]
    H = sp.diags(diag.astype(complex), format="csr")
    if p.omega:
        for k in range(1, N + 1):
            H = H + p.omega * embed_multi([(k, SIGMA_X)], N)
    return canonical(H)


def _neighbour_factors(k, n_sites, projector):
    factors = []
    if k > 1:
        factors.append((k - 1, projector))
    if k < n_sites:
        factors.append((k + 1, projector))
    return factors


def build_hk(k, p):
    """Constrained projector h_k acting on site k, annihilating the RK state at parameter xi."""
    N = p.n_sites
    if not 1 <= k <= N:
        raise ArgumentError(f"site {k} outside 1..{N}")
    xi = p.xi
    local = SIGMA_X + NUMBER / xi + xi * (np.eye(2) - NUMBER)
    prefactor = np.sqrt(1 / (1 / xi + xi))
    return canonical(prefactor * embed_multi([(k, local)] + _neighbour_factors(k, N, P_GROUND), N))


def build_h3body(p):
    """Frustration-free Hamiltonian Omega * sum_k h_k^dag h_k."""
    N = p.n_sites
    H = sp.csr_matrix((p.dim, p.dim), dtype=complex)
    for k in range(1, N + 1):
        hk = build_hk(k, p)
        H = H + hk.conj().T @ hk
    return canonical(p.omega * H)


def rk_state(n_sites, xi=1.0):
    """Normalized RK state: weight (-xi)^|c| on every configuration c without adjacent excitations."""
    if n_sites < 1 or not xi > 0:
        raise ArgumentError("rk_state needs n_sites >= 1 and xi > 0")
    occ = occupations(n_sites)
    allowed = ~np.any(occ[:, 1:] & occ[:, :-1], axis=1)
    counts = occ.sum(axis=1)
    psi = np.where(allowed, (-xi) ** counts, 0.0).astype(complex)
    return psi / np.sqrt(np.sum(xi ** (2 * counts[allowed])))


def rk_state_product(n_sites, xi=1.0):
    """RK state built as prod_k (1 - xi P_{k-1} sigma+_k P_{k+1}) |0...0>, site 1 applied first.

    Independent construction used to cross-check :func:`rk_state`.
    """
    psi = np.zeros(2**n_sites, dtype=complex)
    psi[0] = 1
    for k in range(1, n_sites + 1):
        raise_k = embed_multi([(k, SIGMA_PLUS)] + _neighbour_factors(k, n_sites, P_GROUND), n_sites)
        psi = psi - xi * (raise_k @ psi)
    return psi / np.linalg.norm(psi)


def w_state(n_sites):
    """(|0...0> - sum_i |0..1_i..0>) / sqrt(N + 1)."""
    if n_sites < 1:
        raise ArgumentError("w_state needs n_sites >= 1")
    psi = np.zeros(2**n_sites, dtype=complex)
    psi[0] = 1
    for i in range(n_sites):
        psi[1 << i] = -1
    return psi / np.sqrt(n_sites + 1)


def rk_jump_ops(p):
    """Correlated jumps sqrt(kappa) P_g^{k-1} |-><+|_k P_g^{k+1}, one per site."""
    N = p.n_sites
    amp = np.sqrt(p.kappa)
    return [
        canonical(amp * embed_multi([(k, MINUS_PLUS)] + _neighbour_factors(k, N, P_GROUND), N))
        for k in range(1, N + 1)
    ]


def pump_rotation():
    return la.expm(-1j * np.pi / 4 * SIGMA_Y)


def pump_local_matrices():
    """Single-site optical-pumping operators in the rotated frame (unit prefactor)."""
    U = pump_rotation()
    to_zero = np.array([[1, 1], [0, 0]], dtype=complex)  # |0><0| + |0><1|
    from_one = np.array([[0, 1], [0, 1]], dtype=complex)  # |0><1| + |1><1|
    return U @ to_zero @ U.conj().T, U @ from_one @ U.conj().T


def pump_jump_ops(p):
    """Two rotated-frame pumping operators per site with amplitude sqrt(pump).

    Ordered as [c'_1, ..., c'_N, c''_1, ..., c''_N].
    """
    N = p.n_sites
    amp = np.sqrt(p.pump)
    first, second = pump_local_matrices()
    ops = [canonical(amp * embed_multi([(k, first)], N)) for k in range(1, N + 1)]
    ops += [canonical(amp * embed_multi([(k, second)], N)) for k in range(1, N + 1)]
    return ops


def blockade_jump_ops(p):
    """Fully blockaded jumps: |-><+| on site i, conditioned on every other site in |0>."""
    N = p.n_sites
    amp = np.sqrt(p.kappa)
    ops = []
    for i in range(1, N + 1):
        factors = [(j, P_GROUND) for j in range(1, N + 1) if j != i] + [(i, MINUS_PLUS)]
        ops.append(canonical(amp * embed_multi(factors, N)))
    return ops


@dataclass
class LevelScheme:
    """Ground manifold coupled to a decaying excited manifold.

    ``v_plus`` maps ground -> excited (shape n_e x n_g); each entry of ``decays``
    maps excited -> ground (shape n_g x n_e).
    """

    ground_states: list
    excited_states: list
    h_g: np.ndarray
    h_e: np.ndarray
    v_plus: np.ndarray
    decays: list = field(default_factory=list)

    def __post_init__(self):
        ng, ne = len(self.ground_states), len(self.excited_states)
        self.h_g = np.asarray(self.h_g, dtype=complex)
        self.h_e = np.asarray(self.h_e, dtype=complex)
        self.v_plus = np.asarray(self.v_plus, dtype=complex)
        self.decays = [np.asarray(L, dtype=complex) for L in self.decays]
        if self.h_g.shape != (ng, ng) or self.h_e.shape != (ne, ne):
            raise ArgumentError("h_g / h_e shapes do not match the manifolds")
        if self.v_plus.shape != (ne, ng):
            raise ArgumentError(f"v_plus must be {ne}x{ng}, got {self.v_plus.shape}")
        if any(L.shape != (ng, ne) for L in self.decays):
            raise ArgumentError(f"decay operators must be {ng}x{ne}")
        for name, block in (("h_g", self.h_g), ("h_e", self.h_e)):
            if np.max(np.abs(block - block.conj().T), initial=0.0) > 1e-12:
                raise ArgumentError(f"{name} is not Hermitian")


@dataclass
class EffectiveDynamics:
    h_eff: np.ndarray
    l_eff: list


def effective_operators(scheme):
    """Adiabatically eliminate the excited manifold of ``scheme``.

    Returns H_eff = -1/2 V- [H_NH^-1 + (H_NH^-1)^dag] V+ + H_g and
    L_eff^k = L_k H_NH^-1 V+, where H_NH = H_e - i/2 sum_k L_k^dag L_k.
    """
    h_nh = scheme.h_e - 0.5j * sum((L.conj().T @ L for L in scheme.decays),
                                   np.zeros_like(scheme.h_e))
    svals = np.linalg.svd(h_nh, compute_uv=False)
    if not svals.size or svals[0] == 0 or svals[-1] <= 1e-12 * svals[0]:
        raise EliminationError("non-Hermitian excited-state Hamiltonian is singular")
    h_nh_inv = np.linalg.inv(h_nh)
    v_minus = scheme.v_plus.conj().T
    h_eff = -0.5 * v_minus @ (h_nh_inv + h_nh_inv.conj().T) @ scheme.v_plus + scheme.h_g
    h_eff = 0.5 * (h_eff + h_eff.conj().T)
    l_eff = [L @ h_nh_inv @ scheme.v_plus for L in scheme.decays]
    return EffectiveDynamics(h_eff=h_eff, l_eff=l_eff)


def single_level_pumping_scheme(omega_p, gamma):
    """One intermediate level |e> driven from both ground states, decaying into each.

    Gives L_eff^0 = (i omega_p / sqrt(gamma)) |0>(<0| + <1|) and
    L_eff^1 = (i omega_p / sqrt(gamma)) |1>(<0| + <1|).
    """
    return LevelScheme(
        ground_states=["0", "1"],
        excited_states=["e"],
        h_g=np.zeros((2, 2)),
        h_e=np.zeros((1, 1)),
        v_plus=omega_p * np.array([[1, 1]]),
        decays=[np.sqrt(gamma) * np.array([[1], [0]]), np.sqrt(gamma) * np.array([[0], [1]])],
    )


def optical_pumping_scheme(omega_p, gamma):
    """Two intermediate levels whose elimination yields the pumping pair used by :func:`pump_jump_ops`.

    |a> is driven from (|0> + |1>)/sqrt(2) and decays to |0>; |b> is driven from
    |1> and decays to (|0> + |1>)/sqrt(2). Both have total width 2 gamma, so
    L_eff^0 = (i omega_p / sqrt(gamma)) (|0><0| + |0><1|) and
    L_eff^1 = (i omega_p / sqrt(gamma)) (|0><1| + |1><1|).
    """
    v_plus = omega_p * np.array([[1 / np.sqrt(2), 1 / np.sqrt(2)], [0, 1]])
    to_zero = np.sqrt(2 * gamma) * np.array([[1, 0], [0, 0]])
    to_plus = np.sqrt(gamma) * np.array([[0, 1], [0, 1]])
    return LevelScheme(
        ground_states=["0", "1"],
        excited_states=["a", "b"],
        h_g=np.zeros((2, 2)),
        h_e=np.zeros((2, 2)),
        v_plus=v_plus,
        decays=[to_zero, to_plus],
    )
