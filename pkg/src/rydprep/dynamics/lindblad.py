"""Lindblad master equation: right-hand side, superoperator, integration and exact steady states.

Vectorization convention: ``vec`` stacks columns (Fortran order), so
``vec(A X B) = (B^T kron A) vec(X)`` and ``rho = vec_rho.reshape(d, d, order="F")``.
"""

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..core import canonical, is_hermitian, operator_norm_bound
from ..errors import ArgumentError, ResourceError, SolverError, StepSizeError

# d**2 <= MAX_SUPEROPERATOR_DIM for superoperator construction; override per call.
MAX_SUPEROPERATOR_DIM = 2**20


class MultiplicityWarning(UserWarning):
    """The steady state is (nearly) degenerate."""


@dataclass
class LindbladModel:
    """Hamiltonian plus jump operators; caches the non-Hermitian drift H - i/2 sum c^dag c."""

    H: sp.csr_matrix
    jumps: list = field(default_factory=list)

    def __post_init__(self):
        self.H = canonical(self.H)
        self.jumps = [canonical(c) for c in self.jumps]
        d = self.H.shape[0]
        if self.H.shape != (d, d) or any(c.shape != (d, d) for c in self.jumps):
            raise ArgumentError("Hamiltonian and jump operators must share one square dimension")
        if not is_hermitian(self.H):
            raise ArgumentError("Hamiltonian is not Hermitian")
        decay = sp.csr_matrix((d, d), dtype=complex)
        for c in self.jumps:
            decay = decay + c.conj().T @ c
        self.decay = canonical(decay)
        self.h_nh = canonical(self.H - 0.5j * self.decay)

    @property
    def dim(self):
        return self.H.shape[0]

    @cached_property
    def drift_eig(self):
        """Right eigenvectors R, inverse R^-1 and eigenvalues of the non-Hermitian drift."""
        lam, R = la.eig(self.h_nh.toarray())
        return lam, R, la.inv(R)


def vec(rho):
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v, dim):
    return np.asarray(v).reshape(dim, dim, order="F")


def lindblad_rhs(rho, m):
    """-i[H, rho] + sum_i (c rho c^dag - 1/2 {c^dag c, rho})."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (m.dim, m.dim):
        raise ArgumentError(f"density matrix shape {rho.shape} does not match model dimension {m.dim}")
    rho_h = rho.conj().T
    out = -1j * (m.h_nh @ rho) + 1j * (m.h_nh @ rho_h).conj().T
    for c in m.jumps:
        out += c @ (c @ rho_h).conj().T
    return out


def liouvillian_matrix(m, max_dim=None):
    """Sparse d^2 x d^2 generator acting on column-stacked density matrices."""
    d = m.dim
    limit = MAX_SUPEROPERATOR_DIM if max_dim is None else max_dim
    if d * d > limit:
        raise ResourceError(
            f"Liouvillian of dimension {d * d} exceeds the limit {limit}; use the trajectory method"
        )
    eye = sp.identity(d, dtype=complex, format="csr")
    L = -1j * sp.kron(eye, m.h_nh) + 1j * sp.kron(m.h_nh.conj(), eye)
    for c in m.jumps:
        L = L + sp.kron(c.conj(), c)
    return canonical(L)


def evolve_master(rho0, m, t_final, dt, max_dim=None):
    """Fixed-step classical RK4 for the master equation.

    The state is re-Hermitized and trace-renormalized after every step; a
    trace drift above 1e-6 within one step raises ``StepSizeError``.
    """
    if dt <= 0 or t_final < 0:
        raise ArgumentError("need dt > 0 and t_final >= 0")
    d = m.dim
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (d, d):
        raise ArgumentError(f"density matrix shape {rho.shape} does not match model dimension {d}")
    if t_final == 0:
        return rho

    try:
        L = liouvillian_matrix(m, max_dim=max_dim)
    except ResourceError:
        L = None

    def f(r):
        if L is None:
            return lindblad_rhs(r, m)
        return unvec(L @ vec(r), d)

    n_steps = int(np.ceil(t_final / dt - 1e-12))
    h = t_final / n_steps
    for _ in range(n_steps):
        k1 = f(rho)
        k2 = f(rho + 0.5 * h * k1)
        k3 = f(rho + 0.5 * h * k2)
        k4 = f(rho + h * k3)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        tr = np.trace(rho)
        if not np.isfinite(tr) or abs(tr - 1) > 1e-6:
            raise StepSizeError(f"trace drifted to {tr} within one step; reduce dt (currently {h})")
        rho = 0.5 * (rho + rho.conj().T) / tr.real
    return rho


@dataclass
class SteadyStateResult:
    """Steady-state estimate from either solver.

    For ``method == "direct"`` ``rho`` is set; for ``"mcwf"`` ``estimates`` and
    ``stderr`` map observable names to trajectory statistics (``rho`` may hold
    the time-and-trajectory averaged projector for small systems).
    """

    method: str
    rho: np.ndarray = None
    estimates: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


# bordered sparse LU up to this superoperator dimension, preconditioned GMRES above
LU_MAX_DIM = 1024


def liouvillian_norm_bound(m):
    """Upper bound on ||L||_2 from the drift and jump operators."""
    return 2 * operator_norm_bound(m.h_nh) + sum(operator_norm_bound(c) ** 2 for c in m.jumps)


def _inverse_iteration(solve, solve_h, n, iters, seed=0):
    # smallest singular value of A from power iteration on (A^H A)^-1
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    est = np.inf
    for _ in range(iters):
        y = solve(solve_h(x))
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0:
            return 0.0
        new = 1 / np.sqrt(ny)
        x = y / ny
        if abs(new - est) <= 1e-6 * new:
            return new
        est = new
    return est


class _SylvesterPreconditioner:
    """Exact inverse of rho -> -i(H_nh rho - rho H_nh^dag) - shift*rho in the eigenbasis of H_nh."""

    def __init__(self, h_nh, shift):
        lam, R = la.eig(h_nh.toarray())
        self.R, self.Ri = R, la.inv(R)
        self.den = -1j * (lam[:, None] - lam.conj()[None, :]) - shift
        self.d = h_nh.shape[0]

    def solve(self, b):
        Y = (self.Ri @ unvec(b, self.d) @ self.Ri.conj().T) / self.den
        return vec(self.R @ Y @ self.R.conj().T)

    def solve_adjoint(self, b):
        Y = (self.R.conj().T @ unvec(b, self.d) @ self.R) / self.den.conj()
        return vec(self.Ri.conj().T @ Y @ self.Ri)


def _solve_lu(m, d, gap_iters):
    L = liouvillian_matrix(m, max_dim=np.inf)
    n = d * d
    trace_row = sp.csr_matrix(vec(np.eye(d, dtype=complex))[None, :])
    A = sp.vstack([trace_row, L[1:]], format="csc")
    b = np.zeros(n, dtype=complex)
    b[0] = 1
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            lu = spla.splu(A)
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise RuntimeError("non-finite solution")
    except (RuntimeError, spla.MatrixRankWarning) as exc:
        return _degenerate_fallback(L, d, exc)
    gap = _inverse_iteration(lu.solve, lambda v: lu.solve(v, trans="H"), n, gap_iters)
    return x, gap


def _solve_gmres(m, d, norm_L, gap_iters):
    n = d * d
    w = vec(np.eye(d, dtype=complex))
    u = w / d
    apply_L = lambda x: vec(lindblad_rhs(unvec(x, d), m))
    apply_LH = lambda x: vec(lindblad_rhs_adjoint(unvec(x, d), m))
    # rank-one completion: A x = L x + u tr(x); A rho_ss = u iff tr(rho_ss) = 1
    A = spla.LinearOperator((n, n), matvec=lambda x: apply_L(x) + u * (w @ x), dtype=complex)
    AH = spla.LinearOperator((n, n), matvec=lambda x: apply_LH(x) + w * (u.conj() @ x), dtype=complex)
    pre = _SylvesterPreconditioner(m.h_nh, shift=1e-6 * norm_L)
    M = spla.LinearOperator((n, n), matvec=pre.solve, dtype=complex)
    MH = spla.LinearOperator((n, n), matvec=pre.solve_adjoint, dtype=complex)

    # atol is a rounding floor: with an ill-conditioned eigenbasis the explicit
    # residual can plateau just above 1e-12 ||u|| and every restart is wasted
    x, info = spla.gmres(A, u, M=M, rtol=1e-12, atol=1e-18 * norm_L, restart=200, maxiter=10)
    if not np.all(np.isfinite(x)):
        raise SolverError("GMRES produced a non-finite iterate")
    if info != 0:
        # 1e-12 relative can sit below rounding when ||L|| is large; accept a stagnated
        # iterate only if it passes the residual test applied to every solution
        residual = np.linalg.norm(apply_L(x / (w @ x)))
        if not residual <= 1e-10 * norm_L:
            raise SolverError(f"GMRES failed to converge (info={info}, residual {residual:.2e}); "
                              "the steady state may not be unique")

    # the gap only has to be told apart from degeneracy_tol * ||L||, so loose solves suffice
    def rough(op, prec):
        def solve(v):
            y, _ = spla.gmres(op, v, M=prec, rtol=1e-4, atol=0, restart=200, maxiter=5)
            return y
        return solve

    gap = _inverse_iteration(rough(A, M), rough(AH, MH), n, gap_iters)
    return x, gap


def lindblad_rhs_adjoint(X, m):
    """Heisenberg-picture generator, the adjoint of :func:`lindblad_rhs` under the trace inner product."""
    X = np.asarray(X, dtype=complex)
    out = 1j * (m.h_nh.conj().T @ X) - 1j * (m.h_nh.conj().T @ X.conj().T).conj().T
    for c in m.jumps:
        out += c.conj().T @ (c.conj().T @ X.conj().T).conj().T
    return out


def steady_state_direct(m, max_dim=None, degeneracy_tol=1e-8, gap_iters=None):
    """Unit-trace null vector of the Liouvillian.

    Small problems (d^2 <= 1024) use sparse LU with the first row replaced by
    the trace constraint. Larger ones use GMRES on the rank-one completed
    operator ``L + u tr(.)``, preconditioned by the exact inverse of the
    coherent-plus-decay part. ``gap_estimate`` in the diagnostics is the
    smallest singular value of the solved system, which vanishes when the
    steady state is not unique; below ``degeneracy_tol * ||L||`` a
    ``MultiplicityWarning`` is emitted and recorded in ``warnings``.
    """
    d = m.dim
    limit = MAX_SUPEROPERATOR_DIM if max_dim is None else max_dim
    if d * d > limit:
        raise ResourceError(
            f"Liouvillian of dimension {d * d} exceeds the limit {limit}; use the trajectory method"
        )
    norm_L = liouvillian_norm_bound(m) or 1.0
    if d * d <= LU_MAX_DIM:
        x, gap = _solve_lu(m, d, gap_iters or 30)
    else:
        x, gap = _solve_gmres(m, d, norm_L, gap_iters or 4)

    degenerate = gap < degeneracy_tol * norm_L
    if degenerate and gap > 0:
        # factorization went through, but the solution is an arbitrary null-space element
        x, _ = _degenerate_fallback(liouvillian_matrix(m, max_dim=np.inf), d,
                                    "near-singular Liouvillian")
    rho = unvec(x, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    residual = float(np.linalg.norm(lindblad_rhs(rho, m)))
    notes = []
    if degenerate:
        msg = f"steady state is not unique (smallest singular value {gap:.2e}, ||L|| <= {norm_L:.2e})"
        warnings.warn(msg, MultiplicityWarning, stacklevel=2)
        notes.append(msg)
    elif residual > 1e-10 * norm_L:
        raise SolverError(f"steady-state residual {residual:.2e} exceeds 1e-10 * ||L||")
    return SteadyStateResult(
        method="direct",
        rho=rho,
        diagnostics={"residual": residual, "liouvillian_norm": norm_L, "gap_estimate": float(gap)},
        warnings=notes,
    )


def _degenerate_fallback(L, d, exc, max_dense=4096):
    # Singular Liouvillian: project the maximally mixed state onto the null space.
    if d * d > max_dense:
        raise SolverError(f"Liouvillian factorization failed: {exc}") from exc
    _, s, vh = np.linalg.svd(L.toarray())
    null = vh[s <= 1e-8 * max(s[0], 1e-300)].conj().T
    if null.shape[1] == 0:
        raise SolverError(f"Liouvillian factorization failed: {exc}") from exc
    mixed = vec(np.eye(d, dtype=complex) / d)
    return null @ (null.conj().T @ mixed), 0.0
