"""Basis conventions, sparse embedding of single-site operators, and a ground-state solver.

Basis convention used throughout the package: a chain of ``N`` two-level atoms
is indexed by ``b in [0, 2**N)``. Site 1 is the most significant bit, and bit
value 1 means the site is in the Rydberg state ``|1>``. The binary string of
``b`` therefore reads left to right as the chain, e.g. ``|101>`` is ``b = 5``.

Many-body operators are ``scipy.sparse.csr_matrix`` instances with complex
entries; pure states are 1-D complex arrays; density matrices are 2-D arrays.
"""

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ArgumentError, ConvergenceError

PRUNE_TOL = 1e-14
DENSE_FALLBACK_DIM = 256

# single-site operators in the ordered basis (|0>, |1>)
IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
NUMBER = SIGMA_PLUS @ SIGMA_MINUS  # n = |1><1|
P_GROUND = IDENTITY - NUMBER  # P = 1 - n = |0><0|
KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = (KET_0 + KET_1) / np.sqrt(2)
KET_MINUS = (KET_0 - KET_1) / np.sqrt(2)
MINUS_PLUS = np.outer(KET_MINUS, KET_PLUS.conj())  # |-><+|


def local_operator(entries):
    """Validate and return a 2x2 complex local operator."""
    op = np.asarray(entries, dtype=complex)
    if op.shape != (2, 2):
        raise ArgumentError(f"local operator must be 2x2, got shape {op.shape}")
    if not np.all(np.isfinite(op)):
        raise ArgumentError("local operator has non-finite entries")
    return op


def canonical(op):
    """Return ``op`` as CSR with entries of magnitude below 1e-14 removed."""
    op = sp.csr_matrix(op, dtype=complex)
    op.data[np.abs(op.data) < PRUNE_TOL] = 0
    op.eliminate_zeros()
    op.sort_indices()
    return op


def site_count(dim):
    n = int(dim).bit_length() - 1
    if n < 0 or 2**n != dim:
        raise ArgumentError(f"dimension {dim} is not a power of two")
    return n


def _check_site(site, n_sites):
    if not isinstance(n_sites, (int, np.integer)) or n_sites < 1:
        raise ArgumentError(f"site count must be a positive integer, got {n_sites!r}")
    if not 1 <= site <= n_sites:
        raise ArgumentError(f"site {site} outside 1..{n_sites}")


def embed_local(op, site, n_sites):
    """Place a 2x2 operator on ``site`` (1-based) of an ``n_sites`` chain."""
    return embed_multi([(site, op)], n_sites)


def embed_multi(factors, n_sites):
    """Tensor product of single-site operators on distinct sites, identity elsewhere.

    >>> embed_multi([(1, P_GROUND), (2, SIGMA_X)], 2).toarray().real
    array([[0., 1., 0., 0.],
           [1., 0., 0., 0.],
           [0., 0., 0., 0.],
           [0., 0., 0., 0.]])
    """
    if not isinstance(n_sites, (int, np.integer)) or n_sites < 1:
        raise ArgumentError(f"site count must be a positive integer, got {n_sites!r}")
    placed = {}
    for site, op in factors:
        _check_site(site, n_sites)
        if site in placed:
            raise ArgumentError(f"site {site} appears more than once")
        placed[site] = local_operator(op)

    out = sp.identity(1, dtype=complex, format="csr")
    run = 0  # consecutive identity sites not yet multiplied in
    for site in range(1, n_sites + 1):
        if site not in placed:
            run += 1
            continue
        if run:
            out = sp.kron(out, sp.identity(2**run, dtype=complex), format="csr")
            run = 0
        out = sp.kron(out, sp.csr_matrix(placed[site]), format="csr")
    if run:
        out = sp.kron(out, sp.identity(2**run, dtype=complex), format="csr")
    return canonical(out)


def basis_state(bits):
    """Computational basis ket from a bit string such as ``"101"`` or a sequence of 0/1."""
    bits = [int(b) for b in bits]
    if any(b not in (0, 1) for b in bits):
        raise ArgumentError(f"bits must be 0/1, got {bits}")
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int("".join(map(str, bits)), 2)] = 1
    return psi


def occupations(n_sites):
    """Boolean table ``occ[b, k]`` = site ``k+1`` excited in basis state ``b``."""
    b = np.arange(2**n_sites)[:, None]
    shifts = n_sites - 1 - np.arange(n_sites)[None, :]
    return ((b >> shifts) & 1).astype(bool)


def is_hermitian(op, tol=1e-10):
    diff = op - op.conj().T
    if sp.issparse(diff):
        return diff.nnz == 0 or np.max(np.abs(diff.data)) <= tol
    return np.max(np.abs(diff), initial=0.0) <= tol


def expectation(op, state):
    """<psi|A|psi> for a 1-D ket, Tr(A rho) for a 2-D density matrix."""
    state = state.toarray() if sp.issparse(state) else np.asarray(state)
    dim = op.shape[0]
    if state.ndim == 1:
        if state.shape[0] != dim:
            raise ArgumentError(f"state dimension {state.shape[0]} != operator dimension {dim}")
        return complex(np.vdot(state, op @ state))
    if state.ndim == 2:
        if state.shape != (dim, dim):
            raise ArgumentError(f"density matrix shape {state.shape} != ({dim}, {dim})")
        # Tr(A rho) = sum_ij A_ij rho_ji
        if sp.issparse(op):
            coo = op.tocoo()
            return complex(np.sum(coo.data * state[coo.col, coo.row]))
        return complex(np.sum(op * state.T))
    raise ArgumentError("state must be a ket (1-D) or density matrix (2-D)")


def operator_norm_bound(op):
    """Cheap upper bound on the spectral norm: sqrt(||A||_1 ||A||_inf)."""
    if sp.issparse(op):
        return float(np.sqrt(spla.norm(op, 1) * spla.norm(op, np.inf)))
    return float(np.sqrt(np.linalg.norm(op, 1) * np.linalg.norm(op, np.inf)))


def ground_state(H, tol=1e-9, maxiter=None):
    """Smallest eigenvalue and a unit eigenvector of a Hermitian operator.

    Dimensions up to 256 are diagonalized densely; larger problems use
    implicitly restarted Lanczos (ARPACK). The returned eigenvector satisfies
    ``||H psi - E psi|| <= tol * ||H||`` or ``ConvergenceError`` is raised.
    """
    if not is_hermitian(H):
        raise ArgumentError("ground_state requires a Hermitian operator")
    dim = H.shape[0]
    scale = operator_norm_bound(H)
    if dim <= DENSE_FALLBACK_DIM:
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        w, v = la.eigh(dense, subset_by_index=[0, 0])
        return float(w[0]), v[:, 0].astype(complex)

    H = sp.csr_matrix(H, dtype=complex)
    rng = np.random.default_rng(0)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    best = np.inf
    for ncv in (20, 40, 80):
        try:
            w, v = spla.eigsh(H, k=1, which="SA", v0=v0, ncv=min(ncv, dim), tol=1e-12,
                              maxiter=maxiter or 20 * dim)
        except spla.ArpackNoConvergence as exc:
            if len(exc.eigenvalues):
                w, v = exc.eigenvalues, exc.eigenvectors
            else:
                continue
        psi = v[:, 0] / np.linalg.norm(v[:, 0])
        energy = float(np.vdot(psi, H @ psi).real)
        resid = float(np.linalg.norm(H @ psi - energy * psi))
        best = min(best, resid)
        if resid <= tol * scale:
            return energy, psi
        v0 = psi
    raise ConvergenceError(f"Lanczos did not converge (best residual {best:.3e})", best_residual=best)
