"""Dense complex linear-algebra kernels.

Everything here is written against plain numpy arrays and does not
call into LAPACK: a cyclic Jacobi eigensolver for Hermitian matrices,
a whitening-based generalized eigensolver that tolerates a singular
Gram matrix, an exact Hungarian assignment, and a unitary DFT
(radix-2 with a Bluestein fallback for other lengths).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

__all__ = [
    "LinalgError",
    "ConvergenceError",
    "ComplexMatrix",
    "HermitianMatrix",
    "EigDecomposition",
    "hermitian_eig",
    "solve_gevp",
    "assignment_max",
    "dft",
    "dft_axis",
    "permutation_value",
    "assignment_max_excluding",
]

JACOBI_MAX_SWEEPS = 100
JACOBI_OFF_TOL = 1e-13
GEVP_NULL_TOL = 1e-12
PHASE_MAG_TOL = 1e-8


class LinalgError(ValueError):
    """Raised on invalid input to a kernel."""


class ConvergenceError(ArithmeticError):
    """Raised when an iterative kernel hits its iteration cap."""


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise LinalgError(f"{what} contains non-finite entries")


@dataclass(frozen=True)
class ComplexMatrix:
    """Finite complex matrix wrapper.

    Parameters
    ----------
    entries : ndarray of shape (rows, cols)
        Matrix entries. Converted to ``complex128``.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2:
            raise LinalgError("ComplexMatrix needs a 2-D array")
        _check_finite(a, "ComplexMatrix")
        object.__setattr__(self, "entries", a)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class HermitianMatrix:
    """Square Hermitian matrix, symmetrized on construction as (X + X^H)/2.

    Parameters
    ----------
    entries : array_like of shape (M, M)
        Input matrix. A relative Hermitian defect above 1e-12 is accepted
        only when ``strict=False`` (the default symmetrizes silently).
    strict : bool
        If True, reject inputs whose Hermitian defect exceeds 1e-12
        relative to their Frobenius norm.
    """

    entries: np.ndarray
    strict: bool = False

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise LinalgError(f"HermitianMatrix needs a square array, got {a.shape}")
        _check_finite(a, "HermitianMatrix")
        if self.strict:
            nrm = np.linalg.norm(a)
            if np.linalg.norm(a - a.conj().T) > 1e-12 * max(nrm, 1e-300):
                raise LinalgError("input is not Hermitian to 1e-12 relative")
        object.__setattr__(self, "entries", 0.5 * (a + a.conj().T))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EigDecomposition:
    """Eigenpairs of a Hermitian matrix.

    Attributes
    ----------
    eigenvalues : ndarray of shape (M,)
        Real eigenvalues, sorted descending.
    eigenvectors : ndarray of shape (M, M)
        Unitary matrix; column ``k`` pairs with ``eigenvalues[k]``.
    sweeps : int
        Number of Jacobi sweeps used.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T


def _as_hermitian_array(H) -> np.ndarray:
    if isinstance(H, HermitianMatrix):
        return H.entries
    return HermitianMatrix(H).entries


def _round_robin(n: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    # Tournament schedule: n-1 rounds of n/2 disjoint pairs (n even).
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        lo = np.minimum(p, q)
        hi = np.maximum(p, q)
        rounds.append((lo, hi))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _phase_fix(U: np.ndarray) -> np.ndarray:
    U = U.copy()
    for k in range(U.shape[1]):
        col = U[:, k]
        idx = np.flatnonzero(np.abs(col) > PHASE_MAG_TOL)
        if idx.size:
            z = col[idx[0]]
            U[:, k] = col * (np.conj(z) / abs(z))
    return U


def hermitian_eig(H) -> EigDecomposition:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, using a round-robin
    ordering so that the ``M/2`` rotations of a round act on disjoint
    index pairs and can be applied together.

    Parameters
    ----------
    H : HermitianMatrix or array_like
        Input matrix of shape ``(M, M)``.

    Returns
    -------
    EigDecomposition
        Eigenvalues in descending order. Each eigenvector is rotated so
        that its first entry of magnitude above 1e-8 is real positive.

    Raises
    ------
    ConvergenceError
        If the off-diagonal mass is still above ``1e-13 * ||H||_F`` after
        100 sweeps.
    """
    A = _as_hermitian_array(H).copy()
    M = A.shape[0]
    if M < 1:
        raise LinalgError("dimension must be at least 1")
    U = np.eye(M, dtype=complex)
    norm = np.linalg.norm(A)
    sweeps = 0
    if M > 1 and norm > 0:
        n = M + (M % 2)
        if n != M:
            # pad with a decoupled dummy index
            A = np.pad(A, ((0, 1), (0, 1)))
            U = np.pad(U, ((0, 1), (0, 1)))
            U[-1, -1] = 1.0
        rounds = _round_robin(n)
        tol = JACOBI_OFF_TOL * norm
        while True:
            off = np.linalg.norm(A - np.diag(np.diag(A)))
            if off <= tol:
                break
            if sweeps >= JACOBI_MAX_SWEEPS:
                raise ConvergenceError(
                    f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps "
                    f"for a {M}x{M} matrix (off-diagonal norm {off:.3e})"
                )
            for p, q in rounds:
                c = A[p, q]
                r = np.abs(c)
                active = r > 1e-300
                if not np.any(active):
                    continue
                p, q, c, r = p[active], q[active], c[active], r[active]
                a = A[p, p].real
                b = A[q, q].real
                theta = 0.5 * np.arctan2(2.0 * r, a - b)
                cs, sn = np.cos(theta), np.sin(theta)
                ph = c / r
                # V = diag(e^{i phi}, 1) @ [[cs, -sn], [sn, cs]]
                v00, v01, v10, v11 = ph * cs, -ph * sn, sn + 0j, cs + 0j
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = Ap * v00 + Aq * v10
                A[:, q] = Ap * v01 + Aq * v11
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = np.conj(v00)[:, None] * Ap + np.conj(v10)[:, None] * Aq
                A[q, :] = np.conj(v01)[:, None] * Ap + np.conj(v11)[:, None] * Aq
                A[p, q] = 0.0
                A[q, p] = 0.0
                Up, Uq = U[:, p].copy(), U[:, q].copy()
                U[:, p] = Up * v00 + Uq * v10
                U[:, q] = Up * v01 + Uq * v11
            sweeps += 1
        if n != M:
            A = A[:M, :M]
            U = U[:M, :M]
    lam = np.diag(A).real.copy()
    order = np.argsort(-lam, kind="stable")
    return EigDecomposition(lam[order], _phase_fix(U[:, order]), sweeps)


def solve_gevp(Mmat, Gmat) -> List[Tuple[float, np.ndarray]]:
    """Solve ``M c = lambda G c`` for Hermitian ``M`` and PSD ``G``.

    ``G`` is eigendecomposed, directions with eigenvalue below
    ``1e-12 * lambda_max(G)`` are discarded, and the ordinary problem is
    solved in the whitened subspace. The number of returned pairs equals
    the numerical rank of ``G``.

    Parameters
    ----------
    Mmat, Gmat : HermitianMatrix or array_like
        Matrices of equal shape ``(d, d)``.

    Returns
    -------
    list of (float, ndarray)
        ``(eigenvalue, coeffs)`` pairs sorted by eigenvalue ascending.
        Coefficient vectors are G-orthonormal.

    Raises
    ------
    LinalgError
        If every Gram eigenvalue is below tolerance ("degenerate Gram").
    """
    Mh = _as_hermitian_array(Mmat)
    Gh = _as_hermitian_array(Gmat)
    if Mh.shape != Gh.shape:
        raise LinalgError(f"shape mismatch {Mh.shape} vs {Gh.shape}")
    eg = hermitian_eig(Gh)
    lmax = eg.eigenvalues[0]
    if lmax <= 0:
        raise LinalgError("degenerate Gram: no positive eigenvalues")
    keep = eg.eigenvalues > GEVP_NULL_TOL * lmax
    if not np.any(keep):
        raise LinalgError("degenerate Gram: all eigenvalues below tolerance")
    W = eg.eigenvectors[:, keep] / np.sqrt(eg.eigenvalues[keep])
    red = hermitian_eig(W.conj().T @ Mh @ W)
    vals = red.eigenvalues[::-1]
    vecs = (W @ red.eigenvectors)[:, ::-1]
    return [(float(vals[k]), vecs[:, k].copy()) for k in range(vals.size)]


def _hungarian_min(cost: np.ndarray) -> np.ndarray:
    # Shortest augmenting path with potentials, O(n^3). Returns col for each row.
    n = cost.shape[0]
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j] = row matched to column j (1-based)
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = cost[i0 - 1, :] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], INF)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    sigma = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        sigma[p[j] - 1] = j - 1
    return sigma


def permutation_value(profit: np.ndarray, sigma: np.ndarray) -> float:
    """Return ``sum_k profit[k, sigma[k]]``."""
    profit = np.asarray(profit, dtype=float)
    return float(profit[np.arange(len(sigma)), sigma].sum())


def assignment_max(profit, forbid_identity: bool = False) -> np.ndarray:
    """Exact maximum-profit assignment.

    Parameters
    ----------
    profit : array_like of shape (n, n)
        Real, finite profit matrix.
    forbid_identity : bool
        If True, the optimum is taken over non-identity permutations.

    Returns
    -------
    ndarray of int
        ``sigma`` with ``sigma[k]`` the column assigned to row ``k``.

    Notes
    -----
    With the identity forbidden, the best non-identity permutation must
    move some index ``k``; banning the diagonal entry ``(k, k)`` in turn
    and keeping the best of the ``n`` restricted optima is therefore exact.
    """
    P = np.asarray(profit, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise LinalgError("profit must be square")
    _check_finite(P, "profit")
    n = P.shape[0]
    if forbid_identity and n == 1:
        raise LinalgError("no non-identity permutation exists for dimension 1")
    cost = -P
    sigma = _hungarian_min(cost)
    ident = np.arange(n)
    if not forbid_identity or not np.array_equal(sigma, ident):
        return sigma
    big = (np.abs(P).max() + 1.0) * (n + 1) * 4.0
    best, best_val = None, -np.inf
    for k in range(n):
        c = cost.copy()
        c[k, k] = big
        s = _hungarian_min(c)
        if s[k] == k:
            continue
        val = permutation_value(P, s)
        if val > best_val + 1e-12 * max(1.0, abs(best_val)) or best is None:
            best, best_val = s, val
    return best


def _solve_constrained(P: np.ndarray, forced: dict, banned: frozenset):
    n = P.shape[0]
    big = (np.abs(P).max() + 1.0) * (n + 1) * 4.0
    cost = -P.copy()
    for (r, c) in banned:
        cost[r, c] = big
    for r, c in forced.items():
        cost[r, :] = big
        cost[:, c] = big
        cost[r, c] = -P[r, c]
    s = _hungarian_min(cost)
    rows = np.arange(n)
    if any((r, int(s[r])) in banned for r in rows) or any(s[r] != c for r, c in forced.items()):
        return None
    return s


def assignment_max_excluding(profit, excluded, max_enumerated: int = 100_000) -> np.ndarray:
    """Best assignment whose permutation is not in ``excluded``.

    Assignments are enumerated in non-increasing profit order by Murty's
    partitioning scheme until one outside ``excluded`` appears.

    Parameters
    ----------
    profit : array_like of shape (n, n)
    excluded : collection of tuple
        Forbidden assignments, each given as ``tuple(sigma)``.

    Raises
    ------
    LinalgError
        If every permutation is excluded or the enumeration budget runs out.
    """
    import heapq

    P = np.asarray(profit, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise LinalgError("profit must be square")
    _check_finite(P, "profit")
    n = P.shape[0]
    excluded = {tuple(int(v) for v in e) for e in excluded}
    counter = 0
    first = _solve_constrained(P, {}, frozenset())
    heap = [(-permutation_value(P, first), counter, first, {}, frozenset())]
    while heap and counter < max_enumerated:
        _, _, s, forced, banned = heapq.heappop(heap)
        if tuple(int(v) for v in s) not in excluded:
            return s
        fixed = dict(forced)
        for r in range(n):
            if r in forced:
                continue
            child = _solve_constrained(P, fixed, banned | {(r, int(s[r]))})
            if child is not None:
                counter += 1
                heapq.heappush(heap, (-permutation_value(P, child), counter, child, dict(fixed),
                                      banned | {(r, int(s[r]))}))
            fixed[r] = int(s[r])
    raise LinalgError("no admissible permutation outside the excluded set")


def _fft_pow2(x: np.ndarray, inverse: bool) -> np.ndarray:
    # Unnormalized radix-2 transform along the last axis.
    n = x.shape[-1]
    if n == 1:
        return x.copy()
    even = _fft_pow2(x[..., ::2], inverse)
    odd = _fft_pow2(x[..., 1::2], inverse)
    sign = 1.0 if inverse else -1.0
    tw = np.exp(sign * 2j * np.pi * np.arange(n // 2) / n) * odd
    return np.concatenate([even + tw, even - tw], axis=-1)


def _fft_any(x: np.ndarray, inverse: bool) -> np.ndarray:
    n = x.shape[-1]
    if n & (n - 1) == 0:
        return _fft_pow2(x, inverse)
    # Bluestein: nk = (n^2 + k^2 - (k-n)^2)/2
    sign = 1.0 if inverse else -1.0
    k = np.arange(n)
    chirp = np.exp(sign * 1j * np.pi * (k * k % (2 * n)) / n)
    m = 1 << int(np.ceil(np.log2(2 * n - 1)))
    a = np.zeros(x.shape[:-1] + (m,), dtype=complex)
    a[..., :n] = x * chirp
    b = np.zeros(m, dtype=complex)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:][::-1])
    fa = _fft_pow2(a, False)
    fb = _fft_pow2(b, False)
    conv = _fft_pow2(fa * fb, True) / m
    return chirp * conv[..., :n]


def dft(x, inverse: bool = False) -> np.ndarray:
    """Unitary discrete Fourier transform.

    Parameters
    ----------
    x : array_like
        Input; the transform acts along the last axis, so a 2-D array is
        transformed row by row.
    inverse : bool
        Use ``e^{+2 pi i k n / M}`` kernels instead of ``e^{-...}``.

    Returns
    -------
    ndarray
        ``(1/sqrt(M)) sum_n x[n] e^{-+2 pi i k n / M}``.
    """
    a = np.asarray(x, dtype=complex)
    if a.ndim == 0 or a.shape[-1] < 1:
        raise LinalgError("dft needs length >= 1")
    _check_finite(a, "dft input")
    return _fft_any(a, inverse) / np.sqrt(a.shape[-1])


def dft_axis(x: np.ndarray, axis: int, inverse: bool = False) -> np.ndarray:
    """Apply :func:`dft` along ``axis`` of an n-d array."""
    a = np.moveaxis(np.asarray(x, dtype=complex), axis, -1)
    return np.moveaxis(dft(a, inverse), -1, axis)
