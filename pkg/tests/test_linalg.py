import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from algdiv.linalg import (
    ConvergenceError,
    HermitianMatrix,
    LinalgError,
    assignment_max,
    dft,
    dft_axis,
    hermitian_eig,
    permutation_value,
    solve_gevp,
)


def random_hermitian(rng, M):
    X = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
    return X + X.conj().T


class TestHermitianMatrix:
    def test_symmetrizes(self):
        H = HermitianMatrix([[1, 2 + 1j], [2 + 1j, 3]])
        assert np.allclose(H.entries, H.entries.conj().T)

    def test_strict_rejects(self):
        with pytest.raises(LinalgError):
            HermitianMatrix([[1, 2], [0, 3]], strict=True)

    def test_rejects_nan(self):
        with pytest.raises(LinalgError):
            HermitianMatrix([[np.nan]])


class TestHermitianEig:
    def test_identity(self):
        e = hermitian_eig(np.eye(4))
        assert np.allclose(e.eigenvalues, 1.0)
        assert np.allclose(e.eigenvectors, np.eye(4))

    def test_diag(self):
        e = hermitian_eig(np.diag([3.0, 1.0]))
        assert np.allclose(e.eigenvalues, [3, 1])
        assert np.allclose(e.eigenvectors, np.eye(2))

    def test_diag_reorders(self):
        e = hermitian_eig(np.diag([1.0, 3.0]))
        assert np.allclose(e.eigenvalues, [3, 1])
        assert np.allclose(e.eigenvectors, [[0, 1], [1, 0]])

    @pytest.mark.parametrize("M", [1, 2, 3, 5, 8, 13, 16, 31])
    def test_reconstruction(self, M):
        rng = np.random.default_rng(M)
        H = random_hermitian(rng, M)
        e = hermitian_eig(H)
        U = e.eigenvectors
        assert np.linalg.norm(e.reconstruct() - H) <= 1e-10 * np.linalg.norm(H)
        assert np.linalg.norm(U.conj().T @ U - np.eye(M)) <= 1e-10
        assert np.all(np.diff(e.eigenvalues) <= 0)

    def test_matches_lapack_eigenvalues(self):
        rng = np.random.default_rng(7)
        H = random_hermitian(rng, 12)
        e = hermitian_eig(H)
        assert np.allclose(e.eigenvalues, np.linalg.eigvalsh(H)[::-1], atol=1e-11)

    def test_phase_convention(self):
        rng = np.random.default_rng(3)
        U = hermitian_eig(random_hermitian(rng, 6)).eigenvectors
        for k in range(6):
            first = U[np.flatnonzero(np.abs(U[:, k]) > 1e-8)[0], k]
            assert abs(first.imag) < 1e-14 and first.real > 0

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        H = random_hermitian(rng, 9)
        a, b = hermitian_eig(H), hermitian_eig(H.copy())
        assert np.array_equal(a.eigenvectors, b.eigenvectors)
        assert np.array_equal(a.eigenvalues, b.eigenvalues)

    def test_zero_matrix(self):
        e = hermitian_eig(np.zeros((3, 3)))
        assert np.allclose(e.eigenvalues, 0)

    def test_cap_error_names_dimension(self, monkeypatch):
        import algdiv.linalg as la

        monkeypatch.setattr(la, "JACOBI_MAX_SWEEPS", 0)
        with pytest.raises(ConvergenceError, match="5x5"):
            la.hermitian_eig(random_hermitian(np.random.default_rng(0), 5))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 9), st.integers(0, 10_000))
    def test_reconstruction_property(self, M, seed):
        H = random_hermitian(np.random.default_rng(seed), M)
        e = hermitian_eig(H)
        assert np.linalg.norm(e.reconstruct() - H) <= 1e-10 * np.linalg.norm(H)


class TestSolveGevp:
    def test_ordinary(self):
        pairs = solve_gevp(np.diag([2.0, 5.0]), np.eye(2))
        assert np.allclose([p[0] for p in pairs], [2, 5])

    def test_diagonal_pencil(self):
        pairs = solve_gevp(np.diag([4.0, 6.0]), np.diag([2.0, 3.0]))
        assert np.allclose([p[0] for p in pairs], [2, 2])
        C = np.column_stack([p[1] for p in pairs])
        assert np.linalg.matrix_rank(C) == 2

    def test_null_direction_dropped(self):
        pairs = solve_gevp(np.diag([4.0, 6.0, 1.0]), np.diag([2.0, 3.0, 0.0]))
        assert len(pairs) == 2

    def test_degenerate_gram(self):
        with pytest.raises(LinalgError, match="degenerate Gram"):
            solve_gevp(np.eye(2), np.zeros((2, 2)))

    @pytest.mark.parametrize("d", range(2, 11))
    def test_residual_bound(self, d):
        rng = np.random.default_rng(100 + d)
        for _ in range(11):
            Mm = random_hermitian(rng, d)
            X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            G = X @ X.conj().T + 0.1 * np.eye(d)
            pairs = solve_gevp(Mm, G)
            vals = [p[0] for p in pairs]
            assert vals == sorted(vals)
            scale = np.linalg.norm(Mm) + np.linalg.norm(G)
            for lam, c in pairs:
                res = np.linalg.norm(Mm @ c - lam * G @ c)
                assert res <= 1e-8 * scale * np.linalg.norm(c)


class TestAssignment:
    def test_identity_profit(self):
        s = assignment_max(np.eye(3))
        assert list(s) == [0, 1, 2]
        assert permutation_value(np.eye(3), s) == 3

    def test_swap(self):
        P = np.array([[0.0, 1.0], [1.0, 0.0]])
        s = assignment_max(P)
        assert list(s) == [1, 0]
        assert permutation_value(P, s) == 2

    def test_forbid_dim_one(self):
        with pytest.raises(LinalgError, match="no non-identity"):
            assignment_max(np.ones((1, 1)), forbid_identity=True)

    def test_forbid_identity_on_identity_profit(self):
        s = assignment_max(np.eye(3), forbid_identity=True)
        assert list(s) != [0, 1, 2]
        assert permutation_value(np.eye(3), s) == 1

    @pytest.mark.parametrize("n", range(1, 8))
    @pytest.mark.parametrize("forbid", [False, True])
    def test_brute_force(self, n, forbid):
        if forbid and n == 1:
            pytest.skip("no non-identity permutation")
        rng = np.random.default_rng(n * 10 + forbid)
        perms = [np.array(p) for p in itertools.permutations(range(n))]
        if forbid:
            perms = [p for p in perms if not np.array_equal(p, np.arange(n))]
        reps = 50 if n <= 6 else 8
        for _ in range(reps):
            P = rng.normal(size=(n, n))
            best = max(permutation_value(P, p) for p in perms)
            s = assignment_max(P, forbid_identity=forbid)
            assert permutation_value(P, s) == pytest.approx(best, abs=1e-10)

    def test_six_by_six_against_all_720(self):
        rng = np.random.default_rng(6)
        P = rng.uniform(size=(6, 6))
        best = max(permutation_value(P, np.array(p)) for p in itertools.permutations(range(6)))
        assert permutation_value(P, assignment_max(P)) == pytest.approx(best)


def naive_dft(x, inverse=False):
    M = len(x)
    sign = 1 if inverse else -1
    n = np.arange(M)
    F = np.exp(sign * 2j * np.pi * np.outer(n, n) / M) / np.sqrt(M)
    return F @ x


class TestDft:
    def test_impulse(self):
        assert np.allclose(dft([1, 0, 0, 0]), 0.5 * np.ones(4))

    def test_constant(self):
        assert np.allclose(dft([1, 1, 1, 1]), [2, 0, 0, 0])

    @pytest.mark.parametrize("M", [1, 2, 3, 4, 5, 7, 8, 12, 16, 32, 48])
    def test_against_naive(self, M):
        rng = np.random.default_rng(M)
        x = rng.normal(size=M) + 1j * rng.normal(size=M)
        ref = naive_dft(x)
        assert np.linalg.norm(dft(x) - ref) <= 1e-12 * np.linalg.norm(ref) * max(1, np.log2(M))
        assert np.linalg.norm(dft(dft(x), inverse=True) - x) <= 1e-12 * np.linalg.norm(x) * 4
        assert np.linalg.norm(dft(x)) == pytest.approx(np.linalg.norm(x), rel=1e-12)

    def test_axis(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3, 4, 5)) + 0j
        ref = np.fft.fft(x, axis=1, norm="ortho")
        assert np.allclose(dft_axis(x, 1), ref)

    def test_rejects_nonfinite(self):
        with pytest.raises(LinalgError):
            dft([1.0, np.inf])
