import itertools

import numpy as np
import pytest

from algdiv.diagnostics import delta_continuous
from algdiv.estimators import SnapshotSet
from algdiv.groups import Permutation, enumerate_abelian_groups, make_group
from algdiv.matching import (
    GeneratorBasis,
    MatchingError,
    basis_from_permutations,
    deflate,
    library_match,
    library_match_dcv,
    library_match_psi,
    natural_basis,
    param_sweep,
    perm_residual,
    perm_residual_eigdiff,
    pipeline,
    round_to_permutation,
    sequential_gevp,
    skew_lift,
    solve_min_direction,
)
from algdiv.signals import CovModel, build_covariance, complete_graph, cycle_graph, sample_snapshots


def shift(M, s=1):
    return Permutation(tuple((k + s) % M for k in range(M)))


def graph_R(g):
    return build_covariance(CovModel("graph_diffusion", g.n, {"graph": g}))


def circulant_R(M, seed=0):
    lam = np.random.default_rng(seed).uniform(0.2, 2.0, M)
    F = np.exp(-2j * np.pi * np.outer(np.arange(M), np.arange(M)) / M) / np.sqrt(M)
    return F.conj().T @ np.diag(lam) @ F


def transposition_basis(M):
    return basis_from_permutations(M, [Permutation.from_cycles(M, [[i, j]])
                                       for i, j in itertools.combinations(range(M), 2)])


class TestBasis:
    def test_m6_size(self):
        b = natural_basis(6)
        assert 1 <= len(b) <= 8
        G = b.gram()
        assert np.linalg.matrix_rank(G) == len(b)

    def test_m2_only_symmetric_lift(self):
        b = natural_basis(2)
        assert len(b) == 1
        assert b.labels[0].startswith("sym")

    def test_custom_order_preserved(self):
        perms = [shift(5), Permutation.from_cycles(5, [[0, 2]])]
        b = natural_basis(5, perms)
        assert b.labels[0] == f"skew[{perms[0]}]"

    def test_skew_lift_is_skew(self):
        a, s = skew_lift(shift(5).matrix())
        for B in (a, s):
            assert np.allclose(B, -B.conj().T)
        assert abs(np.trace(s)) < 1e-12

    def test_rejects_hermitian_member(self):
        with pytest.raises(MatchingError):
            GeneratorBasis(2, [np.eye(2, dtype=complex)])


class TestSolveMinDirection:
    def test_circulant_shift(self):
        R = circulant_R(6)
        A, lam = solve_min_direction(R, natural_basis(6))
        assert lam <= 1e-10
        assert delta_continuous(A, R) <= 1e-8

    def test_identity_zero(self):
        _, lam = solve_min_direction(np.eye(5), natural_basis(5))
        assert lam == pytest.approx(0.0, abs=1e-20)

    def test_matches_grid_search(self):
        rng = np.random.default_rng(1)
        M = 5
        X = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
        R = X @ X.conj().T
        mats = []
        for _ in range(2):
            Y = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
            mats.append(Y - Y.conj().T)
        basis = GeneratorBasis(M, mats)
        _, lam = solve_min_direction(R, basis)

        def ratio(c):
            A = c[0] * mats[0] + c[1] * mats[1]
            return np.linalg.norm(R @ A - A @ R) ** 2 / np.linalg.norm(A) ** 2

        theta = np.linspace(0, np.pi, 10_000, endpoint=False)
        grid_min = min(ratio((np.cos(t), np.sin(t))) for t in theta)
        assert lam > 0
        assert lam == pytest.approx(grid_min, rel=1e-6)


class TestPermResidual:
    def test_diag_shift_hand_value(self):
        R = np.diag([1.0, 2.0, 3.0, 4.0])
        ex, ed = perm_residual_eigdiff(R, shift(4))
        assert ex == pytest.approx(12.0) and ed == pytest.approx(12.0)

    def test_identity_zero(self):
        R = circulant_R(4)
        assert perm_residual_eigdiff(R, Permutation.identity(4)) == pytest.approx((0.0, 0.0), abs=1e-20)

    def test_c6_rotation(self):
        R = graph_R(cycle_graph(6))
        ex, ed = perm_residual_eigdiff(R, shift(6))
        assert ex == 0.0
        assert ed == pytest.approx(0.0, abs=1e-25)
        assert perm_residual(R, shift(6)) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_dense_forms_agree(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        R = X @ X.conj().T
        s = Permutation(tuple(int(v) for v in rng.permutation(6)))
        ex, ed = perm_residual_eigdiff(R, s)
        assert ed == pytest.approx(ex, rel=1e-10)

    def test_c6_non_automorphism(self):
        assert perm_residual(graph_R(cycle_graph(6)), Permutation.from_cycles(6, [[0, 1]])) > 0


class TestRounding:
    @pytest.mark.parametrize("M", [3, 5, 8])
    def test_shift_lift(self, M):
        P = shift(M)
        A, _ = skew_lift(P.matrix())
        assert round_to_permutation(A) == P

    def test_zero_tie_break(self):
        # all profits equal; the first non-identity assignment wins
        assert round_to_permutation(np.zeros((4, 4))) == Permutation.from_cycles(4, [[0, 1]])

    def test_noisy_recovery(self):
        rng = np.random.default_rng(7)
        hits = trials = 0
        while trials < 100:
            s = Permutation(tuple(int(v) for v in rng.permutation(8)))
            ct = s.cycle_type()
            if 2 in ct or ct.count(1) > 1:
                # 2-cycles and fixed points have zero skew lift; noise decides them
                continue
            P = s.matrix()
            A = 0.9 * (P - P.T) / 2 + 0.01 * rng.normal(size=(8, 8))
            hits += round_to_permutation(A, forbid_identity=False) == s
            trials += 1
        assert hits == 100

    def test_exclude_group(self):
        G = make_group("cyclic", M=4)
        A, _ = skew_lift(shift(4).matrix())
        assert round_to_permutation(A, exclude=G) not in G


class TestDeflate:
    def test_removes_group_span(self):
        G = make_group("cyclic", M=6)
        b = deflate(natural_basis(6), G)
        for B in b.mats:
            for g in G.elements:
                assert abs(np.vdot(g.matrix(), B)) < 1e-10

    def test_full_symmetric_exhausts(self):
        from algdiv.groups import symmetric_group

        assert len(deflate(transposition_basis(4), symmetric_group(4))) == 0


class TestSequentialGevp:
    def test_k4(self):
        tr = sequential_gevp(graph_R(complete_graph(4)))
        assert tr.final_group.order == 24
        assert all(it.residual <= 1e-10 for it in tr.accepted)

    def test_k4_transposition_basis(self):
        tr = sequential_gevp(graph_R(complete_graph(4)), transposition_basis(4))
        assert tr.final_group.order == 24

    def test_c6_partial(self):
        tr = sequential_gevp(graph_R(cycle_graph(6)), natural_basis(6))
        assert tr.final_group.order == 6
        assert shift(6) in tr.final_group
        assert tr.termination == "rejection"

    def test_identity_cap(self):
        tr = sequential_gevp(np.eye(5), cap=2)
        assert len(tr.iterations) <= 2
        assert tr.iterations[0].residual == 0.0
        assert all(it.accepted for it in tr.iterations)

    def test_soundness(self):
        for R in (graph_R(cycle_graph(6)), circulant_R(8, 3), graph_R(complete_graph(5))):
            tr = sequential_gevp(R, tau=1e-8)
            for it in tr.accepted:
                assert perm_residual(R, it.rounded_perm) <= tr.tau

    def test_trace_dict(self):
        d = sequential_gevp(graph_R(cycle_graph(6)), tau=0.05).to_dict()
        assert d["tau"] == 0.05 and "iterations" in d and d["final_group_order"] >= 1

    def test_negative_tau(self):
        with pytest.raises(MatchingError):
            sequential_gevp(np.eye(3), tau=-1)


class TestLibraryMatch:
    def test_noiseless_circulant(self):
        M = 16
        R = circulant_R(M, 2)
        snaps = sample_snapshots(CovModel("tones", M, {"freqs": [2, 5], "amps": [1.0, 0.5]}), 4, None, seed=0)
        lib = [make_group("cyclic", M=M), make_group("product", factors=[2] * 4), make_group("trivial", M=M)]
        assert library_match(snaps, lib).selected == "Z_16"
        assert R.shape == (M, M)

    def test_white_still_ranks(self):
        snaps = sample_snapshots(CovModel("white", 8), 4, None, seed=0)
        rep = library_match_dcv(snaps, enumerate_abelian_groups(8))
        assert len(rep.ranked) == 3

    def test_degree_mismatch(self):
        with pytest.raises(MatchingError):
            library_match_dcv(np.ones((2, 4)), [make_group("cyclic", M=5)])

    def test_psi_rejects_mixed_orders(self):
        with pytest.raises(MatchingError):
            library_match_psi(np.ones((2, 4)), [make_group("cyclic", M=4), make_group("trivial", M=4)])

    @pytest.mark.slow
    def test_two_tone_accuracy(self):
        lib = enumerate_abelian_groups(32)
        hits = 0
        for t in range(60):
            snaps = sample_snapshots(CovModel("tones", 32, {"freqs": [3, 11]}), 3, 20.0, seed=t)
            hits += library_match(snaps, lib).selected == "Z_32"
        assert hits >= 57


class TestParamSweep:
    grid = np.round(np.arange(-0.5, 0.51, 0.05), 10)

    def test_tone_mu_zero(self):
        snaps = sample_snapshots(CovModel("tones", 32, {"freqs": [5]}), 3, None, seed=1)
        best, curve = param_sweep(snaps, "chirp_mu", self.grid, "psi")
        assert abs(best) <= 0.05
        assert len(curve) == len(self.grid)

    def test_planted_mu(self):
        rng = np.random.default_rng(100)
        hits = 0
        for t in range(10):
            mu = float(rng.choice(self.grid[2:-2]))
            snaps = sample_snapshots(CovModel("chirp", 32, {"freqs": [5], "mu": mu}), 3, 20.0, seed=t)
            hits += abs(param_sweep(snaps, "chirp_mu", self.grid, "psi")[0] - mu) <= 0.05 + 1e-9
        assert hits >= 9

    def test_kaiser_curve_minimum(self):
        # single draws are noisy on the plateau; the seed-averaged curve is not
        grid = np.arange(0, 15, 2)
        curves = [param_sweep(sample_snapshots(CovModel("tones", 32, {"freqs": [5.3]}), 3, 20.0, seed=t),
                              "kaiser_beta", grid, "dcv")[1] for t in range(60)]
        mean = np.mean(curves, axis=0)
        assert 6 <= grid[int(np.argmin(mean))] <= 12
        assert mean[0] > 2 * mean.min()

    def test_bad_sweep(self):
        with pytest.raises(MatchingError):
            param_sweep(np.ones((2, 4)), "gamma", [1.0])

    def test_empty_grid(self):
        with pytest.raises(MatchingError):
            param_sweep(np.ones((2, 4)), "chirp_mu", [])


class TestPipeline:
    def test_white_gate(self):
        # sample alpha is about sqrt(M / L), so the gate needs many snapshots
        rep = pipeline(sample_snapshots(CovModel("white", 8), 4000, None, seed=0))
        assert rep.alpha_gate < 0.1
        assert rep.selected == "trivial"

    def test_circulant_ar(self):
        for t in range(3):
            snaps = sample_snapshots(CovModel("ar", 16, {"coeffs": [0.8], "circulant": True}), 8, None, seed=t)
            assert pipeline(snaps).selected == "Z_16"

    def test_k4_assembles_symmetric_group(self):
        snaps = sample_snapshots(CovModel("graph_diffusion", 4, {"graph": complete_graph(4)}), 2000, None, seed=0)
        rep = pipeline(snaps, {"basis": transposition_basis(4)})
        assert rep.trace is not None and rep.trace.final_group.order == 24
        assert rep.selected.startswith("seqgevp")

    def test_single_snapshot_falls_back(self):
        snaps = SnapshotSet(sample_snapshots(CovModel("ar", 8, {"coeffs": [0.9]}), 1, None, seed=0).data)
        rep = pipeline(snaps)
        assert any("L >= 2" in n for n in rep.notes)
