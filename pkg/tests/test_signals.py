import numpy as np
import pytest

from algdiv.estimators import reynolds_project
from algdiv.groups import make_group
from algdiv.signals import (
    ChannelModel,
    CovModel,
    Graph,
    SignalError,
    build_covariance,
    channel_apply,
    complete_graph,
    constellation_points,
    cycle_graph,
    graph_laplacian,
    known_automorphisms,
    make_channel,
    petersen_graph,
    read_edge_list,
    sample_snapshots,
    symbol_source,
    trial_rng,
)


ALL_MODELS = [
    CovModel("tones", 8, {"freqs": [1, 3.5], "noise_var": 0.1}),
    CovModel("chirp", 8, {"freqs": [2], "mu": 0.3}),
    CovModel("ar", 8, {"coeffs": [0.5, -0.2]}),
    CovModel("ar", 8, {"coeffs": [0.8], "circulant": True}),
    CovModel("ma", 8, {"coeffs": [0.5, 0.25]}),
    CovModel("ma", 8, {"coeffs": [1.0, 1.0], "circulant": True}),
    CovModel("multipath", 16),
    CovModel("graph_diffusion", 6, {"graph": cycle_graph(6)}),
    CovModel("white", 8, {"sigma2": 2.0}),
]


class TestBuildCovariance:
    def test_single_tone_rank_one_circulant(self):
        R = build_covariance(CovModel("tones", 8, {"freqs": [2]}))
        assert np.linalg.matrix_rank(R) == 1
        assert np.allclose(reynolds_project(make_group("cyclic", M=8), R), R)

    def test_white(self):
        assert np.allclose(build_covariance(CovModel("white", 8)), np.eye(8))

    def test_ar1_closed_form(self):
        rho = 0.8
        R = build_covariance(CovModel("ar", 4, {"coeffs": [rho]}))
        expected = rho ** np.abs(np.subtract.outer(np.arange(4), np.arange(4))) / (1 - rho ** 2)
        assert np.allclose(R, expected)

    def test_ma1_closed_form(self):
        R = build_covariance(CovModel("ma", 4, {"coeffs": [0.5]}))
        assert np.allclose(np.diag(R), 1.25)
        assert np.allclose(np.diag(R, 1), 0.5)
        assert np.allclose(np.diag(R, 2), 0.0)

    def test_unstable_ar(self):
        with pytest.raises(SignalError):
            build_covariance(CovModel("ar", 4, {"coeffs": [1.2]}))

    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: f"{m.kind}-{m.M}")
    def test_hermitian_psd(self, model):
        R = build_covariance(model)
        assert np.allclose(R, R.conj().T, atol=1e-12)
        assert np.linalg.eigvalsh(R).min() >= -1e-10 * np.trace(R).real

    @pytest.mark.parametrize("M", [4, 16, 64])
    def test_psd_across_sizes(self, M):
        for kind, p in [("ar", {"coeffs": [0.9]}), ("ma", {"coeffs": [0.5]}), ("tones", {"freqs": [1.3]})]:
            R = build_covariance(CovModel(kind, M, p))
            assert np.linalg.eigvalsh(R).min() >= -1e-10 * np.trace(R).real

    def test_graph_symmetrized_exactly(self):
        g = cycle_graph(6)
        R = build_covariance(CovModel("graph_diffusion", 6, {"graph": g}))
        for P in (np.eye(6)[list(p.map)] for p in known_automorphisms(g)):
            assert np.array_equal(P.T @ R @ P, R)

    def test_graph_size_mismatch(self):
        with pytest.raises(SignalError):
            build_covariance(CovModel("graph_diffusion", 5, {"graph": cycle_graph(6)}))

    def test_unknown_kind(self):
        with pytest.raises(SignalError):
            CovModel("pink", 4)


class TestSampleSnapshots:
    def test_noiseless_tone_is_exponential(self):
        s = sample_snapshots(CovModel("tones", 8, {"freqs": [3]}), 1, None, seed=0)
        v = np.exp(2j * np.pi * 3 * np.arange(8) / 8)
        x = s.data[0]
        assert np.allclose(x / x[0], v) and np.isclose(abs(x[0]), 1.0)

    def test_deterministic(self):
        m = CovModel("ar", 6, {"coeffs": [0.5]})
        a = sample_snapshots(m, 4, 10.0, seed=5).data
        b = sample_snapshots(m, 4, 10.0, seed=5).data
        assert a.tobytes() == b.tobytes()

    def test_meta(self):
        s = sample_snapshots(CovModel("white", 4), 2, 3.0, seed=9)
        assert s.meta["seed"] == 9 and s.meta["snr_db"] == 3.0 and s.meta["generator"] == "white"

    def test_white_empirical_covariance(self):
        n, M = 100_000, 4
        X = sample_snapshots(CovModel("white", M), n, None, seed=1).data
        R = X.T @ X.conj() / n
        # each entry is a mean of n terms with unit second moment
        assert np.all(np.abs(R - np.eye(M)) <= 3 / np.sqrt(n) * np.sqrt(2))

    def test_rejects_zero_L(self):
        with pytest.raises(SignalError):
            sample_snapshots(CovModel("white", 4), 0)

    def test_trial_rng_independent(self):
        a = trial_rng(1, 0).random(4)
        b = trial_rng(1, 1).random(4)
        assert not np.allclose(a, b)
        assert np.array_equal(a, trial_rng(1, 0).random(4))


class TestGraphs:
    def test_k2(self):
        assert np.array_equal(graph_laplacian(complete_graph(2)), [[1, -1], [-1, 1]])

    def test_c4(self):
        L = graph_laplacian(cycle_graph(4))
        assert np.array_equal(L[0], [2, -1, 0, -1])
        assert all(np.array_equal(L[k], np.roll(L[0], k)) for k in range(4))

    def test_petersen(self):
        g = petersen_graph()
        L = graph_laplacian(g)
        assert L.shape == (10, 10)
        assert np.all(g.degrees() == 3)
        assert len(g.edges) == 15

    def test_rejects_self_loop(self):
        with pytest.raises(SignalError):
            Graph(3, ((0, 0),))

    def test_rejects_duplicate(self):
        with pytest.raises(SignalError):
            Graph(3, ((0, 1), (1, 0)))

    def test_read_edge_list(self, tmp_path):
        p = tmp_path / "k3.edges"
        p.write_text("# triangle\n0 1\n1 2\n\n2 0\n")
        g = read_edge_list(str(p))
        assert g.n == 3 and len(g.edges) == 3

    def test_read_edge_list_bad_line(self, tmp_path):
        p = tmp_path / "bad.edges"
        p.write_text("0 1\n1 2 3\n")
        with pytest.raises(SignalError, match=":2:"):
            read_edge_list(str(p))

    def test_known_automorphisms(self):
        assert known_automorphisms(cycle_graph(6)).order == 12
        assert known_automorphisms(complete_graph(4)).order == 24
        with pytest.raises(SignalError):
            known_automorphisms(petersen_graph())


class TestConstellations:
    def test_qpsk(self):
        s = symbol_source("qpsk", 4, seed=0)
        pts = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
        assert all(np.min(np.abs(pts - v)) < 1e-12 for v in s)

    def test_qpsk_fourth_power(self):
        assert np.allclose(constellation_points("qpsk") ** 4, -1.0)

    def test_bpsk(self):
        assert set(np.round(symbol_source("bpsk", 100, seed=1).real, 12)) <= {-1.0, 1.0}
        assert np.allclose(constellation_points("bpsk"), constellation_points("mpsk:2"))

    def test_qam16_power(self):
        s = symbol_source("16qam", 100_000, seed=2)
        assert abs(np.mean(np.abs(s) ** 2) - 1.0) < 0.01
        assert constellation_points("qam16").size == 16

    def test_unknown(self):
        with pytest.raises(SignalError):
            constellation_points("64apsk")


class TestChannel:
    def test_unit_tap(self):
        s = symbol_source("qpsk", 50, seed=0)
        r = channel_apply(ChannelModel(np.array([1.0])), s, 20.0, seed=1)
        noise = r - s
        assert 0 < np.mean(np.abs(noise) ** 2) < 0.05

    def test_exact_convolution(self):
        s = symbol_source("qpsk", 20, seed=0)
        ch = ChannelModel(np.array([1.0, 0.5]))
        h = np.array([1.0, 0.5]) / np.sqrt(1.25)
        assert np.allclose(channel_apply(ch, s), np.convolve(s, h)[:20])

    def test_unit_power(self):
        assert np.isclose(np.sum(np.abs(make_channel(5, 3.0, 7).taps) ** 2), 1.0)

    def test_zero_power(self):
        with pytest.raises(SignalError):
            ChannelModel(np.zeros(3))

    def test_power_delay_profile(self):
        # mean log-power is unaffected by the per-channel normalization
        H = np.array([10 * np.log10(np.abs(make_channel(5, 3.0, s).taps) ** 2) for s in range(200)])
        k = np.arange(5)
        slope = np.polyfit(k, H.mean(axis=0), 1)[0]
        se = H.std(axis=0).mean() / np.sqrt(200) / np.sqrt(np.sum((k - k.mean()) ** 2))
        assert abs(slope + 3.0) < 4 * se
