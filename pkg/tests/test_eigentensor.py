import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from algdiv.eigentensor import (
    MAX_K,
    EigentensorError,
    Level1Profile,
    level2_estimate,
    read_profiles,
    symmetric_closed_form,
    two_class_profiles,
)
from algdiv.groups import make_group


class TestProfile:
    def test_rejects_out_of_range(self):
        with pytest.raises(EigentensorError):
            Level1Profile.of([0.5, 1.2])

    def test_rejects_zero(self):
        with pytest.raises(EigentensorError):
            Level1Profile.of([0.0, 0.0])

    def test_length_mismatch(self):
        with pytest.raises(EigentensorError):
            Level1Profile(3, (0.1, 0.2))


class TestLevel2:
    def test_flat_is_one(self):
        _, p2 = level2_estimate(Level1Profile.of([0.4] * 4))
        assert p2 == pytest.approx(1.0)

    def test_trivial_group_single_channel(self):
        _, p2 = level2_estimate(Level1Profile.of([1, 0, 0, 0]), make_group("trivial", M=4))
        assert p2 == pytest.approx(1.0)

    def test_symmetric_spike(self):
        # S_4 average of e_1 e_1^T is I/4
        R2, p2 = level2_estimate(Level1Profile.of([1, 0, 0, 0]))
        assert np.allclose(R2, np.eye(4) / 4) and p2 == pytest.approx(0.25)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5))
    def test_closed_form(self, vals):
        R2, _ = level2_estimate(Level1Profile.of(vals))
        d, o = symmetric_closed_form(vals)
        K = len(vals)
        assert np.max(np.abs(np.diag(R2) - d)) < 1e-12
        assert np.max(np.abs(R2[~np.eye(K, dtype=bool)] - o)) < 1e-12

    def test_cap(self):
        with pytest.raises(EigentensorError):
            level2_estimate(Level1Profile.of([0.5] * (MAX_K + 1)))

    def test_explicit_group_beyond_cap(self):
        _, p2 = level2_estimate(Level1Profile.of([0.5] * 8), make_group("cyclic", M=8))
        assert p2 == pytest.approx(1.0)

    def test_degree_mismatch(self):
        with pytest.raises(EigentensorError):
            level2_estimate(Level1Profile.of([0.5] * 3), make_group("cyclic", M=4))

    def test_classes_separate(self):
        X, y = two_class_profiles(seed=1)
        p2 = np.array([level2_estimate(Level1Profile.of(r))[1] for r in X])
        assert p2[y == 0].min() > p2[y == 1].max()


class TestRead:
    def test_header_and_blank(self, tmp_path):
        p = tmp_path / "prof.csv"
        p.write_text("b1,b2,b3\n0.1,0.2,0.3\n\n0.5,0.5,0.5\n")
        out = read_profiles(str(p))
        assert [q.psi_vec for q in out] == [(0.1, 0.2, 0.3), (0.5, 0.5, 0.5)]

    def test_bad_row(self, tmp_path):
        p = tmp_path / "prof.csv"
        p.write_text("0.1,0.2\n0.1,x\n")
        with pytest.raises(EigentensorError, match=":2:"):
            read_profiles(str(p))

    def test_ragged(self, tmp_path):
        p = tmp_path / "prof.csv"
        p.write_text("0.1,0.2\n0.1,0.2,0.3\n")
        with pytest.raises(EigentensorError):
            read_profiles(str(p))
