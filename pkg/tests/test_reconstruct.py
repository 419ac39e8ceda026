import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vfdms.field import PQ, VectorField
from vfdms.measure_space import generic_space, lattice_space
from vfdms.mds import embed
from vfdms.metrics import distance_matrix
from vfdms.reconstruct import fit, reconstruct_frame, reconstruction_error
from vfdms.series import FieldSeries


def model_for(data, weights=None, pq=PQ(), k_max=None):
    data = np.asarray(data, dtype=float)
    space = lattice_space(data.shape[1], 1) if weights is None else generic_space(weights)
    s = FieldSeries(space, data, np.arange(len(data), dtype=float))
    return fit(s, embed(distance_matrix(s, pq)), k_max=k_max), s


class TestSmallCases:
    def test_two_frames(self):
        f0 = np.array([[0.0], [2.0], [4.0]])
        f1 = np.array([[2.0], [2.0], [0.0]])
        m, s = model_for([f0, f1])
        assert m.k_retained == 1
        np.testing.assert_allclose(m.mean_field.values, (f0 + f1) / 2)
        np.testing.assert_allclose(reconstruct_frame(m, 0, 1).values, f0, atol=1e-12)
        np.testing.assert_allclose(reconstruct_frame(m, 1, 1).values, f1, atol=1e-12)
        assert reconstruction_error(m, 0, 1) < 1e-12

    def test_identical_frames(self):
        m, s = model_for(np.full((10, 4, 1), 3.0))
        assert m.k_retained == 0
        np.testing.assert_array_equal(reconstruct_frame(m, 4, 0).values, s.data[4])
        with pytest.raises(ValueError):
            reconstruct_frame(m, 0, 1)

    def test_k_bounds(self):
        m, _ = model_for(np.random.default_rng(0).normal(size=(5, 6, 1)))
        for k in (0, -1, m.k_retained + 1, 1.5):
            with pytest.raises(ValueError):
                reconstruct_frame(m, 0, k)
        with pytest.raises(IndexError):
            reconstruct_frame(m, 5, 1)

    def test_length_mismatch(self):
        m, s = model_for(np.random.default_rng(0).normal(size=(5, 3, 1)))
        e = embed(distance_matrix(s.select(range(4))))
        with pytest.raises(ValueError):
            fit(s, e)


class TestCentroidAndLinearity:
    def test_centroid_frame(self):
        rng = np.random.default_rng(3)
        a, b, c = rng.normal(size=(3, 6, 2))
        data = np.stack([a, b, c, (a + b + c) / 3])
        m, _ = model_for(data)
        np.testing.assert_allclose(m.coords[3], 0.0, atol=1e-12)
        for k in range(1, m.k_retained + 1):
            np.testing.assert_allclose(reconstruct_frame(m, 3, k).values, m.mean_field.values, atol=1e-12)
            assert reconstruction_error(m, 3, k) < 1e-8

    def test_affine_combination(self):
        rng = np.random.default_rng(6)
        a, b, c = rng.normal(size=(3, 8, 1))
        t = 0.3
        data = np.stack([a, b, c, t * a + (1 - t) * b])
        m, _ = model_for(data)
        k = m.k_retained
        ra, rb, rab = (reconstruct_frame(m, i, k).values for i in (0, 1, 3))
        np.testing.assert_allclose(rab, t * ra + (1 - t) * rb, atol=1e-8)
        # also at reduced rank, since coordinates depend affinely on the frame
        ra, rb, rab = (reconstruct_frame(m, i, 1).values for i in (0, 1, 3))
        np.testing.assert_allclose(rab, t * ra + (1 - t) * rb, atol=1e-8)


class TestAgainstPCA:
    def test_projection_identity(self):
        rng = np.random.default_rng(7)
        data = rng.normal(size=(12, 10, 2))
        m, s = model_for(data)
        flat = data.reshape(12, -1)
        mean = flat.mean(axis=0)
        _, _, vt = np.linalg.svd(flat - mean, full_matrices=False)
        for k in (1, 3, 6):
            proj = mean + (flat - mean) @ vt[:k].T @ vt[:k]
            for i in (0, 5, 11):
                np.testing.assert_allclose(reconstruct_frame(m, i, k).values.ravel(), proj[i], atol=1e-9)

    @settings(max_examples=30)
    @given(
        hnp.arrays(np.float64, (6, 5, 2), elements=st.floats(-10, 10)),
        hnp.arrays(np.float64, 5, elements=st.floats(0.1, 3.0)),
    )
    def test_full_rank_exact(self, data, weights):
        m, s = model_for(data, weights)
        for i in range(len(s)):
            k = m.k_retained
            rec = reconstruct_frame(m, i, k).values if k else m.mean_field.values
            np.testing.assert_allclose(rec, data[i], atol=1e-7 * (1 + np.abs(data).max()))

    def test_error_decreases_with_rank(self):
        rng = np.random.default_rng(4)
        m, _ = model_for(rng.normal(size=(10, 8, 1)))
        errs = [reconstruction_error(m, 3, k) for k in range(1, m.k_retained + 1)]
        assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 1e-10 and errs[0] <= 1.0


class TestRoutes:
    def test_precomputed_and_direct_agree(self):
        rng = np.random.default_rng(9)
        data = rng.normal(size=(9, 7, 3))
        fast, _ = model_for(data)
        slow, _ = model_for(data, k_max=0)
        for k in range(1, fast.k_retained + 1):
            np.testing.assert_allclose(reconstruct_frame(fast, 2, k).values, reconstruct_frame(slow, 2, k).values, atol=1e-10)

    def test_mode_field_linearity(self):
        rng = np.random.default_rng(1)
        m, _ = model_for(rng.normal(size=(8, 6, 1)))
        rec = m.mean_field
        for j in range(1, 4):
            rec = rec + m.mode_field(j) * float(m.coords[5, j - 1])
        np.testing.assert_allclose(rec.values, reconstruct_frame(m, 5, 3).values, atol=1e-12)
        with pytest.raises(ValueError):
            m.mode_field(0)

    def test_non_euclidean_flag(self):
        rng = np.random.default_rng(2)
        m, _ = model_for(rng.normal(size=(6, 5, 1)), pq=PQ(1, 1))
        assert not m.exact
        assert reconstruction_error(m, 0, 1) >= 0
