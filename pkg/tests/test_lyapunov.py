import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vfdms.field import PQ
from vfdms.lyapunov import (
    LyapunovConfig,
    autocorrelation,
    block_uncertainty,
    default_delay,
    delay_embed,
    divergence_curve,
    max_lyapunov,
    norm_series,
    saturation_step,
    scalar_series_from_embedding,
)
from vfdms.measure_space import generic_space
from vfdms.mds import embed
from vfdms.metrics import DistanceMatrix
from vfdms.series import FieldSeries
from vfdms.lyapunov import _nearest_neighbours


def logistic(n, x=0.3):
    out = np.empty(n)
    for i in range(n):
        x = 4.0 * x * (1.0 - x)
        out[i] = x
    return out


def henon(n, burn=100):
    x, y = 0.1, 0.1
    out = np.empty(n)
    for i in range(n + burn):
        x, y = 1.0 - 1.4 * x * x + y, 0.3 * x
        if i >= burn:
            out[i - burn] = x
    return out


class TestReferenceSystems:
    def test_logistic(self):
        r = max_lyapunov(logistic(5000))
        assert r.exponent == pytest.approx(math.log(2), abs=0.1)
        assert r.r_squared > 0.9

    def test_henon(self):
        # largest exponent of the Henon map at a=1.4, b=0.3 is about 0.42
        r = max_lyapunov(henon(3000), LyapunovConfig(embed_dim=2))
        assert r.exponent == pytest.approx(0.42, abs=0.05)

    @pytest.mark.parametrize("omega", [0.1, 0.05, 0.3])
    def test_sinusoid(self, omega):
        assert max_lyapunov(np.sin(omega * np.arange(5000))).exponent <= 0.01

    def test_sample_time(self):
        r = max_lyapunov(logistic(1000), LyapunovConfig(sample_time=0.5))
        assert r.exponent_per_time == pytest.approx(2.0 * r.exponent)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.01, 100.0), st.floats(-50, 50))
    def test_affine_invariance(self, a, b):
        x = logistic(400)
        r0 = max_lyapunov(x)
        r1 = max_lyapunov(a * x + b)
        assert r1.exponent == pytest.approx(r0.exponent, abs=1e-6)
        assert r1.fit_range == r0.fit_range


class TestPieces:
    @given(hnp.arrays(np.float64, 30, elements=st.floats(-10, 10)))
    def test_autocorrelation(self, x):
        y = x - x.mean()
        acf = autocorrelation(x, 5)
        if np.dot(y, y) == 0:
            assert np.all(acf == 1)
            return
        full = np.correlate(y, y, "full")[len(y) - 1 :] / np.dot(y, y)
        np.testing.assert_allclose(acf, full[:6], atol=1e-12)

    def test_default_delay_sinusoid(self):
        # autocorrelation of a period-40 sine first bottoms out at half a period
        x = np.sin(2 * math.pi * np.arange(1000) / 40)
        assert default_delay(x) == 20

    def test_default_delay_capped(self):
        assert default_delay(np.arange(50.0)) == 5

    def test_delay_embed(self):
        y = delay_embed(np.arange(10.0), 3, 2)
        assert y.shape == (6, 3)
        np.testing.assert_array_equal(y[0], [0, 2, 4])
        np.testing.assert_array_equal(y[-1], [5, 7, 9])
        with pytest.raises(ValueError):
            delay_embed(np.arange(4.0), 3, 2)

    @settings(max_examples=25)
    @given(hnp.arrays(np.float64, (40, 2), elements=st.floats(-5, 5)), st.integers(0, 5))
    def test_nearest_neighbours_brute_force(self, y, window):
        idx, dist = _nearest_neighbours(y, window, chunk=7)
        for i in range(len(y)):
            cand = [np.linalg.norm(y[i] - y[j]) for j in range(len(y)) if abs(i - j) > window]
            cand = [d for d in cand if d > 0]
            if not cand:
                assert idx[i] == -1
            else:
                assert dist[i] == pytest.approx(min(cand), rel=1e-12)
                assert abs(idx[i] - i) > window

    def test_saturation_step(self):
        assert saturation_step(np.array([0.0, 1, 2, 3, 3, 3])) == 3
        assert saturation_step(np.array([0.0, 1, 2, 3, 4])) == 4
        assert saturation_step(np.array([0.0, 1])) == 1

    def test_divergence_curve_starts_at_neighbour_distance(self):
        y = delay_embed(logistic(500), 2, 1)
        curve, n_pairs = divergence_curve(y, 1, 5)
        assert n_pairs == len(y)
        assert np.all(np.diff(curve[:4]) > 0)


class TestErrors:
    def test_non_finite(self):
        x = logistic(500)
        x[10] = np.nan
        with pytest.raises(ValueError):
            max_lyapunov(x)

    def test_too_short(self):
        with pytest.raises(ValueError):
            max_lyapunov(logistic(50))

    def test_embedding_too_long(self):
        with pytest.raises(ValueError):
            max_lyapunov(logistic(200), LyapunovConfig(embed_dim=5, delay=60))

    def test_bad_fit_range(self):
        with pytest.raises(ValueError):
            max_lyapunov(logistic(500), LyapunovConfig(fit_range=(3, 3)))

    @pytest.mark.parametrize("kw", [dict(embed_dim=1), dict(delay=0), dict(theiler_window=-1), dict(sample_time=0)])
    def test_config(self, kw):
        with pytest.raises(ValueError):
            LyapunovConfig(**kw)


class TestSeries:
    def test_norm_series(self):
        s = FieldSeries(generic_space([1.0, 3.0]), [[[3.0, 4.0], [0.0, 0.0]], [[1.0, 0.0], [1.0, 0.0]]], [0.0, 1.0])
        np.testing.assert_allclose(norm_series(s), [5.0, 2.0])
        np.testing.assert_allclose(norm_series(s, PQ(1, 1)), [7.0, 4.0])

    def test_norm_series_identical_and_scaled(self):
        space = generic_space([1.0, 2.0, 0.5])
        x = np.array([[1.0, -2.0], [0.5, 0.0], [3.0, 1.0]])
        c = np.array([0.5, 1.0, 2.0, 7.0])
        s = FieldSeries(space, c[:, None, None] * x, np.arange(4.0))
        ref = norm_series(FieldSeries(space, x[None], [0.0]))[0]
        np.testing.assert_allclose(norm_series(s), c * ref, rtol=1e-14)
        same = FieldSeries(space, np.repeat(x[None], 5, axis=0), np.arange(5.0))
        assert np.ptp(norm_series(same)) == 0.0

    def test_norm_of_homogeneous_orbit(self):
        from vfdms.sim_cgle import CgleParams, simulate_cgle

        beta = 2.0
        p = CgleParams(alpha=0.0, beta=beta, grid=(4, 4), dt=0.01, t_end=20.0, output_stride=0.5, scalar="re")
        res = simulate_cgle(p, np.full((4, 4), 1 / math.sqrt(beta), dtype=complex))
        expected = 4.0 * np.abs(np.cos(res.scalar.timestamps / beta)) / math.sqrt(beta)
        np.testing.assert_allclose(norm_series(res.scalar), expected, atol=1e-5)

    def test_planted_line(self):
        rng = np.random.default_rng(0)
        t = rng.uniform(-5, 5, size=30)
        pts = np.outer(t, [0.6, 0.8])
        e = embed(DistanceMatrix(np.sum((pts[:, None] - pts[None]) ** 2, axis=-1), PQ()))
        assert e.k_retained == 1
        coord = scalar_series_from_embedding(e, 1)
        assert abs(np.corrcoef(coord, t)[0, 1]) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(np.abs(coord), np.abs(t - t.mean()), atol=1e-9)

    def test_identical_frames_have_no_coordinate(self):
        e = embed(DistanceMatrix(np.zeros((5, 5)), PQ()))
        with pytest.raises(ValueError):
            scalar_series_from_embedding(e, 1)

    def test_coordinate_series(self):
        x = np.array([0.0, 3.0, 7.0])
        e = embed(DistanceMatrix((x[:, None] - x[None, :]) ** 2, PQ()))
        np.testing.assert_allclose(scalar_series_from_embedding(e, 1), [-10 / 3, -1 / 3, 11 / 3])
        for j in (0, 2):
            with pytest.raises(ValueError):
                scalar_series_from_embedding(e, j)

    def test_block_uncertainty(self):
        se, vals = block_uncertainty(logistic(2000))
        assert vals.shape == (4,)
        assert se == pytest.approx(np.std(vals, ddof=1) / 2)
        assert np.all(np.abs(vals - math.log(2)) < 0.15)
