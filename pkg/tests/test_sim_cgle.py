import math

import numpy as np
import pytest

from vfdms.sim_cgle import (
    CgleParams,
    SimulationError,
    cgle_presets,
    high_resolution_window,
    scalar_series,
    simulate_cgle,
)


def uniform(params, value):
    w, h = params.grid
    return np.full((h, w), value, dtype=complex)


class TestParams:
    def test_presets(self):
        p = cgle_presets()
        assert set(p) == {"frozen", "defect_turbulence", "spiral_defect_turbulence"}
        assert (p["frozen"].alpha, p["frozen"].beta) == (2.0, 5.0)
        assert (p["defect_turbulence"].alpha, p["defect_turbulence"].beta) == (2.0, 1.0)
        assert (p["spiral_defect_turbulence"].alpha, p["spiral_defect_turbulence"].beta) == (0.0, 0.56)
        for q in p.values():
            assert q.grid == (128, 128) and q.t_end == 5000.0 and q.output_stride == 5.0

    def test_high_resolution_window(self):
        q = high_resolution_window(cgle_presets()["defect_turbulence"])
        assert (q.t_start_output, q.t_end, q.output_stride) == (2450.0, 2500.0, 0.5)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(grid=(100, 128)),
            dict(output_stride=0.12),
            dict(dt=0.0),
            dict(t_start_output=-1.0),
            dict(scalar="phase"),
            dict(dt=0.4),
        ],
    )
    def test_rejects(self, kw):
        base = dict(alpha=2.0, beta=5.0, grid=(8, 8), t_end=10.0, output_stride=1.0)
        base.update(kw)
        with pytest.raises(ValueError):
            CgleParams(**base)


class TestAnalytic:
    def test_linear_fourier_mode(self):
        # without the cubic term every Fourier mode evolves by its own exponential
        p = CgleParams(alpha=2.0, beta=5.0, grid=(16, 16), domain_side=16.0, dt=0.05, t_end=2.0,
                       output_stride=1.0, cubic=False, growth_in_linear_step=True)
        x = np.arange(16) * (16.0 / 16)
        k = 2 * math.pi / 16.0
        a0 = np.exp(1j * k * x)[None, :].repeat(16, axis=0) * 0.1
        res = simulate_cgle(p, a0)
        rate = 1.0 - (1.0 + 2.0j) * k * k
        for f, t in enumerate(res.fields.timestamps):
            got = res.fields.data[f, :, 0] + 1j * res.fields.data[f, :, 1]
            np.testing.assert_allclose(got, (a0 * np.exp(rate * t)).ravel(), rtol=1e-12, atol=1e-14)

    def test_growth_in_reaction_step(self):
        # RK3 on dA/dt = A: per-step factor 1 + h + h^2/2 + h^3/6
        p = CgleParams(alpha=0.0, beta=1.0, grid=(4, 4), dt=0.1, t_end=1.0, output_stride=1.0, cubic=False)
        res = simulate_cgle(p, uniform(p, 0.5))
        h = 0.1
        factor = (1 + h + h * h / 2 + h**3 / 6) ** 10
        np.testing.assert_allclose(res.fields.data[-1, :, 0], 0.5 * factor, rtol=1e-13)

    def test_homogeneous_orbit(self):
        beta = 5.0
        p = CgleParams(alpha=2.0, beta=beta, grid=(8, 8), dt=0.05, t_end=20.0, output_stride=5.0)
        res = simulate_cgle(p, uniform(p, 1 / math.sqrt(beta)))
        a = res.fields.data[:, 0, 0] + 1j * res.fields.data[:, 0, 1]
        np.testing.assert_allclose(np.abs(a), 1 / math.sqrt(beta), atol=1e-6)
        expected = np.exp(1j * res.fields.timestamps / beta) / math.sqrt(beta)
        np.testing.assert_allclose(a, expected, atol=1e-6)
        # every grid point carries the same value
        assert np.ptp(res.fields.data[-1, :, 0]) < 1e-12

    def test_real_part_oscillates(self):
        beta = 2.0
        p = CgleParams(alpha=0.0, beta=beta, grid=(4, 4), dt=0.01, t_end=40.0, output_stride=0.1, scalar="re")
        res = simulate_cgle(p, uniform(p, 1 / math.sqrt(beta)))
        s = res.scalar.data[:, 0, 0]
        crossings = np.count_nonzero(np.diff(np.sign(s)) != 0)
        # frequency 1/beta: 40 / (2 pi beta) periods, two crossings each
        assert crossings == pytest.approx(2 * 40 / (2 * math.pi * beta), abs=1)


class TestRuns:
    def test_frames_and_times(self):
        p = CgleParams(alpha=2.0, beta=1.0, grid=(8, 8), t_end=3.0, output_stride=1.0, t_start_output=1.0)
        res = simulate_cgle(p)
        np.testing.assert_allclose(res.fields.timestamps, [1.0, 2.0, 3.0])
        assert res.fields.data.shape == (3, 64, 2) and res.scalar.data.shape == (3, 64, 1)

    def test_deterministic(self):
        p = CgleParams(alpha=2.0, beta=1.0, grid=(16, 16), t_end=5.0, output_stride=1.0, seed=4)
        a, b = simulate_cgle(p), simulate_cgle(p)
        np.testing.assert_array_equal(a.fields.data, b.fields.data)
        c = simulate_cgle(CgleParams(alpha=2.0, beta=1.0, grid=(16, 16), t_end=5.0, output_stride=1.0, seed=5))
        assert not np.array_equal(a.fields.data, c.fields.data)

    def test_blow_up(self):
        p = CgleParams(alpha=0.0, beta=1.0, grid=(4, 4), t_end=40.0, output_stride=0.5, cubic=False)
        with pytest.raises(SimulationError) as info:
            simulate_cgle(p, uniform(p, 1.0))
        # |A|^2 = e^{2t} crosses 1e6 near t = 6.9
        assert 6.5 <= info.value.time <= 8.0

    def test_wrong_initial_shape(self):
        p = CgleParams(alpha=0.0, beta=1.0, grid=(4, 8), t_end=1.0, output_stride=0.5)
        with pytest.raises(ValueError):
            simulate_cgle(p, np.zeros((4, 8)))

    def test_scalar_series(self):
        p = CgleParams(alpha=2.0, beta=1.0, grid=(4, 4), t_end=1.0, output_stride=0.5)
        res = simulate_cgle(p)
        d = res.fields.data
        np.testing.assert_allclose(scalar_series(res.fields, "abs").data[..., 0], np.hypot(d[..., 0], d[..., 1]))
        np.testing.assert_array_equal(scalar_series(res.fields, "im").data[..., 0], d[..., 1])
        with pytest.raises(ValueError):
            scalar_series(res.fields, "arg")

    def test_saturates(self):
        # small noise grows towards the saturated amplitude in the frozen regime
        p = CgleParams(alpha=2.0, beta=5.0, grid=(16, 16), domain_side=32.0, t_end=60.0, output_stride=10.0)
        res = simulate_cgle(p)
        amp = res.scalar.data[..., 0]
        assert amp[0].mean() < 0.05
        assert amp[-1].mean() == pytest.approx(1 / math.sqrt(5), rel=0.3)
