import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vfdms.field import (
    PQ,
    IncompatibleFieldsError,
    VectorField,
    add,
    field_norm,
    inner,
    lattice_gradient,
    read_field,
    read_field_values,
    scale,
    sub,
    vnorm_q,
    write_field,
    write_field_csv,
    write_pgm,
    write_ppm,
)
from vfdms.measure_space import generic_space, icosphere, lattice_space, mesh_space

EXPONENTS = [1.0, 1.5, 2.0, 3.0, math.inf]


def slow_norm(values, weights, p, q):
    """Loop-by-loop evaluation of the L^{p,q} norm, kept deliberately naive."""
    point = []
    for row in values:
        if math.isinf(q):
            point.append(max(abs(a) for a in row))
        else:
            point.append(sum(abs(a) ** q for a in row) ** (1.0 / q))
    if math.isinf(p):
        return max((n for n, w in zip(point, weights) if w > 0), default=0.0)
    return sum(n**p * w for n, w in zip(point, weights)) ** (1.0 / p)


@st.composite
def fields(draw, count=2):
    """``count`` compatible random fields over one random weighted space."""
    n = draw(st.integers(1, 12))
    r = draw(st.integers(1, 4))
    weights = draw(hnp.arrays(np.float64, n, elements=st.floats(0.0, 5.0)))
    assume(weights.max() > 0)
    space = generic_space(weights)
    vals = st.floats(-100, 100, allow_nan=False)
    return tuple(VectorField(space, draw(hnp.arrays(np.float64, (n, r), elements=vals))) for _ in range(count))


field_pair = fields


pqs = st.tuples(st.sampled_from(EXPONENTS), st.sampled_from(EXPONENTS)).map(lambda t: PQ(*t))


class TestPQ:
    def test_parse(self):
        assert PQ.parse("2,2") == PQ(2, 2)
        assert PQ.parse("inf,1").p == math.inf
        assert str(PQ(math.inf, 1.5)) == "inf,1.5"

    @pytest.mark.parametrize("bad", ["0.5,2", "2,nan", "x,2"])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            PQ.parse(bad)


class TestVnorm:
    def test_examples(self):
        assert vnorm_q([3, 4], 2) == 5
        assert vnorm_q([3, 4], 1) == 7
        assert vnorm_q([3, -4], math.inf) == 4


class TestFieldNorm:
    space = generic_space([1, 2])
    x = VectorField(space, [[1, 0], [0, 3]])

    def test_zero(self):
        z = VectorField(self.space, np.zeros((2, 3)))
        for p in EXPONENTS:
            for q in EXPONENTS:
                assert field_norm(z, PQ(p, q)) == 0

    def test_hand_values(self):
        assert field_norm(self.x, PQ(2, 2)) == pytest.approx(math.sqrt(19), rel=1e-14)
        assert field_norm(self.x, PQ(1, 1)) == pytest.approx(7, rel=1e-14)

    def test_inf_skips_zero_weight(self):
        space = generic_space([0.0, 1.0])
        f = VectorField(space, [[100.0], [2.0]])
        assert field_norm(f, PQ(math.inf, 2)) == 2.0
        assert field_norm(f, PQ(1, 2)) == 2.0

    @given(field_pair(), pqs)
    def test_matches_naive_loop(self, xy, pq):
        x, _ = xy
        expected = slow_norm(x.values.tolist(), x.space.weights.tolist(), pq.p, pq.q)
        assert field_norm(x, pq) == pytest.approx(expected, rel=1e-12, abs=1e-300)

    @given(field_pair(), pqs, st.floats(-50, 50))
    def test_homogeneity(self, xy, pq, c):
        x, _ = xy
        assert field_norm(scale(x, c), pq) == pytest.approx(abs(c) * field_norm(x, pq), rel=1e-10, abs=1e-300)

    @given(field_pair(), pqs)
    def test_triangle(self, xy, pq):
        x, y = xy
        assert field_norm(add(x, y), pq) <= field_norm(x, pq) + field_norm(y, pq) + 1e-10

    def test_tiny_and_huge_values_general_p(self):
        space = generic_space([1.0, 1.0])
        for mag in (1e-200, 1e200, 1e308):
            f = VectorField(space, [[mag], [mag]])
            assert field_norm(f, PQ(3, 2)) == pytest.approx(mag * 2 ** (1 / 3), rel=1e-12)


class TestInner:
    def test_hand_value(self):
        s = generic_space([1, 2])
        x = VectorField(s, [[1, 0], [0, 3]])
        y = VectorField(s, [[2, 0], [0, 1]])
        assert inner(x, y) == pytest.approx(8)

    def test_disjoint_support(self):
        s = generic_space([1, 1, 1])
        x = VectorField(s, [[1.0], [0.0], [0.0]])
        y = VectorField(s, [[0.0], [0.0], [5.0]])
        assert inner(x, y) == 0

    @given(field_pair())
    def test_induced_norm(self, xy):
        x, _ = xy
        assert inner(x, x) == pytest.approx(field_norm(x, PQ(2, 2)) ** 2, rel=1e-12, abs=1e-300)

    @given(fields(3), st.floats(-10, 10), st.floats(-10, 10))
    def test_bilinear_symmetric(self, xyz, a, b):
        x, y, z = xyz
        assert inner(x, y) == pytest.approx(inner(y, x), rel=1e-12, abs=1e-300)
        lhs = inner(add(scale(x, a), scale(z, b)), y)
        rhs = a * inner(x, y) + b * inner(z, y)
        scale_ = abs(a) * abs(inner(x, y)) + abs(b) * abs(inner(z, y)) + 1e-300
        assert abs(lhs - rhs) <= 1e-10 * max(scale_, 1.0)

    def test_incompatible(self):
        a = VectorField(generic_space([1, 1]), np.zeros((2, 1)))
        b = VectorField(generic_space([1, 2]), np.zeros((2, 1)))
        c = VectorField(generic_space([1, 1]), np.zeros((2, 2)))
        for other in (b, c):
            with pytest.raises(IncompatibleFieldsError):
                inner(a, other)
            with pytest.raises(IncompatibleFieldsError):
                sub(a, other)


class TestArithmetic:
    @given(field_pair())
    def test_identities(self, xy):
        x, _ = xy
        assert np.all(sub(x, x).values == 0)
        np.testing.assert_array_equal(scale(x, 1).values, x.values)
        assert np.all(add(x, scale(x, -1)).values == 0)

    def test_operators(self):
        s = generic_space([1, 1])
        x = VectorField(s, [[1.0], [2.0]])
        np.testing.assert_array_equal((x + x - 2 * x).values, 0)
        np.testing.assert_array_equal((-x).values, [[-1.0], [-2.0]])

    def test_values_read_only_and_finite(self):
        s = generic_space([1])
        x = VectorField(s, [[1.0]])
        with pytest.raises(ValueError):
            x.values[0, 0] = 2
        with pytest.raises(ValueError):
            VectorField(s, [[np.nan]])
        with pytest.raises(ValueError):
            VectorField(s, [[1.0], [2.0]])


def column_image(kind):
    s = lattice_space(4, 4)
    img = np.tile(np.arange(4.0), (4, 1))
    return lattice_gradient(VectorField(s, img.reshape(16, 1)), kind).as_image()


class TestGradient:
    def test_constant(self):
        s = lattice_space(5, 3)
        g = lattice_gradient(VectorField(s, np.full((15, 2), 7.0)))
        assert g.rank == 4 and np.all(g.values == 0)

    def test_column_ramp_clamp(self):
        g = column_image("clamp")
        np.testing.assert_array_equal(g[:, :3, :], np.broadcast_to([0.0, 1.0], (4, 3, 2)))
        np.testing.assert_array_equal(g[:, 3, :], 0.0)

    def test_column_ramp_periodic(self):
        g = column_image("periodic")
        np.testing.assert_array_equal(g[:, :3, 1], 1.0)
        np.testing.assert_array_equal(g[:, 3, 1], -3.0)
        np.testing.assert_array_equal(g[:, :, 0], 0.0)

    def test_rgb_jacobian_layout(self):
        s = lattice_space(3, 2)
        img = np.zeros((2, 3, 3))
        img[:, :, 0] = np.arange(3)  # red varies along columns
        img[:, :, 2] = np.arange(2)[:, None] * 10  # blue varies along rows
        g = lattice_gradient(VectorField(s, img.reshape(6, 3)), "clamp").as_image()
        # components: (dR/drow, dR/dcol, dG/drow, dG/dcol, dB/drow, dB/dcol)
        np.testing.assert_array_equal(g[0, 0], [0, 1, 0, 0, 10, 0])

    def test_non_lattice(self):
        with pytest.raises(ValueError):
            lattice_gradient(VectorField(mesh_space(icosphere(1, 0)), np.zeros((20, 1))))

    def test_bad_boundary(self):
        with pytest.raises(ValueError):
            lattice_gradient(VectorField(lattice_space(2, 2), np.zeros((4, 1))), "mirror")

    @given(
        st.integers(1, 6),
        st.integers(1, 6),
        st.integers(1, 3),
        st.sampled_from(["periodic", "clamp"]),
        st.integers(0, 2**32 - 1),
    )
    def test_linear(self, w, h, r, boundary, seed):
        rng = np.random.default_rng(seed)
        s = lattice_space(w, h)
        x = VectorField(s, rng.normal(size=(w * h, r)))
        y = VectorField(s, rng.normal(size=(w * h, r)))
        lhs = lattice_gradient(add(x, y), boundary).values
        rhs = lattice_gradient(x, boundary).values + lattice_gradient(y, boundary).values
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)

    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_periodic_telescopes(self, w, h, seed):
        rng = np.random.default_rng(seed)
        x = VectorField(lattice_space(w, h), rng.normal(size=(w * h, 2)) * 100)
        assert np.all(np.abs(lattice_gradient(x).values.sum(axis=0)) <= 1e-9)


class TestFiles:
    def test_binary_layout(self, tmp_path):
        s = generic_space([1, 1, 1])
        x = VectorField(s, np.arange(6.0).reshape(3, 2))
        write_field(x, tmp_path / "f.dmsf")
        raw = (tmp_path / "f.dmsf").read_bytes()
        assert raw[:4] == b"DMSF"
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:16], "little") == 3
        assert int.from_bytes(raw[16:20], "little") == 2
        np.testing.assert_array_equal(np.frombuffer(raw[20:], "<f8"), np.arange(6.0))
        np.testing.assert_array_equal(read_field(tmp_path / "f.dmsf", s).values, x.values)

    def test_truncated(self, tmp_path):
        s = generic_space([1, 1])
        write_field(VectorField(s, np.ones((2, 1))), tmp_path / "f.dmsf")
        p = tmp_path / "f.dmsf"
        p.write_bytes(p.read_bytes()[:-3])
        with pytest.raises(ValueError):
            read_field_values(p)

    def test_csv(self, tmp_path):
        x = VectorField(generic_space([1, 1]), [[0.1, 2.0], [3.0, -4.5]])
        write_field_csv(x, tmp_path / "f.csv")
        np.testing.assert_array_equal(np.loadtxt(tmp_path / "f.csv", delimiter=","), x.values)

    def test_pgm_and_range(self, tmp_path):
        s = lattice_space(3, 2)
        x = VectorField(s, [[-1.0], [0.0], [1.0], [0.5], [-0.5], [1.0]])
        lo, hi = write_pgm(x, tmp_path / "a.pgm")
        assert (lo, hi) == (-1.0, 1.0)
        raw = (tmp_path / "a.pgm").read_bytes()
        assert raw.startswith(b"P5\n3 2\n255\n")
        assert list(raw[-6:]) == [0, 128, 255, 191, 64, 255]
        assert "min -1.0" in (tmp_path / "a.pgm.range").read_text()

    def test_ppm(self, tmp_path):
        s = lattice_space(2, 1)
        x = VectorField(s, [[0.0, 1.0, 2.0], [2.0, 1.0, 0.0]])
        write_ppm(x, tmp_path / "a.ppm")
        raw = (tmp_path / "a.ppm").read_bytes()
        assert raw.startswith(b"P6\n2 1\n255\n")
        assert list(raw[-6:]) == [0, 128, 255, 255, 128, 0]
