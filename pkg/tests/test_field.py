import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from picard_leray import oracles
from picard_leray.diagnostics import random_field
from picard_leray.field import (
    Grid,
    GridMismatchError,
    ScalarField,
    VectorField,
    convolve,
    curl,
    derivative,
    divergence,
    dump_vector,
    h2_classical,
    hs_norms,
    load_vector,
    norm,
    read_nsf1,
    vector_norm,
    write_nsf1,
)

from conftest import rand_scalar


def sin_x(grid):
    x, _, _ = grid.mesh()
    return ScalarField(grid, np.sin(x))


def test_grid_rejects_bad_sizes():
    for n in (4, 12, 33):
        with pytest.raises(ValueError):
            Grid(n)
    with pytest.raises(ValueError):
        Grid(16, -1.0)


def test_derivative_of_sine_is_cosine(g32):
    x, _, _ = g32.mesh()
    d = derivative(sin_x(g32), 0)
    assert np.max(np.abs(d.values - np.cos(x))) < 1e-12


def test_derivative_of_constant_vanishes(g16):
    f = ScalarField(g16, np.full(g16.shape, 3.0))
    assert np.max(np.abs(derivative(f, 2).values)) < 1e-12


def test_derivative_axis_checked(g16):
    with pytest.raises(ValueError):
        derivative(ScalarField.zeros(g16), 3)


def _low_mode_field(grid, rng):
    # random trigonometric polynomial with |k_i| <= 1, unit sup scale
    x, y, z = grid.mesh(sparse=True)
    f = np.zeros(grid.shape)
    for kx in (-1, 0, 1):
        for ky in (-1, 0, 1):
            for kz in (0, 1):
                a, b = rng.standard_normal(2) / 6
                phase = kx * x + ky * y + kz * z
                f = f + a * np.cos(phase) + b * np.sin(phase)
    return f


def test_derivative_matches_centred_differences(g64, rng):
    f = _low_mode_field(g64, rng)
    d = derivative(ScalarField(g64, f), 1).values
    h = g64.spacing
    roll = lambda k: np.roll(f, -k, axis=1)  # noqa: E731
    fd4 = (8 * (roll(1) - roll(-1)) - (roll(2) - roll(-2))) / (12 * h)
    assert np.max(np.abs(d - fd4)) < 1e-4
    # the plain centred stencil converges at second order
    err = []
    for n in (32, 64):
        g = Grid(n)
        fn = _low_mode_field(g, np.random.default_rng(5))
        dn = derivative(ScalarField(g, fn), 0).values
        fd2 = (np.roll(fn, -1, axis=0) - np.roll(fn, 1, axis=0)) / (2 * g.spacing)
        err.append(np.max(np.abs(dn - fd2)))
    assert 3.8 < err[0] / err[1] < 4.2


def test_norms_of_zero(g16):
    z = ScalarField.zeros(g16)
    for space in ("L1", "L2", "Linf", "H0", "H2", "H4", "H2inf"):
        assert norm(z, space) == 0.0


def test_norms_of_sine(g32):
    f = sin_x(g32)
    l2 = np.sqrt((2 * np.pi) ** 3 / 2)
    assert norm(f, "L2") == pytest.approx(11.1366, abs=1e-4)
    assert norm(f, "L2") == pytest.approx(l2, rel=1e-12)
    assert norm(f, "H2") == pytest.approx(2 * l2, rel=1e-12)
    assert norm(f, "Hs", 1) == pytest.approx(np.sqrt(2) * l2, rel=1e-12)
    assert norm(f, "Linf") == pytest.approx(1.0, abs=1e-12)
    assert norm(f, "H2inf") == pytest.approx(1.0, abs=1e-12)


def test_unsupported_norms(g16):
    f = ScalarField.zeros(g16)
    with pytest.raises(ValueError):
        norm(f, "Hs", 5)
    with pytest.raises(ValueError):
        norm(f, "L3")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_parseval(seed):
    g = Grid(16)
    f = ScalarField(g, random_field(g, np.random.default_rng(seed)))
    assert norm(f, "H0") == pytest.approx(norm(f, "L2"), rel=1e-10)


def test_h2_multiplier_equivalent_to_derivative_sum(g16):
    rng = np.random.default_rng(3)
    for _ in range(100):
        f = ScalarField(g16, random_field(g16, rng))
        r = norm(f, "H2") / h2_classical(f)
        assert 1 / np.sqrt(3) <= r <= np.sqrt(3)


def test_batched_hs_norms(g16, rng):
    a = random_field(g16, rng, (2, 3))
    b = hs_norms(a, g16, 2)
    assert b.shape == (2, 3)
    assert b[1, 2] == pytest.approx(norm(ScalarField(g16, a[1, 2]), "H2"), rel=1e-12)


def test_convolution_with_impulse_is_identity(g16, rng):
    f = rand_scalar(g16, rng)
    imp = np.zeros(g16.shape)
    imp[0, 0, 0] = 1 / g16.cell_volume
    out = convolve(f, ScalarField(g16, imp))
    assert np.max(np.abs(out.values - f.values)) < 1e-10


def test_gaussian_convolution_adds_variances():
    g = Grid(64, 16.0)
    r2 = g.radius() ** 2

    def gauss(s):
        return np.exp(-r2 / (2 * s * s)) / (2 * np.pi * s * s) ** 1.5

    s1, s2 = 0.8, 1.1
    out = convolve(ScalarField(g, gauss(s1)), ScalarField(g, gauss(s2)), padded=True)
    exact = gauss(np.hypot(s1, s2))
    assert np.max(np.abs(out.values - exact)) / exact.max() < 1e-6


def test_convolution_matches_direct_sum():
    g = Grid(8)
    rng = np.random.default_rng(0)
    f = ScalarField(g, rng.standard_normal(g.shape))
    h = ScalarField(g, rng.standard_normal(g.shape))
    assert np.max(np.abs(convolve(f, h).values - oracles.direct_convolution(f, h).values)) < 1e-10


def test_convolution_grid_mismatch(g16, g32):
    with pytest.raises(GridMismatchError):
        convolve(ScalarField.zeros(g16), ScalarField.zeros(g32))


def test_derivative_commutes_with_convolution(g32, rng):
    f, h = rand_scalar(g32, rng), rand_scalar(g32, rng)
    lhs = derivative(convolve(f, h), 1)
    rhs = convolve(derivative(f, 1), h)
    assert np.max(np.abs(lhs.values - rhs.values)) < 1e-8


def test_young_on_random_pairs(g16, rng):
    for _ in range(20):
        f, h = rand_scalar(g16, rng), rand_scalar(g16, rng)
        c = convolve(f, h)
        assert norm(c, "L2") <= norm(f, "L2") * norm(h, "L1") * (1 + 1e-8)
        assert norm(c, "Linf") <= norm(f, "L2") * norm(h, "L2") * (1 + 1e-8)


def test_divergence_examples(g32):
    x, y, z = g32.mesh()
    shear = VectorField.from_array(g32, np.stack(np.broadcast_arrays(np.sin(y), 0 * x, 0 * x)))
    assert np.max(np.abs(divergence(shear).values)) < 1e-12
    v = VectorField.from_array(g32, np.stack(np.broadcast_arrays(np.sin(x), 0 * x, 0 * x)))
    assert np.max(np.abs(divergence(v).values - np.cos(x))) < 1e-12
    b, _ = oracles.beltrami(g32, 0.0, 0.1)
    assert np.max(np.abs(divergence(b).values)) < 1e-10


def test_curl_of_beltrami_is_itself(g32):
    b, _ = oracles.beltrami(g32, 0.0, 0.1, (1.0, 0.7, 0.4))
    assert np.max(np.abs(curl(b).array() - b.array())) < 1e-12


def test_vector_norm_is_componentwise_max(g16):
    x, _, _ = g16.mesh()
    v = VectorField.from_array(g16, np.stack([np.sin(x), 2 * np.sin(x), np.zeros(g16.shape)]))
    assert vector_norm(v, "Linf") == pytest.approx(2.0)


def test_nsf1_roundtrip(tmp_path, g16, rng):
    a = random_field(g16, rng)
    write_nsf1(tmp_path / "a.nsf1", a)
    raw = (tmp_path / "a.nsf1").read_bytes()
    assert raw[:4] == b"NSF1"
    assert len(raw) == 16 + 8 * a.size
    # x is the fastest-varying index in the payload
    assert np.frombuffer(raw[16:24], "<f8")[0] == a[0, 0, 0]
    assert np.frombuffer(raw[24:32], "<f8")[0] == a[1, 0, 0]
    assert np.array_equal(read_nsf1(tmp_path / "a.nsf1"), a)


def test_nsf1_vector_and_corrupt_files(tmp_path, g16):
    b, _ = oracles.beltrami(g16, 0.0, 0.1)
    paths = dump_vector(tmp_path / "v", b)
    assert [p.name for p in paths] == ["v_0.nsf1", "v_1.nsf1", "v_2.nsf1"]
    assert np.array_equal(load_vector(g16, paths).array(), b.array())
    (tmp_path / "bad.nsf1").write_bytes(b"XXXX" + bytes(20))
    with pytest.raises(ValueError):
        read_nsf1(tmp_path / "bad.nsf1")
    (tmp_path / "short.nsf1").write_bytes(paths[0].read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_nsf1(tmp_path / "short.nsf1")


def test_fields_reject_non_finite(g16):
    a = np.zeros(g16.shape)
    a[1, 2, 3] = np.nan
    with pytest.raises(ValueError):
        ScalarField(g16, a)
