import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from picard_leray.field import Grid, ScalarField, VectorField
from picard_leray.kernels import GaussianMajorant
from picard_leray.parabolic import (
    AdvectionDiffusionProblem,
    CFLError,
    Trajectory,
    check_gaussian_majorant,
    propagate_heat,
    solve,
    solve_array,
)

from conftest import rand_scalar


def _sin(grid):
    x, _, _ = grid.mesh(sparse=True)
    return ScalarField(grid, np.broadcast_to(np.sin(x), grid.shape).copy())


def _const_coeff(grid, b):
    return VectorField.from_array(grid, np.stack([np.full(grid.shape, float(c)) for c in b]))


def test_heat_identity_and_decay(g32, rng):
    f = rand_scalar(g32, rng)
    np.testing.assert_allclose(propagate_heat(f, 0.0, 0.3).values, f.values, atol=1e-12)
    s = _sin(g32)
    np.testing.assert_allclose(propagate_heat(s, 0.7, 0.2).values, np.exp(-0.14) * s.values, atol=1e-12)
    assert propagate_heat(f, 0.5, 1.0).values.mean() == pytest.approx(f.values.mean(), abs=1e-12)
    with pytest.raises(ValueError):
        propagate_heat(f, -1.0, 1.0)


def test_pure_diffusion_matches_heat(g32, rng):
    f = rand_scalar(g32, rng)
    prob = AdvectionDiffusionProblem(0.3, 0.1, VectorField.zeros(g32), f, substeps=16)
    traj = solve(prob)
    for m, tau in enumerate(traj.taus):
        ref = propagate_heat(f, 0.3 * 0.1 * tau, 1.0).values
        assert np.max(np.abs(traj.values[m] - ref)) < 1e-6


def test_sample_zero_bit_exact(g16, rng):
    f = rand_scalar(g16, rng)
    traj = solve(AdvectionDiffusionProblem(0.1, 0.1, _const_coeff(g16, (1, 0, 0)), f, substeps=8))
    assert np.array_equal(traj.values[0], f.values)
    assert traj.taus[0] == 0.0 and traj.taus[-1] == 1.0
    assert isinstance(traj.end, ScalarField)


def test_constant_advection_translates(g64):
    x, y, z = g64.mesh(sparse=True)
    prof = ScalarField(g64, np.broadcast_to(np.exp(np.cos(x)) + 0 * y + 0 * z, g64.shape).copy())
    rho = 0.1
    traj = solve(AdvectionDiffusionProblem(rho, 1e-6, _const_coeff(g64, (1, 0, 0)), prof, substeps=256))
    exact = np.exp(np.cos(x - rho)) + 0 * y + 0 * z
    assert np.max(np.abs(traj.end.values - exact)) < 1e-3


def test_first_order_self_convergence(g32):
    x, y, z = g32.mesh(sparse=True)
    f = ScalarField(g32, np.broadcast_to(np.sin(x) * np.cos(y) + np.cos(z), g32.shape).copy())
    b = VectorField.from_array(
        g32, np.stack(np.broadcast_arrays(1 + 0.5 * np.sin(y), 0.5 * np.cos(z) + 0 * x, 0.3 + 0 * x))
    )
    rho, nu = 0.5, 0.1

    def end(M):
        return solve(AdvectionDiffusionProblem(rho, nu, b, f, substeps=M)).end.values

    ref = end(256)
    e1 = np.max(np.abs(end(32) - ref))
    e2 = np.max(np.abs(end(64) - ref))
    assert e1 / e2 >= 1.8


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 0.5))
def test_maximum_principle(seed, rho):
    g = Grid(16)
    rng = np.random.default_rng(seed)
    from picard_leray.diagnostics import random_solenoidal

    b = VectorField.from_array(g, random_solenoidal(g, rng, amplitude=1.0))
    x, y, z = g.mesh(sparse=True)
    f0 = np.broadcast_to(np.exp(np.sin(x) + 0.5 * np.cos(y + z)), g.shape).copy()
    traj = solve(AdvectionDiffusionProblem(rho, 0.2, b, ScalarField(g, f0), substeps=32))
    assert traj.values.max() <= f0.max() + 1e-8
    assert traj.values.min() >= f0.min() - 1e-8


def test_linearity(g16, rng):
    b = _const_coeff(g16, (0.5, -0.3, 0.2))
    a1, a2 = rand_scalar(g16, rng), rand_scalar(g16, rng)
    s1, s2 = rand_scalar(g16, rng), rand_scalar(g16, rng)
    run = lambda a, s: solve(AdvectionDiffusionProblem(0.2, 0.1, b, a, s, substeps=8)).values  # noqa: E731
    combo = run(a1 * 2.0 + a2 * -0.5, s1 * 2.0 + s2 * -0.5)
    np.testing.assert_allclose(combo, 2 * run(a1, s1) - 0.5 * run(a2, s2), atol=1e-10)


def test_time_dependent_coefficient_and_source(g16, rng):
    M = 8
    coeff = np.zeros((M, 3) + g16.shape)
    src = np.ones((M,) + g16.shape) * np.arange(M)[:, None, None, None]
    out = solve_array(np.zeros(g16.shape), g16, 0.2, 0.1, coeff, src, M)
    # constant sources integrate exactly with left-endpoint sampling
    assert out[-1].mean() == pytest.approx(np.arange(M).sum() / M)


def test_cfl_violation(g16):
    f = ScalarField.zeros(g16)
    with pytest.raises(CFLError):
        solve(AdvectionDiffusionProblem(1.0, 0.1, _const_coeff(g16, (100, 0, 0)), f, substeps=8))


def test_problem_validation(g16):
    f = ScalarField.zeros(g16)
    with pytest.raises(ValueError):
        AdvectionDiffusionProblem(0.0, 0.1, None, f)
    with pytest.raises(ValueError):
        AdvectionDiffusionProblem(0.1, 0.1, None, f, substeps=4)


def test_vector_trajectory(g16, rng):
    v = VectorField.from_array(g16, rng.standard_normal((3,) + g16.shape))
    traj = solve(AdvectionDiffusionProblem(0.1, 0.1, None, v, substeps=8))
    assert traj.is_vector and traj.values.shape == (9, 3) + g16.shape
    assert isinstance(traj.end, VectorField)
    assert isinstance(traj.component(1), Trajectory)


def test_majorant_heat_kernel_scaling():
    g = Grid(32)
    rho, nu = 1.0, 1.0
    prob = AdvectionDiffusionProblem(rho, nu, VectorField.zeros(g), ScalarField.zeros(g), substeps=32)
    rep = check_gaussian_majorant(prob)
    assert rep.fitted.C == pytest.approx((4 * np.pi * rho * nu) ** -1.5, rel=0.1)
    assert rep.fitted.lam == pytest.approx(1 / (rho * nu), rel=0.1)
    assert rep.asymmetry <= 1e-10
    assert rep.holds
    # a slightly wider heat majorant absorbs periodic images and discretisation
    exact = GaussianMajorant((4 * np.pi * rho * nu) ** -1.5 * 1.02, 0.95 / (rho * nu))
    assert check_gaussian_majorant(prob, exact).worst_ratio <= 1.0


def test_majorant_exists_for_smooth_coefficient():
    g = Grid(32)
    rho, nu = 1.0, 1.0
    x, y, z = g.mesh(sparse=True)
    b = VectorField.from_array(g, 0.5 * np.stack(np.broadcast_arrays(np.sin(z), np.cos(x), np.sin(y))))
    prob = AdvectionDiffusionProblem(rho, nu, b, ScalarField.zeros(g), substeps=32)
    rep = check_gaussian_majorant(prob)
    assert np.isfinite(rep.fitted.C) and rep.fitted.C > 0
    assert rep.fitted.lam <= 1.5 / (rho * nu)
    assert rep.holds
    assert np.isfinite(rep.fitted_derivative.C)
