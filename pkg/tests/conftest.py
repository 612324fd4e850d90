import numpy as np
import pytest

from picard_leray.diagnostics import band_mask, random_field
from picard_leray.field import DIM, Grid, ScalarField, VectorField, spectral
from picard_leray.leray import leray_project_array


def rel_l2(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def localized_solenoidal(grid, sigma, seed=0, center=(0.0, 0.0, 0.0)):
    """curl of a Gaussian times a random linear vector potential: compact in practice, exactly solenoidal."""
    rng = np.random.default_rng(seed)
    x = [c - c0 for c, c0 in zip(grid.mesh(sparse=True), center)]
    gauss = np.exp(-(x[0] ** 2 + x[1] ** 2 + x[2] ** 2) / (2 * sigma**2))
    coef = rng.standard_normal((DIM, DIM + 1))
    pot = np.stack([gauss * (coef[i, 0] + sum(coef[i, j + 1] * x[j] / sigma for j in range(DIM))) for i in range(DIM)])
    sp = spectral(grid)
    ph = sp.forward(pot)
    d = lambda i, j: sp.inverse(1j * sp.kd[j] * ph[i])  # noqa: E731
    v = np.stack([d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)])
    return VectorField.from_array(grid, v / np.max(np.abs(v)))


def low_band_solenoidal(grid, seed=0, amplitude=1.0):
    """Solenoidal field with |k_i| <= N/6, so quadratic products are alias free."""
    sp = spectral(grid)
    n = grid.n_points
    rng = np.random.default_rng(seed)
    ki = np.abs(np.fft.fftfreq(n, 1.0 / n))
    kr = np.abs(np.fft.rfftfreq(n, 1.0 / n))
    cut = n / 6
    mask = (ki[:, None, None] <= cut) & (ki[None, :, None] <= cut) & (kr[None, None, :] <= cut)
    a = sp.inverse(sp.forward(rng.standard_normal((DIM,) + grid.shape)) * mask * np.exp(-sp.k2 / 8))
    a = leray_project_array(a, grid)
    return VectorField.from_array(grid, amplitude * a / np.max(np.abs(a)))


@pytest.fixture(scope="session")
def g16():
    return Grid(16)


@pytest.fixture(scope="session")
def g32():
    return Grid(32)


@pytest.fixture(scope="session")
def g64():
    return Grid(64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rand_scalar(grid, rng):
    return ScalarField(grid, random_field(grid, rng))


__all__ = ["band_mask", "localized_solenoidal", "low_band_solenoidal", "rand_scalar", "rel_l2"]


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
