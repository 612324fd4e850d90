"""Poisson kernel derivatives, the near/far cutoff split, and Gaussian majorants."""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.fft as sfft

from .field import DIM, Grid, ScalarField, spectral

OMEGA_3 = 4 * np.pi  # area of the unit sphere in R^3
# h^3 * (punctured lattice sum of 1/|y| over hZ^3) undershoots the integral by LATTICE_ZETA * h^2
LATTICE_ZETA = 2.8372974794806
# same for |y_1| / (4 pi |y|^3): deficit ORIGIN_L1_WEIGHT * h (Richardson-extrapolated lattice sums)
ORIGIN_L1_WEIGHT = 0.49194

CutoffStyle = Literal["smooth_bump", "paper_annulus", "sharp"]


@dataclass(frozen=True)
class CutoffSpec:
    epsilon: float
    style: CutoffStyle = "smooth_bump"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("cutoff epsilon must be positive")
        if self.style not in ("smooth_bump", "paper_annulus", "sharp"):
            raise ValueError(f"unknown cutoff style {self.style!r}")

    @property
    def support_radius(self) -> float:
        return {"smooth_bump": 2.0, "paper_annulus": np.sqrt(2.0), "sharp": 1.0}[self.style] * self.epsilon


def default_epsilon(grid: Grid) -> float:
    # box/16 unless that is under-resolved on coarse grids
    return max(grid.box_length / 16, 4 * grid.spacing)


def poisson_kernel(x, deriv: tuple[int, ...] = ()) -> np.ndarray | float:
    """K_3 = -1/(4 pi |x|) and its first/second partial derivatives.

    ``x`` has trailing dimension 3; ``deriv`` lists the differentiation axes.
    """
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    if np.any(r2 == 0):
        raise ValueError("Poisson kernel is singular at x = 0")
    r = np.sqrt(r2)
    if len(deriv) == 0:
        out = r ** (2 - DIM) / ((2 - DIM) * OMEGA_3)
    elif len(deriv) == 1:
        (i,) = deriv
        out = x[..., i] / (OMEGA_3 * r**DIM)
    elif len(deriv) == 2:
        i, j = deriv
        if i != j:
            out = -DIM * x[..., i] * x[..., j] / OMEGA_3 * r ** (-DIM - 2)
        else:
            out = (r2 - DIM * x[..., j] ** 2) / OMEGA_3 * r ** (-DIM - 2)
    else:
        raise ValueError("derivatives of order > 2 are not provided")
    return out[()] if np.ndim(out) == 0 else out


def _bump_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step from 1 (t <= 0) to 0 (t >= 1)."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
        f1 = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
    return f0 / (f0 + f1)


def cutoff_radial(r, spec: CutoffSpec) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    eps = spec.epsilon
    if spec.style == "sharp":
        return np.where(r <= eps, 1.0, 0.0)
    if spec.style == "smooth_bump":
        return _bump_step((r - eps) / eps)
    # paper_annulus: printed branches, half-open; jumps from 1 to exp(-1/eps^2) at r = eps
    gap = 2 * eps * eps - r * r
    inner = (r > eps) & (gap > 0)
    with np.errstate(divide="ignore"):
        mid = np.exp(-1.0 / np.where(inner, gap, 1.0))
    return np.where(r <= eps, 1.0, np.where(inner, mid, 0.0))


def cutoff(y, spec: CutoffSpec):
    y = np.asarray(y, dtype=float)
    out = cutoff_radial(np.sqrt(np.sum(y * y, axis=-1)), spec)
    return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class KernelSplit:
    """Near (compact, L1) and far (L2) parts of dK/dx_axis sampled on a padded grid."""

    axis: int
    cutoff: CutoffSpec
    near: ScalarField
    far: ScalarField
    base_grid: Grid
    padding: int

    @functools.cached_property
    def kernel_hat(self) -> np.ndarray:
        """Transform of the sampled kernel plus the origin correction.

        Skipping the singular sample loses -dK/dx_axis * (y . grad s) near 0,
        which sums to -LATTICE_ZETA h^2 / (12 pi) * d s/dx_axis; the correction
        adds that derivative as a spectral multiplier (divided by h^3 because
        convolution results are scaled by the cell volume).
        """
        pg = self.near.grid
        out = sfft.rfftn(self.near.values + self.far.values, workers=-1)
        weight = -LATTICE_ZETA * pg.spacing**2 / (12 * np.pi) / pg.cell_volume
        return out + weight * 1j * spectral(pg).kd[self.axis]


def build_kernel_split(grid: Grid, axis: int, spec: CutoffSpec, padding: int = 1) -> KernelSplit:
    """Sample phi_eps*K_{,axis} and (1-phi_eps)*K_{,axis} on ``grid`` padded by ``padding``.

    The origin sample is 0 (principal value of the odd kernel over a symmetric
    cell).  On the padded box's edge planes the odd kernel has no mirror
    sample, so the far part is zeroed there as well.
    """
    if not 0 <= axis < DIM:
        raise ValueError(f"axis {axis} out of range")
    if padding < 1:
        raise ValueError("padding factor must be >= 1")
    if spec.epsilon < 4 * grid.spacing:
        raise ValueError(f"cutoff epsilon {spec.epsilon:.4g} under-resolved: needs >= 4*spacing = {4 * grid.spacing:.4g}")
    if spec.epsilon >= grid.box_length / 4:
        raise ValueError("cutoff epsilon must be below box_length/4")
    pg = grid.padded(padding)
    x = pg.mesh(sparse=True)
    r = pg.radius()
    safe = np.where(r > 0, r, 1.0)
    k = np.broadcast_to(x[axis] / (OMEGA_3 * safe**DIM), pg.shape).copy()
    k[0, 0, 0] = 0.0
    phi = np.broadcast_to(cutoff_radial(r, spec), pg.shape)
    near = phi * k
    far = k - near
    m = pg.n_points // 2
    far[m, :, :] = 0.0
    far[:, m, :] = 0.0
    far[:, :, m] = 0.0
    return KernelSplit(axis, spec, ScalarField(pg, near), ScalarField(pg, far), grid, padding)


def near_l1_norm(split: KernelSplit) -> float:
    """L1 norm of the near part by the punctured lattice sum plus its origin correction.

    The cutoff equals 1 on the origin cell, so the singular part there is the
    bare |dK/dx_axis| and the correction weight is universal.
    """
    h = split.near.grid.spacing
    return float(np.sum(np.abs(split.near.values)) * split.near.grid.cell_volume + ORIGIN_L1_WEIGHT * h)


def sharp_split_norms(grid: Grid, radius: float, padding: int = 2) -> tuple[float, float]:
    """(sum_i |far_i|_{L2}^2, |near_0|_{L1}) for the sharp cutoff of the given radius.

    Free-space values: 1/(4 pi R) and R/2.
    """
    spec = CutoffSpec(radius, "sharp")
    far_l2_sq = 0.0
    near = 0.0
    for i in range(DIM):
        s = build_kernel_split(grid, i, spec, padding)
        far_l2_sq += float(np.sum(s.far.values**2) * s.far.grid.cell_volume)
        if i == 0:
            near = near_l1_norm(s)
    return far_l2_sq, near


def build_splits(grid: Grid, spec: CutoffSpec | None = None, padding: int = 2) -> tuple[KernelSplit, ...]:
    spec = spec or CutoffSpec(default_epsilon(grid))
    return tuple(build_kernel_split(grid, i, spec, padding) for i in range(DIM))


# --- Gaussian majorants -----------------------------------------------------


@dataclass(frozen=True)
class GaussianMajorant:
    C: float
    lam: float
    order: int = 0
    mu: float = 0.75

    def __post_init__(self):
        if not (np.isfinite(self.C) and self.C > 0 and np.isfinite(self.lam) and self.lam > 0):
            raise ValueError("majorant constants must be finite and positive")
        if self.order not in (0, 1):
            raise ValueError("majorant order must be 0 or 1")
        if not 0.5 < self.mu < 1:
            raise ValueError("mu must lie in (0.5, 1)")


def gaussian_bound(dt, x, m: GaussianMajorant):
    """C dt^{-(n+order)/2} exp(-lam |x|^2 / (4 dt))."""
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise ValueError("gaussian_bound needs dt > 0")
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    out = m.C * dt ** (-(DIM + m.order) / 2) * np.exp(-m.lam * r2 / (4 * dt))
    return out[()] if np.ndim(out) == 0 else out


def gaussian_l1(dt: float, m: GaussianMajorant) -> float:
    """Spatial L1 norm of the majorant at fixed dt (closed form)."""
    return m.C * dt ** (-m.order / 2) * (4 * np.pi / m.lam) ** (DIM / 2)


def time_integrated_l1(m: GaussianMajorant, t_max: float = 1.0) -> float:
    """integral_0^t_max |gaussian_bound(s, ., m)|_{L1} ds; finite for order <= 1."""
    base = m.C * (4 * np.pi / m.lam) ** (DIM / 2)
    if m.order == 0:
        return base * t_max
    return base * 2.0 * np.sqrt(t_max)


def local_bound_constant(m: GaussianMajorant, mu: float, dts: np.ndarray, radii: np.ndarray) -> float:
    """Smallest c with bound(dt, r) <= c / (dt^mu r^{n+1-2mu}) on the sampled (dt, r) set."""
    dt, r = np.meshgrid(np.asarray(dts, float), np.asarray(radii, float), indexing="ij")
    x = np.stack([r, np.zeros_like(r), np.zeros_like(r)], axis=-1)
    vals = gaussian_bound(dt, x, m) * dt**mu * r ** (DIM + 1 - 2 * mu)
    return float(np.max(vals))
