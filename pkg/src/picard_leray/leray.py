"""Leray pressure-gradient term: quadratic source, kernel-convolution path and spectral path.

Both paths return ``-grad p`` where ``-Lap p = sum_jk (d_k v_j)(d_j v_k)``,
i.e. the forcing exactly as it enters the velocity equation.
"""

from __future__ import annotations

import logging
import warnings
from typing import Literal, Sequence

import numpy as np
import scipy.fft as sfft

from .field import DIM, Grid, ScalarField, VectorField, _check_same_grid, embed, extract, jacobian_array, spectral
from .kernels import KernelSplit

log = logging.getLogger(__name__)

Boundary = Literal["free", "periodic"]


class DecayWarning(UserWarning):
    """Source is not small near the box boundary; free-space padding is inaccurate."""


def source_from_jacobians(jf: np.ndarray, jg: np.ndarray) -> np.ndarray:
    # sum_{j,k} (d_k f_j)(d_j g_k) = trace(Jf Jg)
    return np.einsum("jk...,kj...->...", jf, jg)


def nonlinear_source(f: VectorField, g: VectorField) -> ScalarField:
    grid = _check_same_grid(f, g)
    jf = jacobian_array(f.array(), grid)
    jg = jf if g is f else jacobian_array(g.array(), grid)
    return ScalarField(grid, source_from_jacobians(jf, jg))


def mixed_sources(v: VectorField, r: VectorField) -> tuple[ScalarField, ScalarField]:
    """(sum v_{k,j} r_{j,k}, sum r_{k,j} r_{j,k})."""
    grid = _check_same_grid(v, r)
    jv = jacobian_array(v.array(), grid)
    jr = jacobian_array(r.array(), grid)
    return ScalarField(grid, source_from_jacobians(jv, jr)), ScalarField(grid, source_from_jacobians(jr, jr))


def boundary_shell_ratio(a: np.ndarray, grid: Grid) -> float:
    """L2 fraction of ``a`` carried by the outer shell of the box."""
    width = max(2 * grid.spacing, grid.box_length / 32)
    c = np.abs(grid.coords())
    edge = c >= grid.box_length / 2 - width
    mask = edge[:, None, None] | edge[None, :, None] | edge[None, None, :]
    total = float(np.sum(a * a))
    if total == 0.0:
        return 0.0
    return float(np.sqrt(np.sum(np.where(mask, a * a, 0.0)) / total))


def pressure_gradient_kernel_array(
    s: np.ndarray, splits: Sequence[KernelSplit], boundary: Boundary = "free", check_decay: bool = True
) -> np.ndarray:
    grid = splits[0].base_grid
    p = splits[0].padding
    n = grid.n_points
    if boundary == "free":
        if check_decay and p > 1:
            ratio = boundary_shell_ratio(s, grid)
            if ratio > 1e-3:
                warnings.warn(f"source boundary-shell L2 ratio {ratio:.2e} exceeds 1e-3", DecayWarning, stacklevel=3)
        big = embed(s, p)
    elif boundary == "periodic":
        big = np.tile(s, (p, p, p))
    else:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    s_hat = sfft.rfftn(big, workers=-1)
    shape = big.shape
    out = np.empty((DIM,) + grid.shape)
    for sp in splits:
        conv = sfft.irfftn(sp.kernel_hat * s_hat, s=shape, workers=-1) * grid.cell_volume
        out[sp.axis] = extract(conv, n) if boundary == "free" else conv[:n, :n, :n]
    return out


def pressure_gradient_kernel(
    source: ScalarField, splits: Sequence[KernelSplit], boundary: Boundary = "free"
) -> VectorField:
    """Component i = (near_i + far_i) * source.

    ``boundary="free"`` zero-pads the source (decaying data on R^3);
    ``"periodic"`` tiles it over the padded box, the free-space lattice sum for
    periodic data.
    """
    if source.grid != splits[0].base_grid:
        raise ValueError("source and kernel splits live on different grids")
    return VectorField.from_array(source.grid, pressure_gradient_kernel_array(source.values, splits, boundary))


def pressure_gradient_spectral_array(s: np.ndarray, grid: Grid) -> np.ndarray:
    sp = spectral(grid)
    s_hat = sp.forward(s)
    k2 = sp.k2.copy()
    k2[0, 0, 0] = 1.0
    q = s_hat / k2
    q[0, 0, 0] = 0.0
    return np.stack([sp.inverse(-1j * sp.kd[i] * q) for i in range(DIM)])


def pressure_gradient_spectral(source: ScalarField) -> VectorField:
    """Periodic solution: component i = -i k_i s_hat / |k|^2, mean pressure 0."""
    return VectorField.from_array(source.grid, pressure_gradient_spectral_array(source.values, source.grid))


def leray_project_array(v: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral projection onto divergence-free fields."""
    sp = spectral(grid)
    v_hat = sp.forward(v)
    k2 = sp.kd[0] ** 2 + sp.kd[1] ** 2 + sp.kd[2] ** 2
    k2 = np.where(k2 > 0, k2, 1.0)
    kdotv = sum(sp.kd[j] * v_hat[j] for j in range(DIM)) / k2
    return np.stack([sp.inverse(v_hat[i] - sp.kd[i] * kdotv) for i in range(DIM)])
