"""Independent references: Cole-Hopf Burgers, Beltrami flow, a pseudo-spectral
projection solver and brute-force convolution.

Apart from the exact heat multiplier, nothing here goes through the scheme
modules; spectral work uses full complex ``numpy.fft`` transforms.
"""

from __future__ import annotations

import numpy as np

from .field import DIM, Grid, ScalarField, VectorField
from .parabolic import propagate_heat


def _wavenumbers(grid: Grid) -> list[np.ndarray]:
    n = grid.n_points
    k = np.fft.fftfreq(n, grid.spacing) * 2 * np.pi
    k[n // 2] = 0.0  # odd derivatives drop the unpaired Nyquist mode
    return np.meshgrid(k, k, k, indexing="ij", sparse=True)


def _grad(a: np.ndarray, grid: Grid) -> np.ndarray:
    a_hat = np.fft.fftn(a)
    return np.stack([np.fft.ifftn(1j * k * a_hat).real for k in _wavenumbers(grid)])


def cole_hopf(phi0: ScalarField, nu: float, t: float) -> VectorField:
    """Exact viscous Burgers solution for u(0) = grad phi0: u = -2 nu grad log theta."""
    if t < 0:
        raise ValueError("cole_hopf needs t >= 0")
    grid = phi0.grid
    expo = -phi0.values / (2 * nu)
    shift = float(np.max(expo))  # rescaling theta leaves grad log theta unchanged
    theta0 = np.exp(expo - shift)
    theta = propagate_heat(ScalarField(grid, theta0), t, nu).values
    if not np.all(np.isfinite(theta)) or np.min(theta) <= 0:
        raise FloatingPointError("Cole-Hopf: heat solution not positive; amplitude too large for the grid")
    u = -2 * nu * _grad(theta, grid) / theta
    return VectorField.from_array(grid, u)


def beltrami(grid: Grid, t: float, nu: float, amps: tuple[float, float, float] = (1.0, 1.0, 1.0)):
    """ABC flow (curl v = v) decaying like exp(-nu t), and its pressure -|v|^2/2."""
    if abs(grid.box_length - 2 * np.pi) > 1e-12:
        raise ValueError("the Beltrami oracle needs box_length = 2*pi")
    A, B, C = amps
    x, y, z = grid.mesh(sparse=True)  # wrapping by 2*pi leaves the flow unchanged
    d = np.exp(-nu * t)
    v = np.stack(
        np.broadcast_arrays(
            d * (A * np.sin(z) + C * np.cos(y)),
            d * (B * np.sin(x) + A * np.cos(z)),
            d * (C * np.sin(y) + B * np.cos(x)),
        )
    )
    v = np.ascontiguousarray(v, dtype=float)
    p = -0.5 * np.sum(v * v, axis=0)
    return VectorField.from_array(grid, v), ScalarField(grid, p)


class BlowUpError(FloatingPointError):
    pass


def reference_projection_solver(
    v0: VectorField,
    nu: float,
    t_final: float,
    dt: float,
    energies: list | None = None,
) -> VectorField:
    """Pseudo-spectral NS: RK4 in time, integrating factor for diffusion,
    Leray projection in Fourier space and 2/3-rule dealiasing of the
    convective term.  Appends the L2 norm after every step to ``energies``."""
    grid = v0.grid
    n = grid.n_points
    if t_final < 0 or dt <= 0:
        raise ValueError("need t_final >= 0 and dt > 0")
    kx, ky, kz = _wavenumbers(grid)
    kvec = (kx, ky, kz)
    kf = np.fft.fftfreq(n, grid.spacing) * 2 * np.pi
    k2 = kf[:, None, None] ** 2 + kf[None, :, None] ** 2 + kf[None, None, :] ** 2
    k2_safe = np.where(k2 > 0, k2, 1.0)
    kint = np.abs(np.fft.fftfreq(n, 1.0 / n))
    keep = kint < n / 3
    dealias = keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    v_hat = np.stack([np.fft.fftn(c) for c in v0.array()])
    div = np.fft.ifftn(sum(1j * kvec[i] * v_hat[i] for i in range(DIM))).real
    if np.max(np.abs(div)) > 1e-8:
        raise ValueError("reference solver needs divergence-free initial data")

    def project(w_hat):
        kdotw = (kx * w_hat[0] + ky * w_hat[1] + kz * w_hat[2]) / k2_safe
        return np.stack([w_hat[i] - kvec[i] * kdotw for i in range(DIM)])

    def rhs(w_hat):
        w = np.fft.ifftn(w_hat, axes=(1, 2, 3)).real
        conv = np.zeros_like(w)
        for j in range(DIM):
            dj = np.fft.ifftn(1j * kvec[j] * w_hat, axes=(1, 2, 3)).real
            conv += w[j] * dj
        return -project(np.fft.fftn(conv, axes=(1, 2, 3)) * dealias)

    steps = int(np.ceil(t_final / dt - 1e-12))
    if steps == 0:
        return VectorField.from_array(grid, v0.array().copy())
    dt = t_final / steps
    vmax = float(np.max(np.abs(v0.array())))
    if vmax * dt / grid.spacing > 1.0:
        raise ValueError(f"reference solver CFL {vmax * dt / grid.spacing:.3f} > 1")
    e_half = np.exp(-nu * k2 * dt / 2)
    e_full = e_half * e_half
    l2_0 = np.sqrt(np.sum(np.abs(v_hat) ** 2))
    for _ in range(steps):
        a = rhs(v_hat)
        b = rhs(e_half * (v_hat + 0.5 * dt * a))
        c = rhs(e_half * v_hat + 0.5 * dt * b)
        d = rhs(e_full * v_hat + dt * e_half * c)
        v_hat = e_full * v_hat + dt / 6 * (e_full * a + 2 * e_half * (b + c) + d)
        l2 = np.sqrt(np.sum(np.abs(v_hat) ** 2))
        if not np.isfinite(l2) or l2 > 1e6 * max(l2_0, 1e-300):
            raise BlowUpError("reference solver: norm blow-up")
        if energies is not None:
            energies.append(float(l2 / grid.n_points**DIM * np.sqrt(grid.box_length**DIM)))
    v = np.fft.ifftn(v_hat, axes=(1, 2, 3)).real
    return VectorField.from_array(grid, v)


def direct_convolution(f: ScalarField, g: ScalarField) -> ScalarField:
    """Periodic convolution by explicit summation over all (x, y) pairs, times h^3."""
    grid = f.grid
    if g.grid != grid:
        raise ValueError("fields live on different grids")
    n = grid.n_points
    if n > 16:
        raise ValueError("direct convolution is O(N^6); N must be <= 16")
    a, b = f.values, g.values
    idx = np.arange(n)
    out = np.empty(grid.shape)
    for i in range(n):
        ii = (i - idx) % n
        for j in range(n):
            jj = (j - idx) % n
            for k in range(n):
                kk = (k - idx) % n
                out[i, j, k] = np.sum(a[np.ix_(ii, jj, kk)] * b)
    return ScalarField(grid, out * grid.cell_volume)


def cole_hopf_potential(grid: Grid, amplitude: float) -> ScalarField:
    """Smooth multi-mode potential; its gradient is the standard Burgers datum."""
    x, y, z = (2 * np.pi / grid.box_length * c for c in grid.mesh(sparse=True))
    phi = amplitude * (np.cos(x) + 0.5 * np.cos(y) + 0.5 * np.sin(x + z))
    return ScalarField(grid, np.broadcast_to(phi, grid.shape).copy())
