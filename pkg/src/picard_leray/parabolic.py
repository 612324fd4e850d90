"""Frozen-coefficient advection-diffusion solver on one macro step.

Solves ``dw/dtau = rho*nu*Lap w - rho * b . grad w + f`` on
``tau in [t0, t0 + 1]`` with ``M`` substeps.  Each substep applies the exact
heat multiplier to the explicit (left-endpoint) advection and source update:

    w[m+1] = H(dtau) (w[m] + dtau * (-rho * b[m] . grad w[m] + f[m]))

This stands in for the fundamental-solution representation of the linear
problems; the Gaussian-majorant checks below recover its quantitative content.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .field import DIM, Grid, ScalarField, VectorField, spectral
from .kernels import GaussianMajorant, gaussian_bound

CFL_LIMIT = 0.5


class CFLError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples at tau_m = t0 + m/M, m = 0..M.

    ``values`` has shape ``(M+1, N, N, N)`` for a scalar trajectory or
    ``(M+1, 3, N, N, N)`` for a per-component (vector) trajectory.
    """

    grid: Grid
    values: np.ndarray
    t0: float = 0.0

    @property
    def substeps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 5

    @property
    def taus(self) -> np.ndarray:
        return self.t0 + np.arange(self.substeps + 1) / self.substeps

    @property
    def samples(self) -> list:
        return [self.field(m) for m in range(self.substeps + 1)]

    def field(self, m: int):
        a = self.values[m]
        return VectorField.from_array(self.grid, a) if self.is_vector else ScalarField(self.grid, a)

    def component(self, i: int) -> "Trajectory":
        return Trajectory(self.grid, self.values[:, i], self.t0)

    @property
    def end(self):
        return self.field(self.substeps)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.grid, self.values - other.values, self.t0)


@dataclass(frozen=True, eq=False)
class AdvectionDiffusionProblem:
    """Linear problem on one macro step.

    ``coeff`` is one VectorField (frozen in tau) or an array ``(M, 3, N, N, N)``
    giving the coefficient on each substep.  ``source`` is None, one field
    (constant in tau), or an array with a leading substep axis of length M.
    ``initial`` may be a ScalarField or a VectorField (components solved
    together with the same coefficient).
    """

    rho: float
    nu: float
    coeff: VectorField | np.ndarray | None
    initial: ScalarField | VectorField
    source: ScalarField | VectorField | np.ndarray | None = None
    substeps: int = 32
    t0: float = 0.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.substeps < 8:
            raise ValueError("at least 8 substeps are required")

    @property
    def grid(self) -> Grid:
        return self.initial.grid


def propagate_heat_array(a: np.ndarray, grid: Grid, t: float, nu_eff: float) -> np.ndarray:
    if t < 0:
        raise ValueError("propagate_heat needs t >= 0")
    sp = spectral(grid)
    return sp.inverse(np.exp(-nu_eff * sp.k2 * t) * sp.forward(a))


def propagate_heat(f: ScalarField, t: float, nu_eff: float) -> ScalarField:
    """Exact heat semigroup: Fourier multiplier exp(-nu_eff |k|^2 t)."""
    return ScalarField(f.grid, propagate_heat_array(f.values, f.grid, t, nu_eff))


def _coeff_array(coeff, m: int):
    if coeff is None:
        return None
    if isinstance(coeff, VectorField):
        return coeff.array()
    a = np.asarray(coeff)
    return a if a.ndim == 4 else a[m]


def _source_array(source, m: int):
    if source is None:
        return None
    if isinstance(source, (ScalarField, VectorField)):
        return source.array() if isinstance(source, VectorField) else source.values
    return source[m]


def solve_array(
    initial: np.ndarray,
    grid: Grid,
    rho: float,
    nu: float,
    coeff,
    source=None,
    substeps: int = 32,
) -> np.ndarray:
    """Array-level solver; ``initial`` is ``(N,N,N)`` or ``(C,N,N,N)``.  Returns ``(M+1, ...)``."""
    sp = spectral(grid)
    M = substeps
    dtau = 1.0 / M
    h = grid.spacing
    heat = np.exp(-rho * nu * sp.k2 * dtau)
    scalar = initial.ndim == 3
    w0 = initial[None] if scalar else initial
    out = np.empty((M + 1,) + w0.shape)
    out[0] = w0
    w_hat = sp.forward(w0)
    const_coeff = _coeff_array(coeff, 0) if isinstance(coeff, VectorField) else None
    const_src = source if isinstance(source, (ScalarField, VectorField)) else None
    for m in range(M):
        b = const_coeff if const_coeff is not None else _coeff_array(coeff, m)
        rhs = None
        if b is not None:
            bmax = float(np.max(np.abs(b)))
            if rho * bmax * dtau / h > CFL_LIMIT:
                raise CFLError(f"cfl {rho * bmax * dtau / h:.3f} > {CFL_LIMIT} at substep {m}")
            if bmax > 0.0:
                rhs = np.zeros_like(w0)
                for j in range(DIM):
                    rhs -= rho * b[j] * sp.inverse(1j * sp.kd[j] * w_hat)
        f = _source_array(const_src if const_src is not None else source, m)
        if f is not None:
            f = f[None] if scalar else f
            rhs = f if rhs is None else rhs + f
        if rhs is not None:
            w_hat = w_hat + dtau * sp.forward(rhs)
        w_hat = heat * w_hat
        out[m + 1] = sp.inverse(w_hat)
    if not np.all(np.isfinite(out[-1])):
        raise FloatingPointError("non-finite values in advection-diffusion solve")
    return out[:, 0] if scalar else out


def solve(problem: AdvectionDiffusionProblem) -> Trajectory:
    init = problem.initial
    a = init.array() if isinstance(init, VectorField) else init.values
    vals = solve_array(a, problem.grid, problem.rho, problem.nu, problem.coeff, problem.source, problem.substeps)
    return Trajectory(problem.grid, vals, problem.t0)


# --- Gaussian a priori bounds of the discrete propagator --------------------


@dataclass
class MajorantReport:
    fitted: GaussianMajorant
    fitted_derivative: GaussianMajorant
    holds: bool
    worst_ratio: float  # max |column| / bound for the majorant under test
    asymmetry: float
    sampled_times: np.ndarray = field(repr=False)


def _impulse(grid: Grid, index: tuple[int, int, int]) -> np.ndarray:
    a = np.zeros(grid.shape)
    a[index] = 1.0 / grid.cell_volume
    return a


def _min_image(d: np.ndarray, box: float) -> np.ndarray:
    return d - box * np.round(d / box)


def _columns(problem: AdvectionDiffusionProblem, sources: Sequence[tuple[int, int, int]]):
    grid = problem.grid
    impulses = np.stack([_impulse(grid, s) for s in sources])
    traj = solve_array(impulses, grid, problem.rho, problem.nu, problem.coeff, None, problem.substeps)
    return traj  # (M+1, S, N, N, N)


def _sample_mask(grid: Grid, src: tuple[int, int, int]):
    c = grid.coords()
    s = [c[i] for i in src]
    d = [_min_image(c - s[a], grid.box_length) for a in range(DIM)]
    near = [np.abs(x) <= grid.box_length / 4 for x in d]
    r2 = d[0][:, None, None] ** 2 + d[1][None, :, None] ** 2 + d[2][None, None, :] ** 2
    mask = near[0][:, None, None] & near[1][None, :, None] & near[2][None, None, :]
    return r2, mask


def _best_rate(t, r2, val, power: float, lam_top: float, extra: float | None = None, grid_size: int = 121):
    """Rate lam <= lam_top minimising the majorant mass C(lam) * lam^{-3/2}, where
    C(lam) = max val * t^power * exp(lam r^2 / 4t) is the smallest admissible C."""
    lams = lam_top * np.geomspace(1e-5, 1.0, grid_size)
    if extra is not None:
        lams = np.sort(np.append(lams, extra))
    base = np.log(val) + power * np.log(t)
    expo = r2 / (4 * t)
    log_c = np.array([np.max(base + lam * expo) for lam in lams])
    mass = log_c - 1.5 * np.log(lams)
    i = int(np.argmin(mass))
    return float(np.exp(log_c[i])), float(lams[i])


def fit_gaussian_majorant(
    problem: AdvectionDiffusionProblem,
    sources: Sequence[tuple[int, int, int]] = ((0, 0, 0),),
    slack: float = 0.02,
    floor: float = 1e-8,
) -> tuple[GaussianMajorant, GaussianMajorant, np.ndarray, np.ndarray]:
    """Fit order-0 and order-1 majorants to impulse columns of the discrete propagator.

    The rate minimising the majorant's L1 mass C * (4 pi / lam)^{3/2} is
    chosen, with the smallest C dominating every sample.  Candidates run up to
    twice the pure-diffusion rate 1/(rho nu) and include lam_hi, the largest
    rate compatible with C = (1+slack) max |p| t^{3/2}; for the heat kernel the
    optimum is lam_hi with the exact constants.  Order 1 uses the same rule
    with rates up to the order-0 rate.  Only times at which the column is
    resolved (width >= 2 cells) and samples within a quarter box of the
    impulse with |p| >= floor * peak are used.
    """
    grid = problem.grid
    cols = _columns(problem, sources)
    M = problem.substeps
    ts = np.arange(1, M + 1) / M
    width = np.sqrt(2 * problem.rho * problem.nu * ts)
    use = np.nonzero(width >= 2 * grid.spacing)[0]
    if use.size == 0:
        raise ValueError("no resolved sample times; increase rho*nu or grid resolution")
    sp = spectral(grid)
    s0: list[tuple[np.ndarray, ...]] = []
    s1: list[tuple[np.ndarray, ...]] = []
    for si, src in enumerate(sources):
        r2, mask = _sample_mask(grid, src)
        for ti in use:
            t = ts[ti]
            col = cols[ti + 1, si]
            col_hat = sp.forward(col)
            dmax = np.max(np.stack([np.abs(sp.inverse(1j * sp.kd[j] * col_hat)) for j in range(DIM)]), axis=0)
            absval = np.abs(col)
            keep = mask & (absval >= floor * absval.max())
            s0.append((np.full(keep.sum(), t), r2[keep], absval[keep]))
            keep1 = mask & (dmax >= floor * dmax.max())
            s1.append((np.full(keep1.sum(), t), r2[keep1], dmax[keep1]))
    t0, r20, p0 = (np.concatenate(a) for a in zip(*s0))
    t1, r21, p1 = (np.concatenate(a) for a in zip(*s1))
    c_cap = (1 + slack) * float(np.max(p0 * t0**1.5))
    pos = r20 > 0
    lam_hi = float(np.min(4 * t0[pos] * np.log(c_cap * t0[pos] ** -1.5 / p0[pos]) / r20[pos]))
    lam_top = max(2.0 / (problem.rho * problem.nu), lam_hi)
    C, lam = _best_rate(t0, r20, p0, 1.5, lam_top, lam_hi)
    if lam == lam_hi:
        C = max(C, c_cap)
    C1, lam1 = _best_rate(t1, r21, p1, 2.0, lam)
    return GaussianMajorant(C, lam, 0), GaussianMajorant(C1, lam1, 1), ts[use], cols


def check_gaussian_majorant(
    problem: AdvectionDiffusionProblem,
    m: GaussianMajorant | None = None,
    sources: Sequence[tuple[int, int, int]] | None = None,
) -> MajorantReport:
    """Fit majorants, test ``m`` (order 0) against the sampled columns and measure asymmetry.

    The asymmetry is max over sampled times of |p(x <- y) - p(y <- x)| for the
    first two impulse positions (zero for a self-adjoint operator).
    """
    grid = problem.grid
    n = grid.n_points
    if sources is None:
        sources = ((0, 0, 0), (n // 8, n // 16, 0))
    fit0, fit1, ts, cols = fit_gaussian_majorant(problem, sources)
    test = m or fit0
    worst = 0.0
    for si, src in enumerate(sources):
        r2, mask = _sample_mask(grid, src)
        for t in ts:
            mi = int(round(t * problem.substeps))
            col = np.abs(cols[mi, si])
            x = np.sqrt(r2[mask])[:, None] * np.array([1.0, 0.0, 0.0])
            bound = gaussian_bound(t, x, test) if test.order == 0 else None
            if bound is not None:
                worst = max(worst, float(np.max(col[mask] / bound)))
    a, b = sources[0], sources[1]
    asym = float(np.max(np.abs(cols[1:, 0][(slice(None),) + b] - cols[1:, 1][(slice(None),) + a])))
    return MajorantReport(fit0, fit1, worst <= 1.0 + 1e-12, worst, asym, ts)
