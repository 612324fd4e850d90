"""Controlled Picard scheme for incompressible Navier-Stokes in Leray form.

The scheme advances the controlled velocity v^r = v + r.  On macro step l:

1. ``uncontrolled_first`` solves the linear problem with coefficient v_end and
   the Leray forcing of v_end frozen in tau, giving v*.
2. ``control_update`` sets r(tau) = r_end - (v*(tau) - v_end), so the controlled
   first iterate v* + (r - r_end) equals v_end at every substep.
3. ``controlled_iterate`` solves for the next v^r with coefficient b = v^r - r
   (the physical iterate).  Writing the physical update

       v[m+1] = H (v[m] + dtau (-rho b[m].grad v[m] + rho P(b[m])))

   in terms of w = v + r gives w[m+1] = H (w[m] + dtau (-rho b[m].grad w[m] + f[m]))
   with the control source

       f[m] = (H^{-1} r[m+1] - r[m]) / dtau + rho (b[m].grad) r[m] + rho P(b[m]),

   where H = exp(rho nu Lap dtau).  The first term is the discrete form of
   dr/dtau - rho nu Lap r, and P(b) = K_{,i} * S(b, b) expands into
   S(v^r, v^r) - 2 S(v^r, r) + S(r, r).  Hence v^r - r is exactly the
   uncontrolled Picard iterate, and the fixed point is the physical solution.
"""

from __future__ import annotations

import dataclasses
import functools
import time
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np

from .diagnostics import LedgerRow, NormLedger, product_constant
from .field import Grid, VectorField, divergence, hs_norms, jacobian_array, norm, norm_array, spectral
from .kernels import (
    CutoffSpec,
    GaussianMajorant,
    KernelSplit,
    build_splits,
    default_epsilon,
    near_l1_norm,
    time_integrated_l1,
)
from .leray import pressure_gradient_kernel_array, pressure_gradient_spectral_array, source_from_jacobians
from .parabolic import AdvectionDiffusionProblem, Trajectory, fit_gaussian_majorant, solve_array
from .scheme_burgers import IterationReport, picard_loop, sup_bound


class ConstantsRecord(NamedTuple):
    C_l: float
    C_r: float
    C_K: float
    C_K2: float
    C_s: float
    C_prime: float


class StepSizes(NamedTuple):
    controlled: float
    uncontrolled: float


class ControlRow(NamedTuple):
    l: int
    r_h2_norm: float
    r_h2inf_norm: float


@dataclass(frozen=True, eq=False)
class NsState:
    l: int
    rho_l: float
    v_end: VectorField  # controlled velocity v^r at tau = l-1
    r_end: VectorField
    r_traj: Trajectory | None = None
    constants: ConstantsRecord | None = None
    ledger: NormLedger = field(default_factory=NormLedger)
    control_ledger: tuple[ControlRow, ...] = ()
    physical_time: float = 0.0

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("macro step index starts at 1")
        if self.v_end.grid != self.r_end.grid:
            raise ValueError("v_end and r_end live on different grids")

    @property
    def grid(self) -> Grid:
        return self.v_end.grid


def initial_state(v0: VectorField, rho: float = 0.05) -> NsState:
    """r^0 = 0, so v^r = v at t = 0."""
    return NsState(1, rho, v0, VectorField.zeros(v0.grid))


def recover_velocity(state: NsState) -> VectorField:
    return state.v_end - state.r_end


def step_size_controlled(constants: ConstantsRecord, n: int = 3) -> StepSizes:
    """Step sizes guaranteeing contraction factor 1/2 for the controlled and uncontrolled schemes."""
    if any(not c >= 1 for c in constants):
        raise ValueError(f"all constants must be >= 1, got {constants}")
    cl, cr, _, ck2, cs, cp = constants
    controlled = 1.0 / (2 * (n + 1) ** 2 * 4 * n**4 * (cl + cr) * ck2**2 * cs * cp)
    # coefficient term C_s C_K2 C_l n^2 plus Leray term 2 C_K2 C_l C_s n^2
    uncontrolled = 1.0 / (4 * (n + 1) ** 2 * cp * 3 * n**2 * cs * ck2 * cl)
    return StepSizes(controlled, uncontrolled)


@functools.lru_cache(maxsize=16)
def _kernel_constants(splits: tuple[KernelSplit, ...]) -> tuple[float, float]:
    ck = max(near_l1_norm(s) for s in splits)
    ck2 = max(norm(s.far, "H2") for s in splits)
    return ck, ck2


def fit_physical_majorants(
    v_phys: VectorField, nu: float, substeps: int = 64, window: float = 1.0
) -> tuple[GaussianMajorant, GaussianMajorant]:
    """Majorants (physical time) of the propagator of dw/dt = nu Lap w - v.grad w.

    The window is stretched when needed so that impulse columns become
    resolved; constants are converted from tau units (t = window * tau).
    """
    grid = v_phys.grid
    # the last sample must be resolved: width sqrt(2 nu t) >= 2 cells
    window = max(window, (2 * grid.spacing) ** 2 / (2 * nu) * 1.05)
    vmax = float(np.max(np.abs(v_phys.array())))
    while window * vmax / substeps / grid.spacing > 0.5:
        substeps *= 2
    prob = AdvectionDiffusionProblem(window, nu, v_phys, VectorField.zeros(grid)[0], None, substeps)
    m0, m1, _, _ = fit_gaussian_majorant(prob, ((0, 0, 0), (grid.n_points // 4, grid.n_points // 8, 0)))
    return (
        GaussianMajorant(m0.C * window**1.5, m0.lam * window, 0),
        GaussianMajorant(m1.C * window**2, m1.lam * window, 1),
    )


PressurePath = Literal["kernel", "spectral"]

# the default cutoff needs 4 cells inside box/4
KERNEL_MIN_POINTS = 32


@dataclass
class NsScheme:
    nu: float
    substeps: int = 32
    c: float = 0.05
    rho_mode: Literal["fixed", "budget"] = "fixed"
    pressure: PressurePath = "kernel"
    boundary: Literal["free", "periodic"] = "periodic"
    cutoff: CutoffSpec | None = None  # None: default epsilon of each grid with cutoff_style
    cutoff_style: str = "smooth_bump"
    padding: int = 2
    tol: float = 1e-10
    kmax: int = 30
    track_h2inf: bool = True
    timing: bool = False
    n: int = 3

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.rho_mode not in ("fixed", "budget"):
            raise ValueError(f"unknown rho mode {self.rho_mode!r}")
        if self.pressure not in ("kernel", "spectral"):
            raise ValueError(f"unknown pressure path {self.pressure!r}")

    # --- building blocks ---------------------------------------------------

    def splits(self, grid: Grid) -> tuple[KernelSplit, ...]:
        spec = self.cutoff or CutoffSpec(default_epsilon(grid), self.cutoff_style)
        return _cached_splits(grid, spec, self.padding)

    def leray(self, s: np.ndarray, grid: Grid) -> np.ndarray:
        """-grad p for the source array ``s``."""
        if self.pressure == "spectral":
            return pressure_gradient_spectral_array(s, grid)
        return pressure_gradient_kernel_array(s, self.splits(grid), self.boundary)

    def leray_of(self, v: np.ndarray, grid: Grid) -> np.ndarray:
        j = jacobian_array(v, grid)
        return self.leray(source_from_jacobians(j, j), grid)

    # --- the scheme ----------------------------------------------------------

    def uncontrolled_first(self, state: NsState) -> Trajectory:
        grid = state.grid
        v = state.v_end.array()
        force = state.rho_l * self.leray_of(v, grid)
        vals = solve_array(v, grid, state.rho_l, self.nu, state.v_end, VectorField.from_array(grid, force), self.substeps)
        return Trajectory(grid, vals, state.l - 1)

    def control_update(self, state: NsState, vstar: Trajectory) -> NsState:
        v_end = state.v_end.array()
        r = state.r_end.array()[None] - (vstar.values - v_end[None])
        return dataclasses.replace(state, r_traj=Trajectory(state.grid, r, vstar.t0))

    def controlled_first(self, state: NsState, vstar: Trajectory) -> Trajectory:
        """v* + (r - r_end), equal to v_end at every substep."""
        if state.r_traj is None:
            raise ValueError("control_update must run first")
        vals = vstar.values + (state.r_traj.values - state.r_end.array()[None])
        return Trajectory(state.grid, vals, vstar.t0)

    def _controlled_sources(self, state: NsState, prev: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grid = state.grid
        sp = spectral(grid)
        M = self.substeps
        rho = state.rho_l
        dtau = 1.0 / M
        grow = np.expm1(rho * self.nu * sp.k2 * dtau)  # H^{-1} - 1
        coeff = prev[:-1] - r[:-1]
        src = np.empty_like(coeff)
        for m in range(M):
            jv = jacobian_array(prev[m], grid)
            jr = jacobian_array(r[m], grid)
            s = source_from_jacobians(jv, jv) - 2 * source_from_jacobians(jv, jr) + source_from_jacobians(jr, jr)
            ctrl = (r[m + 1] - r[m]) / dtau + sp.inverse(grow * sp.forward(r[m + 1])) / dtau
            adv = np.einsum("j...,ij...->i...", coeff[m], jr)
            src[m] = ctrl + rho * adv + rho * self.leray(s, grid)
        return coeff, src

    def controlled_iterate(self, state: NsState, prev: Trajectory) -> Trajectory:
        if state.r_traj is None:
            raise ValueError("control_update must run first")
        if prev.substeps != self.substeps:
            raise ValueError("trajectory substeps differ from the scheme's")
        coeff, src = self._controlled_sources(state, prev.values, state.r_traj.values)
        if not np.all(np.isfinite(src)):
            raise FloatingPointError("non-finite control source")
        vals = solve_array(state.v_end.array(), state.grid, state.rho_l, self.nu, coeff, src, self.substeps)
        return Trajectory(state.grid, vals, prev.t0)

    def uncontrolled_iterate(self, state: NsState, prev: Trajectory) -> Trajectory:
        """Plain NS Picard step: coefficient prev, forcing rho * P(prev), both per substep."""
        grid = state.grid
        src = np.stack([state.rho_l * self.leray_of(prev.values[m], grid) for m in range(self.substeps)])
        vals = solve_array(state.v_end.array(), grid, state.rho_l, self.nu, prev.values[:-1], src, self.substeps)
        return Trajectory(grid, vals, prev.t0)

    # --- constants and step size ---------------------------------------------

    def estimate_constants(self, state: NsState) -> ConstantsRecord:
        grid = state.grid
        kgrid = grid
        if self.pressure == "spectral" and grid.n_points < KERNEL_MIN_POINTS:
            # the kernel constants belong to the continuous split; sample them where it is resolved
            kgrid = Grid(KERNEL_MIN_POINTS, grid.box_length)
        ck, ck2 = _kernel_constants(self.splits(kgrid))
        _, m1 = fit_physical_majorants(recover_velocity(state), self.nu)
        raw = (
            sup_bound(state.v_end.array(), grid),
            sup_bound(state.r_end.array(), grid),
            ck,
            ck2,
            product_constant(grid),
            time_integrated_l1(m1, 1.0),
        )
        return ConstantsRecord(*(max(1.0, float(x)) for x in raw))

    def step_size(self, state: NsState, constants: ConstantsRecord) -> float:
        rho = self.c / state.l
        if self.rho_mode == "budget":
            rho = min(rho, step_size_controlled(constants, self.n).controlled)
        return rho

    # --- driver ----------------------------------------------------------------

    def run_time_step(self, state: NsState, rho: float | None = None) -> tuple[NsState, IterationReport]:
        t_start = time.perf_counter()
        grid = state.grid
        constants = self.estimate_constants(state)
        budget = step_size_controlled(constants, self.n).controlled
        if rho is None:
            rho = self.step_size(state, constants)
        work = dataclasses.replace(state, rho_l=rho, constants=constants)

        vstar = self.uncontrolled_first(work)
        work = self.control_update(work, vstar)
        first = self.controlled_first(work, vstar)
        v_end = state.v_end.array()
        scale = 1.0 + float(np.max(hs_norms(v_end, grid, 2)))
        first_inc = float(np.max(hs_norms(first.values - v_end[None], grid, 2)))
        final, records, k_final, converged = picard_loop(
            first, lambda p: self.controlled_iterate(work, p), grid, self.tol, self.kmax, self.track_h2inf, scale
        )

        r_traj = work.r_traj.values
        v_phys = final.values - r_traj
        report = IterationReport(
            rho, budget, records, k_final, converged, first_inc, float(np.max(np.abs(v_phys))), None
        )
        end = final.values[-1]
        r_end = r_traj[-1]
        v_rec = end - r_end
        ratios = np.concatenate([report.ratios, report.ratios_h2inf])
        row = LedgerRow(
            l=state.l,
            rho_l=float(rho),
            k_iters=k_final,
            h2_norm=float(np.max(hs_norms(end, grid, 2))),
            h2inf_norm=sup_bound(end, grid),
            contraction_ratio_max=float(ratios.max()) if ratios.size else 0.0,
            leray_l2=max(norm_array(p, grid, "L2") for p in self.leray_of(v_rec, grid)),
            div_max=norm(divergence(VectorField.from_array(grid, v_rec)), "Linf"),
            runtime_ms=(time.perf_counter() - t_start) * 1e3 if self.timing else 0.0,
        )
        ledger = NormLedger(list(state.ledger.rows))
        ledger.append(row)
        ctrl = ControlRow(state.l, float(np.max(hs_norms(r_end, grid, 2))), sup_bound(r_end, grid))
        new_state = NsState(
            state.l + 1,
            self.c / (state.l + 1),
            VectorField.from_array(grid, end),
            VectorField.from_array(grid, r_end),
            work.r_traj,
            constants,
            ledger,
            state.control_ledger + (ctrl,),
            state.physical_time + rho,
        )
        return new_state, report

    def run(self, initial: VectorField, steps: int, reports: list | None = None) -> tuple[NsState, NormLedger]:
        if steps < 1:
            raise ValueError("steps must be >= 1")
        state = initial_state(initial, self.c)
        for _ in range(steps):
            state, rep = self.run_time_step(state)
            if reports is not None:
                reports.append(rep)
        return state, state.ledger


@functools.lru_cache(maxsize=8)
def _cached_splits(grid: Grid, cutoff: CutoffSpec, padding: int) -> tuple[KernelSplit, ...]:
    return build_splits(grid, cutoff, padding)

