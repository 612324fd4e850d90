"""Global Picard scheme for the viscous Burgers system on rescaled macro steps.

Macro step l covers tau in [l-1, l] with physical time t = tau-offset * rho_l.
Each iterate u^{k+1} solves the linear problem with coefficient u^k (frozen
per substep) and initial value u_end; increments are recovered by differencing,
which avoids writing the increment equation separately.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import LedgerRow, NormLedger
from .field import DIM, Grid, VectorField, divergence, h2inf_norm_array, hs_norms, norm
from .parabolic import Trajectory, solve_array

# increments below this fraction of the iterate size are at round-off and carry no ratio
RATIO_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class BurgersState:
    l: int
    rho_l: float
    u_end: VectorField
    physical_time: float = 0.0
    ledger: NormLedger = field(default_factory=NormLedger)

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("macro step index starts at 1")
        if not self.rho_l > 0:
            raise ValueError("rho_l must be positive")

    @property
    def grid(self) -> Grid:
        return self.u_end.grid


@dataclass
class IterationRecord:
    k: int
    h2: float  # sup over tau samples, max over components, of |delta^k|_{H2}
    h2inf: float  # same in H^{2,inf} (nan unless tracked)
    ratio: float  # h2 / previous h2 (nan when undefined)
    ratio_h2inf: float = float("nan")


@dataclass
class IterationReport:
    rho_l: float
    rho_budget: float
    records: list[IterationRecord]
    k_final: int
    converged: bool
    first_increment: float
    sup_norm: float  # max |u_i| over the final trajectory
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def ratios(self) -> np.ndarray:
        r = np.array([rec.ratio for rec in self.records])
        return r[np.isfinite(r)]

    @property
    def ratios_h2inf(self) -> np.ndarray:
        r = np.array([rec.ratio_h2inf for rec in self.records])
        return r[np.isfinite(r)]

    @property
    def max_ratio(self) -> float:
        r = np.concatenate([self.ratios, self.ratios_h2inf])
        return float(r.max()) if r.size else 0.0


def step_size(l: int, c: float) -> float:
    if l < 1 or not c > 0:
        raise ValueError("step_size needs l >= 1 and c > 0")
    return c / l


def sup_bound(u: np.ndarray, grid: Grid) -> float:
    """max over components of the H^{2,inf} norm."""
    return max(h2inf_norm_array(u[i], grid) for i in range(DIM))


def contraction_budget(u: VectorField) -> float:
    return 0.5 / (1.0 + sup_bound(u.array(), u.grid))


def initial_state(u0: VectorField, c: float = 0.1) -> BurgersState:
    return BurgersState(1, step_size(1, c), u0, 0.0, NormLedger())


def first_iterate(state: BurgersState, nu: float, substeps: int = 32) -> Trajectory:
    u = state.u_end.array()
    vals = solve_array(u, state.grid, state.rho_l, nu, state.u_end, None, substeps)
    return Trajectory(state.grid, vals, state.l - 1)


def picard_step(prev: Trajectory, state: BurgersState, nu: float) -> Trajectory:
    if prev.grid != state.grid:
        raise ValueError("trajectory and state live on different grids")
    u = state.u_end.array()
    vals = solve_array(u, state.grid, state.rho_l, nu, prev.values[:-1], None, prev.substeps)
    return Trajectory(state.grid, vals, state.l - 1)


def increment_norms(d: np.ndarray, grid: Grid, track_h2inf: bool) -> tuple[float, float]:
    h2 = float(np.max(hs_norms(d, grid, 2)))
    h2inf = float("nan")
    if track_h2inf:
        h2inf = max(h2inf_norm_array(d[m, i], grid) for m in range(d.shape[0]) for i in range(DIM))
    return h2, h2inf


def picard_loop(first: Trajectory, step, grid: Grid, tol: float, kmax: int, track_h2inf: bool, scale: float):
    """Iterate ``step`` from ``first`` until the sup-in-tau H2 increment is <= tol.

    Returns (final trajectory, records, k_final, converged).
    """
    records: list[IterationRecord] = []
    prev = first
    prev_h2 = prev_inf = None
    converged = False
    k = 1
    while k < kmax:
        k += 1
        new = step(prev)
        h2, h2inf = increment_norms(new.values - prev.values, grid, track_h2inf)
        ratio = h2 / prev_h2 if prev_h2 and prev_h2 > RATIO_FLOOR * scale else float("nan")
        ratio_inf = h2inf / prev_inf if prev_inf and prev_inf > RATIO_FLOOR * scale else float("nan")
        records.append(IterationRecord(k, h2, h2inf, ratio, ratio_inf))
        prev, prev_h2, prev_inf = new, h2, h2inf
        if h2 <= tol:
            converged = True
            break
    return prev, records, k, converged


def run_time_step(
    state: BurgersState,
    nu: float,
    tol: float = 1e-10,
    kmax: int = 30,
    *,
    c: float = 0.1,
    substeps: int = 32,
    budget: bool = True,
    rho: float | None = None,
    track_h2inf: bool = False,
    timing: bool = False,
    keep_trajectory: bool = False,
) -> tuple[BurgersState, IterationReport]:
    """One macro step: first iterate, Picard iterations to ``tol``, ledger row.

    The step size is ``min(c/l, contraction budget)`` unless ``rho`` is given.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    t_start = time.perf_counter()
    grid = state.grid
    rho_budget = contraction_budget(state.u_end)
    if rho is None:
        rho = step_size(state.l, c)
        if budget:
            rho = min(rho, rho_budget)
    work = dataclasses.replace(state, rho_l=rho)
    u_end = state.u_end.array()
    scale = 1.0 + float(np.max(hs_norms(u_end, grid, 2)))

    first = first_iterate(work, nu, substeps)
    first_inc = float(np.max(hs_norms(first.values - u_end[None], grid, 2)))
    if first_inc <= tol:
        final, records, k_final, converged = first, [], 1, True
    else:
        final, records, k_final, converged = picard_loop(
            first, lambda p: picard_step(p, work, nu), grid, tol, kmax, track_h2inf, scale
        )

    end = final.end
    report = IterationReport(
        rho, rho_budget, records, k_final, converged, first_inc, float(np.max(np.abs(final.values))),
        final if keep_trajectory else None,
    )
    ratios = report.ratios
    end_arr = end.array()
    row = LedgerRow(
        l=state.l,
        rho_l=float(rho),
        k_iters=k_final,
        h2_norm=float(np.max(hs_norms(end_arr, grid, 2))),
        h2inf_norm=sup_bound(end_arr, grid),
        contraction_ratio_max=float(ratios.max()) if ratios.size else 0.0,
        leray_l2=0.0,
        div_max=norm(divergence(end), "Linf"),
        runtime_ms=(time.perf_counter() - t_start) * 1e3 if timing else 0.0,
    )
    ledger = NormLedger(list(state.ledger.rows))
    ledger.append(row)
    new_state = BurgersState(state.l + 1, step_size(state.l + 1, c), end, state.physical_time + rho, ledger)
    return new_state, report


def run(
    initial: VectorField,
    steps: int,
    nu: float,
    c: float = 0.1,
    tol: float = 1e-10,
    kmax: int = 30,
    reports: list | None = None,
    **kwargs,
) -> tuple[BurgersState, NormLedger]:
    """Chain ``steps`` macro steps from ``initial``; physical time advances by sum rho_l.

    Per-step IterationReports are appended to ``reports`` when given.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    state = initial_state(initial, c)
    for _ in range(steps):
        state, rep = run_time_step(state, nu, tol, kmax, c=c, **kwargs)
        if reports is not None:
            reports.append(rep)
    return state, state.ledger
