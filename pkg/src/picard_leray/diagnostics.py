"""Norm ledgers, growth audit, random test fields and the inequality property suite."""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .field import DIM, Grid, circular_convolve, hs_norm_array, jacobian_array, spectral
from .leray import leray_project_array, source_from_jacobians

# --- ledger -----------------------------------------------------------------


class LedgerRow(NamedTuple):
    l: int
    rho_l: float
    k_iters: int
    h2_norm: float
    h2inf_norm: float
    contraction_ratio_max: float
    leray_l2: float
    div_max: float
    runtime_ms: float


LEDGER_COLUMNS = LedgerRow._fields


def csv_value(x) -> str:
    """Shortest round-trip text for floats; plain text for ints and flags."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@dataclass
class NormLedger:
    rows: list[LedgerRow] = field(default_factory=list)

    def append(self, row: LedgerRow) -> None:
        if self.rows and row.l <= self.rows[-1].l:
            raise ValueError("ledger rows must have strictly increasing l")
        norms = (row.h2_norm, row.h2inf_norm, row.leray_l2, row.div_max)
        if any(not x >= 0 for x in norms):
            raise ValueError("ledger norms must be non-negative")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS)
        for r in self.rows:
            w.writerow([csv_value(x) for x in r])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path: str | Path) -> "NormLedger":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = [
                LedgerRow(**{k: (int(v) if k in ("l", "k_iters") else float(v)) for k, v in rec.items()})
                for rec in reader
            ]
        led = cls()
        for r in rows:
            led.append(r)
        return led


def growth_audit(ledger: NormLedger, h_norm: float) -> tuple[float, bool]:
    """C2* = max_l (h2(l) - h)/l, floored at 0; pass iff every per-step increment is <= C2* + 1e-6."""
    if len(ledger) == 0:
        raise ValueError("growth audit needs a non-empty ledger")
    rows = sorted(ledger.rows, key=lambda r: r.l)
    l = np.array([r.l for r in rows], dtype=float)
    h2 = np.array([r.h2_norm for r in rows])
    c2 = max(0.0, float(np.max((h2 - h_norm) / l)))
    prev = np.concatenate([[h_norm], h2[:-1]])
    steps = np.diff(np.concatenate([[0.0], l]))
    incr = (h2 - prev) / steps
    ok = bool(np.isfinite(c2) and np.all(incr <= c2 + 1e-6))
    return c2, ok


# --- random test fields -----------------------------------------------------


def band_mask(grid: Grid) -> np.ndarray:
    """rfft-shaped mask keeping modes with every |k_i| <= N/3 (top third zeroed)."""
    n = grid.n_points
    ki = np.abs(np.fft.fftfreq(n, 1.0 / n))
    kr = np.abs(np.fft.rfftfreq(n, 1.0 / n))
    cut = n / 3
    return (ki[:, None, None] <= cut) & (ki[None, :, None] <= cut) & (kr[None, None, :] <= cut)


def random_field(grid: Grid, rng: np.random.Generator, shape: tuple[int, ...] = ()) -> np.ndarray:
    """Band-limited field with Gaussian spectral coefficients, unit rms."""
    sp = spectral(grid)
    a = rng.standard_normal(shape + grid.shape)
    a = sp.inverse(sp.forward(a) * band_mask(grid))
    rms = np.sqrt(np.mean(a * a, axis=tuple(range(-DIM, 0)), keepdims=True))
    return a / rms


def random_solenoidal(grid: Grid, rng: np.random.Generator, amplitude: float = 1.0, decay: float = 2.0) -> np.ndarray:
    """Divergence-free band-limited field with a decaying spectrum, scaled to sup-norm ``amplitude``."""
    sp = spectral(grid)
    a = rng.standard_normal((DIM,) + grid.shape)
    envelope = band_mask(grid) * np.exp(-sp.k2 / (2 * decay**2))
    a = sp.inverse(sp.forward(a) * envelope)
    a = leray_project_array(a, grid)
    return amplitude * a / np.max(np.abs(a))


# --- inequality property suite ---------------------------------------------


def lp_norm(a: np.ndarray, grid: Grid, p: float) -> float:
    if np.isinf(p):
        return float(np.max(np.abs(a)))
    return float((np.sum(np.abs(a) ** p) * grid.cell_volume) ** (1.0 / p))


# (p, q, r) with 1/p + 1/q = 1 + 1/r: |f*g|_r <= |f|_p |g|_q
YOUNG_TRIPLES: tuple[tuple[float, float, float], ...] = (
    (1.0, 1.0, 1.0),
    (2.0, 1.0, 2.0),
    (1.0, 2.0, 2.0),
    (4 / 3, 4 / 3, 2.0),
    (1.5, 1.5, 3.0),
    (np.inf, 1.0, np.inf),
)


@dataclass
class CheckStats:
    name: str
    checked: int = 0
    violations: int = 0
    min_slack: float = np.inf  # min over trials of rhs/lhs (>= 1 means the bound held)

    def record(self, lhs: float, rhs: float, rtol: float) -> None:
        self.checked += 1
        if lhs > rhs * (1 + rtol) + 1e-300:
            self.violations += 1
        if lhs > 0:
            self.min_slack = min(self.min_slack, rhs / lhs)


@dataclass
class InequalityReport:
    seed: int
    trials: int
    checks: dict[str, CheckStats]
    product_constant: float

    @property
    def violations(self) -> int:
        return sum(c.violations for c in self.checks.values())

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "checked", "violations", "min_slack"])
        for c in self.checks.values():
            w.writerow([c.name, c.checked, c.violations, csv_value(c.min_slack)])
        w.writerow(["prule_C_s", "", "", csv_value(self.product_constant)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def summary(self) -> str:
        lines = [f"inequality suite: seed={self.seed} trials={self.trials} violations={self.violations}"]
        for c in self.checks.values():
            lines.append(f"  {c.name:<24s} checked={c.checked:<5d} violations={c.violations:<3d} min_slack={c.min_slack:.6g}")
        lines.append(f"  product constant C_s = {self.product_constant:.6g}")
        return "\n".join(lines)


def _young_name(p: float, q: float, r: float) -> str:
    def f(x):
        return "inf" if np.isinf(x) else f"{x:.4g}"

    return f"young_p{f(p)}_q{f(q)}_r{f(r)}"


def _random_pair(grid: Grid, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    f, g = random_field(grid, rng, (2,))
    # mix sign-changing with localized non-negative data so both regimes of Young are probed
    if rng.random() < 0.5:
        r2 = sum(x**2 for x in grid.mesh(sparse=True))
        bump = np.exp(-r2 / (2 * (grid.box_length / 12) ** 2))
        g = bump * (1.0 + 0.5 * np.tanh(g))
        f = f * rng.uniform(0.2, 5.0)
    return f, g


def verify_inequality_suite(seed: int, trials: int, grid: Grid | None = None, rtol: float = 1e-8) -> InequalityReport:
    """Sample the convolution, pointwise-source and source-L1 inequalities on random fields.

    Convolutions are circular on the periodic lattice, where Young's inequality
    holds exactly (the lattice is a group with counting measure times h^3).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = grid or Grid(32)
    rng = np.random.default_rng(seed)
    checks: dict[str, CheckStats] = {}

    def rec(name, lhs, rhs):
        checks.setdefault(name, CheckStats(name)).record(lhs, rhs, rtol)

    h3 = grid.cell_volume
    for _ in range(trials):
        f, g = _random_pair(grid, rng)
        fg = circular_convolve(f, g, h3)
        for p, q, r in YOUNG_TRIPLES:
            rec(_young_name(p, q, r), lp_norm(fg, grid, r), lp_norm(f, grid, p) * lp_norm(g, grid, q))
        rec("young_L2_L1_to_L2", lp_norm(fg, grid, 2), lp_norm(f, grid, 2) * lp_norm(g, grid, 1))
        rec("young_L2_L2_to_Linf", lp_norm(fg, grid, np.inf), lp_norm(f, grid, 2) * lp_norm(g, grid, 2))

        v = random_field(grid, rng, (DIM,)) * rng.uniform(0.1, 3.0)
        jac = jacobian_array(v, grid)
        s = source_from_jacobians(jac, jac)
        half_sq = 0.5 * np.sum(jac**2 + np.swapaxes(jac, 0, 1) ** 2, axis=(0, 1))
        excess = float(np.max(s - half_sq))
        rec("pointwise_source", max(excess, 0.0), 0.0)
        rec("pointwise_abs_source", float(np.max(np.abs(s) - half_sq).clip(0.0)), 0.0)
        h1 = sum(hs_norm_array(v[k], grid, 1) ** 2 for k in range(DIM))
        rec("source_L1", lp_norm(s, grid, 1), DIM**2 * h1)
    return InequalityReport(seed, trials, checks, product_constant(grid))


# --- H^2 product constant -----------------------------------------------------

PRODUCT_CORPUS_SEED = 20_231
PRODUCT_CORPUS_SIZE = 24


def product_ratio(f: np.ndarray, g: np.ndarray, grid: Grid) -> float:
    return hs_norm_array(f * g, grid, 2) / (hs_norm_array(f, grid, 2) * hs_norm_array(g, grid, 2))


# spectral widths and mean offsets cycled through the corpus; the supremum is
# approached by smooth fields, so rough band-limited samples alone underestimate it
PRODUCT_WIDTHS = (0.5, 1.0, 2.0)
PRODUCT_OFFSETS = (0.0, 1.0, 4.0)


def smooth_random_field(grid: Grid, rng: np.random.Generator, width: float, shape: tuple[int, ...] = ()) -> np.ndarray:
    """Gaussian-spectrum field exp(-|k|^2 / (2 (width k0)^2)), unit rms; k0 = 2 pi / box_length."""
    sp = spectral(grid)
    k0 = 2 * np.pi / grid.box_length
    a = sp.inverse(sp.forward(rng.standard_normal(shape + grid.shape)) * np.exp(-sp.k2 / (2 * (width * k0) ** 2)))
    rms = np.sqrt(np.mean(a * a, axis=tuple(range(-DIM, 0)), keepdims=True))
    return a / rms


@functools.lru_cache(maxsize=8)
def product_constant(grid: Grid, seed: int = PRODUCT_CORPUS_SEED, samples: int = PRODUCT_CORPUS_SIZE) -> float:
    """Empirical max of |fg|_{H2} / (|f|_{H2} |g|_{H2}) over a fixed seeded corpus of smooth fields."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for i in range(samples):
        width = PRODUCT_WIDTHS[i % len(PRODUCT_WIDTHS)]
        offset = PRODUCT_OFFSETS[(i // len(PRODUCT_WIDTHS)) % len(PRODUCT_OFFSETS)]
        f, g = smooth_random_field(grid, rng, width, (2,)) + offset
        best = max(best, product_ratio(f, g, grid))
    return best
