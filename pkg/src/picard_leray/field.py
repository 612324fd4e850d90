"""Periodic-grid fields with spectral calculus, convolutions and Sobolev norms.

Grid coordinates are *wrapped*: index ``i`` sits at ``i*h`` for ``i < N/2`` and
at ``(i-N)*h`` otherwise, so the origin is index 0 and data centred at the
origin is compact in the middle of coordinate space.  Kernels, impulses and
zero padding all share this convention.
"""

from __future__ import annotations

import functools
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.fft as sfft

DIM = 3


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    n_points: int
    box_length: float = 2 * np.pi
    dim: int = DIM

    def __post_init__(self):
        n = self.n_points
        if self.dim != DIM:
            raise ValueError(f"only dim = {DIM} is supported, got {self.dim}")
        if n < 8 or n & (n - 1):
            raise ValueError(f"points_per_axis must be a power of two >= 8, got {n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")

    @property
    def spacing(self) -> float:
        return self.box_length / self.n_points

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_points,) * DIM

    @property
    def cell_volume(self) -> float:
        return self.spacing**DIM

    def coords(self) -> np.ndarray:
        """Wrapped 1-d coordinates, origin at index 0."""
        n = self.n_points
        return np.fft.fftfreq(n, 1.0 / n) * self.spacing

    def mesh(self, sparse: bool = False) -> list[np.ndarray]:
        c = self.coords()
        return np.meshgrid(c, c, c, indexing="ij", sparse=sparse)

    def radius(self) -> np.ndarray:
        x, y, z = self.mesh(sparse=True)
        return np.sqrt(x * x + y * y + z * z)

    def padded(self, factor: int) -> "Grid":
        return Grid(self.n_points * factor, self.box_length * factor)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        _check_same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        _check_same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * a)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VectorField:
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != DIM:
            raise ValueError(f"expected {DIM} components, got {len(comps)}")
        g = comps[0].grid
        if any(c.grid != g for c in comps):
            raise GridMismatchError("vector components live on different grids")
        object.__setattr__(self, "components", comps)

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    @classmethod
    def from_array(cls, grid: Grid, arr: np.ndarray) -> "VectorField":
        return cls(tuple(ScalarField(grid, arr[i]) for i in range(DIM)))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls.from_array(grid, np.zeros((DIM,) + grid.shape))

    def array(self) -> np.ndarray:
        return np.stack([c.values for c in self.components])

    def __getitem__(self, i: int) -> ScalarField:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a + b for a, b in zip(self, other)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a - b for a, b in zip(self, other)))

    def __mul__(self, a: float) -> "VectorField":
        return VectorField(tuple(c * a for c in self))

    __rmul__ = __mul__


def _check_same_grid(*fields) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError(f"grid mismatch: {g} vs {f.grid}")
    return g


# --- spectral machinery on raw arrays -------------------------------------


@dataclass(frozen=True)
class Spectral:
    """Wavenumber tables for the real-to-complex transform layout."""

    grid: Grid
    k: tuple[np.ndarray, np.ndarray, np.ndarray]  # full wavenumbers (Nyquist kept)
    kd: tuple[np.ndarray, np.ndarray, np.ndarray]  # odd-derivative wavenumbers, Nyquist zeroed
    k2: np.ndarray
    weight: np.ndarray  # multiplicity of each stored mode in the full spectrum

    def forward(self, a: np.ndarray) -> np.ndarray:
        return sfft.rfftn(a, axes=(-3, -2, -1), workers=-1)

    def inverse(self, a_hat: np.ndarray) -> np.ndarray:
        return sfft.irfftn(a_hat, s=self.grid.shape, axes=(-3, -2, -1), workers=-1)


# lru_cache is internally locked, so the plan cache is safe to share across threads
@functools.lru_cache(maxsize=32)
def spectral(grid: Grid) -> Spectral:
    n, h = grid.n_points, grid.spacing
    kf = 2 * np.pi * np.fft.fftfreq(n, h)
    kr = 2 * np.pi * np.fft.rfftfreq(n, h)
    k = (kf[:, None, None], kf[None, :, None], kr[None, None, :])
    kdf = kf.copy()
    kdf[n // 2] = 0.0
    kdr = kr.copy()
    kdr[-1] = 0.0
    kd = (kdf[:, None, None], kdf[None, :, None], kdr[None, None, :])
    k2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    w = np.full(kr.shape, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    weight = np.broadcast_to(w[None, None, :], k2.shape)
    return Spectral(grid, k, kd, k2, weight)


def grad_array(a: np.ndarray, grid: Grid, a_hat: np.ndarray | None = None) -> np.ndarray:
    """Spectral gradient of a scalar array, shape (3, N, N, N)."""
    sp = spectral(grid)
    if a_hat is None:
        a_hat = sp.forward(a)
    return np.stack([sp.inverse(1j * sp.kd[j] * a_hat) for j in range(DIM)])


def jacobian_array(v: np.ndarray, grid: Grid) -> np.ndarray:
    """``J[i, j] = d v_i / d x_j`` for a (3, N, N, N) vector array."""
    sp = spectral(grid)
    v_hat = sp.forward(v)
    return np.stack([[sp.inverse(1j * sp.kd[j] * v_hat[i]) for j in range(DIM)] for i in range(DIM)])


def laplacian_array(a: np.ndarray, grid: Grid) -> np.ndarray:
    sp = spectral(grid)
    return sp.inverse(-sp.k2 * sp.forward(a))


# --- public operations ------------------------------------------------------


def derivative(f: ScalarField, axis: int) -> ScalarField:
    if not 0 <= axis < DIM:
        raise ValueError(f"axis {axis} out of range")
    sp = spectral(f.grid)
    return ScalarField(f.grid, sp.inverse(1j * sp.kd[axis] * sp.forward(f.values)))


def divergence(v: VectorField) -> ScalarField:
    g = v.grid
    sp = spectral(g)
    v_hat = sp.forward(v.array())
    div_hat = sum(1j * sp.kd[j] * v_hat[j] for j in range(DIM))
    return ScalarField(g, sp.inverse(div_hat))


def curl(v: VectorField) -> VectorField:
    J = jacobian_array(v.array(), v.grid)
    return VectorField.from_array(v.grid, np.stack([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]]))


_HS = re.compile(r"^H(\d)$")
_SPACES = ("L1", "L2", "Linf", "Hs", "H2inf")


def hs_norm_array(a: np.ndarray, grid: Grid, s: int) -> float:
    sp = spectral(grid)
    a_hat = sp.forward(a)
    scale = grid.box_length**DIM / float(grid.n_points) ** (2 * DIM)
    total = np.sum(sp.weight * (1.0 + sp.k2) ** s * np.abs(a_hat) ** 2)
    return float(np.sqrt(scale * total))


def h2inf_norm_array(a: np.ndarray, grid: Grid) -> float:
    """max over |alpha| <= 2 of sup |d^alpha a|."""
    sp = spectral(grid)
    a_hat = sp.forward(a)
    best = float(np.max(np.abs(a)))
    for j in range(DIM):
        dj = 1j * sp.kd[j] * a_hat
        best = max(best, float(np.max(np.abs(sp.inverse(dj)))))
        for m in range(j, DIM):
            kk = -sp.k[j] ** 2 if m == j else 1j * sp.kd[m]
            d2 = kk * a_hat if m == j else kk * dj
            best = max(best, float(np.max(np.abs(sp.inverse(d2)))))
    return best


def hs_norms(a: np.ndarray, grid: Grid, s: int) -> np.ndarray:
    """H^s norms of a stack of fields, reduced over the last three axes."""
    sp = spectral(grid)
    scale = grid.box_length**DIM / float(grid.n_points) ** (2 * DIM)
    mult = sp.weight * (1.0 + sp.k2) ** s
    a = np.asarray(a)
    lead = a.shape[:-DIM]
    flat = a.reshape((-1,) + grid.shape)
    out = np.empty(flat.shape[0])
    for i, f in enumerate(flat):
        out[i] = np.sqrt(scale * np.sum(mult * np.abs(sp.forward(f)) ** 2))
    return out.reshape(lead)


def h2inf_norms(a: np.ndarray, grid: Grid) -> np.ndarray:
    a = np.asarray(a)
    flat = a.reshape((-1,) + grid.shape)
    return np.array([h2inf_norm_array(f, grid) for f in flat]).reshape(a.shape[:-DIM])


def norm_array(a: np.ndarray, grid: Grid, space: str, s: int | None = None) -> float:
    m = _HS.match(space)
    if m:
        space, s = "Hs", int(m.group(1))
    if space == "L1":
        return float(np.sum(np.abs(a)) * grid.cell_volume)
    if space == "L2":
        return float(np.sqrt(np.sum(a * a) * grid.cell_volume))
    if space == "Linf":
        return float(np.max(np.abs(a)))
    if space == "Hs":
        if s not in (0, 1, 2, 3, 4):
            raise ValueError(f"unsupported Sobolev index s={s}; integer 0..4 only")
        return hs_norm_array(a, grid, s)
    if space == "H2inf":
        return h2inf_norm_array(a, grid)
    raise ValueError(f"unknown norm space {space!r}; expected one of {_SPACES} or H0..H4")


def norm(f: ScalarField, space: str, s: int | None = None) -> float:
    """L^p norms by uniform quadrature, H^s via Fourier multiplier, H^{2,inf} by sup of derivatives.

    ``space`` is one of ``L1, L2, Linf, Hs, H2inf``; ``"H2"`` is shorthand for
    ``("Hs", s=2)``.
    """
    return norm_array(f.values, f.grid, space, s)


def vector_norm(v: VectorField, space: str, s: int | None = None) -> float:
    """Maximum over components."""
    return max(norm(c, space, s) for c in v)


def h2_classical(f: ScalarField) -> float:
    """sqrt(sum_{|alpha|<=2} |d^alpha f|_{L2}^2) with ordered second derivatives."""
    g = f.grid
    sp = spectral(g)
    f_hat = sp.forward(f.values)
    total = norm(f, "L2") ** 2
    for j in range(DIM):
        total += norm_array(sp.inverse(1j * sp.kd[j] * f_hat), g, "L2") ** 2
        for m in range(DIM):
            mult = -sp.k[j] ** 2 if m == j else -sp.kd[j] * sp.kd[m]
            total += norm_array(sp.inverse(mult * f_hat), g, "L2") ** 2
    return float(np.sqrt(total))


# --- convolution ------------------------------------------------------------


def _pad_index(n: int, m: int) -> np.ndarray:
    return np.r_[0 : n // 2, m - n // 2 : m]


def embed(a: np.ndarray, factor: int) -> np.ndarray:
    """Zero-pad a wrapped array so it sits unchanged around the origin of a bigger box."""
    n = a.shape[-1]
    m = n * factor
    out = np.zeros(a.shape[:-3] + (m, m, m))
    idx = _pad_index(n, m)
    out[(...,) + np.ix_(idx, idx, idx)] = a
    return out


def extract(a: np.ndarray, n: int) -> np.ndarray:
    idx = _pad_index(n, a.shape[-1])
    return a[(...,) + np.ix_(idx, idx, idx)]


def circular_convolve(a: np.ndarray, b: np.ndarray, cell_volume: float) -> np.ndarray:
    axes = (-3, -2, -1)
    s = a.shape[-3:]
    prod = sfft.rfftn(a, axes=axes, workers=-1) * sfft.rfftn(b, axes=axes, workers=-1)
    return sfft.irfftn(prod, s=s, axes=axes, workers=-1) * cell_volume


def convolve(f: ScalarField, g: ScalarField, padded: bool = False, factor: int = 2) -> ScalarField:
    """``(f*g)(x) ~ integral f(x-y) g(y) dy`` as a lattice sum times the cell volume.

    Without padding the sum is periodic; with padding both arrays are zero
    padded by ``factor`` around the origin, which turns it into the free-space
    sum for data supported in the original box.
    """
    grid = _check_same_grid(f, g)
    if not padded:
        return ScalarField(grid, circular_convolve(f.values, g.values, grid.cell_volume))
    out = circular_convolve(embed(f.values, factor), embed(g.values, factor), grid.cell_volume)
    return ScalarField(grid, extract(out, grid.n_points))


# --- NSF1 dumps -------------------------------------------------------------

NSF1_MAGIC = b"NSF1"


def write_nsf1(path: str | Path, values: np.ndarray) -> None:
    """Magic, three little-endian uint32 dims, then float64 LE with x fastest."""
    a = np.asarray(values, dtype="<f8")
    if a.ndim != 3:
        raise ValueError("NSF1 stores 3-d scalar arrays")
    with open(path, "wb") as fh:
        fh.write(NSF1_MAGIC)
        fh.write(struct.pack("<3I", *a.shape))
        fh.write(np.ravel(a, order="F").tobytes())


def read_nsf1(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != NSF1_MAGIC:
        raise ValueError(f"{path}: not an NSF1 file")
    dims = struct.unpack("<3I", raw[4:16])
    count = dims[0] * dims[1] * dims[2]
    body = raw[16:]
    if len(body) != 8 * count:
        raise ValueError(f"{path}: expected {8 * count} payload bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(dims, order="F").astype(float)


def dump_vector(prefix: str | Path, v: VectorField) -> list[Path]:
    paths = []
    for i, c in enumerate(v):
        p = Path(f"{prefix}_{i}.nsf1")
        write_nsf1(p, c.values)
        paths.append(p)
    return paths


def load_vector(grid: Grid, paths: Sequence[str | Path] | Iterable[str | Path]) -> VectorField:
    return VectorField(tuple(ScalarField(grid, read_nsf1(p)) for p in paths))
