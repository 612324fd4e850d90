"""Run configuration: flat ``key = value`` files mapped onto a dataclass."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    pass


INITIAL_KINDS = ("beltrami", "colehopf", "nsf1-file", "random-solenoidal")


@dataclass(frozen=True)
class RunConfig:
    grid_n_points: int = 32
    grid_box_length: float = 2 * math.pi
    nu: float = 0.1
    rho_c: float = 0.05
    rho_mode: str = "fixed"  # fixed: c/l; budget: min(c/l, contraction budget)
    steps: int = 1
    cutoff_epsilon: float = 0.0  # 0 selects the grid default
    cutoff_style: str = "smooth_bump"
    picard_tol: float = 1e-10
    picard_kmax: int = 30
    substeps: int = 32
    padding: int = 2
    pressure_path: str = "kernel"
    pressure_boundary: str = "periodic"
    initial_kind: str = "beltrami"
    initial_amplitude: float = 1.0
    initial_path: str = ""  # prefix of <prefix>_{0,1,2}.nsf1 for nsf1-file
    seed: int = 0
    output_dump_fields: bool = False
    output_runtime: bool = False

    def __post_init__(self):
        n = self.grid_n_points
        if n < 8 or n & (n - 1):
            raise ConfigError("grid.n_points must be a power of two >= 8")
        positive = ("grid_box_length", "nu", "rho_c", "picard_tol", "initial_amplitude")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{_key(name)} must be positive")
        if self.steps < 1 or self.picard_kmax < 2 or self.substeps < 8 or self.padding < 1:
            raise ConfigError("steps >= 1, picard.kmax >= 2, substeps >= 8 and padding >= 1 are required")
        if self.cutoff_epsilon < 0:
            raise ConfigError("cutoff.epsilon must be >= 0")
        choices = {
            "rho_mode": ("fixed", "budget"),
            "cutoff_style": ("smooth_bump", "paper_annulus", "sharp"),
            "pressure_path": ("kernel", "spectral"),
            "pressure_boundary": ("free", "periodic"),
            "initial_kind": INITIAL_KINDS,
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{_key(name)} must be one of {', '.join(allowed)}")
        if self.initial_kind == "nsf1-file" and not self.initial_path:
            raise ConfigError("initial.kind = nsf1-file needs initial.path")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _key(name: str) -> str:
    head, _, tail = name.partition("_")
    if head in ("grid", "rho", "cutoff", "picard", "pressure", "initial", "output"):
        return f"{head}.{tail}"
    return name


def _name(key: str) -> str:
    return key.replace(".", "_")


def _convert(raw: str, typ: str, key: str):
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        name = _name(key)
        if name not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        typ = _FIELDS[name].type
        values[name] = _convert(raw, typ if isinstance(typ, str) else typ.__name__, key)
    return RunConfig(**values)


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("not found")
    return parse_config(p.read_text())
