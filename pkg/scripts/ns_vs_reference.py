"""One Navier-Stokes macro step on both pressure paths, compared with the
exact Beltrami decay and the pseudo-spectral reference solver.

Usage: python scripts/ns_vs_reference.py [n_points]   (kernel path needs n >= 32)
"""

import sys
import time

import numpy as np

from picard_leray import scheme_ns as ns
from picard_leray.diagnostics import random_solenoidal
from picard_leray.field import Grid, VectorField
from picard_leray.oracles import beltrami, reference_projection_solver


def rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def main(n: int = 32, nu: float = 0.1, c: float = 0.05) -> None:
    g = Grid(n)
    cases = {
        "beltrami": beltrami(g, 0.0, nu)[0],
        "random": VectorField.from_array(g, random_solenoidal(g, np.random.default_rng(0), 0.5)),
    }
    for path in ("spectral", "kernel"):
        sch = ns.NsScheme(nu, c=c, pressure=path)
        for name, v0 in cases.items():
            t0 = time.perf_counter()
            state, _ = sch.run(v0, 1)
            v = ns.recover_velocity(state).array()
            t = state.physical_time
            ref = reference_projection_solver(v0, nu, t, 1e-3).array()
            line = f"{path:>8} {name:>8} t={t:.3f} vs reference {rel_l2(v, ref):.2e}"
            if name == "beltrami":
                line += f" vs exact {rel_l2(v, beltrami(g, t, nu)[0].array()):.2e}"
            print(line + f" ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 32)
