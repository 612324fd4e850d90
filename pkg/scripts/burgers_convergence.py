"""Burgers scheme against the Cole-Hopf solution at several resolutions.

Prints the sup error, the final time and the largest Picard contraction ratio
for each grid.  Usage: python scripts/burgers_convergence.py [steps]
"""

import sys

import numpy as np

from picard_leray import scheme_burgers as sb
from picard_leray.field import Grid
from picard_leray.oracles import cole_hopf, cole_hopf_potential


def main(steps: int = 5, nu: float = 0.1, amplitude: float = 0.1, c: float = 0.1) -> None:
    print(f"{'N':>4} {'t_final':>9} {'sup error':>11} {'max ratio':>10}")
    for n in (16, 32, 64):
        g = Grid(n)
        phi = cole_hopf_potential(g, amplitude)
        reports = []
        state, _ = sb.run(cole_hopf(phi, nu, 0.0), steps, nu, c=c, reports=reports, budget=False)
        err = np.max(np.abs(state.u_end.array() - cole_hopf(phi, nu, state.physical_time).array()))
        ratio = max(rep.max_ratio for rep in reports)
        print(f"{n:>4} {state.physical_time:>9.4f} {err:>11.3e} {ratio:>10.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 5)
