"""Command-line experiment runner.

Every subcommand reads a ``key = value`` config file and writes CSV (and
optionally NSF1) outputs into ``--out``.  Exit codes: 0 success, 1 config
error, 2 numerical failure; failures print one ``kind: reason`` line.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, oracles, scheme_burgers, scheme_ns
from .config import ConfigError, RunConfig, load_config
from .field import Grid, VectorField, derivative, dump_vector, load_vector, write_nsf1
from .kernels import CutoffSpec, sharp_split_norms, time_integrated_l1
from .parabolic import AdvectionDiffusionProblem, CFLError, check_gaussian_majorant

CONTRACTION_LIMIT = 0.5 + 1e-3


class NumericalFailure(RuntimeError):
    pass


def make_grid(cfg: RunConfig) -> Grid:
    return Grid(cfg.grid_n_points, cfg.grid_box_length)


def initial_velocity(cfg: RunConfig, grid: Grid) -> VectorField:
    kind, a = cfg.initial_kind, cfg.initial_amplitude
    if kind == "beltrami":
        return oracles.beltrami(grid, 0.0, cfg.nu, (a, a, a))[0]
    if kind == "colehopf":
        phi = oracles.cole_hopf_potential(grid, a)
        return VectorField(tuple(derivative(phi, i) for i in range(3)))
    if kind == "random-solenoidal":
        rng = np.random.default_rng(cfg.seed)
        return VectorField.from_array(grid, diagnostics.random_solenoidal(grid, rng, a))
    paths = [Path(f"{cfg.initial_path}_{i}.nsf1") for i in range(3)]
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        raise ConfigError(f"initial field file not found: {missing[0]}")
    try:
        return load_vector(grid, paths)
    except ValueError as exc:
        raise ConfigError(f"bad initial field: {exc}") from None


def ns_scheme(cfg: RunConfig, grid: Grid) -> scheme_ns.NsScheme:
    return scheme_ns.NsScheme(
        nu=cfg.nu,
        substeps=cfg.substeps,
        c=cfg.rho_c,
        rho_mode=cfg.rho_mode,
        pressure=cfg.pressure_path,
        boundary=cfg.pressure_boundary,
        cutoff=CutoffSpec(cfg.cutoff_epsilon, cfg.cutoff_style) if cfg.cutoff_epsilon > 0 else None,
        cutoff_style=cfg.cutoff_style,
        padding=cfg.padding,
        tol=cfg.picard_tol,
        kmax=cfg.picard_kmax,
        timing=cfg.output_runtime,
    )


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(diagnostics.csv_value(x) for x in r))
    path.write_text("\n".join(lines) + "\n")


# --- subcommands --------------------------------------------------------------


def cmd_run_burgers(cfg: RunConfig, out: Path, args) -> None:
    grid = make_grid(cfg)
    u0 = initial_velocity(cfg, grid)
    state = scheme_burgers.initial_state(u0, cfg.rho_c)
    failures = []
    lines = []
    for _ in range(cfg.steps):
        state, rep = scheme_burgers.run_time_step(
            state, cfg.nu, cfg.picard_tol, cfg.picard_kmax, c=cfg.rho_c, substeps=cfg.substeps,
            budget=cfg.rho_mode == "budget", timing=cfg.output_runtime,
        )
        if not rep.converged:
            failures.append(f"not-converged l={state.l - 1}")
        if cfg.output_dump_fields:
            dump_vector(out / f"u_l{state.l - 1:03d}", state.u_end)
    state.ledger.to_csv(out / "ledger.csv")
    lines.append(f"physical_time = {diagnostics.csv_value(state.physical_time)}")
    if cfg.initial_kind == "colehopf":
        phi = oracles.cole_hopf_potential(grid, cfg.initial_amplitude)
        exact = oracles.cole_hopf(phi, cfg.nu, state.physical_time)
        err = float(np.max(np.abs(state.u_end.array() - exact.array())))
        lines.append(f"colehopf_sup_error = {diagnostics.csv_value(err)}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    if failures:
        raise NumericalFailure(failures[0])


def cmd_run_ns(cfg: RunConfig, out: Path, args) -> None:
    grid = make_grid(cfg)
    sch = ns_scheme(cfg, grid)
    state = scheme_ns.initial_state(initial_velocity(cfg, grid), cfg.rho_c)
    failures = []
    for _ in range(cfg.steps):
        state, rep = sch.run_time_step(state)
        if not rep.converged:
            failures.append(f"not-converged l={state.l - 1}")
        if cfg.output_dump_fields:
            l = state.l - 1
            v = scheme_ns.recover_velocity(state)
            dump_vector(out / f"v_l{l:03d}", v)
            dump_vector(out / f"r_l{l:03d}", state.r_end)
            dump_vector(out / f"gradp_l{l:03d}", VectorField.from_array(grid, -sch.leray_of(v.array(), grid)))
    state.ledger.to_csv(out / "ledger.csv")
    write_csv(out / "control.csv", scheme_ns.ControlRow._fields, state.control_ledger)
    write_csv(out / "constants.csv", ("l",) + scheme_ns.ConstantsRecord._fields, [(state.l - 1,) + tuple(state.constants)])
    if failures:
        raise NumericalFailure(failures[0])


def cmd_verify_kernels(cfg: RunConfig, out: Path, args) -> None:
    grid = make_grid(cfg)
    h = grid.spacing
    rows = []
    r = 4 * h  # smallest resolved radius keeps the far tail outside the padded box small
    far, near = sharp_split_norms(grid, r, 2)
    rows.append(("far_L2_sq_sharp", r, far, 1 / (4 * np.pi * r), abs(far * 4 * np.pi * r - 1) <= 0.05))
    rows.append(("near_L1_sharp", r, near, r / 2, abs(near / (r / 2) - 1) <= 0.05))
    rho, nu = 1.0, cfg.nu
    prob = AdvectionDiffusionProblem(rho, nu, None, VectorField.zeros(grid)[0], None, cfg.substeps)
    rep = check_gaussian_majorant(prob)
    c_exact = (4 * np.pi * rho * nu) ** -1.5
    lam_exact = 1 / (rho * nu)
    rows.append(("heat_majorant_C", 0.0, rep.fitted.C, c_exact, abs(rep.fitted.C / c_exact - 1) <= 0.1))
    rows.append(("heat_majorant_lambda", 0.0, rep.fitted.lam, lam_exact, abs(rep.fitted.lam / lam_exact - 1) <= 0.1))
    rows.append(("heat_asymmetry", 0.0, rep.asymmetry, 0.0, rep.asymmetry <= 1e-10))
    cprime = time_integrated_l1(rep.fitted_derivative)
    rows.append(("C_prime", 0.0, cprime, float("nan"), bool(np.isfinite(cprime))))
    write_csv(out / "kernels.csv", ("check", "radius", "value", "expected", "pass"), rows)
    bad = [r[0] for r in rows if not r[4]]
    (out / "summary.txt").write_text("\n".join(f"{r[0]}: {'pass' if r[4] else 'FAIL'} value={diagnostics.csv_value(r[2])}" for r in rows) + "\n")
    if bad:
        raise NumericalFailure(f"kernel check failed: {bad[0]}")


def cmd_verify_inequalities(cfg: RunConfig, out: Path, args) -> None:
    rep = diagnostics.verify_inequality_suite(cfg.seed, args.trials, make_grid(cfg))
    rep.to_csv(out / "inequalities.csv")
    (out / "summary.txt").write_text(rep.summary() + "\n")
    if rep.violations:
        raise NumericalFailure(f"inequality violations={rep.violations}")


def cmd_verify_contraction(cfg: RunConfig, out: Path, args) -> None:
    grid = make_grid(cfg)
    v0 = initial_velocity(cfg, grid)
    factor = args.rho_factor
    records = []
    if args.scheme == "burgers":
        state = scheme_burgers.initial_state(v0, cfg.rho_c)
        for _ in range(cfg.steps):
            rho = factor * min(scheme_burgers.step_size(state.l, cfg.rho_c), scheme_burgers.contraction_budget(state.u_end))
            state, rep = scheme_burgers.run_time_step(
                state, cfg.nu, cfg.picard_tol, cfg.picard_kmax, c=cfg.rho_c, substeps=cfg.substeps,
                rho=rho, track_h2inf=True,
            )
            records += [(state.l - 1, rho, r.k, r.h2, r.h2inf, r.ratio, r.ratio_h2inf) for r in rep.records]
    else:
        sch = ns_scheme(cfg, grid)
        state = scheme_ns.initial_state(v0, cfg.rho_c)
        for _ in range(cfg.steps):
            constants = sch.estimate_constants(state)
            rho = factor * scheme_ns.step_size_controlled(constants).controlled
            state, rep = sch.run_time_step(state, rho=rho)
            records += [(state.l - 1, rho, r.k, r.h2, r.h2inf, r.ratio, r.ratio_h2inf) for r in rep.records]
    write_csv(out / "contraction.csv", ("l", "rho_l", "k", "h2", "h2inf", "ratio_h2", "ratio_h2inf"), records)
    ratios = np.array([x for r in records for x in r[5:] if np.isfinite(x)])
    worst = float(ratios.max()) if ratios.size else 0.0
    (out / "summary.txt").write_text(f"scheme = {args.scheme}\nrho_factor = {diagnostics.csv_value(factor)}\nmax_ratio = {diagnostics.csv_value(worst)}\n")
    if worst > CONTRACTION_LIMIT:
        raise NumericalFailure(f"contraction ratio {worst:.4g} > 0.5")


def cmd_estimate_constants(cfg: RunConfig, out: Path, args) -> None:
    grid = make_grid(cfg)
    sch = ns_scheme(cfg, grid)
    state = scheme_ns.initial_state(initial_velocity(cfg, grid), cfg.rho_c)
    c = sch.estimate_constants(state)
    steps = scheme_ns.step_size_controlled(c)
    write_csv(
        out / "constants.csv",
        scheme_ns.ConstantsRecord._fields + ("rho_controlled", "rho_uncontrolled"),
        [tuple(c) + tuple(steps)],
    )


def cmd_dump_oracle(cfg: RunConfig, out: Path, args) -> None:
    grid = make_grid(cfg)
    t = args.time
    if cfg.initial_kind == "beltrami":
        a = cfg.initial_amplitude
        v, p = oracles.beltrami(grid, t, cfg.nu, (a, a, a))
        dump_vector(out / "beltrami_v", v)
        write_nsf1(out / "beltrami_p.nsf1", p.values)
    elif cfg.initial_kind == "colehopf":
        phi = oracles.cole_hopf_potential(grid, cfg.initial_amplitude)
        dump_vector(out / "colehopf_u", oracles.cole_hopf(phi, cfg.nu, t))
    else:
        raise ConfigError(f"no oracle for initial.kind = {cfg.initial_kind}")


COMMANDS = {
    "run-burgers": cmd_run_burgers,
    "run-ns": cmd_run_ns,
    "verify-kernels": cmd_verify_kernels,
    "verify-inequalities": cmd_verify_inequalities,
    "verify-contraction": cmd_verify_contraction,
    "estimate-constants": cmd_estimate_constants,
    "dump-oracle": cmd_dump_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="picard-leray", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default="out")
        p.add_argument("--steps", type=int, default=None, help="override the config's steps")
        if name == "verify-inequalities":
            p.add_argument("--trials", type=int, default=100)
        if name == "verify-contraction":
            p.add_argument("--scheme", choices=("burgers", "ns"), default="ns")
            p.add_argument("--rho-factor", type=float, default=1.0)
        if name == "dump-oracle":
            p.add_argument("--time", type=float, default=0.0)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.steps is not None:
            cfg = cfg.replace(steps=args.steps)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config: {exc}")
        return 1
    except CFLError as exc:
        print(f"numerical: {exc}")
        return 2
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"numerical: {exc}")
        return 2
    except ValueError as exc:
        # parameter combinations the modules reject (e.g. an unresolvable cutoff)
        print(f"config: {exc}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
