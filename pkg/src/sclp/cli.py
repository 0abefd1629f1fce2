"""Command-line pipeline: validate -> assemble -> solve -> extract -> verify.

Exit codes: 0 ok, 2 infeasible LP, 3 unbounded LP, 4 validation/config
failure, 5 numerical failure.  Failures print a single machine-parsable
line ``error kind=<ExceptionName> msg="..."`` on stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import simplex
from .basis import BasisFamily
from .discretize import (NORMALIZED, RESCALED, GridError, assemble_discounted_lp,
                         assemble_lta_lp, build_grid, constraint_residual)
from .model import DISCOUNTED, JUMP, Criterion, ProblemSpec, validate_conditions
from .policy import (MeasurePair, boundary_mass_diagnostic, extract_strict,
                     marginals_and_kernels)
from .problems import BUILTIN_PROBLEMS, ProblemFileError, load_problem
from .simplex import SingularBasisError, export_mps, parse_mps, solve
from .verify import (BandPolicy, SimConfig, SimulationError, band_policy_oracle,
                     band_search, simulate)

MODES = ("validate", "solve", "policy", "verify", "band-oracle",
         "export-mps", "report")

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_UNBOUNDED = 3
EXIT_VALIDATION = 4
EXIT_NUMERICAL = 5


class PipelineError(RuntimeError):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sclp",
        description="Occupation-measure LP solver for singularly controlled "
                    "one-dimensional diffusions.")
    p.add_argument("--problem", required=True,
                   help="built-in name (inventory, finite-fuel) or INI file path")
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--n-state", type=int, default=41)
    p.add_argument("--n-control", type=int, default=11)
    p.add_argument("--basis", type=int, default=12,
                   help="number of cubic B-spline test functions")
    p.add_argument("--form", choices=(NORMALIZED, RESCALED), default=NORMALIZED,
                   help="discounted LP form")
    p.add_argument("--alpha", type=float, default=None,
                   help="override the discount rate of a discounted problem")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=50000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=200)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--horizon", type=float, default=200.0)
    p.add_argument("--burn-in", type=float, default=20.0)
    p.add_argument("--band-s", type=float, default=None,
                   help="reorder level for a single band-oracle evaluation")
    p.add_argument("--band-S", type=float, default=None,
                   help="order-up-to level for a single band-oracle evaluation")
    p.add_argument("--out", default=".")
    return p


def _load(args) -> tuple[ProblemSpec, str]:
    """Resolve the problem argument; returns (problem, content hash)."""
    if args.problem in BUILTIN_PROBLEMS:
        problem = BUILTIN_PROBLEMS[args.problem]()
        digest = hashlib.sha256(f"builtin:{args.problem}".encode()).hexdigest()
    else:
        if not os.path.exists(args.problem):
            raise PipelineError(f"problem file not found: {args.problem}",
                                EXIT_VALIDATION)
        problem = load_problem(args.problem)
        with open(args.problem, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
    if args.alpha is not None:
        if problem.criterion.kind != DISCOUNTED:
            raise PipelineError("--alpha only applies to discounted problems",
                                EXIT_VALIDATION)
        crit = Criterion(kind=DISCOUNTED, alpha=args.alpha,
                         nu0=problem.criterion.nu0)
        problem = ProblemSpec(state=problem.state, control=problem.control,
                              gen_a=problem.gen_a, gen_b=problem.gen_b,
                              costs=problem.costs, criterion=crit,
                              name=problem.name)
    return problem, digest


def _resolved_config(args, digest) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items())}
    cfg["problem_sha256"] = digest
    return cfg


def _config_header(args, digest) -> str:
    return "# config " + json.dumps(_resolved_config(args, digest),
                                    sort_keys=True) + "\n"


def _assemble(problem, args):
    grid = build_grid(problem, args.n_state, args.n_control)
    basis = BasisFamily.cubic_on_interval(problem.state.x_lo, problem.state.x_hi,
                                          args.basis)
    if problem.criterion.kind == DISCOUNTED:
        lp = assemble_discounted_lp(problem, grid, basis, form=args.form)
    else:
        lp = assemble_lta_lp(problem, grid, basis)
    return grid, basis, lp


def _required_mass(problem, args) -> float:
    if problem.criterion.kind == DISCOUNTED and args.form == RESCALED:
        return 1.0 / problem.criterion.alpha
    return 1.0


def _solve_or_raise(lp, args, out_dir):
    sol = solve(lp, tol=args.tol, max_iter=args.max_iter)
    if sol.status == simplex.INFEASIBLE:
        if sol.farkas is not None:
            np.savetxt(os.path.join(out_dir, "farkas.csv"),
                       sol.farkas.reshape(1, -1), delimiter=",")
        raise PipelineError(f"LP {lp.name} is infeasible "
                            "(Farkas certificate in farkas.csv)", EXIT_INFEASIBLE)
    if sol.status == simplex.UNBOUNDED:
        raise PipelineError(f"LP {lp.name} is unbounded", EXIT_UNBOUNDED)
    if sol.status != simplex.OPTIMAL:
        raise PipelineError(f"LP {lp.name}: iteration limit reached",
                            EXIT_NUMERICAL)
    return sol


def _policy_from(problem, grid, sol, args):
    mass = _required_mass(problem, args)
    measures = MeasurePair.from_solution(grid, sol.weights, required_mass=mass)
    policy = marginals_and_kernels(grid, measures)
    strict, bad = extract_strict(policy)
    policy.strict = strict
    return measures, policy, bad


def _sim_config(args) -> SimConfig:
    return SimConfig(dt=args.dt, horizon=args.horizon, n_paths=args.paths,
                     seed=args.seed, burn_in=args.burn_in)


def _default_band_grids(problem):
    lo, hi = problem.state.x_lo, problem.state.x_hi
    w = hi - lo
    s_grid = np.linspace(lo + 0.05 * w, lo + 0.55 * w, 8)
    big_grid = np.linspace(lo + 0.30 * w, hi - 0.05 * w, 8)
    return s_grid, big_grid


def run(args) -> int:
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    problem, digest = _load(args)
    header = _config_header(args, digest)

    if args.mode == "validate":
        grid = build_grid(problem, args.n_state, args.n_control)
        report = validate_conditions(problem, grid)
        text = header + "\n".join(report.lines()) + "\n"
        with open(os.path.join(out_dir, "validate.txt"), "w") as fh:
            fh.write(text)
        print(text, end="")
        return EXIT_OK if report.passed else EXIT_VALIDATION

    if args.mode == "export-mps":
        _, _, lp = _assemble(problem, args)
        text = export_mps(lp)
        parse_mps(text)  # round-trip sanity check before writing
        path = os.path.join(out_dir, "problem.mps")
        with open(path, "w") as fh:
            fh.write(text)
        print(f"wrote {path} ({lp.n_cols} columns, "
              f"{lp.b_eq.size + lp.b_ub.size} rows)")
        return EXIT_OK

    if args.mode == "band-oracle":
        cfg = _sim_config(args)
        if (args.band_s is None) != (args.band_S is None):
            raise PipelineError("--band-s and --band-S must be given together",
                                EXIT_VALIDATION)
        lines = [header]
        if args.band_s is not None:
            est = band_policy_oracle(problem, BandPolicy(args.band_s, args.band_S), cfg)
            lines.append(f"s,S,cost,half_width\n{args.band_s!r},{args.band_S!r},"
                         f"{est.cost!r},{est.half_width!r}\n")
        else:
            s_grid, big_grid = _default_band_grids(problem)
            res = band_search(problem, s_grid, big_grid, cfg)
            lines.append("s,S,cost,half_width\n")
            for s, S, c, h in res.table:
                lines.append(f"{s!r},{S!r},{c!r},{h!r}\n")
            lines.append(f"# best s={res.best.s!r} S={res.best.big_s!r} "
                         f"cost={res.cost!r} +/- {res.half_width!r}\n")
        text = "".join(lines)
        with open(os.path.join(out_dir, "band_table.csv"), "w") as fh:
            fh.write(text)
        print(text, end="")
        return EXIT_OK

    # Remaining modes share the assemble + solve front end.
    grid, basis, lp = _assemble(problem, args)
    sol = _solve_or_raise(lp, args, out_dir)
    eq_res, ub_res = constraint_residual(lp, sol.weights)
    np.savetxt(os.path.join(out_dir, "solution.csv"),
               sol.weights.reshape(1, -1), delimiter=",")
    solve_line = (f"status={sol.status} objective={sol.objective!r} "
                  f"iterations={sol.iterations} eq_residual={eq_res!r} "
                  f"ub_violation={ub_res!r}")

    if args.mode == "solve":
        with open(os.path.join(out_dir, "solve.txt"), "w") as fh:
            fh.write(header + solve_line + "\n")
        print(solve_line)
        return EXIT_OK

    measures, policy, bad = _policy_from(problem, grid, sol, args)
    if args.mode == "policy":
        text = header + policy.to_text()
        if bad:
            text += f"# non-degenerate nodes (no strict map): {bad}\n"
        text += f"# boundary mass (10% margin): {boundary_mass_diagnostic(policy, 0.1)!r}\n"
        with open(os.path.join(out_dir, "policy.txt"), "w") as fh:
            fh.write(text)
        print(text, end="")
        return EXIT_OK

    cfg = _sim_config(args)
    report = simulate(problem, policy, cfg, basis=basis)
    if args.mode == "verify":
        text = header + report.to_text()
        with open(os.path.join(out_dir, "verify_report.txt"), "w") as fh:
            fh.write(text)
        with open(os.path.join(out_dir, "verify_report.csv"), "w") as fh:
            fh.write(report.to_csv())
        print(text, end="")
        return EXIT_OK

    # mode == report: consolidated pipeline artifacts with agreement flags.
    vreport = validate_conditions(problem, grid)
    lines = [header, "## conditions\n"]
    lines += [ln + "\n" for ln in vreport.lines()]
    lines.append("## lp\n" + solve_line + "\n")
    lines.append("## simulation\n" + report.to_text())
    sim_ok = abs(report.cost.value - sol.objective) <= max(
        0.05 * abs(sol.objective), report.cost.half_width)
    lines.append(f"lp_vs_simulation_agree: {'pass' if sim_ok else 'FAIL'}\n")
    if problem.gen_b.kind == JUMP and problem.criterion.kind != DISCOUNTED:
        s_grid, big_grid = _default_band_grids(problem)
        res = band_search(problem, s_grid, big_grid, cfg)
        lines.append(f"## band oracle\nbest s={res.best.s!r} S={res.best.big_s!r} "
                     f"cost={res.cost!r} +/- {res.half_width!r}\n")
        orc_ok = abs(res.cost - sol.objective) <= max(
            0.05 * abs(sol.objective), res.half_width)
        lines.append(f"lp_vs_oracle_agree: {'pass' if orc_ok else 'FAIL'}\n")
    lines.append(f"boundary_mass_10pct: {boundary_mass_diagnostic(policy, 0.1)!r}\n")
    text = "".join(lines)
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write(text)
    print(text, end="")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help; usage errors count as config failures.
        return 0 if exc.code == 0 else EXIT_VALIDATION
    try:
        return run(args)
    except PipelineError as exc:
        print(f'error kind=PipelineError msg="{exc}"', file=sys.stderr)
        return exc.code
    except (ProblemFileError, GridError, ValueError) as exc:
        print(f'error kind={type(exc).__name__} msg="{exc}"', file=sys.stderr)
        return EXIT_VALIDATION
    except (SingularBasisError, SimulationError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f'error kind={type(exc).__name__} msg="{exc}"', file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
