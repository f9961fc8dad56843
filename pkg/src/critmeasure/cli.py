"""Command-line interface.

Subcommands: ``solve`` one instance and print its criticality report,
``study`` a refinement sequence, ``verify`` the randomized invariant
suites, and ``example-lp`` for the analytic box-constrained linear program
with closed-form measure values.

Configuration files are flat ``key = value`` lines under the sections
[problem], [regularizer], [solver] and [study]; unknown keys are rejected
by name.  Exit codes: 0 on success, 1 when a check fails, 2 on config
errors.
"""

import argparse
import configparser
import sys

import numpy as np

from .criticality import canonical_measure_ref, normal_map_measure_ref, normal_map_point
from .mesh import uniform
from .problems import PROBLEM_IDS, build_problem, make_function
from .solvers import SolveConfig
from .study import StudyConfig, run_study
from .verification import standard_checks

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2

_SECTION_KEYS = {
    "problem": {"id", "target", "source"},
    "regularizer": {"beta", "lower", "upper"},
    "solver": {"method", "tol", "max_iters", "step_rule"},
    "study": {"mesh_sizes", "n_ref", "tau", "out"},
}


class ConfigError(Exception):
    pass


def _load_config(path):
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError("cannot read config file %r" % path)
    data = {}
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError("unknown section [%s] in %s" % (section, path))
        allowed = _SECTION_KEYS[section]
        data[section] = {}
        for key, value in parser.items(section):
            if key not in allowed:
                raise ConfigError(
                    "unknown key %r in section [%s] (allowed: %s)"
                    % (key, section, ", ".join(sorted(allowed)))
                )
            data[section][key] = value
    return data


def _problem_overrides(cfg):
    problem = cfg.get("problem", {})
    regularizer = cfg.get("regularizer", {})
    overrides = {}
    if "target" in problem:
        overrides["target"] = make_function(problem["target"])
    if "source" in problem:
        overrides["source"] = make_function(problem["source"])
    if "beta" in regularizer:
        overrides["beta"] = float(regularizer["beta"])
    if "lower" in regularizer:
        overrides["lower"] = make_function(regularizer["lower"])
    if "upper" in regularizer:
        overrides["upper"] = make_function(regularizer["upper"])
    return overrides


def _solver_config(cfg, args):
    solver = cfg.get("solver", {})
    kwargs = {}
    method = getattr(args, "method", None) or solver.get("method")
    if method:
        kwargs["method"] = method
    tol = getattr(args, "tol", None)
    if tol is None and "tol" in solver:
        tol = float(solver["tol"])
    if tol is not None:
        kwargs["tol"] = tol
    if "max_iters" in solver:
        kwargs["max_iters"] = int(solver["max_iters"])
    if "step_rule" in solver:
        kwargs["step_rule"] = solver["step_rule"]
    return SolveConfig(**kwargs)


def _report_lines(report):
    yield "h               = %r" % report.h
    yield "h_ref           = %r" % report.h_ref
    yield "normal_map      = %r" % report.normal_map
    yield "canonical       = %r" % report.canonical
    yield "gap             = %r" % report.gap
    yield "budget_normal   = %r" % report.budget_normal_map
    yield "budget_canonical= %r" % report.budget_canonical
    yield "budget_gap      = %r" % report.budget_gap


def cmd_solve(args):
    cfg = _load_config(args.config) if args.config else {}
    problem_id = args.problem or cfg.get("problem", {}).get("id", "linear")
    n = args.n or 64
    n_ref = args.n_ref or 64 * n
    tau = args.tau if args.tau is not None else float(cfg.get("study", {}).get("tau", 1.0))
    solver_cfg = _solver_config(cfg, args)
    study_cfg = StudyConfig(
        problem_id=problem_id,
        mesh_sizes=(n,),
        n_ref=n_ref,
        tau=tau,
        solver=solver_cfg,
        output_dir=args.out,
    )
    overrides = _problem_overrides(cfg)
    instance = build_problem(problem_id, n, **overrides) if overrides else None
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # a single mesh size has no rate fit
        outcome = run_study(study_cfg, instance=instance)
    if outcome.failures:
        for n_failed, message in outcome.failures:
            print("solve failed at n=%d: %s" % (n_failed, message))
        return EXIT_CHECK_FAILED
    point = outcome.points[0]
    print("problem = %s, n = %d, n_ref = %d, tau = %r" % (problem_id, n, n_ref, tau))
    print(
        "solver: %d iterations, converged=%s, final measure %.3e"
        % (point.solver_iters, point.solver_converged, point.solver_measure)
    )
    for line in _report_lines(point.report):
        print(line)
    return EXIT_OK


def cmd_study(args):
    cfg = _load_config(args.config) if args.config else {}
    study_section = cfg.get("study", {})
    problem_id = args.problem or cfg.get("problem", {}).get("id", "linear")
    if "mesh_sizes" in study_section:
        mesh_sizes = tuple(int(t) for t in study_section["mesh_sizes"].split(","))
    else:
        mesh_sizes = (16, 32, 64, 128, 256)
    n_ref = args.n_ref or int(study_section.get("n_ref", 64 * max(mesh_sizes)))
    tau = args.tau if args.tau is not None else float(study_section.get("tau", 1.0))
    out = args.out or study_section.get("out", "study_out")
    overrides = _problem_overrides(cfg)
    study_cfg = StudyConfig(
        problem_id=problem_id,
        mesh_sizes=mesh_sizes,
        n_ref=n_ref,
        tau=tau,
        solver=_solver_config(cfg, args),
        output_dir=out,
    )
    instance = (
        build_problem(problem_id, mesh_sizes[0], **overrides) if overrides else None
    )
    outcome = run_study(study_cfg, instance=instance)
    print("study: %s over n = %s, n_ref = %d" % (problem_id, list(mesh_sizes), n_ref))
    for p in outcome.points:
        print(
            "  n=%5d  h=%.5g  normal_map=%.6e  canonical=%.6e  gap=%.6e"
            % (p.n, p.h, p.report.normal_map, p.report.canonical, p.report.gap)
        )
    for r in outcome.rates:
        print("  rate %-11s = %.4f" % (r.measure_kind, r.rate))
    for n_failed, message in outcome.failures:
        print("  FAILED at n=%d: %s" % (n_failed, message))
    print("outputs written to %s" % out)
    return EXIT_CHECK_FAILED if outcome.failures else EXIT_OK


def cmd_verify(args):
    results = standard_checks(quick=not args.full)
    for res in results:
        print(res.line())
    passed = sum(r.passed for r in results)
    print("%d/%d suites passed" % (passed, len(results)))
    return EXIT_OK if passed == len(results) else EXIT_CHECK_FAILED


def cmd_example_lp(args):
    """Closed-form order-optimality case: both reference measures equal

        sqrt(h^2 - h_ref^2) / (2*sqrt(3))

    which tends to h/(2*sqrt(3)) as the reference mesh is refined."""
    sizes = [args.n] if args.n else [4, 8, 16, 32, 64]
    tau = args.tau if args.tau is not None else 1.0
    print("n      h          normal_map    canonical     predicted     rel_err")
    ok = True
    for n in sizes:
        n_ref = args.n_ref or 64 * n
        prob, reg = build_problem("example_lp", n)
        m = uniform(n)
        m_ref = uniform(n_ref)
        from .fe_space import project_dg0

        u_star = project_dg0(reg.lower, m)
        grad = prob.gradient(u_star)
        v_star = normal_map_point(u_star, grad, tau)
        nor = normal_map_measure_ref(prob, reg, m_ref, tau, v_star)
        can = canonical_measure_ref(prob, reg, m_ref, tau, u_star)
        predicted = np.sqrt(m.h**2 - m_ref.h**2) / (2.0 * np.sqrt(3.0))
        rel = max(abs(nor - predicted), abs(can - predicted)) / predicted
        tol = 2.0 * (m_ref.h / m.h)
        ok = ok and rel <= tol
        print(
            "%-6d %-10.6g %-13.8g %-13.8g %-13.8g %.3e"
            % (n, m.h, nor, can, predicted, rel)
        )
    print("order-optimality check %s" % ("PASS" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="critmeasure",
        description="Criticality-measure discretization error studies on (0, 1).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_problem=True):
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--n", type=int, help="number of mesh cells")
        p.add_argument("--n-ref", type=int, dest="n_ref", help="reference mesh cells")
        p.add_argument("--tau", type=float, help="measure parameter")
        p.add_argument("--tol", type=float, help="solver termination tolerance")
        p.add_argument("--out", help="output directory")
        p.add_argument("--method", choices=["pg", "fw"], help="solver method")
        if with_problem:
            p.add_argument(
                "--problem",
                choices=[p_.replace("_", "-") for p_ in PROBLEM_IDS],
                help="built-in problem instance",
            )

    p_solve = sub.add_parser("solve", help="solve one instance and report measures")
    add_common(p_solve)
    p_solve.set_defaults(fn=cmd_solve)

    p_study = sub.add_parser("study", help="run a mesh-refinement study")
    add_common(p_study)
    p_study.set_defaults(fn=cmd_study)

    p_verify = sub.add_parser("verify", help="run the invariant suites")
    p_verify.add_argument("--full", action="store_true", help="full instance counts")
    p_verify.set_defaults(fn=cmd_verify)

    p_lp = sub.add_parser(
        "example-lp", help="analytic order-optimality case with exact values"
    )
    add_common(p_lp, with_problem=False)
    p_lp.set_defaults(fn=cmd_example_lp)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    if getattr(args, "problem", None):
        args.problem = args.problem.replace("-", "_")
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
