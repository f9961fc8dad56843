"""Mesh-refinement convergence studies.

For each mesh size: solve the discrete problem, form the normal-map point
and the reference-feasible point, evaluate the three reference measures on
the nested reference mesh, and compare against the calibrated error budget.
Least-squares rate fits run on the log-log data of each measure.

Per-size pipeline tasks are independent and run in a thread pool capped by
the ``CRITMEASURE_THREADS`` environment variable; outputs are written in a
fixed order so identical configurations give byte-identical CSV files.
"""

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .criticality import (
    CriticalityReport,
    ErrorBudget,
    canonical_measure,
    canonical_measure_ref,
    gap_measure_ref,
    normal_map_measure,
    normal_map_measure_ref,
    normal_map_point,
    reference_feasible_point,
)
from .fe_space import CellFn
from .mesh import uniform
from .pde import estimate_gradient_modulus, rep_distance, rho_grad
from .problems import PROBLEM_IDS, build_problem
from .regularizer import discretize_bounds, project_box, rho_prox
from .solvers import SolveConfig, solve

__all__ = [
    "StudyConfig",
    "RateFit",
    "StudyPoint",
    "StudyOutcome",
    "fit_rate",
    "build_budget",
    "run_study",
    "write_outputs",
]

_SAMPLE_GRID = np.linspace(0.0, 1.0, 2049)


@dataclass
class StudyConfig:
    problem_id: str
    mesh_sizes: Tuple[int, ...]
    n_ref: int
    tau: float = 1.0
    solver: SolveConfig = field(default_factory=SolveConfig)
    output_dir: Optional[str] = None
    gap_regularization: float = 0.0

    def __post_init__(self):
        if self.problem_id not in PROBLEM_IDS:
            raise ValueError(
                "unknown problem id %r (available: %s)"
                % (self.problem_id, ", ".join(PROBLEM_IDS))
            )
        sizes = tuple(int(n) for n in self.mesh_sizes)
        if not sizes:
            raise ValueError("mesh_sizes must not be empty")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("mesh_sizes must be strictly increasing")
        if any(self.n_ref % n != 0 for n in sizes):
            raise ValueError("every mesh size must divide n_ref")
        self.mesh_sizes = sizes
        self.n_ref = int(self.n_ref)
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        # the solver terminates on the same measure parameter the study uses
        if self.solver.tau != self.tau:
            self.solver = replace(self.solver, tau=self.tau)


@dataclass
class RateFit:
    measure_kind: str
    rate: float
    intercept: float
    points: List[Tuple[float, float]]


@dataclass
class StudyPoint:
    n: int
    h: float
    report: CriticalityReport
    discrete_normal_map: float
    discrete_canonical: float
    solver_iters: int
    solver_converged: bool
    solver_measure: float


@dataclass
class StudyOutcome:
    points: List[StudyPoint]
    rates: List[RateFit]
    budget: ErrorBudget
    failures: List[Tuple[int, str]]

    @property
    def reports(self):
        return [p.report for p in self.points]


def fit_rate(points, measure_kind=""):
    """Ordinary least squares on (log h, log e) over the positive values."""
    pts = [(float(h), float(e)) for h, e in points if e > 0.0]
    if len(pts) < 2:
        raise ValueError("rate fit needs at least two positive values")
    x = np.log([h for h, _ in pts])
    y = np.log([e for _, e in pts])
    xm, ym = x.mean(), y.mean()
    rate = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    intercept = float(ym - rate * xm)
    return RateFit(measure_kind=measure_kind, rate=rate, intercept=intercept, points=pts)


def build_budget(prob, reg, tau, mesh_sizes, n_ref):
    """Calibrated error budget for one problem/regularizer pair.

    The gradient modulus constant comes from reference comparisons at
    feasible probe controls; the gradient bound and Lipschitz constant are
    sampled on the reference mesh over the enlarged box containing every
    admissible control.
    """
    m_ref = uniform(n_ref)
    p_ref = prob.on_mesh(m_ref)
    grad_constant = estimate_gradient_modulus(prob, reg, mesh_sizes, n_ref)

    lo_ref, hi_ref = discretize_bounds(reg, m_ref)
    mid = CellFn(m_ref, 0.5 * (lo_ref.values + hi_ref.values))
    start = project_box(reg, m_ref, CellFn(m_ref, np.zeros(m_ref.n_cells)))
    probes = [start, lo_ref, hi_ref, mid]
    reps = [p_ref.gradient_rep(q) for q in probes]
    grad_bound = max(math.hypot(r.l2, r.h1) for r in reps)

    lo_min = float(reg.lower(_SAMPLE_GRID).min()) - 1.0
    hi_max = float(reg.upper(_SAMPLE_GRID).max()) + 1.0
    corners = [CellFn(m_ref, np.full(m_ref.n_cells, lo_min)),
               CellFn(m_ref, np.full(m_ref.n_cells, hi_max))]
    pool = probes + corners
    pool_reps = reps + [p_ref.gradient_rep(c) for c in corners]
    lipschitz = 0.0
    for i in range(len(pool)):
        for j in range(i + 1, len(pool)):
            du = float(
                np.sqrt(np.sum(m_ref.widths * (pool[i].values - pool[j].values) ** 2))
            )
            if du < 1e-12:
                continue
            dg = rep_distance(pool_reps[i], pool_reps[j], m_ref)
            lipschitz = max(lipschitz, dg / du)

    return ErrorBudget(
        tau=tau,
        lipschitz_grad=lipschitz,
        grad_bound=grad_bound,
        lipschitz_phi=reg.beta,
        diam_feasible=hi_max - lo_min,
        projection_modulus=lambda h: h / np.pi,
        prox_modulus=lambda h: rho_prox(reg, h),
        gradient_modulus=lambda h: rho_grad(prob, h, grad_constant),
    )


def _thread_count(n_tasks):
    env = os.environ.get("CRITMEASURE_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            cap = 1
        return min(cap, n_tasks)
    return min(os.cpu_count() or 1, n_tasks)


def _study_point(prob, reg, cfg, budget, m_ref, n):
    m = uniform(n)
    pm = prob.on_mesh(m)
    result = solve(pm, reg, m, cfg.solver)
    u = result.u_star
    g = pm.gradient(u)
    v = normal_map_point(u, g, cfg.tau)
    u_bar = reference_feasible_point(u, reg, m_ref)
    report = CriticalityReport(
        h=m.h,
        h_ref=m_ref.h,
        normal_map=normal_map_measure_ref(prob, reg, m_ref, cfg.tau, v),
        canonical=canonical_measure_ref(prob, reg, m_ref, cfg.tau, u),
        gap=gap_measure_ref(prob, reg, m_ref, u_bar, cfg.gap_regularization),
        budget_normal_map=budget.normal_map(m.h),
        budget_canonical=budget.canonical(m.h),
        budget_gap=budget.gap(m.h),
    )
    return StudyPoint(
        n=n,
        h=m.h,
        report=report,
        discrete_normal_map=normal_map_measure(prob, reg, m, cfg.tau, v),
        discrete_canonical=canonical_measure(prob, reg, m, cfg.tau, u),
        solver_iters=result.iters,
        solver_converged=result.converged,
        solver_measure=result.final_measure,
    )


def run_study(cfg, instance=None):
    """Run the refinement study described by ``cfg``.

    ``instance`` optionally supplies a prebuilt (problem, regularizer) pair,
    e.g. a built-in instance with overridden data.
    """
    prob, reg = instance if instance is not None else build_problem(
        cfg.problem_id, cfg.mesh_sizes[0]
    )
    budget = build_budget(prob, reg, cfg.tau, cfg.mesh_sizes, cfg.n_ref)
    m_ref = uniform(cfg.n_ref)

    points = []
    failures = []
    workers = _thread_count(len(cfg.mesh_sizes))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            n: pool.submit(_study_point, prob, reg, cfg, budget, m_ref, n)
            for n in cfg.mesh_sizes
        }
        for n in cfg.mesh_sizes:
            try:
                points.append(futures[n].result())
            except Exception as exc:  # noqa: BLE001 - recorded, study continues
                failures.append((n, "%s: %s" % (type(exc).__name__, exc)))

    rates = []
    for kind, pick in (
        ("normal_map", lambda p: p.report.normal_map),
        ("canonical", lambda p: p.report.canonical),
        ("gap", lambda p: p.report.gap),
    ):
        data = [(p.h, pick(p)) for p in points]
        dropped = [d for d in data if d[1] <= 0.0]
        if dropped:
            warnings.warn(
                "%s: %d exactly-critical value(s) excluded from the rate fit"
                % (kind, len(dropped))
            )
        try:
            rates.append(fit_rate(data, kind))
        except ValueError:
            warnings.warn("%s: not enough positive values for a rate fit" % kind)

    outcome = StudyOutcome(points=points, rates=rates, budget=budget, failures=failures)
    if cfg.output_dir is not None:
        write_outputs(outcome, cfg.output_dir)
    return outcome


def write_outputs(outcome, out_dir):
    """Write study.csv, rates.csv and rates.svg into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "study.csv", "w") as fh:
        fh.write(CriticalityReport.CSV_HEADER + "\n")
        for p in outcome.points:
            fh.write(p.report.csv_row() + "\n")
    with open(out / "rates.csv", "w") as fh:
        fh.write("measure,rate,intercept\n")
        for r in outcome.rates:
            fh.write("%s,%r,%r\n" % (r.measure_kind, r.rate, r.intercept))
    _write_rate_plot(outcome, out / "rates.svg")


def _write_rate_plot(outcome, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for r in outcome.rates:
        hs = np.array([h for h, _ in r.points])
        es = np.array([e for _, e in r.points])
        line = ax.loglog(hs, es, "o", label="%s (rate %.2f)" % (r.measure_kind, r.rate))
        fit = np.exp(r.intercept) * hs**r.rate
        ax.loglog(hs, fit, "--", color=line[0].get_color(), alpha=0.6)
    ax.set_xlabel("mesh width h")
    ax.set_ylabel("reference measure")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
