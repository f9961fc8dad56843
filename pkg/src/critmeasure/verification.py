"""Randomized invariant checks, shared by the test suite and the CLI.

Each check draws seeded random instances and verifies an exact relationship
with a stated slack: the cellwise prox against brute-force grid
minimization, adjoint gradients against central finite differences, and the
inequalities tying the three criticality measures together.
"""

from dataclasses import dataclass

import numpy as np

from .criticality import canonical_measure, gap_measure, normal_map_measure_ref
from .fe_space import CellFn, SampledFn
from .mesh import refine_nested, uniform
from .pde import KINDS, ReducedProblem
from .regularizer import (
    CompositeRegularizer,
    discretize_bounds,
    prox_continuous_at_cellfn,
    prox_discrete,
)

__all__ = [
    "CheckResult",
    "check_prox_bruteforce",
    "check_gradient_directional",
    "check_normal_map_dominates",
    "check_gap_dominates",
    "check_gap_regularization_monotone",
    "standard_checks",
]

_BASE_SEED = 20260810


@dataclass
class CheckResult:
    name: str
    passed: bool
    count: int
    failures: int
    worst: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = " (%s)" % self.detail if self.detail else ""
        return "%s %s: %d instances, %d failures, worst slack %.3e%s" % (
            status,
            self.name,
            self.count,
            self.failures,
            self.worst,
            extra,
        )


def _sine_fn(rng, base, amp_cap):
    amp = rng.uniform(-amp_cap, amp_cap)
    freq = float(rng.integers(1, 4))
    h1 = abs(amp) * freq * np.pi * np.sqrt(2.0)

    def fn(x, base=base, amp=amp, freq=freq):
        return base + amp * np.sin(2.0 * np.pi * freq * np.asarray(x, dtype=float))

    return SampledFn(fn, h1_seminorm=h1)


def _affine_fn(rng, base, slope_cap):
    slope = rng.uniform(-slope_cap, slope_cap)

    def fn(x, base=base, slope=slope):
        return base + slope * (np.asarray(x, dtype=float) - 0.5)

    return SampledFn(fn, h1_seminorm=abs(slope))


def _random_regularizer(rng, kind):
    beta = 0.0 if rng.random() < 0.3 else 10.0 ** rng.uniform(-3.0, -0.5)
    if kind == "bilinear":
        lo_base = rng.uniform(0.0, 0.3)
    else:
        lo_base = rng.uniform(-2.0, -0.3)
    hi_base = lo_base + rng.uniform(0.8, 2.5)
    margin = 0.3 * (hi_base - lo_base)
    style = rng.integers(3)
    if style == 0:
        lower, upper = SampledFn.constant(lo_base), SampledFn.constant(hi_base)
    elif style == 1:
        lower = _affine_fn(rng, lo_base, margin)
        upper = _affine_fn(rng, hi_base, margin)
    else:
        lower = _sine_fn(rng, lo_base, margin / 3.0)
        upper = _sine_fn(rng, hi_base, margin / 3.0)
    return CompositeRegularizer(beta, lower, upper)


def _random_problem(rng, kind, n):
    target = _sine_fn(rng, rng.uniform(-2.0, 2.0), 2.0)
    source = _sine_fn(rng, rng.uniform(-3.0, 3.0), 3.0) if kind != "linear" else None
    return ReducedProblem(kind, target, source, state_mesh=uniform(n))


def _random_feasible(rng, m, reg):
    lo, hi = discretize_bounds(reg, m)
    t = rng.uniform(0.0, 1.0, m.n_cells)
    return CellFn(m, lo.values + t * (hi.values - lo.values))


def check_prox_bruteforce(count=1000, seed=_BASE_SEED):
    """Cellwise prox against grid minimization of the composite objective."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    for _ in range(count):
        beta = 0.0 if rng.random() < 0.2 else rng.uniform(0.0, 2.0)
        tau = 10.0 ** rng.uniform(-1.0, 0.5)
        lo = rng.uniform(-2.0, 0.5)
        hi = lo + rng.uniform(0.05, 2.0)
        w = rng.uniform(lo - 1.5, hi + 1.5)
        m = uniform(1)
        reg = CompositeRegularizer(beta, SampledFn.constant(lo), SampledFn.constant(hi))
        got = prox_discrete(reg, m, tau, CellFn(m, [w])).values[0]
        grid = np.linspace(lo, hi, int(round((hi - lo) / 1e-6)) + 1)
        energy = 0.5 * (grid - w) ** 2 + (beta / tau) * np.abs(grid)
        best = grid[int(np.argmin(energy))]
        err = abs(got - best)
        worst = max(worst, err)
        if err > 2e-6:
            failures += 1
    return CheckResult("prox vs brute force", failures == 0, count, failures, worst)


def check_gradient_directional(per_kind=20, seed=_BASE_SEED + 1, eps=1e-5, rtol=1e-6):
    """Adjoint gradients against central finite differences."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    count = 0
    for kind in KINDS:
        for _ in range(per_kind):
            count += 1
            n = int(rng.integers(8, 25))
            m = uniform(n)
            reg = _random_regularizer(rng, kind)
            prob = _random_problem(rng, kind, n)
            u = _random_feasible(rng, m, reg)
            delta = rng.standard_normal(n)
            delta /= np.sqrt(np.sum(m.widths * delta**2))
            d = CellFn(m, delta)
            g = prob.gradient(u)
            directional = float(np.sum(m.widths * g.values * delta))
            up = CellFn(m, u.values + eps * delta)
            dn = CellFn(m, u.values - eps * delta)
            fd = (prob.objective(up) - prob.objective(dn)) / (2.0 * eps)
            rel = abs(fd - directional) / max(abs(directional), 1e-8)
            worst = max(worst, rel)
            if rel > rtol:
                failures += 1
    return CheckResult(
        "gradient vs finite differences", failures == 0, count, failures, worst
    )


def check_normal_map_dominates(count=500, seed=_BASE_SEED + 2, slack=1e-10):
    """At prox points, the fixed-point residual is at most the normal-map
    residual divided by tau; checked on the reference discretization."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = -np.inf
    for i in range(count):
        kind = KINDS[i % len(KINDS)]
        n = int(rng.integers(3, 11))
        factor = int(rng.choice([4, 8]))
        m = uniform(n)
        m_ref = refine_nested(m, factor)
        reg = _random_regularizer(rng, kind)
        prob = _random_problem(rng, kind, n)
        tau = 10.0 ** rng.uniform(-0.7, 0.7)
        lo, hi = discretize_bounds(reg, m)
        v = CellFn(m, rng.uniform(lo.values - 1.5, hi.values + 1.5))
        u = prox_continuous_at_cellfn(reg, tau, v, m_ref)
        lhs = canonical_measure(prob, reg, m_ref, tau, u)
        rhs = normal_map_measure_ref(prob, reg, m_ref, tau, v) / tau
        gap = lhs - rhs
        worst = max(worst, gap)
        if gap > slack:
            failures += 1
    return CheckResult(
        "normal map dominates fixed point", failures == 0, count, failures, worst
    )


def check_gap_dominates(count=500, seed=_BASE_SEED + 3, slack=1e-10):
    """(tau - nu/2) * canonical^2 never exceeds the regularized gap value."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = -np.inf
    for i in range(count):
        kind = KINDS[i % len(KINDS)]
        n = int(rng.integers(3, 13))
        m = uniform(n)
        reg = _random_regularizer(rng, kind)
        prob = _random_problem(rng, kind, n)
        tau = 10.0 ** rng.uniform(-0.7, 0.5)
        nu = rng.uniform(0.0, 1.8 * tau)
        u = _random_feasible(rng, m, reg)
        can = canonical_measure(prob, reg, m, tau, u)
        gap = gap_measure(prob, reg, m, u, nu)
        diff = (tau - 0.5 * nu) * can**2 - gap
        worst = max(worst, diff)
        if diff > slack:
            failures += 1
    return CheckResult(
        "gap dominates squared fixed point", failures == 0, count, failures, worst
    )


def check_gap_regularization_monotone(count=200, seed=_BASE_SEED + 4, slack=1e-10):
    """gap(u; 0) >= gap(u; nu) >= 0 for feasible u and nu >= 0."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = -np.inf
    for i in range(count):
        kind = KINDS[i % len(KINDS)]
        n = int(rng.integers(3, 13))
        m = uniform(n)
        reg = _random_regularizer(rng, kind)
        prob = _random_problem(rng, kind, n)
        nu = rng.uniform(0.0, 3.0)
        u = _random_feasible(rng, m, reg)
        g0 = gap_measure(prob, reg, m, u, 0.0)
        gn = gap_measure(prob, reg, m, u, nu)
        bad = max(gn - g0, -gn)
        worst = max(worst, bad)
        if bad > slack:
            failures += 1
    return CheckResult(
        "gap regularization monotone", failures == 0, count, failures, worst
    )


def standard_checks(quick=True):
    """The default verification battery; smaller counts when ``quick``."""
    if quick:
        return [
            check_prox_bruteforce(count=150),
            check_gradient_directional(per_kind=5),
            check_normal_map_dominates(count=90),
            check_gap_dominates(count=90),
            check_gap_regularization_monotone(count=60),
        ]
    return [
        check_prox_bruteforce(count=1000),
        check_gradient_directional(per_kind=20),
        check_normal_map_dominates(count=500),
        check_gap_dominates(count=500),
        check_gap_regularization_monotone(count=200),
    ]
