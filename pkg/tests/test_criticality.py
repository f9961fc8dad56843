import math

import numpy as np
import pytest

from critmeasure import (
    CellFn,
    CompositeRegularizer,
    ErrorBudget,
    SampledFn,
    build_problem,
    canonical_measure,
    canonical_measure_ref,
    gap_measure,
    gap_measure_ref,
    normal_map_measure,
    normal_map_measure_ref,
    normal_map_point,
    project_box,
    project_dg0,
    prox_discrete,
    reference_feasible_point,
    refine_nested,
    uniform,
)
from critmeasure.criticality import CriticalityReport


def lp_setup(n):
    prob, reg = build_problem("example_lp", n)
    m = uniform(n)
    u_star = project_dg0(reg.lower, m)
    grad = prob.gradient(u_star)
    v_star = normal_map_point(u_star, grad, 1.0)
    return prob, reg, m, u_star, v_star


def test_normal_map_zero_at_discrete_critical_point():
    prob, reg, m, u_star, v_star = lp_setup(8)
    assert normal_map_measure(prob, reg, m, 1.0, v_star) <= 1e-14
    assert canonical_measure(prob, reg, m, 1.0, u_star) <= 1e-14


def test_normal_map_point_arithmetic():
    m = uniform(1)
    u = CellFn(m, [1.0])
    assert normal_map_point(u, CellFn(m, [0.0]), 2.0).values[0] == 1.0
    assert normal_map_point(u, CellFn(m, [2.0]), 1.0).values[0] == -1.0


def test_normal_map_point_matches_lp_construction():
    prob, reg, m, u_star, v_star = lp_setup(6)
    np.testing.assert_allclose(v_star.values, u_star.values - 1.0, rtol=1e-15)


def test_reference_measures_match_exact_value():
    # closed form: sqrt(h^2 - h_ref^2)/(2*sqrt(3)), the projection defect of
    # the sloped lower bound between the two meshes
    for n, factor in ((4, 64), (16, 64), (16, 2)):
        prob, reg, m, u_star, v_star = lp_setup(n)
        m_ref = refine_nested(m, factor)
        predicted = math.sqrt(m.h**2 - m_ref.h**2) / (2 * math.sqrt(3))
        nor = normal_map_measure_ref(prob, reg, m_ref, 1.0, v_star)
        can = canonical_measure_ref(prob, reg, m_ref, 1.0, u_star)
        assert nor == pytest.approx(predicted, rel=1e-12)
        assert can == pytest.approx(predicted, rel=1e-12)


def test_reference_measure_on_same_mesh_equals_discrete():
    prob, reg = build_problem("linear", 12)
    m = uniform(12)
    rng = np.random.default_rng(2)
    v = CellFn(m, rng.uniform(-2, 2, 12))
    assert normal_map_measure_ref(prob, reg, m, 1.0, v) == pytest.approx(
        normal_map_measure(prob, reg, m, 1.0, v), rel=1e-14
    )


def test_reference_measure_requires_nesting():
    prob, reg = build_problem("example_lp", 3)
    v = CellFn(uniform(3), np.zeros(3))
    with pytest.raises(ValueError):
        normal_map_measure_ref(prob, reg, uniform(4), 1.0, v)


def test_measures_reject_bad_tau():
    prob, reg, m, u_star, v_star = lp_setup(4)
    with pytest.raises(ValueError):
        normal_map_measure(prob, reg, m, 0.0, v_star)
    with pytest.raises(ValueError):
        canonical_measure(prob, reg, m, -1.0, u_star)


def test_normal_map_direct_formula_beta_zero():
    # with beta = 0 and a constant box the measure reduces to the clamp
    # formula evaluated directly
    prob, reg = build_problem("linear", 10)
    reg0 = CompositeRegularizer(0.0, SampledFn.constant(-1.0), SampledFn.constant(1.0))
    m = uniform(10)
    rng = np.random.default_rng(5)
    for _ in range(10):
        v = CellFn(m, rng.uniform(-3, 3, 10))
        u = CellFn(m, np.clip(v.values, -1.0, 1.0))
        g = prob.on_mesh(m).gradient(u)
        direct = np.sqrt(np.sum(m.widths * (1.0 * (v.values - u.values) + g.values) ** 2))
        assert normal_map_measure(prob, reg0, m, 1.0, v) == pytest.approx(
            direct, rel=1e-12
        )


def test_canonical_bounded_by_normal_map_at_prox_points():
    prob, reg = build_problem("linear", 8)
    m = uniform(8)
    rng = np.random.default_rng(6)
    for _ in range(20):
        tau = 10 ** rng.uniform(-0.5, 0.5)
        v = CellFn(m, rng.uniform(-3, 3, 8))
        u = prox_discrete(reg, m, tau, v)
        lhs = canonical_measure(prob, reg, m, tau, u)
        rhs = normal_map_measure(prob, reg, m, tau, v) / tau
        assert lhs <= rhs + 1e-10


def test_gap_single_cell_candidate_enumeration():
    coeff = SampledFn(lambda x: np.full(np.shape(x), 0.5), h1_seminorm=0.0)
    from critmeasure import LinearFunctionalProblem

    prob = LinearFunctionalProblem(coeff)
    reg = CompositeRegularizer(1.0, SampledFn.constant(-1.0), SampledFn.constant(1.0))
    m = uniform(1)
    u = CellFn(m, [0.0])
    assert gap_measure(prob, reg, m, u) == pytest.approx(0.0, abs=1e-15)


def test_gap_matches_grid_maximization():
    # dense-grid oracle for the per-cell supremum
    rng = np.random.default_rng(9)
    prob, reg_unused = build_problem("linear", 6)
    m = uniform(6)
    for _ in range(25):
        beta = rng.uniform(0.0, 1.5)
        lo = rng.uniform(-2.0, -0.1)
        hi = rng.uniform(0.1, 2.0)
        nu = rng.choice([0.0, rng.uniform(0.0, 3.0)])
        reg = CompositeRegularizer(
            beta, SampledFn.constant(lo), SampledFn.constant(hi)
        )
        u = CellFn(m, rng.uniform(lo, hi, 6))
        got = gap_measure(prob, reg, m, u, nu)
        g = prob.on_mesh(m).gradient(u)
        # the kink of |v| sits at 0, which linspace alone would miss
        grid = np.union1d(np.linspace(lo, hi, 20001), [0.0])
        total = 0.0
        for i in range(6):
            vals = (
                g.values[i] * (u.values[i] - grid)
                + beta * (abs(u.values[i]) - np.abs(grid))
                - 0.5 * nu * (u.values[i] - grid) ** 2
            )
            total += m.widths[i] * vals.max()
        assert got == pytest.approx(total, abs=5e-8)


def test_gap_rejects_negative_nu():
    prob, reg, m, u_star, _ = lp_setup(4)
    with pytest.raises(ValueError):
        gap_measure(prob, reg, m, u_star, -0.5)


def test_gap_regularization_monotone_nonnegative():
    from critmeasure.verification import check_gap_regularization_monotone

    result = check_gap_regularization_monotone(count=120)
    assert result.passed, result.line()


def test_reference_feasible_point():
    prob, reg = build_problem("example_lp", 4)
    m = uniform(4)
    m_ref = refine_nested(m, 8)
    lo_ref, hi_ref = (
        project_dg0(reg.lower, m_ref),
        project_dg0(reg.upper, m_ref),
    )
    u = CellFn(m, [-0.9, 0.2, -0.1, 0.8])
    u_bar = reference_feasible_point(u, reg, m_ref)
    assert np.all(u_bar.values >= lo_ref.values)
    assert np.all(u_bar.values <= hi_ref.values)
    np.testing.assert_allclose(
        u_bar.values,
        np.clip(np.repeat(u.values, 8), lo_ref.values, hi_ref.values),
        rtol=1e-15,
    )
    # feasible input comes back unchanged
    feasible = project_box(reg, m_ref, project_dg0(u, m_ref))
    np.testing.assert_array_equal(
        reference_feasible_point(feasible, reg, m_ref).values, feasible.values
    )


def test_budget_arithmetic():
    zero = lambda h: 0.0
    b = ErrorBudget(
        tau=1.0,
        lipschitz_grad=2.0,
        grad_bound=3.0,
        lipschitz_phi=0.5,
        diam_feasible=4.0,
        projection_modulus=lambda h: h,
        prox_modulus=lambda h: h,
        gradient_modulus=zero,
    )
    h = 0.125
    assert b.normal_map(h) == pytest.approx((1 + 2) * h + 0 + h * 3)
    assert b.canonical(h) == pytest.approx(0 + h + h * 3)
    assert b.gap(h) == pytest.approx((3 + 0.5) * h + 4 * (2 * h + 3 * h + 0))
    empty = ErrorBudget(1.0, 0.0, 0.0, 0.0, 0.0, zero, zero, zero)
    assert empty.normal_map(h) == 0.0
    assert empty.canonical(h) == 0.0
    assert empty.gap(h) == 0.0


def test_budget_validation():
    zero = lambda h: 0.0
    with pytest.raises(ValueError):
        ErrorBudget(0.0, 0.0, 0.0, 0.0, 0.0, zero, zero, zero)
    with pytest.raises(ValueError):
        ErrorBudget(1.0, -1.0, 0.0, 0.0, 0.0, zero, zero, zero)


def test_report_csv_row_order():
    r = CriticalityReport(
        h=0.5,
        h_ref=0.1,
        normal_map=1.0,
        canonical=2.0,
        gap=3.0,
        budget_normal_map=4.0,
        budget_canonical=5.0,
        budget_gap=6.0,
    )
    assert r.csv_row() == "0.5,0.1,1.0,2.0,3.0,4.0,5.0,6.0"
    assert CriticalityReport.CSV_HEADER.split(",") == [
        "h",
        "h_ref",
        "normal_map",
        "canonical",
        "gap",
        "budget_normal_map",
        "budget_canonical",
        "budget_gap",
    ]
