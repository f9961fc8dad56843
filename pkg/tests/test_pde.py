import math

import numpy as np
import pytest

from critmeasure import (
    CellFn,
    CompositeRegularizer,
    LinearFunctionalProblem,
    ReducedProblem,
    SampledFn,
    estimate_gradient_modulus,
    project_dg0,
    rho_grad,
    uniform,
)
from critmeasure.verification import check_gradient_directional

ZERO = SampledFn.constant(0.0)


def linear_problem(n, target=ZERO):
    return ReducedProblem("linear", target, state_mesh=uniform(n))


def ones(m):
    return CellFn(m, np.ones(m.n_cells))


def test_linear_state_nodally_exact():
    # -y'' = 1 with zero boundary values has solution x(1-x)/2
    for n in (5, 64, 1024):
        m = uniform(n)
        rep = linear_problem(n).solve_state(ones(m))
        x = m.edges[1:-1]
        np.testing.assert_allclose(rep.state.values, x * (1 - x) / 2, atol=1e-12)
        assert rep.newton_iters == 0


def test_semilinear_zero_data_zero_state():
    m = uniform(16)
    prob = ReducedProblem("semilinear", ZERO, ZERO, state_mesh=m)
    rep = prob.solve_state(CellFn(m, np.zeros(16)))
    np.testing.assert_array_equal(rep.state.values, 0.0)
    assert rep.residual_norm <= 1e-12


def test_semilinear_newton_converges_tightly():
    m = uniform(32)
    prob = ReducedProblem(
        "semilinear", ZERO, SampledFn(lambda x: 10 * np.cos(8 * np.pi * x)),
        state_mesh=m,
    )
    rep = prob.solve_state(CellFn(m, 10 * np.ones(32)))
    assert rep.residual_norm <= 1e-12
    assert 1 <= rep.newton_iters <= 50


def test_bilinear_with_zero_control_reduces_to_linear():
    m = uniform(40)
    prob = ReducedProblem("bilinear", ZERO, SampledFn.constant(1.0), state_mesh=m)
    rep = prob.solve_state(CellFn(m, np.zeros(40)))
    x = m.edges[1:-1]
    np.testing.assert_allclose(rep.state.values, x * (1 - x) / 2, atol=1e-12)


def test_bilinear_rejects_coercivity_breaking_control():
    m = uniform(8)
    prob = ReducedProblem("bilinear", ZERO, SampledFn.constant(1.0), state_mesh=m)
    with pytest.raises(ValueError):
        prob.solve_state(CellFn(m, -10.0 * np.ones(8)))


def test_control_finer_than_state_mesh_rejected():
    prob = linear_problem(4)
    u = ones(uniform(8))
    with pytest.raises(ValueError):
        prob.solve_state(u)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        ReducedProblem("parabolic", ZERO, state_mesh=uniform(4))


def test_gradient_zero_for_residual_free_target():
    # use the discrete state itself as the target: the adjoint right side
    # vanishes identically
    m = uniform(32)
    base = linear_problem(32)
    y = base.solve_state(ones(m)).state
    prob = ReducedProblem("linear", SampledFn(y.evaluate), state_mesh=m)
    g = prob.gradient(ones(m))
    assert g.l2_norm() <= 1e-10


def test_gradient_against_closed_form_adjoint():
    # target 0, control 1: the adjoint solves -p'' = x(1-x)/2 up to the
    # interpolation of the right side, p(x) = (x - 2x^3 + x^4)/24
    n = 32
    m = uniform(n)
    g = linear_problem(n).gradient(ones(m))
    anti = lambda x: (x**2 / 2 - 2 * x**4 / 4 + x**5 / 5) / 24
    a, b = m.edges[:-1], m.edges[1:]
    oracle = (anti(b) - anti(a)) / m.widths
    np.testing.assert_allclose(g.values, oracle, atol=m.h**2 / 32)


def test_gradient_matches_finite_differences_all_kinds():
    result = check_gradient_directional(per_kind=20)
    assert result.passed, result.line()
    assert result.worst <= 1e-6


def test_objective_zero_for_reached_target():
    m = uniform(24)
    base = linear_problem(24)
    y = base.solve_state(ones(m)).state
    prob = ReducedProblem("linear", SampledFn(y.evaluate), state_mesh=m)
    assert prob.objective(ones(m)) <= 1e-24


def test_objective_constant_target():
    m = uniform(10)
    prob = ReducedProblem("linear", SampledFn.constant(1.0), state_mesh=m)
    assert prob.objective(CellFn(m, np.zeros(10))) == pytest.approx(0.5, rel=1e-14)


def test_objective_polynomial_oracle():
    # 0.5 * integral of (x(1-x)/2)^2 = 1/240; the discrete value approaches
    # it from below at second order
    for n, tol in ((4096, 1e-9),):
        prob = linear_problem(n)
        obj = prob.objective(ones(uniform(n)))
        assert obj == pytest.approx(1 / 240, abs=tol)


def test_objective_mesh_convergence_order():
    prob = linear_problem(16)
    errs = []
    for n in (16, 32, 64, 128):
        m = uniform(n)
        errs.append(abs(prob.on_mesh(m).objective(ones(m)) - 1 / 240))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    assert min(orders) >= 1.9


def test_bilinear_monotone_damping():
    # for g >= 0 a larger nonnegative potential weakly shrinks the state
    rng = np.random.default_rng(8)
    m = uniform(32)
    prob = ReducedProblem("bilinear", ZERO, SampledFn.constant(1.0), state_mesh=m)
    for _ in range(20):
        u1 = rng.uniform(0.0, 3.0, 32)
        u2 = u1 + rng.uniform(0.0, 3.0, 32)
        y1 = prob.solve_state(CellFn(m, u1)).state
        y2 = prob.solve_state(CellFn(m, u2)).state
        assert y2.l2_norm() <= y1.l2_norm() + 1e-13


def test_rho_grad_arithmetic():
    prob = linear_problem(4)
    assert rho_grad(prob, 0.0) == 0.0
    assert rho_grad(prob, 0.25) == pytest.approx(1 / 16)
    bil = ReducedProblem("bilinear", ZERO, ZERO, state_mesh=uniform(4))
    assert rho_grad(bil, 0.25, constant=2.0) == pytest.approx(0.5)


def test_gradient_modulus_calibration_is_h_stable():
    # measured gradient errors divided by h^2 stay within a narrow band,
    # so one constant covers the whole mesh family
    from critmeasure.pde import rep_distance

    reg = CompositeRegularizer(
        0.001,
        SampledFn.constant(-1.0),
        SampledFn(lambda x: 1 + 0.1 * np.sin(2 * np.pi * x),
                  h1_seminorm=0.1 * math.sqrt(2) * math.pi),
    )
    target = SampledFn(lambda x: 100 * np.asarray(x, float) ** 2)
    prob = ReducedProblem("linear", target, state_mesh=uniform(16))
    ref = prob.on_mesh(uniform(4096))
    ratios = []
    for n in (16, 32, 64, 128, 256):
        m = uniform(n)
        pm = prob.on_mesh(m)
        u = project_dg0(reg.upper, m)
        d = rep_distance(pm.gradient_rep(u), ref.gradient_rep(u), uniform(4096))
        ratios.append(d / m.h**2)
    assert max(ratios) <= 2.0 * min(ratios)
    C = estimate_gradient_modulus(prob, reg, (16, 32, 64), 4096)
    assert C > 0
    assert rho_grad(prob, 1 / 64, C) >= max(r * (1 / 64) ** 2 for r in ratios) / 2


def test_linear_functional_problem_surface():
    coeff = SampledFn(lambda x: np.ones(np.shape(x)), h1_seminorm=0.0)
    prob = LinearFunctionalProblem(coeff)
    m = uniform(5)
    u = CellFn(m, [1.0, -1.0, 0.5, 0.0, 2.0])
    assert prob.objective(u) == pytest.approx(0.5, rel=1e-14)
    np.testing.assert_allclose(prob.gradient(u).values, 1.0, rtol=1e-15)
    rep = prob.gradient_rep(u)
    assert rep.l2 == pytest.approx(1.0, rel=1e-14)
    assert rep.h1 == 0.0
    assert prob.on_mesh(uniform(9)) is prob
