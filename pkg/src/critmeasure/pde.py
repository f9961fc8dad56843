"""Reduced objectives for one-dimensional elliptic control problems.

The state y(u) in H^1_0(0, 1) solves, for all test functions v,

    linear:      (y', v')            = (u, v)
    semilinear:  (y', v') + (y^3, v) = (u, v) + (g, v)
    bilinear:    (y', v') + (y u, v) = (g, v)

discretized with continuous piecewise-linear elements on the problem's
state mesh; controls are piecewise constants on the same mesh or any nested
coarsening of it.  The reduced objective is 0.5 * ||y(u) - target||^2; its
gradient is the adjoint-state Riesz representative projected onto the
control cells.  Load integrals are exact for piecewise-constant data and
use the fixed Gauss rule for analytic data.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .fe_space import CellFn, NodalFn, SampledFn, _QN, _QW, integrate, project_dg0, quad_norm
from .mesh import Mesh1D, is_nested, uniform
from .regularizer import discretize_bounds, project_box

__all__ = [
    "KINDS",
    "StateSolveReport",
    "GradientRep",
    "ReducedProblem",
    "LinearFunctionalProblem",
    "rho_grad",
    "estimate_gradient_modulus",
    "rep_distance",
]

KINDS = ("linear", "semilinear", "bilinear")

# controls below this pointwise bound would break coercivity of the
# bilinear state operator (Poincare constant pi^2 on the unit interval)
_BILINEAR_FLOOR = -9.0


@dataclass
class StateSolveReport:
    state: NodalFn
    newton_iters: int
    residual_norm: float


@dataclass
class GradientRep:
    """Unprojected gradient representative: an evaluable L2 function with
    its exact L2 norm and H1 seminorm."""

    evaluate: Callable
    l2: float
    h1: float


def _stiffness(m):
    d = 1.0 / m.widths
    diag = d[:-1] + d[1:]
    off = -d[1:-1]
    return diag, off


def _weighted_mass(m, cellw):
    """Tridiagonal (c*y, phi_i) matrix for piecewise-constant weight c."""
    wc = m.widths * cellw
    diag = (wc[:-1] + wc[1:]) / 3.0
    off = wc[1:-1] / 6.0
    return diag, off


def _quadrature_mass(m, weight_at_quad):
    """Tridiagonal (q*y, phi_i) matrix for a weight sampled at Gauss points."""
    t = _QN[None, :]
    ll = m.widths * ((weight_at_quad * (1.0 - t) ** 2) @ _QW)
    lr = m.widths * ((weight_at_quad * t * (1.0 - t)) @ _QW)
    rr = m.widths * ((weight_at_quad * t**2) @ _QW)
    diag = rr[:-1] + ll[1:]
    off = lr[1:-1]
    return diag, off


def _tridiag_apply(diag, off, x):
    y = diag * x
    y[:-1] += off * x[1:]
    y[1:] += off * x[:-1]
    return y


def _stiffness_apply(m, full):
    """(y', phi_i') at interior nodes, as a difference of cell slopes.

    Algebraically equal to applying the stiffness matrix, but the
    intermediates stay at the scale of y' instead of y/h, which keeps the
    attainable residual floor well below the Newton tolerance on fine
    meshes.
    """
    s = np.diff(full) / m.widths
    return s[:-1] - s[1:]


def _solve_spd(diag, off, rhs):
    ab = np.zeros((2, diag.size))
    ab[0, 1:] = off
    ab[1, :] = diag
    chol = cholesky_banded(ab)
    y = cho_solve_banded((chol, False), rhs)
    # one step of iterative refinement pushes the residual to round-off,
    # which the nodal-exactness and objective oracles rely on at fine meshes
    y += cho_solve_banded((chol, False), rhs - _tridiag_apply(diag, off, y))
    return y


def _load_cells(m, cell_values):
    wv = m.widths * cell_values
    return 0.5 * (wv[:-1] + wv[1:])


def _load_sampled(m, fn):
    pts = m.edges[:-1, None] + m.widths[:, None] * _QN[None, :]
    vals = np.asarray(fn(pts.ravel()), dtype=float).reshape(pts.shape)
    left = m.widths * ((vals * (1.0 - _QN[None, :])) @ _QW)
    right = m.widths * ((vals * _QN[None, :]) @ _QW)
    return right[:-1] + left[1:]


def _mass_apply_full(m, full):
    """(y, phi_i) at interior nodes for piecewise-linear y with values ``full``."""
    a, b = full[:-1], full[1:]
    left = m.widths * (2.0 * a + b) / 6.0
    right = m.widths * (a + 2.0 * b) / 6.0
    return right[:-1] + left[1:]


def _values_at_quad(m, full):
    """Piecewise-linear nodal values at the per-cell Gauss points."""
    a, b = full[:-1, None], full[1:, None]
    return a + (b - a) * _QN[None, :]


class ReducedProblem:
    """Tracking objective 0.5*||y(u) - target||^2 for one problem kind.

    ``source`` is the fixed right-hand side g (ignored for the linear kind,
    zero when omitted).  The object is immutable; ``on_mesh`` rebinds the
    state mesh for reference-space evaluations.
    """

    def __init__(self, kind, target, source=None, state_mesh=None,
                 newton_tol=1e-12, newton_max_iter=50):
        if kind not in KINDS:
            raise ValueError("unknown problem kind %r" % (kind,))
        if not isinstance(state_mesh, Mesh1D):
            raise TypeError("state_mesh must be a Mesh1D")
        self.kind = kind
        self.target = target
        self.source = source
        self.state_mesh = state_mesh
        self.newton_tol = float(newton_tol)
        self.newton_max_iter = int(newton_max_iter)

    def on_mesh(self, m):
        if m is self.state_mesh:
            return self
        return ReducedProblem(self.kind, self.target, self.source, m,
                              self.newton_tol, self.newton_max_iter)

    @property
    def grad_error_order(self):
        return 1 if self.kind == "bilinear" else 2

    def _control_on_state(self, u):
        if u.mesh is self.state_mesh or np.array_equal(u.mesh.edges, self.state_mesh.edges):
            return u
        if not is_nested(u.mesh, self.state_mesh):
            raise ValueError("control mesh must be nested within the state mesh")
        return project_dg0(u, self.state_mesh)

    def _source_load(self, m):
        if self.source is None:
            return np.zeros(m.n_cells - 1)
        return _load_sampled(m, self.source)

    def solve_state(self, u):
        m = self.state_mesh
        us = self._control_on_state(u)
        diag_a, off_a = _stiffness(m)
        if self.kind == "linear":
            b = _load_cells(m, us.values)
            y = _solve_spd(diag_a, off_a, b)
            full = np.concatenate([[0.0], y, [0.0]])
            res = np.linalg.norm(_stiffness_apply(m, full) - b)
            return StateSolveReport(NodalFn(m, y), 0, float(res))
        if self.kind == "bilinear":
            if us.values.min() < _BILINEAR_FLOOR:
                raise ValueError(
                    "bilinear state operator loses coercivity for controls below %g"
                    % _BILINEAR_FLOOR
                )
            diag_m, off_m = _weighted_mass(m, us.values)
            b = self._source_load(m)
            try:
                y = _solve_spd(diag_a + diag_m, off_a + off_m, b)
            except np.linalg.LinAlgError as exc:
                raise ArithmeticError("singular bilinear state system") from exc
            full = np.concatenate([[0.0], y, [0.0]])
            res = np.linalg.norm(
                _stiffness_apply(m, full) + _tridiag_apply(diag_m, off_m, y) - b
            )
            return StateSolveReport(NodalFn(m, y), 0, float(res))
        # semilinear: damped Newton from y = 0 on the cubic residual
        b = _load_cells(m, us.values) + self._source_load(m)
        y = np.zeros(m.n_cells - 1)

        def residual(yv):
            full = np.concatenate([[0.0], yv, [0.0]])
            cubic = _values_at_quad(m, full) ** 3
            left = m.widths * ((cubic * (1.0 - _QN[None, :])) @ _QW)
            right = m.widths * ((cubic * _QN[None, :]) @ _QW)
            nl = right[:-1] + left[1:]
            return _stiffness_apply(m, full) + nl - b

        r = residual(y)
        rnorm = np.linalg.norm(r)
        iters = 0
        eps = np.finfo(float).eps
        while rnorm > self.newton_tol:
            if iters >= self.newton_max_iter:
                raise RuntimeError(
                    "Newton did not converge after %d iterations (residual %.3e)"
                    % (iters, rnorm)
                )
            full = np.concatenate([[0.0], y, [0.0]])
            jac_w = 3.0 * _values_at_quad(m, full) ** 2
            diag_j, off_j = _quadrature_mass(m, jac_w)
            step = _solve_spd(diag_a + diag_j, off_a + off_j, -r)
            if np.abs(step).max() <= 4.0 * eps * (1.0 + np.abs(y).max()):
                # the iterate sits within rounding of the discrete solution;
                # the assembled residual cannot drop further on fine meshes,
                # where its representable floor scales like eps*|y|*sqrt(n)/h
                break
            t = 1.0
            while t > 2.0**-30:
                r_trial = residual(y + t * step)
                if np.linalg.norm(r_trial) < rnorm:
                    break
                t *= 0.5
            else:
                if np.abs(step).max() <= np.sqrt(eps) * (1.0 + np.abs(y).max()):
                    # in the quadratic basin the Newton correction bounds the
                    # distance to the discrete solution; no representable
                    # neighbour has a smaller assembled residual
                    break
                raise RuntimeError("Newton line search stalled (residual %.3e)" % rnorm)
            y = y + t * step
            r = r_trial
            rnorm = np.linalg.norm(r)
            iters += 1
        return StateSolveReport(NodalFn(m, y), iters, float(rnorm))

    def objective(self, u):
        y = self.solve_state(u).state
        misfit = quad_norm(lambda x: y.evaluate(x) - self.target(x), self.state_mesh)
        return 0.5 * misfit**2

    def _adjoint(self, y, us):
        m = self.state_mesh
        rhs = _mass_apply_full(m, y._full) - _load_sampled(m, self.target)
        diag_a, off_a = _stiffness(m)
        if self.kind == "linear":
            p = _solve_spd(diag_a, off_a, rhs)
        elif self.kind == "semilinear":
            jac_w = 3.0 * _values_at_quad(m, y._full) ** 2
            diag_j, off_j = _quadrature_mass(m, jac_w)
            p = _solve_spd(diag_a + diag_j, off_a + off_j, rhs)
        else:
            diag_m, off_m = _weighted_mass(m, us.values)
            p = _solve_spd(diag_a + diag_m, off_a + off_m, rhs)
        return NodalFn(m, p)

    def _state_and_adjoint(self, u):
        us = self._control_on_state(u)
        y = self.solve_state(us).state
        p = self._adjoint(y, us)
        return y, p

    def gradient(self, u):
        """Gradient of the reduced objective in the control space of ``u``."""
        y, p = self._state_and_adjoint(u)
        if self.kind != "bilinear":
            return project_dg0(p, u.mesh)
        yf, pf = y._full, p._full
        ya, yb = yf[:-1], yf[1:]
        pa, pb = pf[:-1], pf[1:]
        ym, pm = 0.5 * (ya + yb), 0.5 * (pa + pb)
        # Simpson is exact for the per-cell quadratic y*p
        avg = -(ya * pa + 4.0 * ym * pm + yb * pb) / 6.0
        return project_dg0(CellFn(self.state_mesh, avg), u.mesh)

    def gradient_rep(self, u):
        """Unprojected gradient representative, for modulus calibration."""
        y, p = self._state_and_adjoint(u)
        if self.kind != "bilinear":
            return GradientRep(p.evaluate, p.l2_norm(), p.h1_seminorm())

        def rep(x, y=y, p=p):
            return -y.evaluate(x) * p.evaluate(x)

        m = self.state_mesh
        sy = np.diff(y._full) / m.widths
        sp = np.diff(p._full) / m.widths
        da = sy * p._full[:-1] + sp * y._full[:-1]
        db = sy * p._full[1:] + sp * y._full[1:]
        h1 = float(np.sqrt(np.sum(m.widths * (da * da + da * db + db * db) / 3.0)))
        return GradientRep(rep, quad_norm(rep, m), h1)


class LinearFunctionalProblem:
    """Smooth part (c, u): a fixed linear functional of the control.

    The gradient is the cell-averaged coefficient; the reduced objective is
    exact for piecewise-constant controls.
    """

    def __init__(self, coeff):
        if not isinstance(coeff, SampledFn):
            raise TypeError("coeff must be a SampledFn")
        self.coeff = coeff

    grad_error_order = 2  # the representative is mesh-independent

    def on_mesh(self, m):
        return self

    def objective(self, u):
        cbar = project_dg0(self.coeff, u.mesh)
        return float(np.sum(u.mesh.widths * cbar.values * u.values))

    def gradient(self, u):
        return project_dg0(self.coeff, u.mesh)

    def gradient_rep(self, u):
        if self.coeff.h1_seminorm is None:
            raise ValueError("coefficient needs an H1 seminorm for budget estimates")
        l2 = np.sqrt(integrate(lambda x: self.coeff(x) ** 2, u.mesh))
        return GradientRep(self.coeff, float(l2), self.coeff.h1_seminorm)


def rho_grad(prob, h, constant=1.0):
    """Gradient discretization modulus: C*h^2, or C*h for the bilinear kind."""
    return float(constant) * h**prob.grad_error_order


def rep_distance(rep_a, rep_b, m):
    """L2 distance between two gradient representatives, quadrature on ``m``."""
    return quad_norm(lambda x: rep_a.evaluate(x) - rep_b.evaluate(x), m)


def estimate_gradient_modulus(prob, reg, mesh_sizes, n_ref):
    """Calibration constant for the gradient modulus.

    Compares the gradient representative on each study mesh against the one
    computed with the reference discretization at the same feasible control,
    and returns the largest observed ratio to h^order.
    """
    m_ref = uniform(n_ref)
    p_ref = prob.on_mesh(m_ref)
    worst = 0.0
    for n in mesh_sizes:
        m = uniform(n)
        pm = prob.on_mesh(m)
        lo, hi = discretize_bounds(reg, m)
        probes = [
            project_box(reg, m, CellFn(m, np.zeros(m.n_cells))),
            lo,
            hi,
            CellFn(m, 0.5 * (lo.values + hi.values)),
        ]
        for q in probes:
            d = rep_distance(pm.gradient_rep(q), p_ref.gradient_rep(q), m_ref)
            worst = max(worst, d / m.h**prob.grad_error_order)
    return worst
