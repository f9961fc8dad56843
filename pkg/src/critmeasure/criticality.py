"""Criticality measures and their discretization error budgets.

Three measures of approximate criticality for the composite problem
min f(u) + beta*||u||_L1 + box indicator:

* normal-map residual   ||tau*(v - prox(v)) + grad f(prox(v))||
* fixed-point residual  ||u - prox(u - grad f(u)/tau)||
* gap value             sup over the box of the linearized decrease,
                        optionally regularized by a quadratic proximity term

Each measure has a reference-mesh variant that evaluates the same formula
on a nested refinement; controls are injected exactly since coarse cells
are unions of fine cells.  ``ErrorBudget`` evaluates the discretization
terms that bound the difference between a measure and its reference value.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fe_space import CellFn, project_dg0
from .mesh import is_nested
from .regularizer import discretize_bounds, prox_discrete

__all__ = [
    "ErrorBudget",
    "CriticalityReport",
    "normal_map_measure",
    "normal_map_measure_ref",
    "canonical_measure",
    "canonical_measure_ref",
    "gap_measure",
    "gap_measure_ref",
    "normal_map_point",
    "reference_feasible_point",
]


def _check_on(v, m, name):
    if not (v.mesh is m or np.array_equal(v.mesh.edges, m.edges)):
        raise ValueError("%s must live on the measure mesh" % name)


def _inject(v, m_ref):
    if not is_nested(v.mesh, m_ref):
        raise ValueError("reference mesh must be a nested refinement of the input mesh")
    return project_dg0(v, m_ref)


def normal_map_measure(prob, reg, m, tau, v):
    """Discrete normal-map residual norm at the (not necessarily feasible) v."""
    if tau <= 0.0:
        raise ValueError("tau must be positive, got %g" % tau)
    _check_on(v, m, "v")
    p = prob.on_mesh(m)
    u = prox_discrete(reg, m, tau, v)
    g = p.gradient(u)
    return CellFn(m, tau * (v.values - u.values) + g.values).l2_norm()


def normal_map_measure_ref(prob, reg, m_ref, tau, v):
    """Normal-map residual evaluated with the reference discretization."""
    return normal_map_measure(prob, reg, m_ref, tau, _inject(v, m_ref))


def canonical_measure(prob, reg, m, tau, u):
    """Fixed-point residual of the forward-backward map at ``u``."""
    if tau <= 0.0:
        raise ValueError("tau must be positive, got %g" % tau)
    _check_on(u, m, "u")
    g = prob.on_mesh(m).gradient(u)
    w = CellFn(m, u.values - g.values / tau)
    return (u - prox_discrete(reg, m, tau, w)).l2_norm()


def canonical_measure_ref(prob, reg, m_ref, tau, u):
    """Fixed-point residual evaluated with the reference discretization."""
    return canonical_measure(prob, reg, m_ref, tau, _inject(u, m_ref))


def _gap_cell_sup(g, u, lo, hi, beta, nu):
    """Cellwise max of  -g*v - beta*|v| - (nu/2)*(u - v)^2  over [lo, hi].

    Enumerates the box ends, the kink 0, and (for nu > 0) the clamped
    vertices of the two concave branches; ties go to the candidate of
    smallest magnitude, which does not change the attained value.
    """
    cands = [lo, hi]
    feas = [np.ones(lo.shape, dtype=bool)] * 2
    zero_ok = (lo <= 0.0) & (hi >= 0.0)
    cands.append(np.zeros_like(lo))
    feas.append(zero_ok)
    if nu > 0.0:
        pos_lo = np.maximum(lo, 0.0)
        vpos = np.clip(u - (g + beta) / nu, pos_lo, hi)
        cands.append(vpos)
        feas.append(pos_lo <= hi)
        neg_hi = np.minimum(hi, 0.0)
        vneg = np.clip(u - (g - beta) / nu, lo, neg_hi)
        cands.append(vneg)
        feas.append(lo <= neg_hi)
    cands = np.stack(cands)
    feas = np.stack(feas)
    scores = -g[None, :] * cands - beta * np.abs(cands)
    if nu > 0.0:
        scores -= 0.5 * nu * (u[None, :] - cands) ** 2
    scores = np.where(feas, scores, -np.inf)
    return scores.max(axis=0)


def gap_measure(prob, reg, m, u, nu=0.0):
    """Gap value of ``u``: linearized decrease maximized over the discrete box.

    For ``nu > 0`` a quadratic proximity term (nu/2)*||u - v||^2 is
    subtracted inside the supremum.  Always finite on cell functions.
    """
    if nu < 0.0:
        raise ValueError("nu must be nonnegative, got %g" % nu)
    _check_on(u, m, "u")
    g = prob.on_mesh(m).gradient(u)
    lo, hi = discretize_bounds(reg, m)
    sup = _gap_cell_sup(g.values, u.values, lo.values, hi.values, reg.beta, nu)
    base = g.values * u.values + reg.beta * np.abs(u.values)
    return float(np.sum(m.widths * (base + sup)))


def gap_measure_ref(prob, reg, m_ref, u, nu=0.0):
    """Gap value evaluated with the reference discretization."""
    return gap_measure(prob, reg, m_ref, _inject(u, m_ref), nu)


def normal_map_point(u, grad, tau):
    """Point v = u - grad/tau at which the normal-map residual vanishes for
    a critical u."""
    return CellFn(u.mesh, u.values - grad.values / tau)


def reference_feasible_point(u, reg, m_ref):
    """Projection of ``u`` onto the box discretized on the reference mesh."""
    uref = _inject(u, m_ref)
    lo, hi = discretize_bounds(reg, m_ref)
    return CellFn(m_ref, np.clip(uref.values, lo.values, hi.values))


@dataclass
class ErrorBudget:
    """Constants and moduli of the measure error decompositions.

    The moduli are nondecreasing functions of the mesh width vanishing at
    zero: ``projection_modulus`` for the control-space projection,
    ``prox_modulus`` for the proximal map, ``gradient_modulus`` for the
    objective gradient, ``set_projection_modulus`` for the feasible-set
    projection.
    """

    tau: float
    lipschitz_grad: float
    grad_bound: float
    lipschitz_phi: float
    diam_feasible: float
    projection_modulus: Callable
    prox_modulus: Callable
    gradient_modulus: Callable
    set_projection_modulus: Optional[Callable] = None

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        for name in ("lipschitz_grad", "grad_bound", "lipschitz_phi", "diam_feasible"):
            if getattr(self, name) < 0.0:
                raise ValueError("%s must be nonnegative" % name)
        if self.set_projection_modulus is None:
            self.set_projection_modulus = self.prox_modulus

    def normal_map(self, h):
        """Discretization term bounding the normal-map measure error."""
        return float(
            (self.tau + self.lipschitz_grad) * self.prox_modulus(h)
            + self.gradient_modulus(h)
            + self.projection_modulus(h) * self.grad_bound
        )

    def canonical(self, h):
        """Discretization term bounding the fixed-point measure error."""
        return float(
            self.gradient_modulus(h) / self.tau
            + self.prox_modulus(h)
            + self.projection_modulus(h) * self.grad_bound / self.tau
        )

    def gap(self, h):
        """Discretization term bounding the gap value error."""
        return float(
            (self.grad_bound + self.lipschitz_phi) * self.set_projection_modulus(h)
            + self.diam_feasible
            * (
                self.lipschitz_grad * self.set_projection_modulus(h)
                + self.projection_modulus(h) * self.grad_bound
                + self.gradient_modulus(h)
            )
        )


_REPORT_HEADER = (
    "h,h_ref,normal_map,canonical,gap,budget_normal_map,budget_canonical,budget_gap"
)


@dataclass
class CriticalityReport:
    """Reference-measure values and budget terms for one study point."""

    h: float
    h_ref: float
    normal_map: float
    canonical: float
    gap: float
    budget_normal_map: float
    budget_canonical: float
    budget_gap: float

    CSV_HEADER = _REPORT_HEADER

    def csv_row(self):
        return ",".join(
            repr(float(v))
            for v in (
                self.h,
                self.h_ref,
                self.normal_map,
                self.canonical,
                self.gap,
                self.budget_normal_map,
                self.budget_canonical,
                self.budget_gap,
            )
        )
