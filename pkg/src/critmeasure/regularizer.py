"""Weighted L1 term plus box constraint, with closed-form proximal maps.

The composite term is  beta * ||u||_L1 + indicator of {lower <= u <= upper}.
On piecewise constants its proximal map is computed cellwise: soft-threshold
toward zero, then clamp into the cell-averaged box.  The discretization
modulus of the prox is (1/pi) * h * (|lower|_H1 + |upper|_H1).
"""

import numpy as np

from .fe_space import CellFn, SampledFn, project_dg0
from .mesh import is_nested

__all__ = [
    "CompositeRegularizer",
    "discretize_bounds",
    "prox_values",
    "prox_discrete",
    "prox_continuous_at_cellfn",
    "project_box",
    "rho_prox",
    "linear_minimizer",
]

_CHECK_GRID = np.linspace(0.0, 1.0, 1025)


class CompositeRegularizer:
    """L1 weight ``beta`` and box bounds given as analytic functions.

    The H1 seminorms of the bounds drive the prox discretization modulus;
    they default to the hints carried by the bound functions.
    """

    def __init__(self, beta, lower, upper, lower_h1=None, upper_h1=None):
        beta = float(beta)
        if beta < 0.0:
            raise ValueError("beta must be nonnegative, got %g" % beta)
        if not isinstance(lower, SampledFn) or not isinstance(upper, SampledFn):
            raise TypeError("bounds must be SampledFn instances")
        gap = upper(_CHECK_GRID) - lower(_CHECK_GRID)
        if np.any(gap < -1e-12):
            raise ValueError("lower bound exceeds upper bound on [0, 1]")
        self.beta = beta
        self.lower = lower
        self.upper = upper
        self.lower_h1 = lower.h1_seminorm if lower_h1 is None else float(lower_h1)
        self.upper_h1 = upper.h1_seminorm if upper_h1 is None else float(upper_h1)


def discretize_bounds(reg, m):
    """Cell averages of the box bounds; ordering is preserved cellwise."""
    lo = project_dg0(reg.lower, m)
    hi = project_dg0(reg.upper, m)
    return lo, hi


def prox_values(w, lo, hi, shrink):
    """Cellwise prox on raw arrays: soft-threshold by ``shrink``, then clamp."""
    soft = w - np.clip(w, -shrink, shrink)
    return np.clip(soft, lo, hi)


def prox_discrete(reg, m, tau, w):
    """Minimizer of 0.5*||v - w||^2 + (composite term on m)/tau, cellwise."""
    if tau <= 0.0:
        raise ValueError("tau must be positive, got %g" % tau)
    lo, hi = discretize_bounds(reg, m)
    return CellFn(m, prox_values(w.values, lo.values, hi.values, reg.beta / tau))


def prox_continuous_at_cellfn(reg, tau, w, m_ref):
    """Prox with the bounds resolved on a nested reference mesh.

    This is the reference surrogate for the exact-bounds prox: ``w`` is
    injected into the reference space (exactly, since the spaces nest) and
    the cellwise closed form is applied there.
    """
    if not is_nested(w.mesh, m_ref):
        raise ValueError("reference mesh must be a nested refinement of the input mesh")
    return prox_discrete(reg, m_ref, tau, project_dg0(w, m_ref))


def project_box(reg, m, w):
    """Clamp into the cell-averaged box (the prox with beta = 0)."""
    lo, hi = discretize_bounds(reg, m)
    return CellFn(m, np.clip(w.values, lo.values, hi.values))


def rho_prox(reg, h):
    """Discretization modulus of the prox: (1/pi) * h * (|lo|_H1 + |hi|_H1)."""
    if reg.lower_h1 is None or reg.upper_h1 is None:
        raise ValueError("prox modulus needs H1 seminorms of both bounds")
    return (1.0 / np.pi) * h * (reg.lower_h1 + reg.upper_h1)


def linear_minimizer(grad, lo, hi, beta):
    """Cellwise argmin of  g*v + beta*|v|  over [lo, hi].

    The minimum over each cell is attained at lo, hi, or the kink 0 when it
    is feasible; ties resolve to the candidate of smallest magnitude (the
    attained value does not depend on the tie).
    """
    zero_ok = (lo <= 0.0) & (hi >= 0.0)
    cands = np.stack([np.zeros_like(lo), lo, hi])
    feasible = np.stack([zero_ok, np.ones_like(zero_ok), np.ones_like(zero_ok)])
    scores = grad[None, :] * cands + beta * np.abs(cands)
    scores = np.where(feasible, scores, np.inf)
    best = scores.min(axis=0)
    mags = np.where(scores <= best[None, :], np.abs(cands), np.inf)
    pick = np.argmin(mags, axis=0)
    return np.take_along_axis(cands, pick[None, :], axis=0)[0]
