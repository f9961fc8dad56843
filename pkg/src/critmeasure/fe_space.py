"""Discrete function spaces on interval meshes.

``CellFn`` holds one value per cell (piecewise constants, the control
space); ``NodalFn`` holds one value per interior node (continuous piecewise
linears vanishing at both ends, the state space).  ``SampledFn`` wraps
analytic data before discretization.

``project_dg0`` is the L2-orthogonal projection onto piecewise constants
(per-cell averages).  Inner products and distances between grid functions
are evaluated with exact per-cell quadrature on a common refinement of the
two meshes, never by point sampling, so orthogonality identities hold to
round-off.
"""

import numpy as np

from .mesh import common_refinement, fine_to_coarse

__all__ = [
    "GAUSS_POINTS",
    "SampledFn",
    "CellFn",
    "NodalFn",
    "project_dg0",
    "l2_inner",
    "l2_distance",
    "quad_norm",
    "integrate",
    "projection_error_bound",
]

# fixed 5-point Gauss-Legendre rule, exact for polynomials up to degree 9
GAUSS_POINTS = 5
_gl_nodes, _gl_weights = np.polynomial.legendre.leggauss(GAUSS_POINTS)
_QN = 0.5 * (_gl_nodes + 1.0)  # nodes on (0, 1)
_QW = 0.5 * _gl_weights        # weights summing to 1


def _quad_points(m):
    """Quadrature points of every cell, shape (n_cells, GAUSS_POINTS)."""
    return m.edges[:-1, None] + m.widths[:, None] * _QN[None, :]


class SampledFn:
    """Function on [0, 1] given by a vectorized evaluator.

    ``h1_seminorm`` carries the H1 seminorm of the underlying function when
    it is known in closed form; projection error bounds require it.
    """

    def __init__(self, fn, h1_seminorm=None):
        self.fn = fn
        self.h1_seminorm = h1_seminorm

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    @classmethod
    def constant(cls, c):
        c = float(c)
        return cls(lambda x: np.full(np.shape(x), c), h1_seminorm=0.0)


def _same_mesh(a, b):
    return a is b or (a.n_cells == b.n_cells and np.array_equal(a.edges, b.edges))


class CellFn:
    """Piecewise-constant function: one value per mesh cell."""

    def __init__(self, mesh, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_cells,):
            raise ValueError(
                "expected %d cell values, got shape %s" % (mesh.n_cells, values.shape)
            )
        self.mesh = mesh
        self.values = values

    def evaluate(self, x):
        return self.values[self.mesh.cell_of(x)]

    def l2_norm(self):
        return float(np.sqrt(np.sum(self.mesh.widths * self.values**2)))

    def l1_norm(self):
        return float(np.sum(self.mesh.widths * np.abs(self.values)))

    def _binary(self, other, op):
        if not isinstance(other, CellFn) or not _same_mesh(self.mesh, other.mesh):
            raise ValueError("operands must share one mesh")
        return CellFn(self.mesh, op(self.values, other.values))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return CellFn(self.mesh, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return CellFn(self.mesh, -self.values)

    def to_csv(self, path):
        """One row per cell: (index, x_left, value)."""
        with open(path, "w") as fh:
            fh.write("index,x_left,value\n")
            for i, (x, v) in enumerate(zip(self.mesh.edges[:-1], self.values)):
                fh.write("%d,%r,%r\n" % (i, float(x), float(v)))


class NodalFn:
    """Continuous piecewise-linear function vanishing at x=0 and x=1.

    Stores the values at the interior nodes; the boundary values are
    implicitly zero.
    """

    def __init__(self, mesh, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_cells - 1,):
            raise ValueError(
                "expected %d interior values, got shape %s"
                % (mesh.n_cells - 1, values.shape)
            )
        self.mesh = mesh
        self.values = values
        self._full = np.concatenate([[0.0], values, [0.0]])

    def evaluate(self, x):
        return np.interp(np.asarray(x, dtype=float), self.mesh.edges, self._full)

    def cell_averages(self):
        return 0.5 * (self._full[:-1] + self._full[1:])

    def l2_norm(self):
        a, b = self._full[:-1], self._full[1:]
        return float(np.sqrt(np.sum(self.mesh.widths * (a * a + a * b + b * b) / 3.0)))

    def h1_seminorm(self):
        return float(np.sqrt(np.sum(np.diff(self._full) ** 2 / self.mesh.widths)))

    def h1_norm(self):
        return float(np.hypot(self.l2_norm(), self.h1_seminorm()))

    def to_csv(self, path):
        """One row per interior node: (index, x_node, value)."""
        with open(path, "w") as fh:
            fh.write("index,x_node,value\n")
            for i, (x, v) in enumerate(zip(self.mesh.edges[1:-1], self.values)):
                fh.write("%d,%r,%r\n" % (i, float(x), float(v)))


def _aggregate(fine, fine_values, coarse):
    """Cell averages on ``coarse`` of a piecewise-constant on nested ``fine``."""
    idx = fine_to_coarse(coarse, fine)
    acc = np.zeros(coarse.n_cells)
    np.add.at(acc, idx, fine.widths * fine_values)
    return acc / coarse.widths


def project_dg0(v, m):
    """L2-orthogonal projection of ``v`` onto piecewise constants on ``m``.

    Accepts analytic data (per-cell Gauss quadrature), piecewise constants
    on any related mesh (exact union-mesh aggregation; restriction of a
    coarser function is an exact injection), and piecewise linears (exact
    midpoint integration on the common refinement).
    """
    if isinstance(v, SampledFn):
        return CellFn(m, v(_quad_points(m)) @ _QW)
    if isinstance(v, CellFn):
        if _same_mesh(v.mesh, m):
            return CellFn(m, v.values.copy())
        union = common_refinement(v.mesh, m)
        on_union = v.values[fine_to_coarse(v.mesh, union)]
        if union.n_cells == m.n_cells:
            return CellFn(m, on_union)
        return CellFn(m, _aggregate(union, on_union, m))
    if isinstance(v, NodalFn):
        if _same_mesh(v.mesh, m):
            return CellFn(m, v.cell_averages())
        union = common_refinement(v.mesh, m)
        return CellFn(m, _aggregate(union, v.evaluate(union.midpoints), m))
    raise TypeError("cannot project objects of type %s" % type(v).__name__)


def l2_inner(a, b):
    """Exact L2(0,1) inner product of two grid functions.

    The integrand is piecewise polynomial on the common refinement of the
    two meshes, where the fixed Gauss rule integrates it exactly.
    """
    if (
        isinstance(a, CellFn)
        and isinstance(b, CellFn)
        and _same_mesh(a.mesh, b.mesh)
    ):
        return float(np.sum(a.mesh.widths * a.values * b.values))
    union = common_refinement(a.mesh, b.mesh)
    pts = _quad_points(union)
    prod = (a.evaluate(pts.ravel()) * b.evaluate(pts.ravel())).reshape(pts.shape)
    return float(np.sum(union.widths * (prod @ _QW)))


def quad_norm(fn, m):
    """L2 norm of a callable integrated cell-by-cell on ``m``."""
    pts = _quad_points(m)
    sq = np.asarray(fn(pts.ravel()), dtype=float).reshape(pts.shape) ** 2
    return float(np.sqrt(np.sum(m.widths * (sq @ _QW))))


def l2_distance(a, b):
    """Exact L2 distance between two grid functions on related meshes."""
    if (
        isinstance(a, CellFn)
        and isinstance(b, CellFn)
        and _same_mesh(a.mesh, b.mesh)
    ):
        return float(np.sqrt(np.sum(a.mesh.widths * (a.values - b.values) ** 2)))
    union = common_refinement(a.mesh, b.mesh)
    return quad_norm(lambda x: a.evaluate(x) - b.evaluate(x), union)


def integrate(fn, m):
    """Integral over (0, 1) of a callable, per-cell Gauss quadrature on ``m``."""
    pts = _quad_points(m)
    vals = np.asarray(fn(pts.ravel()), dtype=float).reshape(pts.shape)
    return float(np.sum(m.widths * (vals @ _QW)))


def projection_error_bound(v, m):
    """A priori bound (1/pi) * h * |v|_H1 on the projection error of ``v``.

    The constant 1/pi is valid on convex cells; the bound needs the H1
    seminorm hint of ``v``.
    """
    if not isinstance(v, SampledFn) or v.h1_seminorm is None:
        raise ValueError("projection_error_bound needs a SampledFn with an H1 seminorm")
    return (1.0 / np.pi) * m.h * v.h1_seminorm
