"""Partitions of the unit interval with nested refinement."""

import numpy as np

__all__ = [
    "Mesh1D",
    "uniform",
    "refine_nested",
    "is_nested",
    "fine_to_coarse",
    "common_refinement",
]

# edges closer than this are treated as identical when comparing meshes
_EDGE_TOL = 1e-12


class Mesh1D:
    """Partition of (0, 1) into cells, described by its edge coordinates:

        0 = x_0 < x_1 < ... < x_n = 1

    Cell j is the interval (x_j, x_{j+1}) with width ``widths[j]``; ``h`` is
    the largest width and ``quasi_uniformity`` the ratio of the smallest
    width to ``h``.  Instances are immutable after construction and safe to
    share between threads.
    """

    def __init__(self, edges):
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise ValueError("edges must be a 1-d array with at least two entries")
        if edges[0] != 0.0 or edges[-1] != 1.0:
            raise ValueError("mesh must span exactly [0, 1]")
        widths = np.diff(edges)
        if np.any(widths <= 0.0):
            raise ValueError("edges must be strictly increasing")
        self.edges = edges
        self.widths = widths
        self.n_cells = int(edges.size - 1)
        self.h = float(widths.max())
        self.quasi_uniformity = float(widths.min() / self.h)
        self.midpoints = 0.5 * (edges[:-1] + edges[1:])

    def __repr__(self):
        return "Mesh1D(n_cells=%d, h=%.6g)" % (self.n_cells, self.h)

    def cell_of(self, x):
        """Index of the cell containing each point of x.

        Edge points are assigned to the cell on their right, except x = 1
        which falls in the last cell.
        """
        idx = np.searchsorted(self.edges, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_cells - 1)


def uniform(n):
    """Uniform mesh with ``n`` equal cells of width 1/n."""
    n = int(n)
    if n < 1:
        raise ValueError("a mesh needs at least one cell, got n=%d" % n)
    return Mesh1D(np.arange(n + 1) / n)


def refine_nested(m, factor):
    """Split every cell of ``m`` into ``factor`` equal subcells.

    The coarse edges are reproduced bit-for-bit in the fine mesh, so the
    coarse piecewise-constant space embeds exactly into the fine one.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError("refinement factor must be positive, got %d" % factor)
    if factor == 1:
        return Mesh1D(m.edges.copy())
    offsets = np.arange(factor) / factor
    fine = m.edges[:-1, None] + m.widths[:, None] * offsets[None, :]
    edges = np.append(fine.ravel(), 1.0)
    return Mesh1D(edges)


def is_nested(coarse, fine):
    """True when every edge of ``coarse`` also occurs in ``fine``."""
    if coarse.n_cells > fine.n_cells:
        return False
    pos = np.clip(np.searchsorted(fine.edges, coarse.edges), 0, fine.edges.size - 1)
    right = np.abs(fine.edges[pos] - coarse.edges)
    left = np.abs(fine.edges[np.maximum(pos - 1, 0)] - coarse.edges)
    return bool(np.all(np.minimum(left, right) <= _EDGE_TOL))


def fine_to_coarse(coarse, fine):
    """For each cell of ``fine``, the index of the ``coarse`` cell containing it.

    Requires ``fine`` to be a nested refinement of ``coarse``.
    """
    if not is_nested(coarse, fine):
        raise ValueError("meshes are not nested")
    return coarse.cell_of(fine.midpoints)


def common_refinement(a, b):
    """Smallest mesh in which both ``a`` and ``b`` are nested."""
    edges = np.union1d(a.edges, b.edges)
    keep = np.concatenate([[True], np.diff(edges) > _EDGE_TOL])
    edges = edges[keep]
    edges[-1] = 1.0
    return Mesh1D(edges)
