"""The reference network: vertices, chains, volumetric points and tessellations."""

from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import cell_simplex_overlaps, voronoi
from .params import GraphParams


class ExtendedGraph:
    """An extended Euclidean graph restricted to a finite window.

    Parameters
    ----------
    positions : ndarray, shape (N, d)
    volumetric : ndarray of bool, shape (N,)
        Flags of the volumetric points.
    edges : ndarray, shape (E, 2)
        Chains as index pairs with ``i < j``.
    simplices : ndarray, shape (k, d+1)
        Delaunay simplices of the volumetric points (global vertex indices).
    window : ndarray, shape (2, d)
    params : GraphParams, optional
    fixture_only : bool
        Marks deterministic fixtures that are not in general position.

    Voronoi cells are computed lazily and cached; instances are otherwise
    immutable (arrays are set read-only).
    """

    def __init__(self, positions, volumetric, edges, simplices, window, params=None, fixture_only=False):
        self.positions = np.ascontiguousarray(positions, dtype=float)
        self.volumetric = np.asarray(volumetric, dtype=bool)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.simplices = np.asarray(simplices, dtype=np.int64).reshape(-1, self.positions.shape[1] + 1)
        self.window = np.asarray(window, dtype=float)
        self.params = params if params is not None else GraphParams(dimension=self.positions.shape[1])
        self.fixture_only = bool(fixture_only)
        for a in (self.positions, self.volumetric, self.edges, self.simplices, self.window):
            a.setflags(write=False)

    def __repr__(self):
        return (
            f"ExtendedGraph(d={self.dimension}, vertices={self.n_vertices}, edges={len(self.edges)}, "
            f"volumetric={int(self.volumetric.sum())}, simplices={len(self.simplices)})"
        )

    @property
    def dimension(self):
        return self.positions.shape[1]

    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def volumetric_index(self):
        return np.flatnonzero(self.volumetric)

    @cached_property
    def edge_lengths(self):
        p = self.positions
        return np.linalg.norm(p[self.edges[:, 0]] - p[self.edges[:, 1]], axis=1)

    @cached_property
    def degrees(self):
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)

    def adjacency(self):
        n = self.n_vertices
        e = self.edges
        data = np.ones(2 * len(e))
        return coo_matrix((data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n)).tocsr()

    def n_components(self, mask=None):
        """Number of connected components of the edge graph (optionally on a vertex subset)."""
        A = self.adjacency()
        if mask is not None:
            idx = np.flatnonzero(mask)
            A = A[idx][:, idx]
        return connected_components(A, directed=False)[0]

    @cached_property
    def cells(self):
        """Voronoi cells of all vertices, clipped to the window."""
        return voronoi(self.positions, self.window)

    @cached_property
    def volumetric_cells(self):
        """Voronoi cells of the volumetric points, clipped to the window."""
        return voronoi(self.positions[self.volumetric], self.window)

    @cached_property
    def cell_overlaps(self):
        """``(cell, simplex, |T ∩ C1(x)|)`` triples for the volumetric cells.

        ``cell`` indexes ``volumetric_index``.
        """
        return cell_simplex_overlaps(self.positions, self.simplices, self.volumetric_cells)

    def edge_multipliers(self, marks, factor):
        """Per-edge multiplier: ``factor`` where an endpoint is marked, else 1."""
        marks = np.asarray(marks, dtype=bool)
        hit = marks[self.edges[:, 0]] | marks[self.edges[:, 1]]
        return np.where(hit, float(factor), 1.0)
