"""Assembly and evaluation of the discrete Hamiltonian on a domain ``D_ε``."""

import numpy as np
from scipy.sparse import csr_matrix

from .._validation import check_box
from ..exceptions import DimensionMismatch, MissingVertexValue
from ..graph.validate import interior_voronoi_cells
from .deformation import Deformation, domain_vertices
from .potentials import VolumetricPotential


def det_and_cofactors(E):
    """Determinants of a stack of square matrices and the derivative ``∂det/∂E``.

    ``E`` has shape (k, d, d); the cofactor array has the same shape.
    """
    d = E.shape[-1]
    if d == 1:
        return E[:, 0, 0].copy(), np.ones_like(E)
    if d == 2:
        a, b, c, e = E[:, 0, 0], E[:, 0, 1], E[:, 1, 0], E[:, 1, 1]
        cof = np.stack([np.stack([e, -c], -1), np.stack([-b, a], -1)], 1)
        return a * e - b * c, cof
    if d == 3:
        r0, r1, r2 = E[:, 0], E[:, 1], E[:, 2]
        cof = np.stack([np.cross(r1, r2), np.cross(r2, r0), np.cross(r0, r1)], 1)
        return np.einsum("ki,ki->k", r0, cof[:, 0]), cof
    det = np.linalg.det(E)
    cof = np.empty_like(E)
    for k in range(len(E)):
        # adjugate by minors keeps singular matrices well-defined
        for i in range(d):
            for j in range(d):
                minor = np.delete(np.delete(E[k], i, 0), j, 1)
                cof[k, i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return det, cof


class Hamiltonian:
    """The discrete Hamiltonian ``H_ε(D, ·)`` assembled for fast repeated evaluation.

    Parameters
    ----------
    G : ExtendedGraph
    D : array_like, shape (2, d)
        Macroscopic box; vertices of ``D / eps`` (half-open) carry values.
    eps : float
    pair : PairPotential
    vol : VolumetricPotential, optional
        Omitted or ``kind="none"`` for the pure chain model.

    Attributes
    ----------
    vertices : ndarray
        Global indices of the vertices of ``D_ε``; rows of every value array
        follow this order.
    edges : ndarray, shape (m, 2)
        Chains with both ends in ``D_ε``, in local numbering.
    cells : ndarray
        Interior volumetric cells (indices into ``G.volumetric_index``).

    Notes
    -----
    The volumetric term is rewritten over simplices: the cell average of
    ``det ∇u_aff`` is ``Σ_T det(∇u_T) |T ∩ C₁(x)| / |C₁(x)|`` with
    ``det(∇u_T) = det(U_T) / det(X_T)`` for the difference matrices of the
    deformed and reference simplex.
    """

    def __init__(self, G, D, eps, pair, vol=None, vertices=None):
        self.graph = G
        self.box = check_box(D, G.dimension) / eps
        self.D = check_box(D, G.dimension)
        self.eps = float(eps)
        self.pair = pair
        self.vol = vol if vol is not None else VolumetricPotential(kind="none")
        self.vertices = domain_vertices(G, D, eps) if vertices is None else np.asarray(vertices)
        self.n_vertices = len(self.vertices)
        local = np.full(G.n_vertices, -1, dtype=np.int64)
        local[self.vertices] = np.arange(self.n_vertices)
        self._local = local

        le = local[G.edges]
        keep = np.all(le >= 0, axis=1)
        self.edge_ids = np.flatnonzero(keep)
        self.edges = le[keep]
        z = G.positions[G.edges[keep, 0]] - G.positions[G.edges[keep, 1]]
        self.edge_vectors = z
        self._pair = pair.compile(z, self.edge_ids)

        self.cells = np.zeros(0, dtype=np.int64)
        self.simplices = np.zeros((0, G.dimension + 1), dtype=np.int64)
        self.cell_volumes = np.zeros(0)
        self._M = csr_matrix((0, 0))
        if self.vol.active:
            self._assemble_volumetric()

    def _assemble_volumetric(self):
        G = self.graph
        d = G.dimension
        if self.vol.p < d:
            raise ValueError("volumetric term requires p >= d")
        cells = interior_voronoi_cells(G, self.D, self.eps)
        ci, si, meas = G.cell_overlaps
        pos_in = np.full(len(G.volumetric_cells.volumes), -1, dtype=np.int64)
        pos_in[cells] = np.arange(len(cells))
        rows = pos_in[ci]
        keep = (rows >= 0) & (meas > 0)
        rows, si, meas = rows[keep], si[keep], meas[keep]
        used, cols = np.unique(si, return_inverse=True)
        simp = self._local[G.simplices[used]]
        if np.any(simp < 0):
            raise MissingVertexValue("interior cell touches a simplex outside the domain")
        vols = G.volumetric_cells.volumes[cells]
        self.cells = cells
        self.cell_volumes = vols
        self.simplices = simp
        X = G.positions[G.simplices[used]]
        self._ref_det, _ = det_and_cofactors(X[:, 1:, :] - X[:, :1, :])
        self._M = csr_matrix((meas / vols[rows], (rows, cols)), shape=(len(cells), len(used)))

    def _check_values(self, U):
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            U = U.reshape(self.n_vertices, -1)
        if U.shape[0] != self.n_vertices:
            raise MissingVertexValue(f"expected values on {self.n_vertices} vertices, got {U.shape[0]}")
        if self.vol.active and U.shape[1] != self.graph.dimension:
            raise DimensionMismatch("the volumetric term requires n = d")
        return U

    def increments(self, U):
        return U[self.edges[:, 0]] - U[self.edges[:, 1]]

    def simplex_dets(self, U):
        """``det ∇u_aff`` on every simplex used by the interior cells."""
        S = self.simplices
        E = U[S[:, 1:]] - U[S[:, :1]]
        det, _ = det_and_cofactors(E)
        return det / self._ref_det

    def cell_dets(self, U):
        """Cell averages ``det_C(∇u_aff)`` on the interior cells."""
        U = self._check_values(U)
        return self._M @ self.simplex_dets(U) if len(self.cells) else np.zeros(0)

    def edge_energies(self, U):
        U = self._check_values(U)
        return self._pair.energy(self.increments(U))

    def terms(self, U):
        """``(pair part, volumetric part)`` of the Hamiltonian."""
        U = self._check_values(U)
        e_pair = float(np.sum(self._pair.energy(self.increments(U))))
        e_vol = 0.0
        if len(self.cells):
            e_vol = float(self.cell_volumes @ self.vol(self._M @ self.simplex_dets(U)))
        return e_pair, e_vol

    def energy(self, U):
        a, b = self.terms(U)
        return a + b

    __call__ = energy

    def gradient(self, U):
        """Gradient with respect to all vertex values, shape (k, n)."""
        return self.energy_and_gradient(U)[1]

    def energy_and_gradient(self, U):
        U = self._check_values(U)
        k, n = U.shape
        xi = self.increments(U)
        e = float(np.sum(self._pair.energy(xi)))
        g_edge = self._pair.gradient(xi)
        grad = np.zeros((k, n))
        i, j = self.edges[:, 0], self.edges[:, 1]
        for c in range(n):
            grad[:, c] = np.bincount(i, g_edge[:, c], minlength=k) - np.bincount(j, g_edge[:, c], minlength=k)
        if len(self.cells):
            S = self.simplices
            E = U[S[:, 1:]] - U[S[:, :1]]
            det, cof = det_and_cofactors(E)
            det_T = det / self._ref_det
            avg = self._M @ det_T
            e += float(self.cell_volumes @ self.vol(avg))
            dT = self._M.T @ (self.cell_volumes * self.vol.derivative(avg))
            gv = (dT / self._ref_det)[:, None, None] * cof  # (s, d, n)
            d = S.shape[1] - 1
            for c in range(n):
                for a in range(d):
                    grad[:, c] += np.bincount(S[:, a + 1], gv[:, a, c], minlength=k)
                grad[:, c] -= np.bincount(S[:, 0], gv[:, :, c].sum(axis=1), minlength=k)
        return e, grad

    def values_from(self, u):
        """Extract the value array of a :class:`Deformation` in this model's vertex order."""
        if not isinstance(u, Deformation):
            return self._check_values(u)
        pos = np.full(self.graph.n_vertices, -1, dtype=np.int64)
        pos[u.vertices] = np.arange(len(u.vertices))
        rows = pos[self.vertices]
        if np.any(rows < 0):
            missing = self.vertices[rows < 0][:5].tolist()
            raise MissingVertexValue(f"deformation lacks values at vertices {missing}...")
        return self._check_values(u.values[rows])


def hamiltonian(G, D, eps, u, pair, vol=None):
    """Evaluate ``H_ε(D, u)``.

    Parameters
    ----------
    G : ExtendedGraph
    D : array_like, shape (2, d)
    eps : float
    u : Deformation or ndarray
        Values on the vertices of ``D_ε`` (graph order).
    pair : PairPotential
    vol : VolumetricPotential, optional

    Returns
    -------
    float
    """
    H = Hamiltonian(G, D, eps, pair, vol)
    return H.energy(H.values_from(u))


def hamiltonian_gradient(G, D, eps, u, pair, vol=None):
    """Gradient of ``H_ε(D, u)`` at the non-clamped vertices.

    Returns
    -------
    ndarray, shape (m, n)
        Rows follow the non-clamped vertices of ``u`` in graph order (all
        vertices when ``u`` is a plain array).
    """
    H = Hamiltonian(G, D, eps, pair, vol)
    g = H.gradient(H.values_from(u))
    if isinstance(u, Deformation):
        pos = np.full(G.n_vertices, -1, dtype=np.int64)
        pos[H.vertices] = np.arange(H.n_vertices)
        return g[pos[u.vertices[u.free]]]
    return g


def gradient_check(H, U, h=1e-5, floor=1e-3):
    """Largest relative deviation of ``H.gradient`` from central differences.

    Entries are compared relative to ``max(|fd|, floor * max|fd|)`` so that
    near-zero components do not dominate. Returns ``(max_error, analytic, fd)``.
    """
    U = np.asarray(U, dtype=float)
    g = H.gradient(U)
    fd = np.zeros_like(U)
    for i in range(U.shape[0]):
        for c in range(U.shape[1]):
            Up, Um = U.copy(), U.copy()
            Up[i, c] += h
            Um[i, c] -= h
            fd[i, c] = (H.energy(Up) - H.energy(Um)) / (2 * h)
    scale = np.maximum(np.abs(fd), floor * max(float(np.abs(fd).max()), np.finfo(float).tiny))
    return float(np.max(np.abs(g - fd) / scale)), g, fd


def discrete_norms(G, u, p, region, eps=1.0, vertices=None):
    """Discrete ``ℓ^p`` norms of a vertex field and of its edge increments.

    Parameters
    ----------
    G : ExtendedGraph
    u : ndarray, shape (k, n) or (k,)
        Values on ``vertices`` (default: all graph vertices).
    p : float
        Exponent ``>= 1``.
    region : array_like, shape (2, d)
        Box ``O``; sums run over vertices and chains inside ``O / eps``.

    Returns
    -------
    (float, float)
        ``‖u‖_{ℓ^p_ε(O)}`` and ``‖∇_𝔅 u‖_{ℓ^p_ε(O)}``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    vertices = np.arange(G.n_vertices) if vertices is None else np.asarray(vertices)
    full = np.full((G.n_vertices, u.shape[1]), np.nan)
    full[vertices] = u
    inside = np.zeros(G.n_vertices, dtype=bool)
    inside[domain_vertices(G, region, eps)] = True
    if np.any(np.isnan(full[inside])):
        raise MissingVertexValue("field undefined at some vertices of the region")
    vn = np.sum(np.linalg.norm(full[inside], axis=1) ** p) ** (1 / p)
    e = G.edges[inside[G.edges[:, 0]] & inside[G.edges[:, 1]]]
    en = np.sum(np.linalg.norm(full[e[:, 0]] - full[e[:, 1]], axis=1) ** p) ** (1 / p)
    return float(vn), float(en)
