"""Delaunay triangulations, clipped Voronoi cells and convex-polytope clipping."""

from dataclasses import dataclass
from itertools import permutations
from math import factorial

import numpy as np
import shapely
from scipy.spatial import ConvexHull, Delaunay, QhullError, cKDTree

from ..exceptions import DegenerateCell, DegenerateInput, GeneralPositionViolated

TAU_GP = 1e-9


def _canonical_simplices(simplices):
    s = np.sort(np.asarray(simplices, dtype=np.int64), axis=1)
    if len(s) == 0:
        return s
    order = np.lexsort(s.T[::-1])
    return s[order]


def circumspheres(points, simplices):
    """Circumcenters and circumradii of the given simplices."""
    X = points[simplices]  # (k, d+1, d)
    x0 = X[:, 0, :]
    D = X[:, 1:, :] - x0[:, None, :]
    rhs = 0.5 * np.einsum("kij,kij->ki", D, D)
    centers = x0 + np.linalg.solve(D, rhs[..., None])[..., 0]
    radii = np.linalg.norm(X[:, 0, :] - centers, axis=1)
    return centers, radii


def simplex_volumes(points, simplices):
    X = points[simplices]
    D = X[:, 1:, :] - X[:, :1, :]
    d = points.shape[1]
    return np.abs(np.linalg.det(D)) / factorial(d)


def circumsphere_clearance(points, simplices, tol=TAU_GP, region=None):
    """Smallest relative clearance ``(|p - c| - rho) / rho`` over non-member points.

    ``region`` (a box) restricts the test to simplices whose circumcenter lies
    in it; hull slivers along a truncated point set are excluded that way.

    Returns ``(clearance, simplex_index, point_index)`` of the worst case, or
    ``(inf, -1, -1)`` when no point comes close to any circumsphere.
    """
    points = np.asarray(points, dtype=float)
    if len(simplices) == 0:
        return np.inf, -1, -1
    centers, radii = circumspheres(points, simplices)
    active = np.ones(len(simplices), dtype=bool)
    if region is not None:
        active = np.all((centers >= region[0]) & (centers <= region[1]), axis=1)
    tree = cKDTree(points)
    hits = tree.query_ball_point(centers, radii * (1.0 + 1e-6) + 1e-300)
    worst = (np.inf, -1, -1)
    for k, idx in enumerate(hits):
        if not active[k] or len(idx) <= len(simplices[k]):
            continue
        idx = np.setdiff1d(np.asarray(idx), simplices[k], assume_unique=False)
        if len(idx) == 0:
            continue
        clear = (np.linalg.norm(points[idx] - centers[k], axis=1) - radii[k]) / radii[k]
        j = int(np.argmin(clear))
        if clear[j] < worst[0]:
            worst = (float(clear[j]), k, int(idx[j]))
    return worst


def delaunay(points, d=None, tol=TAU_GP, check=True, region=None):
    """Delaunay triangulation as a canonical ``(k, d+1)`` index array.

    Parameters
    ----------
    points : array_like, shape (N, d)
    d : int, optional
        Dimension; inferred from ``points`` when omitted.
    tol : float
        General-position tolerance, relative to the circumradius.
    check : bool
        When true, raise :class:`GeneralPositionViolated` for degenerate
        simplices or points (near-)on a circumsphere.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if d is None:
        d = pts.shape[1]
    if pts.shape[1] != d:
        raise DegenerateInput(f"points have dimension {pts.shape[1]}, expected {d}")
    if len(pts) < d + 1:
        raise DegenerateInput(f"need at least {d + 1} points, got {len(pts)}")

    if d == 1:
        order = np.argsort(pts[:, 0], kind="stable")
        if check and np.any(np.diff(pts[order, 0]) <= tol * np.ptp(pts[:, 0])):
            raise GeneralPositionViolated("coincident points in d=1")
        return _canonical_simplices(np.stack([order[:-1], order[1:]], axis=1))

    try:
        tri = Delaunay(pts)
    except QhullError as exc:
        raise GeneralPositionViolated(f"qhull failed: {exc}") from exc
    simplices = _canonical_simplices(tri.simplices)
    if check:
        _check_general_position(pts, simplices, tol, region)
    return simplices


def _check_general_position(pts, simplices, tol, region=None):
    d = pts.shape[1]
    if region is not None:
        centers, _ = circumspheres(pts, simplices)
        simplices = simplices[np.all((centers >= region[0]) & (centers <= region[1]), axis=1)]
    X = pts[simplices]
    D = X[:, 1:, :] - X[:, :1, :]
    scale = np.max(np.linalg.norm(D, axis=2), axis=1)
    rel = np.abs(np.linalg.det(D)) / scale**d
    if np.any(rel < tol):
        k = int(np.argmin(rel))
        raise GeneralPositionViolated(
            f"simplex {simplices[k].tolist()} is affinely degenerate (relative volume {rel[k]:.3e})"
        )
    clear, k, j = circumsphere_clearance(pts, simplices, tol)
    if clear < tol:
        raise GeneralPositionViolated(
            f"point {j} has circumsphere clearance {clear:.3e} for simplex {simplices[k].tolist()}"
        )


def lattice_triangulation(points):
    """Freudenthal (Kuhn) triangulation of a full block of integer points.

    Each unit cube with all corners present is split into ``d!`` simplices
    along the main diagonal; in 2D this is the lexicographic diagonal
    ``(i, j)-(i+1, j+1)``. Used for the zero-jitter lattice fixture, where the
    Delaunay triangulation is not unique.
    """
    pts = np.asarray(points, dtype=float)
    d = pts.shape[1]
    ipts = np.rint(pts).astype(np.int64)
    if not np.allclose(ipts, pts):
        raise DegenerateInput("lattice triangulation requires integer points")
    index = {tuple(p): i for i, p in enumerate(ipts)}
    eye = np.eye(d, dtype=np.int64)
    perms = list(permutations(range(d)))
    out = []
    for p in ipts:
        corners = [tuple(p + np.array(c)) for c in np.ndindex(*(2,) * d)]
        if not all(c in index for c in corners):
            continue
        for perm in perms:
            verts = [p.copy()]
            for axis in perm:
                verts.append(verts[-1] + eye[axis])
            out.append([index[tuple(v)] for v in verts])
    if not out:
        raise DegenerateInput("no complete unit cube in lattice point set")
    return _canonical_simplices(out)


def simplex_edges(simplices):
    """Unique sorted edges ``(i, j)`` with ``i < j`` of a simplicial complex."""
    s = np.asarray(simplices)
    k = s.shape[1]
    pairs = [s[:, [a, b]] for a in range(k) for b in range(a + 1, k)]
    e = np.sort(np.concatenate(pairs, axis=0), axis=1)
    return np.unique(e, axis=0)


# ---------------------------------------------------------------------------
# convex clipping


def _clip_polygon(poly, normal, offset):
    """Sutherland-Hodgman clip of an ordered convex polygon to ``normal . z <= offset``."""
    if len(poly) == 0:
        return poly
    s = poly @ normal - offset
    inside = s <= 0
    if inside.all():
        return poly
    if not inside.any():
        return poly[:0]
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        if inside[i]:
            out.append(poly[i])
        if inside[i] != inside[j]:
            t = s[i] / (s[i] - s[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.asarray(out)


def _clip_vertices(verts, normal, offset):
    """Clip a convex polytope given by its vertices (any dimension).

    The clipped polytope is the hull of the kept vertices and of the plane
    crossings of all vertex pairs; crossings of non-edges lie inside the
    section and do not change the hull.
    """
    if len(verts) == 0:
        return verts
    s = verts @ normal - offset
    inside = s <= 0
    if inside.all():
        return verts
    if not inside.any():
        return verts[:0]
    a, b = np.nonzero(inside[:, None] & ~inside[None, :])
    t = s[a] / (s[a] - s[b])
    cross = verts[a] + t[:, None] * (verts[b] - verts[a])
    new = np.concatenate([verts[inside], cross], axis=0)
    return _hull_vertices(new)


def _hull_vertices(verts):
    d = verts.shape[1]
    if len(verts) <= d + 1:
        return verts
    try:
        return verts[ConvexHull(verts).vertices]
    except QhullError:
        return verts


def polytope_volume(verts):
    verts = np.asarray(verts, dtype=float)
    d = verts.shape[1]
    if len(verts) < d + 1:
        return 0.0
    if d == 1:
        return float(np.ptp(verts[:, 0]))
    if d == 2:
        x, y = verts[:, 0], verts[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
    try:
        return float(ConvexHull(verts).volume)
    except QhullError:
        return 0.0


def clip_convex(verts, normals, offsets):
    """Clip a convex polytope by the halfspaces ``normals @ z <= offsets``.

    In 2D ``verts`` must be ordered counter-clockwise.
    """
    verts = np.asarray(verts, dtype=float)
    d = verts.shape[1]
    clip = _clip_polygon if d == 2 else _clip_vertices
    for nrm, off in zip(normals, offsets):
        verts = clip(verts, nrm, off)
        if len(verts) == 0:
            break
    return verts


def box_vertices(box):
    lo, hi = np.asarray(box, dtype=float)
    d = len(lo)
    if d == 2:
        return np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    corners = np.array(list(np.ndindex(*(2,) * d)), dtype=float)
    return lo + corners * (hi - lo)


# ---------------------------------------------------------------------------
# Voronoi


@dataclass(frozen=True)
class VoronoiCells:
    """Voronoi cells of a finite point set clipped to an axis-aligned window.

    Attributes
    ----------
    vertices : list of ndarray
        Polytope vertices per cell (counter-clockwise in 2D).
    volumes : ndarray
    interior : ndarray of bool
        True for cells that do not touch the window boundary.
    normals, offsets : list of ndarray
        Bisector halfspaces ``normals @ z <= offsets`` bounding each cell
        (window faces excluded).
    """

    vertices: list
    volumes: np.ndarray
    interior: np.ndarray
    normals: list
    offsets: list


def _neighbor_lists(points):
    n, d = points.shape
    if n == 1:
        return [np.zeros(0, dtype=np.int64)]
    if n <= d + 1 or d == 1:
        return [np.setdiff1d(np.arange(n), [i]) for i in range(n)]
    try:
        tri = Delaunay(points)
        indptr, indices = tri.vertex_neighbor_vertices
        return [indices[indptr[i]:indptr[i + 1]] for i in range(n)]
    except QhullError:
        return [np.setdiff1d(np.arange(n), [i]) for i in range(n)]


def voronoi(points, window, tol=1e-10):
    """Voronoi cells of ``points`` clipped to ``window``.

    Parameters
    ----------
    points : array_like, shape (N, d)
        Points inside the window.
    window : array_like, shape (2, d)
        ``[lo, hi]`` corners of the box.

    Returns
    -------
    VoronoiCells
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    lo, hi = np.asarray(window, dtype=float)
    d = pts.shape[1]
    base = box_vertices((lo, hi))
    scale = float(np.max(hi - lo))
    nbrs = _neighbor_lists(pts)
    verts, vols, interior, normals, offsets = [], [], [], [], []
    for i, x in enumerate(pts):
        y = pts[nbrs[i]]
        nrm = y - x
        off = 0.5 * np.einsum("ij,ij->i", nrm, y + x)
        cell = clip_convex(base, nrm, off)
        vol = polytope_volume(cell) if len(cell) else 0.0
        if vol <= tol * scale**d:
            raise DegenerateCell(f"cell of point {i} at {x.tolist()} is empty after clipping")
        touches = np.any(np.isclose(cell, lo, rtol=0, atol=tol * scale)) or np.any(
            np.isclose(cell, hi, rtol=0, atol=tol * scale)
        )
        verts.append(cell)
        vols.append(vol)
        interior.append(not touches)
        normals.append(nrm)
        offsets.append(off)
    return VoronoiCells(verts, np.asarray(vols), np.asarray(interior, dtype=bool), normals, offsets)


def cell_simplex_overlaps(points, simplices, cells, which=None, tol=1e-12):
    """Measures ``|T ∩ C(x)|`` for cells and simplices that overlap.

    Parameters
    ----------
    points : ndarray, shape (N, d)
        Vertex positions indexed by ``simplices``.
    simplices : ndarray, shape (k, d+1)
    cells : VoronoiCells
        Cells of the points that own them, in the order of ``owners``.
    which : ndarray of int, optional
        Cell indices to process (default all).

    Returns
    -------
    cell_idx, simplex_idx, measure : ndarray
    """
    d = points.shape[1]
    simplices = np.asarray(simplices)
    if which is None:
        which = np.arange(len(cells.volumes))
    if len(simplices) == 0 or len(which) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    X = points[simplices]
    which = np.asarray(which, dtype=np.int64)
    cv_list = [cells.vertices[c] for c in which]
    if d == 2:
        sizes = np.array([len(v) for v in cv_list])
        rings = shapely.linearrings(
            np.concatenate(cv_list), indices=np.repeat(np.arange(len(cv_list)), sizes)
        )
        cellpolys = shapely.polygons(rings)
        tripolys = shapely.polygons(X)
        ci, si = shapely.STRtree(tripolys).query(cellpolys, predicate="intersects")
        m = shapely.area(shapely.intersection(cellpolys[ci], tripolys[si]))
    else:
        cent = X.mean(axis=1)
        rad = np.max(np.linalg.norm(X - cent[:, None, :], axis=2), axis=1)
        cc = np.array([v.mean(axis=0) for v in cv_list])
        crad = np.array([np.max(np.linalg.norm(v - c, axis=1)) for v, c in zip(cv_list, cc)])
        # query from the simplex side so a few large simplices do not widen every search
        hits = cKDTree(cc).query_ball_point(cent, rad + crad.max())
        counts = np.array([len(h) for h in hits])
        si = np.repeat(np.arange(len(X)), counts)
        ci = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits])
        near = np.linalg.norm(cent[si] - cc[ci], axis=1) <= crad[ci] + rad[si] + 1e-12
        ci, si = ci[near], si[near]
        m = np.array([
            polytope_volume(clip_convex(X[t], cells.normals[which[c]], cells.offsets[which[c]]))
            for c, t in zip(ci, si)
        ])
    keep = m > tol * cells.volumes[which[ci]]
    ci, si, m = ci[keep], si[keep], m[keep]
    order = np.lexsort((si, ci))
    ci, si, m = ci[order], si[order], m[order]
    return which[ci], si, m
