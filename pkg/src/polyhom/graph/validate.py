"""Per-instance checks of the admissibility conditions (i)-(v)."""

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .._validation import check_box
from .generate import covering_probes
from .geometry import TAU_GP, circumsphere_clearance

CONDITIONS = ("covering", "separation", "edge_range", "corridor", "general_position")


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_graph`.

    ``passed`` maps each condition name to a boolean, ``witness`` to the worst
    observed quantity (covering gap, minimum distance, longest edge, number of
    sampled pairs without a corridor path, smallest circumsphere clearance).
    """

    passed: dict = field(default_factory=dict)
    witness: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    @property
    def verdict(self):
        return all(self.passed.get(c, False) for c in CONDITIONS)

    def to_dict(self):
        return {"verdict": self.verdict, "passed": dict(self.passed), "witness": dict(self.witness),
                "notes": dict(self.notes)}

    def summary(self):
        lines = [f"{c:17s} {'pass' if self.passed[c] else 'FAIL'}  {self.witness[c]!r}" for c in CONDITIONS]
        lines.append(f"verdict           {'pass' if self.verdict else 'FAIL'}")
        return "\n".join(lines)


def _adjacency_lists(n, edges):
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    return adj


def _dist_to_segment(points, a, b):
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / L2, 0.0, 1.0)
    return np.linalg.norm(points - (a + t[:, None] * ab), axis=1)


def corridor_path_exists(positions, adj, i, j, width):
    """Breadth-first search from i to j through vertices within ``width`` of segment [x_i, x_j]."""
    allowed = _dist_to_segment(positions, positions[i], positions[j]) <= width
    seen = np.zeros(len(positions), dtype=bool)
    seen[i] = True
    queue = deque([i])
    while queue:
        k = queue.popleft()
        if k == j:
            return True
        for m in adj[k]:
            if allowed[m] and not seen[m]:
                seen[m] = True
                queue.append(m)
    return False


def degree_bound(d, r, C0):
    """Packing bound ``(1 + 2 C0 / r)^d`` on the vertex degree."""
    return (1.0 + 2.0 * C0 / r) ** d


def validate_graph(G, n_pairs=200, seed=0, tol=TAU_GP):
    """Check conditions (i)-(v) on a graph instance.

    (i) covering: probe grid of spacing r/4 on the window eroded by R, gap to the
    volumetric points must not exceed R; (ii) minimum pairwise distance >= r;
    (iii) longest edge <= C0; (iv) for a seeded sample of vertex pairs, a path
    exists inside the C0-corridor around the segment; (v) every non-member
    point clears each circumsphere of the volumetric triangulation by ``tol``,
    for simplices centred in the covered region (window eroded by R; skipped
    for fixture-only graphs). Failures are reported, never raised.
    """
    P = G.params
    R, r, C0 = P.covering_radius, P.hardcore_radius, P.interaction_range
    pos = G.positions
    rep = ValidationReport()

    probes = covering_probes(G.window, r / 4, R)
    idx1 = G.volumetric_index
    if len(probes) and len(idx1):
        gap = float(cKDTree(pos[idx1]).query(probes)[0].max())
    else:
        gap = 0.0 if len(probes) == 0 else np.inf
    rep.passed["covering"] = gap <= R
    rep.witness["covering"] = gap

    if len(pos) > 1:
        dmin = float(cKDTree(pos).query(pos, k=2)[0][:, 1].min())
    else:
        dmin = np.inf
    rep.passed["separation"] = dmin >= r
    rep.witness["separation"] = dmin

    emax = float(G.edge_lengths.max()) if len(G.edges) else 0.0
    rep.passed["edge_range"] = emax <= C0
    rep.witness["edge_range"] = emax

    n = G.n_vertices
    rng = np.random.default_rng(seed)
    all_pairs = n * (n - 1) // 2
    if all_pairs <= n_pairs:
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        pairs = []
        while len(pairs) < n_pairs:
            i, j = rng.integers(0, n, size=2)
            if i != j:
                pairs.append((int(i), int(j)))
    adj = _adjacency_lists(n, G.edges)
    failures = sum(not corridor_path_exists(pos, adj, i, j, C0) for i, j in pairs)
    rep.passed["corridor"] = failures == 0
    rep.witness["corridor"] = failures
    rep.notes["corridor_pairs"] = len(pairs)
    rep.notes["components"] = int(G.n_components())
    rep.notes["max_degree"] = int(G.degrees.max()) if n else 0
    rep.notes["degree_bound"] = degree_bound(G.dimension, r, C0)

    if G.fixture_only:
        rep.passed["general_position"] = True
        rep.witness["general_position"] = None
        rep.notes["general_position"] = "skipped (fixture-only graph)"
    else:
        region = G.window + np.array([R, -R])[:, None]
        local = np.searchsorted(idx1, G.simplices)
        clear = circumsphere_clearance(pos[idx1], local, tol, region)[0] if len(idx1) else np.inf
        rep.passed["general_position"] = bool(clear >= tol)
        rep.witness["general_position"] = float(clear)
    return rep


def delone_sandwich(G, cells=None, margin=None, tol=1e-12):
    """Check ``B_{r/2}(x) ⊆ C(x) ⊆ B_R(x)`` on interior cells.

    Only cells lying inside the window eroded by ``margin`` (default ``R``) are
    tested: the covering radius is certified there, while cells in the outer
    layer may reach farther because vertices beyond the window are absent.

    Returns
    -------
    ok : bool
    inner : float
        Smallest distance from a generator to a face of its cell.
    outer : float
        Largest distance from a generator to a vertex of its cell.
    n_checked : int
    """
    cells = G.cells if cells is None else cells
    r, R = G.params.hardcore_radius, G.params.covering_radius
    margin = R if margin is None else margin
    lo, hi = G.window[0] + margin, G.window[1] - margin
    ok, inner, outer, count = True, np.inf, 0.0, 0
    for i in np.flatnonzero(cells.interior):
        V = cells.vertices[i]
        if np.any(V < lo - tol) or np.any(V > hi + tol):
            continue
        count += 1
        x = G.positions[i]
        nrm, off = cells.normals[i], cells.offsets[i]
        face_dist = float(np.min((off - nrm @ x) / np.linalg.norm(nrm, axis=1)))
        far = float(np.max(np.linalg.norm(V - x, axis=1)))
        inner = min(inner, face_dist)
        outer = max(outer, far)
        if face_dist < r / 2 - tol or far > R + tol:
            ok = False
    return ok, inner, outer, count


def interior_voronoi_cells(G, D, eps=1.0):
    """Volumetric cells whose touching simplices all lie in ``D / eps``.

    Parameters
    ----------
    G : ExtendedGraph
    D : array_like, shape (2, d)
        Macroscopic box; the microscopic domain is ``D / eps`` (half-open).
    eps : float

    Returns
    -------
    ndarray of int
        Indices into ``G.volumetric_index`` (cells of the volumetric points).
        Cells that touch the window boundary or are not fully covered by
        simplices are excluded.
    """
    box = check_box(D, G.dimension) / eps
    cell_idx, simp_idx, meas = G.cell_overlaps
    cells = G.volumetric_cells
    if len(cell_idx) == 0:
        return np.zeros(0, dtype=np.int64)
    X = G.positions[G.simplices]
    inside_simplex = np.all((X >= box[0]) & (X < box[1]), axis=(1, 2))
    n = len(cells.volumes)
    all_inside = np.ones(n, dtype=bool)
    np.logical_and.at(all_inside, cell_idx, inside_simplex[simp_idx])
    covered = np.bincount(cell_idx, weights=meas, minlength=n)
    full = np.abs(covered - cells.volumes) <= 1e-9 * cells.volumes
    touched = np.bincount(cell_idx, minlength=n) > 0
    keep = all_inside & full & touched & cells.interior
    return np.flatnonzero(keep)
