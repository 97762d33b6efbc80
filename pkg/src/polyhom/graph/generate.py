"""Sampling admissible graphs from the jittered-lattice and hard-core Poisson ensembles."""

import numpy as np
from scipy.spatial import cKDTree

from .._validation import check_box
from ..exceptions import CoveringRepairFailed, WindowTooSmall
from .extended import ExtendedGraph
from .geometry import delaunay, lattice_triangulation, simplex_edges
from .params import GraphParams


def covering_probes(window, spacing, margin):
    """Grid of probe points with the given spacing on the window eroded by ``margin``."""
    lo, hi = np.asarray(window, dtype=float)
    lo, hi = lo + margin, hi - margin
    if np.any(hi < lo):
        return np.zeros((0, len(lo)))
    axes = [np.arange(a, b + 0.5 * spacing, spacing) for a, b in zip(lo, hi)]
    axes = [np.minimum(ax, b) for ax, b in zip(axes, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _jittered_lattice(params, window, rng):
    lo, hi = window
    d = params.dimension
    ranges = [np.arange(np.floor(a) - 1, np.ceil(b) + 1) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*ranges, indexing="ij")
    z = np.stack([m.ravel() for m in mesh], axis=1)
    if params.jitter > 0:
        z = z + rng.uniform(-params.jitter, params.jitter, size=z.shape)
    inside = np.all((z >= lo) & (z < hi), axis=1)
    return z[inside].reshape(-1, d)


def _hardcore_poisson(params, window, rng):
    """Random sequential addition of Poisson candidates with hard-core distance r."""
    lo, hi = window
    d = params.dimension
    r = params.hardcore_radius
    vol = float(np.prod(hi - lo))
    n = rng.poisson(params.intensity * vol)
    cand = lo + rng.random((n, d)) * (hi - lo)
    h = r / np.sqrt(d)
    grid = {}
    accepted = []
    reach = int(np.ceil(r / h))
    offsets = np.array(list(np.ndindex(*(2 * reach + 1,) * d))) - reach
    for x in cand:
        key = np.floor((x - lo) / h).astype(np.int64)
        ok = True
        for off in offsets:
            j = grid.get(tuple(key + off))
            if j is not None and np.sum((accepted[j] - x) ** 2) < r * r:
                ok = False
                break
        if ok:
            grid[tuple(key)] = len(accepted)
            accepted.append(x)
    return np.asarray(accepted).reshape(-1, d)


def _repair_covering(points, flags, probes, R):
    """Flag the nearest unflagged vertex to every probe farther than R from the volumetric set."""
    if len(probes) == 0:
        return flags
    full = cKDTree(points)
    dist_all, _ = full.query(probes)
    if np.any(dist_all > R):
        worst = float(dist_all.max())
        raise CoveringRepairFailed(f"vertex set leaves a covering gap of {worst:.3f} > R={R}")
    if flags.all():
        return flags
    flags = flags.copy()
    for _ in range(len(points)):
        idx1 = np.flatnonzero(flags)
        if len(idx1) == 0:
            gaps = np.full(len(probes), np.inf)
        else:
            gaps, _ = cKDTree(points[idx1]).query(probes)
        bad = np.flatnonzero(gaps > R)
        if len(bad) == 0:
            return flags
        # greedy: worst uncovered probe first
        p = probes[bad[np.argmax(gaps[bad])]]
        order = np.argsort(np.linalg.norm(points - p, axis=1))
        j = next(k for k in order if not flags[k])
        flags[j] = True
    raise CoveringRepairFailed("covering repair did not terminate")


def generate_graph(params, window, strict=True):
    """Sample an admissible extended graph on an axis-aligned window.

    Parameters
    ----------
    params : GraphParams
    window : array_like, shape (2, d)
        Half-open box ``[lo, hi)``.
    strict : bool
        Enforce the minimum window side ``4 * C0``. Small deterministic fixtures
        and padded cell-problem windows switch this off.

    Returns
    -------
    ExtendedGraph
    """
    if not isinstance(params, GraphParams):
        params = GraphParams(**params)
    d = params.dimension
    window = check_box(window, d)
    if strict and np.any(window[1] - window[0] < 4 * params.interaction_range):
        raise WindowTooSmall(
            f"window sides {(window[1] - window[0]).tolist()} below 4*C0={4 * params.interaction_range}"
        )
    rng = np.random.default_rng(params.seed)
    if params.ensemble == "jittered-lattice":
        pts = _jittered_lattice(params, window, rng)
    else:
        pts = _hardcore_poisson(params, window, rng)
    if len(pts) < d + 1:
        raise WindowTooSmall("window holds too few vertices")

    fixture = params.ensemble == "jittered-lattice" and params.jitter == 0
    q = params.volumetric_fraction
    flags = rng.random(len(pts)) < q if q < 1 else np.ones(len(pts), dtype=bool)
    probes = covering_probes(window, params.hardcore_radius / 4, params.covering_radius)
    flags = _repair_covering(pts, flags, probes, params.covering_radius)

    if fixture:
        all_simplices = lattice_triangulation(pts)
    else:
        all_simplices = delaunay(pts, d, check=False)
    edges = simplex_edges(all_simplices)
    lengths = np.linalg.norm(pts[edges[:, 0]] - pts[edges[:, 1]], axis=1)
    edges = edges[lengths <= params.interaction_range]

    idx1 = np.flatnonzero(flags)
    if fixture and q == 1:
        simplices = all_simplices
    else:
        R = params.covering_radius
        local = delaunay(pts[idx1], d, check=not fixture, region=window + np.array([R, -R])[:, None])
        simplices = idx1[local]
    return ExtendedGraph(pts, flags, edges, simplices, window, params=params, fixture_only=fixture)


def lattice_fixture(side, d=2, **overrides):
    """Zero-jitter lattice graph on ``[0, side)^d`` (deterministic, fixture only)."""
    kw = dict(dimension=d, jitter=0.0)
    kw.update(overrides)
    params = GraphParams(**kw)
    return generate_graph(params, [[0.0] * d, [float(side)] * d], strict=False)
