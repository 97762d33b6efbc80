"""Empirical constants of the discrete Poincaré inequality with soft zero data."""

from dataclasses import dataclass

import numpy as np

from ..graph import GraphParams
from ..zero_temp import cell_graph


def _window_parts(G, L):
    x = G.positions
    inside = np.all((x >= 0) & (x < L), axis=1)
    e = G.edges
    inner = inside[e[:, 0]] & inside[e[:, 1]]
    dist = np.min(np.minimum(x, L - x), axis=1)
    return inside, e[inner], dist


def poincare_ratio(G, L, u, p, band=None):
    """``‖u‖^p / (ε^{-p} (‖∇u‖^p + ε^{1-d}))`` on the window ``[0, L)^d`` with ``ε = 1/L``.

    Parameters
    ----------
    G : ExtendedGraph
        Graph covering the window.
    L : float
        Window side in lattice units; the macroscopic domain is the unit cube.
    u : ndarray, shape (n_vertices,) or (n_vertices, n)
        Values at every vertex of ``G``; only vertices inside the window count.
    band : float, optional
        Boundary band width (default the interaction range ``C0``); values
        there must satisfy ``|u| < 1``.

    Raises
    ------
    ValueError
        When ``u`` violates the soft zero boundary condition.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if len(u) != G.n_vertices:
        raise ValueError(f"u has {len(u)} rows, the graph {G.n_vertices} vertices")
    band = G.params.interaction_range if band is None else float(band)
    inside, edges, dist = _window_parts(G, L)
    norm = np.linalg.norm(u, axis=1)
    near = inside & (dist <= band)
    if np.any(norm[near] >= 1):
        raise ValueError("u violates the soft zero boundary band (|u| < 1 required near the boundary)")
    eps = 1.0 / L
    d = G.dimension
    lhs = float(np.sum(norm[inside] ** p))
    grad = float(np.sum(np.linalg.norm(u[edges[:, 0]] - u[edges[:, 1]], axis=1) ** p))
    return lhs / (eps**-p * (grad + eps ** (1 - d)))


def smooth_bump(y, coeffs, delta):
    """Smooth function on the unit cube vanishing within ``delta`` of its boundary.

    ``b(y) = w(y) Σ_k c_k cos(2π k·y + θ_k)`` with the cutoff
    ``w(y) = Π_i sin²(π s_i)``, ``s_i = (y_i - δ)/(1 - 2δ)`` clipped to ``[0, 1]``.
    ``coeffs`` is a list of ``(k, c, θ)``.
    """
    y = np.atleast_2d(y)
    s = np.clip((y - delta) / (1.0 - 2.0 * delta), 0.0, 1.0)
    w = np.prod(np.sin(np.pi * s) ** 2, axis=1)
    series = np.zeros(len(y))
    for k, c, th in coeffs:
        series += c * np.cos(2 * np.pi * y @ np.asarray(k, dtype=float) + th)
    return w * series


def random_bump_coeffs(rng, d, n_modes=3, k_max=2):
    """Random Fourier coefficients for :func:`smooth_bump`, normalized to unit sum."""
    ks = rng.integers(0, k_max + 1, size=(n_modes, d))
    cs = rng.normal(size=n_modes)
    cs /= np.sum(np.abs(cs))
    ths = rng.uniform(0, 2 * np.pi, size=n_modes)
    return [(k, c, t) for k, c, t in zip(ks, cs, ths)]


@dataclass
class PoincareReport:
    """Largest empirical ratio per window and its spread across the sweep."""

    windows: np.ndarray
    constants: np.ndarray
    ratios: np.ndarray

    @property
    def factor(self):
        c = self.constants
        return float(c.max() / c.min()) if np.all(c > 0) else float("inf")

    def passed(self, factor=2.0):
        return bool(self.factor <= factor)

    def to_dict(self):
        return {"windows": self.windows.tolist(), "constants": self.constants.tolist(),
                "factor": self.factor}


def poincare_probe(graph_params, windows, p, seeds, n_functions=8, amplitude="macroscopic", n_modes=3, k_max=2,
                   delta=None):
    """Empirical Poincaré constants over a sweep of windows ``[0, L)^d`` (``ε = 1/L``).

    Test functions are ``u(x) = A b(x/L)`` with ``b`` from :func:`smooth_bump`
    vanishing in a macroscopic band ``delta`` (default ``(C0 + 1)/min(windows)``),
    so they lie in the soft zero class on every window of the sweep.
    The macroscopic amplitude ``A = L`` is the discrete counterpart of a fixed
    smooth function; a float gives a fixed amplitude instead.

    Parameters
    ----------
    graph_params : GraphParams or dict
    windows : sequence of float
    p : float
    seeds : sequence of int
        Each seed draws one graph per window and ``n_functions`` bumps shared
        by all windows.

    Returns
    -------
    PoincareReport
        ``ratios[i, j]`` is the largest ratio over the bumps of seed ``j`` on
        window ``i``; ``constants[i]`` the maximum over seeds.
    """
    if not isinstance(graph_params, GraphParams):
        graph_params = GraphParams(**graph_params)
    windows = np.asarray(windows, dtype=float)
    d = graph_params.dimension
    C0 = graph_params.interaction_range
    if delta is None:
        delta = (C0 + 1.0) / windows.min()
    if not 0 <= delta < 0.5:
        raise ValueError(f"boundary band {delta:.3g} leaves no interior; use windows above {2 * (C0 + 1)}")
    ratios = np.zeros((len(windows), len(seeds)))
    for j, s in enumerate(seeds):
        rng = np.random.default_rng([int(s), 7])
        bumps = [random_bump_coeffs(rng, d, n_modes, k_max) for _ in range(n_functions)]
        for i, L in enumerate(windows):
            G = cell_graph(graph_params, [np.zeros(d), np.full(d, L)], seed=s)
            A = L if amplitude == "macroscopic" else float(amplitude)
            y = G.positions / L
            best = 0.0
            for co in bumps:
                u = A * smooth_bump(y, co, delta)
                best = max(best, poincare_ratio(G, L, u, p, band=C0))
            ratios[i, j] = best
    return PoincareReport(windows, ratios.max(axis=1), ratios)
