"""Finite-size estimation of the zero-temperature density and its structural checks."""

from dataclasses import dataclass, field

import numpy as np

from .._validation import check_box, check_lambda
from ..exceptions import GridTooSmall, PartitionInvalid
from ..graph import GraphParams
from .cell import CellProblem, cell_graph, minimize_cell, _ensure_growth


def _window_problem(params, L, seed, pair, vol, Lambda, mode="clamped", band=None):
    d = params.dimension
    D = np.array([np.zeros(d), np.full(d, float(L))])
    G = cell_graph(params, D, 1.0, seed=seed)
    return CellProblem(G, D, 1.0, pair, vol, Lambda=Lambda, mode=mode, band=band)


def fit_inverse_l(L, y, sigma=None):
    """Weighted least squares of ``y ≈ a + b / L``; returns ``(a, b, residual)``.

    The residual is the weighted root-mean-square misfit (``sigma`` defaults
    to ones).
    """
    L = np.asarray(L, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if sigma is None else 1.0 / np.maximum(np.asarray(sigma, dtype=float), 1e-300)
    if sigma is not None and not np.all(np.asarray(sigma) > 0):
        w = np.ones_like(y)
    A = np.stack([np.ones_like(L), 1.0 / L], axis=1)
    coef, *_ = np.linalg.lstsq(A * w[:, None], y * w, rcond=None)
    r = (A @ coef - y) * w
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(r**2)))


@dataclass
class WInfEstimate:
    """Per-window densities and the ``a + b/L`` extrapolation.

    ``densities[i, j]`` is the minimal energy density on window ``windows[i]``
    for ``seeds[j]``. ``cauchy_gap`` compares the seed means of the two
    largest windows; ``relative_gap`` divides it by the larger window's mean.
    The ``1/L`` model is a heuristic: no convergence rate is known.
    """

    Lambda: np.ndarray
    windows: np.ndarray
    seeds: np.ndarray
    densities: np.ndarray
    spreads: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    value: float
    slope: float
    residual: float
    cauchy_gap: float
    relative_gap: float
    results: list = field(default_factory=list, repr=False)

    @property
    def max_spread(self):
        return float(np.max(self.spreads)) if self.spreads.size else 0.0

    @property
    def stderr(self):
        """Standard error at the largest window (across seeds)."""
        return float(self.stderrs[-1])

    def to_dict(self):
        return {
            "Lambda": self.Lambda.tolist(),
            "windows": self.windows.tolist(),
            "seeds": self.seeds.tolist(),
            "densities": self.densities.tolist(),
            "spreads": self.spreads.tolist(),
            "means": self.means.tolist(),
            "stderrs": self.stderrs.tolist(),
            "value": self.value,
            "slope": self.slope,
            "residual": self.residual,
            "cauchy_gap": self.cauchy_gap,
            "relative_gap": self.relative_gap,
        }


def estimate_W_inf(Lambda, windows, seeds, pair, vol=None, graph_params=None, mode="clamped", band=None,
                   keep_results=False, **solver):
    """Estimate ``W̄^∞(Λ)`` from cell problems on growing windows ``[0, L)^d``.

    Parameters
    ----------
    Lambda : array_like, shape (n, d)
    windows : sequence of float
        At least three window sides (dyadic schedules are the intended use).
    seeds : sequence of int
        Graph seeds; each window is solved once per seed.
    pair, vol : potentials
    graph_params : GraphParams, optional
    solver : dict
        Forwarded to :func:`minimize_cell`.

    Returns
    -------
    WInfEstimate

    Raises
    ------
    GridTooSmall
        With fewer than three distinct windows.
    """
    params = graph_params if graph_params is not None else GraphParams()
    if not isinstance(params, GraphParams):
        params = GraphParams(**params)
    windows = np.asarray(sorted(set(float(w) for w in windows)))
    if len(windows) < 3:
        raise GridTooSmall("estimate_W_inf needs at least three window sizes")
    seeds = np.asarray(list(seeds), dtype=np.int64)
    if len(seeds) == 0 or len(set(seeds.tolist())) != len(seeds):
        raise ValueError("seeds must be nonempty and distinct")
    Lambda = check_lambda(Lambda, None, params.dimension)
    dens = np.empty((len(windows), len(seeds)))
    spreads = np.empty_like(dens)
    results = []
    for i, L in enumerate(windows):
        for j, s in enumerate(seeds):
            pr = _window_problem(params, L, int(s), pair, vol, Lambda, mode, band)
            res = minimize_cell(pr, **solver)
            dens[i, j] = res.density
            spreads[i, j] = res.spread
            if keep_results:
                results.append(((float(L), int(s)), res))
    return w_inf_from_densities(Lambda, windows, seeds, dens, spreads, results)


def w_inf_from_densities(Lambda, windows, seeds, densities, spreads, results=()):
    """Assemble a :class:`WInfEstimate` from a ``(window, seed)`` table of densities."""
    windows = np.asarray(windows, dtype=float)
    seeds = np.asarray(seeds, dtype=np.int64)
    dens = np.asarray(densities, dtype=float)
    spreads = np.asarray(spreads, dtype=float)
    if len(windows) < 3:
        raise GridTooSmall("the W-infinity extrapolation needs at least three window sizes")
    means = dens.mean(axis=1)
    if len(seeds) > 1:
        stderrs = dens.std(axis=1, ddof=1) / np.sqrt(len(seeds))
    else:
        stderrs = np.zeros(len(windows))
    a, b, resid = fit_inverse_l(windows, means, stderrs if np.all(stderrs > 0) else None)
    gap = float(abs(means[-1] - means[-2]))
    return WInfEstimate(np.asarray(Lambda, dtype=float), windows, seeds, dens, spreads, means, stderrs, a, b, resid,
                        gap, gap / max(abs(means[-1]), np.finfo(float).tiny), list(results))


def window_density(Lambda, L, seeds, pair, vol=None, graph_params=None, **solver):
    """Seed mean and standard error of the minimal density on one window ``[0, L)^d``."""
    params = graph_params if graph_params is not None else GraphParams()
    if not isinstance(params, GraphParams):
        params = GraphParams(**params)
    vals = np.array([minimize_cell(_window_problem(params, L, int(s), pair, vol, Lambda), **solver).density
                     for s in seeds])
    se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return float(vals.mean()), se


# ----------------------------------------------------------------------------
# subadditivity


def _check_partition(I, parts):
    I = check_box(I)
    parts = [check_box(P, I.shape[1]) for P in parts]
    if len(parts) < 1:
        raise PartitionInvalid("empty partition")
    vol = float(np.prod(I[1] - I[0]))
    total = 0.0
    for k, P in enumerate(parts):
        if np.any(P[0] < I[0] - 1e-12) or np.any(P[1] > I[1] + 1e-12):
            raise PartitionInvalid(f"part {k} leaves the box")
        total += float(np.prod(P[1] - P[0]))
        for Q in parts[:k]:
            overlap = np.prod(np.clip(np.minimum(P[1], Q[1]) - np.maximum(P[0], Q[0]), 0, None))
            if overlap > 1e-12 * vol:
                raise PartitionInvalid("parts overlap")
    if abs(total - vol) > 1e-9 * vol:
        raise PartitionInvalid("parts do not cover the box")
    return I, parts


def interior_surface(I, parts):
    """``Σ_i H^{d-1}(∂I_i \\ ∂I)`` for a box partition."""
    I = check_box(I)
    total = 0.0
    for P in parts:
        P = check_box(P, I.shape[1])
        side = P[1] - P[0]
        for k in range(len(side)):
            face = float(np.prod(np.delete(side, k)))
            total += face * (P[0, k] > I[0, k] + 1e-12) + face * (P[1, k] < I[1, k] - 1e-12)
    return total


def partition_grid(I, counts):
    """Split a box into ``counts[k]`` equal slabs along axis ``k``."""
    I = check_box(I)
    edges = [np.linspace(I[0, k], I[1, k], c + 1) for k, c in enumerate(counts)]
    parts = []
    for idx in np.ndindex(*counts):
        lo = [edges[k][i] for k, i in enumerate(idx)]
        hi = [edges[k][i + 1] for k, i in enumerate(idx)]
        parts.append(np.array([lo, hi]))
    return parts


@dataclass
class SubadditivityReport:
    """Outcome of :func:`subadditivity_check`.

    ``slack = Σσ(I_i) + C_Λ S - σ(I)`` is the tested inequality;
    ``stitched_slack = H(I, stitched) - σ(I)`` compares with the glued
    sub-minimizers and ``interface_energy = H(I, stitched) - Σσ(I_i)`` is the
    energy of the chains and cells cut by the partition.
    """

    sigma_I: float
    sigma_parts: np.ndarray
    surface: float
    C_Lambda: float
    slack: float
    stitched_energy: float
    stitched_slack: float
    interface_energy: float
    tolerance: float

    @property
    def passed(self):
        return self.slack >= -self.tolerance and self.stitched_slack >= -self.tolerance

    def to_dict(self):
        out = dict(self.__dict__)
        out["sigma_parts"] = self.sigma_parts.tolist()
        out["passed"] = self.passed
        return out


def _surface_constant(G, pair, vol, Lambda, I):
    """``C_Λ = C (|Λ|^p + 1)`` from the upper growth constants.

    ``C`` bounds the energy per unit interface area of chains (length at most
    ``C0``) and volumetric cells (diameter at most ``2R``) crossing a flat
    interface, using the graph's vertex density and degree.
    """
    rep = _ensure_growth(pair, vol)
    P = G.params
    C0 = P.interaction_range
    p = max(pair.p, 2.0)
    up = max(rep.C2_upper, rep.Cp_upper if np.isfinite(rep.Cp_upper) else 0.0)
    box = check_box(I, G.dimension)
    inside = np.all((G.positions >= box[0]) & (G.positions < box[1]), axis=1)
    rho = inside.sum() / float(np.prod(box[1] - box[0]))
    deg = G.degrees[inside].max() if inside.any() else 0
    # chains cut by a unit interface have one end within C0 of it
    c_pair = 2 * rho * C0 * deg * up * max(1.0, C0) ** p
    c_vol = 0.0
    if vol is not None and vol.kind != "none":
        c_vol = 2 * 2 * P.covering_radius * rep.W_constant * max(1.0, C0) ** p
    return (c_pair + c_vol) * (np.linalg.norm(Lambda) ** p + 1)


def subadditivity_check(Lambda, I, parts, pair, vol=None, graph=None, graph_params=None, seed=0, tol_scale=None,
                        **solver):
    """Test ``σ(I) ≤ Σ σ(I_i) + C_Λ Σ H^{d-1}(∂I_i \\ ∂I)`` at scale ``ε = 1``.

    ``σ(J)`` is the minimal energy on ``J`` with clamped affine data. The
    sub-minimizers are also glued into a competitor for ``I``, which is
    admissible because every part is clamped near its own boundary.

    Raises
    ------
    PartitionInvalid
        When ``parts`` is not a partition of ``I`` into boxes.
    """
    I, parts = _check_partition(I, parts)
    if graph is None:
        params = graph_params if graph_params is not None else GraphParams(dimension=I.shape[1])
        graph = cell_graph(params, I, 1.0, seed=seed)
    Lambda = check_lambda(Lambda, None, graph.dimension)
    whole = CellProblem(graph, I, 1.0, pair, vol, Lambda=Lambda)
    r_I = minimize_cell(whole, **solver)
    sig = []
    vals = whole.datum.values.copy()
    pos = np.full(graph.n_vertices, -1, dtype=np.int64)
    pos[whole.datum.vertices] = np.arange(len(whole.datum.vertices))
    for P in parts:
        r = minimize_cell(CellProblem(graph, P, 1.0, pair, vol, Lambda=Lambda), **solver)
        sig.append(r.energy)
        vals[pos[r.deformation.vertices]] = r.deformation.values
    H = whole.hamiltonian
    stitched = float(H.energy(H.values_from(whole.datum.copy(values=vals))))
    sig = np.array(sig)
    S = interior_surface(I, parts)
    C = float(_surface_constant(graph, pair, vol, Lambda, I))
    tol_grad = whole.tol_grad()
    tol = tol_grad * (1.0 if tol_scale is None else tol_scale) * max(1.0, abs(r_I.energy))
    return SubadditivityReport(
        sigma_I=r_I.energy, sigma_parts=sig, surface=S, C_Lambda=C,
        slack=float(sig.sum() + C * S - r_I.energy), stitched_energy=stitched,
        stitched_slack=float(stitched - r_I.energy), interface_energy=float(stitched - sig.sum()),
        tolerance=float(tol),
    )


# ----------------------------------------------------------------------------
# rank-one probe


@dataclass
class RankOneReport:
    """Samples ``g(t) = W̄(Λ + t a⊗n)`` and midpoint convexity defects.

    ``defects[k] = (g(t_k) + g(t_{k+2}))/2 - g(t_{k+1})`` on consecutive
    equally spaced triples, so convexity along the line makes every defect
    nonnegative. ``defect_stderr`` combines the three standard errors.
    """

    ts: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray
    defects: np.ndarray
    defect_stderr: np.ndarray

    def passed(self, k=2.0, atol=0.0):
        return bool(np.all(self.defects >= -k * self.defect_stderr - atol))

    def to_dict(self):
        return {k: v.tolist() for k, v in self.__dict__.items()}


def rank_one_probe(Lambda, a, n, ts, estimator):
    """Sample ``W̄`` along the rank-one line ``Λ + t a⊗n``.

    Parameters
    ----------
    Lambda : array_like, shape (n, d)
    a, n : array_like
        Nonzero vectors of ℝⁿ and ℝ^d.
    ts : sequence of float
        Increasing, equally spaced grid (at least three points).
    estimator : callable
        ``estimator(M)`` returns a value, a ``(value, stderr)`` pair, or an
        object with ``value`` and ``stderr`` attributes.

    Returns
    -------
    RankOneReport
    """
    Lambda = np.atleast_2d(np.asarray(Lambda, dtype=float))
    a = np.asarray(a, dtype=float).ravel()
    n = np.asarray(n, dtype=float).ravel()
    if not (np.any(a) and np.any(n)):
        raise ValueError("a and n must be nonzero")
    ts = np.asarray(ts, dtype=float)
    if len(ts) < 3 or np.any(np.diff(ts) <= 0):
        raise ValueError("ts must be increasing with at least three points")
    if not np.allclose(np.diff(ts), ts[1] - ts[0], rtol=1e-9, atol=1e-12):
        raise ValueError("ts must be equally spaced")
    vals, errs = [], []
    for t in ts:
        out = estimator(Lambda + t * np.outer(a, n))
        if hasattr(out, "value"):
            v, e = out.value, getattr(out, "stderr", 0.0)
        elif isinstance(out, tuple):
            v, e = out
        else:
            v, e = out, 0.0
        vals.append(float(v))
        errs.append(float(e))
    return rank_one_report(ts, vals, errs)


def rank_one_report(ts, values, stderrs):
    """Midpoint defects of values already sampled on an equally spaced line."""
    vals, errs = np.asarray(values, dtype=float), np.asarray(stderrs, dtype=float)
    defects = 0.5 * (vals[:-2] + vals[2:]) - vals[1:-1]
    dse = np.sqrt(errs[1:-1] ** 2 + 0.25 * (errs[:-2] ** 2 + errs[2:] ** 2))
    return RankOneReport(np.asarray(ts, dtype=float), vals, errs, defects, dse)


def growth_sandwich(norms, values, p):
    """Constants with ``c|Λ|^p - C ≤ W ≤ C(1 + |Λ|^p)`` at the sampled points.

    ``C`` is the smallest upper constant; ``c`` is then the largest lower
    slope compatible with that ``C``. Returns ``(c, C, ok)`` with ``ok`` true
    when ``c > 0`` and both bounds hold.
    """
    s = np.asarray(norms, dtype=float)
    w = np.asarray(values, dtype=float)
    C = float(np.max(w / (1 + s**p)))
    c = float(np.min((w + C) / s**p))
    ok = bool(c > 0 and np.all(c * s**p - C <= w * (1 + 1e-12) + 1e-300) and np.all(w <= C * (1 + s**p) * (1 + 1e-12)))
    return c, C, ok
