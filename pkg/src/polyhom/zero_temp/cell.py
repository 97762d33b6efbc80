"""The zero-temperature cell problem and its multi-start minimizer."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .._validation import check_box, check_lambda
from ..energy import CLAMPED, SOFT, Deformation, Hamiltonian, growth_check
from ..exceptions import InfeasibleBoundary, NotConverged, WindowTooSmall
from ..graph import GraphParams, generate_graph

SOFT_MARGIN = 1e-6


@lru_cache(maxsize=32)
def _cached_graph(params, lo, hi):
    return generate_graph(params, [list(lo), list(hi)], strict=False)


def cell_graph(params, D, eps=1.0, seed=None, margin=None):
    """Graph whose window contains ``D / eps`` plus a margin (default ``C0 + 1``).

    Graphs are cached on ``(params, window)`` so that sweeps over ``Λ`` reuse
    the same geometry.
    """
    if not isinstance(params, GraphParams):
        params = GraphParams(**params)
    if seed is not None:
        params = GraphParams(**{**params.to_dict(), "seed": int(seed)})
    box = check_box(D, params.dimension) / eps
    m = params.interaction_range + 1.0 if margin is None else float(margin)
    lo = tuple(float(v) for v in np.floor(box[0] - m))
    hi = tuple(float(v) for v in np.ceil(box[1] + m))
    return _cached_graph(params, lo, hi)


_GROWTH_OK = {}


def _ensure_growth(pair, vol):
    # growth hypotheses are checked once per potential configuration
    key = (repr(pair.to_dict()), None if vol is None else repr(vol.to_dict()))
    if key not in _GROWTH_OK:
        _GROWTH_OK[key] = growth_check(pair, vol, raise_on_fail=True)
    return _GROWTH_OK[key]


@dataclass
class CellProblem:
    """Minimal energy of ``H_ε(D, ·)`` over deformations with boundary datum ``φ``.

    Parameters
    ----------
    graph : ExtendedGraph
    D : array_like, shape (2, d)
    eps : float
    pair : PairPotential
    vol : VolumetricPotential, optional
    Lambda : array_like, optional
        Linear datum ``φ(x) = Λx``. Exactly one of ``Lambda`` and ``phi``.
    phi : callable, optional
        General Lipschitz datum applied to rows of ``ε x``.
    mode : {"clamped", "soft"}
    band : float, optional
        Width of the boundary band; defaults to ``C0``.
    """

    graph: object
    D: object
    eps: float
    pair: object
    vol: object = None
    Lambda: object = None
    phi: object = None
    mode: str = "clamped"
    band: float = None
    _H: object = field(default=None, init=False, repr=False)
    _u: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        G = self.graph
        self.D = check_box(self.D, G.dimension)
        if (self.Lambda is None) == (self.phi is None):
            raise ValueError("give exactly one of Lambda and phi")
        if self.mode not in ("clamped", "soft"):
            raise ValueError(f"mode must be 'clamped' or 'soft', got {self.mode!r}")
        if self.Lambda is not None:
            self.Lambda = check_lambda(self.Lambda, None, G.dimension)
            L = self.Lambda
            self.phi = lambda y: y @ L.T
        box = self.D / self.eps
        C0 = G.params.interaction_range
        if np.any(G.window[0] > box[0] - C0 + 1e-12) or np.any(G.window[1] < box[1] + C0 - 1e-12):
            raise WindowTooSmall("graph window must contain D/eps plus a C0 margin")

    @property
    def volume(self):
        """``|D_ε|``."""
        return float(np.prod((self.D[1] - self.D[0]) / self.eps))

    @property
    def hamiltonian(self):
        if self._H is None:
            self._H = Hamiltonian(self.graph, self.D, self.eps, self.pair, self.vol)
        return self._H

    @property
    def datum(self):
        """Deformation equal to the datum, with boundary roles."""
        if self._u is None:
            self._u = Deformation.from_map(self.graph, self.D, self.eps, self.phi, band=self.band, mode=self.mode)
        return self._u

    def tol_grad(self):
        """``1e-8 (1 + |Λ|^{p-1})``; for a general datum ``|Λ|`` is its max slope on the vertices."""
        if self.Lambda is not None:
            norm = np.linalg.norm(self.Lambda)
        else:
            u = self.datum
            H = self.hamiltonian
            U = H.values_from(u)
            z = H.edge_vectors
            norm = float(np.max(np.linalg.norm(H.increments(U), axis=1) / np.linalg.norm(z, axis=1))) if len(z) else 0
        return 1e-8 * (1 + norm ** (self.pair.p - 1))

    def with_datum(self, Lambda=None, phi=None):
        """Same graph and domain with another boundary datum."""
        return CellProblem(self.graph, self.D, self.eps, self.pair, self.vol, Lambda, phi, self.mode, self.band)


@dataclass
class MinimizationResult:
    """Best local minimizer over the restarts.

    ``spread`` is ``(max - min) / max(|min|, tiny)`` over converged restart
    energies, a non-convexity indicator.
    """

    deformation: Deformation
    energy: float
    density: float
    grad_norm: float
    tol_grad: float
    best_restart: int
    restart_values: np.ndarray
    restart_converged: np.ndarray
    iterations: np.ndarray
    affine_energy: float
    converged: bool

    @property
    def spread(self):
        vals = self.restart_values[self.restart_converged]
        if len(vals) < 2:
            return 0.0
        return float((vals.max() - vals.min()) / max(abs(vals.min()), np.finfo(float).tiny))

    def to_dict(self):
        return {
            "energy": self.energy,
            "density": self.density,
            "grad_norm": self.grad_norm,
            "tol_grad": self.tol_grad,
            "best_restart": self.best_restart,
            "restart_values": self.restart_values.tolist(),
            "iterations": self.iterations.tolist(),
            "affine_energy": self.affine_energy,
            "spread": self.spread,
            "converged": self.converged,
        }


class _SoftMap:
    """Radial map ``v -> ref + m tanh(|v|) v/|v|`` onto the open unit balls of soft vertices."""

    def __init__(self, soft_rows, radius):
        self.rows = soft_rows
        self.m = radius

    def _s(self, r):
        small = r < 1e-4
        rs = np.where(small, 1.0, r)
        s = np.where(small, 1 - r**2 / 3, np.tanh(rs) / rs)
        # (s'(r) / r), with the series -2/3 + 8 r²/15 near zero
        ds = np.where(small, -2 / 3 + 8 * r**2 / 15, (rs / np.cosh(rs) ** 2 - np.tanh(rs)) / rs**3)
        return s, ds

    def forward(self, V):
        r = np.linalg.norm(V, axis=1)
        s, _ = self._s(r)
        return self.m * s[:, None] * V

    def backward(self, V, G):
        r = np.linalg.norm(V, axis=1)
        s, ds = self._s(r)
        return self.m * (s[:, None] * G + (ds * np.einsum("ij,ij->i", V, G))[:, None] * V)

    def inverse(self, W):
        w = np.linalg.norm(W, axis=1)
        if np.any(w >= self.m):
            raise InfeasibleBoundary("soft start value outside the open box")
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(w > 0, np.arctanh(w / self.m) / np.where(w > 0, w, 1), 1.0 / self.m)
        return f[:, None] * W


def _line_root(grad, x, d, g0d, alpha=1.0, max_eval=30):
    """Step along ``d`` to an approximate zero of ``φ'(α) = ∇H(x + αd)·d``.

    Only gradients are used, so the search still works when energy
    differences fall below the rounding level of the total energy.
    """
    lo, dlo = 0.0, g0d
    hi = None
    a = alpha
    g = None
    for _ in range(max_eval):
        g = grad(x + a * d)
        da = float(g @ d)
        if abs(da) <= 0.1 * abs(g0d):
            return a, g
        if da < 0:
            lo, dlo = a, da
            if hi is None:
                a *= 2.0
                continue
        else:
            hi, dhi = a, da
        # secant inside the bracket, safeguarded toward its middle
        a = lo - dlo * (hi - lo) / (dhi - dlo)
        a = min(max(a, lo + 0.1 * (hi - lo)), hi - 0.1 * (hi - lo))
    return a, g


def _polish(grad, x, tol, max_iter, m=20):
    """Limited-memory BFGS driven by gradients alone, run until ``|∇H|_∞ ≤ tol``."""
    S, Y = [], []
    g = grad(x)
    nit = 0
    while nit < max_iter and np.abs(g).max() > tol:
        q = g.copy()
        rho = [1.0 / float(y @ s) for s, y in zip(S, Y)]
        alphas = []
        for s, y, r in reversed(list(zip(S, Y, rho))):
            al = r * float(s @ q)
            alphas.append(al)
            q -= al * y
        if S:
            q *= float(S[-1] @ Y[-1]) / float(Y[-1] @ Y[-1])
        for (s, y, r), al in zip(zip(S, Y, rho), reversed(alphas)):
            q += (al - r * float(y @ q)) * s
        d = -q
        gd = float(g @ d)
        if gd >= 0:
            S, Y = [], []
            d = -g
            gd = -float(g @ g)
        step, g_new = _line_root(grad, x, d, gd)
        s_vec = step * d
        y_vec = g_new - g
        x = x + s_vec
        g = g_new
        nit += 1
        if float(s_vec @ y_vec) > 1e-300:
            S.append(s_vec)
            Y.append(y_vec)
            if len(S) > m:
                S.pop(0)
                Y.pop(0)
    return x, g, nit


def _run_lbfgs(fg, x0, tol, max_iter, maxcor=20):
    res = minimize(fg, x0, jac=True, method="L-BFGS-B",
                   options=dict(gtol=tol, ftol=0.0, maxiter=max_iter, maxcor=maxcor, maxls=50))
    x, nit = res.x, res.nit
    g = np.abs(res.jac).max() if res.jac.size else 0.0
    if g > tol and nit < max_iter:
        # the line search stalls once energy decreases drop below rounding
        x, gv, extra = _polish(lambda y: fg(y)[1], x, tol, max_iter - nit, maxcor)
        nit += extra
        g = np.abs(gv).max() if gv.size else 0.0
    return x, float(fg(x)[0]), float(g), nit


def minimize_cell(problem, n_restarts=8, sigma_init=0.1, seed=0, max_iter=100_000, tol_grad=None,
                  check_growth=True, raise_on_fail=True):
    """Minimize ``H_ε(D, u)`` over the admissible class of ``problem``.

    Parameters
    ----------
    problem : CellProblem
    n_restarts : int
        Number of starts: the datum itself plus ``n_restarts - 1`` Gaussian
        perturbations of scale ``sigma_init`` at the non-clamped vertices.
    tol_grad : float, optional
        Sup-norm gradient tolerance; defaults to :meth:`CellProblem.tol_grad`.
    check_growth : bool
        Run :func:`growth_check` on the potentials first.

    Returns
    -------
    MinimizationResult

    Raises
    ------
    NotConverged
        When the best restart misses the tolerance; the partial result is
        attached as ``exc.result``.
    InfeasibleBoundary
        When soft mode has no admissible start.
    """
    if check_growth:
        _ensure_growth(problem.pair, problem.vol)
    H = problem.hamiltonian
    u0 = problem.datum
    U0 = H.values_from(u0)
    pos = np.full(problem.graph.n_vertices, -1, dtype=np.int64)
    pos[u0.vertices] = np.arange(len(u0.vertices))
    roles = u0.roles[pos[H.vertices]]
    free = roles != CLAMPED
    soft_rows = np.flatnonzero(roles[free] == SOFT)
    ref = U0[free]
    n = U0.shape[1]
    smap = _SoftMap(soft_rows, 1.0 - SOFT_MARGIN)
    tol = problem.tol_grad() if tol_grad is None else float(tol_grad)
    affine_energy = H.energy(U0)

    def to_values(y):
        Y = y.reshape(-1, n)
        U = U0.copy()
        W = Y.copy()
        if len(soft_rows):
            W[soft_rows] = ref[soft_rows] + smap.forward(Y[soft_rows])
        U[free] = W
        return U

    def fg(y):
        e, g = H.energy_and_gradient(to_values(y))
        gf = g[free]
        if len(soft_rows):
            gf[soft_rows] = smap.backward(y.reshape(-1, n)[soft_rows], gf[soft_rows])
        return e, gf.ravel()

    def start(W):
        Y = W.copy()
        if len(soft_rows):
            Y[soft_rows] = smap.inverse(W[soft_rows] - ref[soft_rows])
        return Y.ravel()

    values, conv, iters, xs, gnorms = [], [], [], [], []
    for k in range(n_restarts):
        W = ref.copy()
        if k > 0:
            rng = np.random.default_rng([seed, k])
            W = W + sigma_init * rng.standard_normal(W.shape)
            if len(soft_rows):
                dev = W[soft_rows] - ref[soft_rows]
                nrm = np.linalg.norm(dev, axis=1, keepdims=True)
                cap = 0.5 * (1.0 - SOFT_MARGIN)
                W[soft_rows] = ref[soft_rows] + dev * np.minimum(1.0, cap / np.maximum(nrm, 1e-300))
        if not free.any():
            break
        x, f, g, nit = _run_lbfgs(fg, start(W), tol, max_iter)
        values.append(f)
        gnorms.append(g)
        conv.append(g <= tol)
        iters.append(nit)
        xs.append(x)

    if not xs:
        # no free vertices: the datum is the only admissible state
        res = MinimizationResult(u0.copy(), affine_energy, affine_energy / problem.volume, 0.0, tol, 0,
                                 np.array([affine_energy]), np.array([True]), np.array([0]), affine_energy, True)
        return res
    values = np.array(values)
    conv = np.array(conv)
    pick = np.where(conv, values, np.inf)
    best = int(np.argmin(pick)) if conv.any() else int(np.argmin(values))
    U = to_values(xs[best])
    rows = pos[H.vertices]
    vals = u0.values.copy()
    vals[rows] = U
    if values[best] > affine_energy + 1e-12 * max(1.0, abs(affine_energy)):
        raise RuntimeError(
            f"minimization dominance violated: {values[best]!r} exceeds the affine competitor {affine_energy!r}"
        )
    result = MinimizationResult(
        deformation=u0.copy(values=vals), energy=float(values[best]), density=float(values[best]) / problem.volume,
        grad_norm=float(gnorms[best]), tol_grad=tol, best_restart=best, restart_values=values,
        restart_converged=conv, iterations=np.array(iters), affine_energy=float(affine_energy),
        converged=bool(conv[best]),
    )
    if not result.converged and raise_on_fail:
        exc = NotConverged(f"gradient sup-norm {result.grad_norm:.3e} above tolerance {tol:.3e}")
        exc.result = result
        raise exc
    return result
