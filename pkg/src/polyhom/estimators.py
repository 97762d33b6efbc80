"""Scikit-learn style wrappers around the cell-problem and free-energy solvers.

The physical estimators have nothing to learn: ``fit`` validates parameters
and builds the graph of the configured window, ``predict`` evaluates the
density at each deformation gradient. :class:`ScalingRegressor` is an
ordinary least-squares fit of the two scaling forms.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_box, check_lambdas, check_positive
from .energy import PairPotential, VolumetricPotential
from .finite_temp import QuadraticModel, free_energy_ti, gaussian_free_energy
from .fitting import fit_scaling
from .graph import GraphParams
from .zero_temp import CellProblem, cell_graph, minimize_cell


def _as_pair(pair):
    if pair is None:
        return PairPotential()
    return pair if isinstance(pair, PairPotential) else PairPotential(**pair)


def _as_vol(vol):
    if vol is None or isinstance(vol, VolumetricPotential):
        return vol
    return VolumetricPotential(**vol)


class _CellEstimator(BaseEstimator):
    def _setup(self):
        gp = self.graph_params
        gp = GraphParams() if gp is None else (gp if isinstance(gp, GraphParams) else GraphParams(**gp))
        d = gp.dimension
        if self.domain is None:
            D = np.array([np.zeros(d), np.full(d, check_positive(self.window, "window"))])
        else:
            D = check_box(self.domain, d)
        self.pair_ = _as_pair(self.pair)
        self.vol_ = _as_vol(self.vol)
        self.seeds_ = [int(s) for s in np.atleast_1d(self.seeds)]
        if not self.seeds_ or len(set(self.seeds_)) != len(self.seeds_):
            raise ValueError("seeds must be nonempty and distinct")
        self.domain_ = D
        self.graphs_ = [cell_graph(gp, D, self.eps, seed=s) for s in self.seeds_]
        self.n_features_in_ = d * d
        self.dimension_ = d

    def fit(self, X=None, y=None):
        """Validate parameters and build one graph per seed; ``X`` and ``y`` are ignored."""
        self._setup()
        return self

    def _lambdas(self, X):
        check_is_fitted(self, "graphs_")
        d = self.dimension_
        return check_lambdas(X, d, d)


class ZeroTemperatureDensity(_CellEstimator):
    """Minimal energy density ``H_min / |D_ε|`` as a function of ``Λ``.

    Parameters
    ----------
    graph_params : GraphParams or dict, optional
    window : float
        Side ``L`` of the window ``[0, L)^d`` (ignored when ``domain`` is set).
    domain : array_like, shape (2, d), optional
    eps : float
    pair, vol : potentials or their keyword dicts
    seeds : int or sequence of int
        Graph seeds; predictions average over them.
    band : float, optional
        Clamped band width (default ``C0``).
    mode : {"clamped", "soft"}
    n_restarts : int

    Attributes
    ----------
    graphs_ : list of ExtendedGraph
    results_ : list
        Minimization results of the last ``predict`` call, per row and seed.
    """

    def __init__(self, graph_params=None, window=16.0, domain=None, eps=1.0, pair=None, vol=None, seeds=(0,),
                 band=None, mode="clamped", n_restarts=8):
        self.graph_params = graph_params
        self.window = window
        self.domain = domain
        self.eps = eps
        self.pair = pair
        self.vol = vol
        self.seeds = seeds
        self.band = band
        self.mode = mode
        self.n_restarts = n_restarts

    def predict(self, X, return_std=False):
        """Densities for a batch of ``Λ`` (shape ``(k, d, d)`` or ``(k, d*d)``)."""
        lams = self._lambdas(X)
        vals = np.empty((len(lams), len(self.graphs_)))
        self.results_ = []
        for i, L in enumerate(lams):
            row = []
            for j, (G, s) in enumerate(zip(self.graphs_, self.seeds_)):
                prob = CellProblem(G, self.domain_, self.eps, self.pair_, self.vol_, Lambda=L, mode=self.mode,
                                   band=self.band)
                res = minimize_cell(prob, n_restarts=self.n_restarts, seed=s)
                vals[i, j] = res.density
                row.append(res)
            self.results_.append(row)
        mean = vals.mean(axis=1)
        if not return_std:
            return mean
        S = vals.shape[1]
        std = vals.std(axis=1, ddof=1) / np.sqrt(S) if S > 1 else np.zeros(len(mean))
        return mean, std


class FreeEnergyDensity(_CellEstimator):
    """Free energy density ``W̄^β`` on a fixed window as a function of ``Λ``.

    ``method="exact"`` uses the Gaussian closed form (quadratic pair only);
    ``method="ti"`` uses thermodynamic integration, with ``ti_params``
    forwarded to :func:`~polyhom.finite_temp.free_energy_ti`.
    """

    def __init__(self, beta=1.0, method="exact", graph_params=None, window=16.0, domain=None, eps=1.0, pair=None,
                 vol=None, seeds=(0,), band=None, ti_params=None):
        self.beta = beta
        self.method = method
        self.graph_params = graph_params
        self.window = window
        self.domain = domain
        self.eps = eps
        self.pair = pair
        self.vol = vol
        self.seeds = seeds
        self.band = band
        self.ti_params = ti_params

    def fit(self, X=None, y=None):
        if self.method not in ("exact", "ti"):
            raise ValueError(f"method must be 'exact' or 'ti', got {self.method!r}")
        check_positive(self.beta, "beta")
        self._setup()
        if self.method == "exact" and self.pair_.kind != "quadratic":
            raise ValueError("the exact method needs a quadratic pair potential")
        return self

    def predict(self, X, return_std=False):
        lams = self._lambdas(X)
        vals = np.empty((len(lams), len(self.graphs_)))
        errs = np.zeros_like(vals)
        for i, L in enumerate(lams):
            for j, (G, s) in enumerate(zip(self.graphs_, self.seeds_)):
                if self.method == "exact":
                    est = gaussian_free_energy(QuadraticModel.build(G, self.domain_, self.eps, self.pair_, Lambda=L,
                                                                    band=self.band), self.beta)
                else:
                    kw = dict(self.ti_params or {})
                    kw.setdefault("seed", s)
                    est = free_energy_ti(G, self.domain_, self.eps, L, self.beta, self.pair_, self.vol_,
                                         band=self.band, **kw)
                vals[i, j], errs[i, j] = est.value, est.stderr
        mean = vals.mean(axis=1)
        if not return_std:
            return mean
        S = vals.shape[1]
        # per-seed estimator error and seed-to-seed scatter, whichever dominates
        scatter = vals.std(axis=1, ddof=1) / np.sqrt(S) if S > 1 else np.zeros(len(mean))
        own = np.sqrt(np.sum(errs**2, axis=1)) / S
        return mean, np.maximum(scatter, own)


class ScalingRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``y = c log(x)/x`` or ``y = a + b/x``.

    Attributes
    ----------
    coef_ : ndarray
    report_ : FitReport
    """

    def __init__(self, model="power-log", factor=3.0, outlier=3.0):
        self.model = model
        self.factor = factor
        self.outlier = outlier

    def fit(self, X, y, sample_weight=None):
        """``sample_weight`` is interpreted as ``1/σ`` of each point."""
        x = np.asarray(X, dtype=float).reshape(-1)
        sigma = None if sample_weight is None else 1.0 / np.asarray(sample_weight, dtype=float)
        self.report_ = fit_scaling(x, y, sigma=sigma, model=self.model, factor=self.factor, outlier=self.outlier)
        self.coef_ = np.asarray(self.report_.coefficients)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        x = np.asarray(X, dtype=float).reshape(-1)
        if self.model == "power-log":
            return self.coef_[0] * np.log(x) / x
        return self.coef_[0] + self.coef_[1] / x
