"""Markov chain Monte Carlo sampling of the Gibbs measure ``∝ exp(-βH)``."""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from .._validation import check_positive
from ..energy import CLAMPED, SOFT, Deformation, Hamiltonian
from ..exceptions import ChainDiverged

KERNELS = ("metropolis", "mala")
TARGET_ACCEPT = {"metropolis": 0.234, "mala": 0.574}
GUARD_FACTOR = 1e3


def batch_means(x, n_batches=50):
    """Mean, batch-means standard error and effective sample size of a series.

    A series with zero variance has standard error 0 and effective size
    ``len(x)``.
    """
    x = np.asarray(x, dtype=float)
    if len(x) < n_batches:
        raise ValueError(f"series of length {len(x)} is shorter than {n_batches} batches")
    b = len(x) // n_batches
    y = x[len(x) - b * n_batches:].reshape(n_batches, b)
    means = y.mean(axis=1)
    var_bm = float(np.var(means, ddof=1))
    var_x = float(np.var(x, ddof=1)) if len(x) > 1 else 0.0
    mean = float(x.mean())
    if var_bm <= 0 or var_x <= 0:
        return mean, 0.0, float(len(x))
    ess = min(float(len(x)), len(x) * var_x / (b * var_bm))
    return mean, float(np.sqrt(var_bm / n_batches)), ess


def accept_probability(delta):
    """Metropolis acceptance ``min(1, exp(-Δ))`` for a (β-scaled) energy change Δ."""
    delta = np.asarray(delta, dtype=float)
    # clipping keeps exp in range; NaN propagates through fmax/fmin as the other operand
    p = np.exp(-np.fmin(np.fmax(delta, 0.0), 800.0))
    return np.where(np.isnan(delta), 0.0, p)


def greedy_coloring(adjacency):
    """Colors of a graph given as a sparse symmetric adjacency (largest degree first)."""
    A = csr_matrix(adjacency)
    k = A.shape[0]
    deg = np.diff(A.indptr)
    colors = np.full(k, -1, dtype=np.int64)
    for v in np.argsort(-deg, kind="stable"):
        nb = A.indices[A.indptr[v]:A.indptr[v + 1]]
        used = set(colors[nb].tolist())
        c = 0
        while c in used:
            c += 1
        colors[v] = c
    return colors


class GibbsTarget:
    """Weighted sum ``Σ w_k H_k`` of Hamiltonians on one vertex set, with boundary roles.

    Energies decompose into terms (one per chain and one per volumetric
    cell); the term-vertex incidence drives the block updates.
    """

    def __init__(self, hamiltonians, weights, datum):
        self.hamiltonians = list(hamiltonians)
        self.weights = [float(w) for w in weights]
        H0 = self.hamiltonians[0]
        for H in self.hamiltonians[1:]:
            if not np.array_equal(H.vertices, H0.vertices):
                raise ValueError("all Hamiltonians must share the vertex set")
        self.U0 = H0.values_from(datum)
        self.k, self.n = self.U0.shape
        pos = np.full(H0.graph.n_vertices, -1, dtype=np.int64)
        pos[datum.vertices] = np.arange(len(datum.vertices))
        self.roles = datum.roles[pos[H0.vertices]]
        self.free_rows = np.flatnonzero(self.roles != CLAMPED)
        self.soft = self.roles == SOFT
        self.reference = H0.values_from(datum.copy(values=datum.reference)) if datum.reference is not None else self.U0
        self.datum = datum
        self.vertices = H0.vertices
        rows, cols = [], []
        t = 0
        self._slices = []
        for H in self.hamiltonians:
            E = len(H.edges)
            rows.append(np.repeat(np.arange(E) + t, 2))
            cols.append(H.edges.ravel())
            t0 = t
            t += E
            nc = len(H.cells)
            if nc:
                # vertices of every simplex that meets the cell
                Mp = (H._M != 0).astype(np.int64).tocoo()
                S = H.simplices
                r = np.repeat(Mp.row, S.shape[1])
                c = S[Mp.col].ravel()
                rows.append(r + t)
                cols.append(c)
            self._slices.append((t0, t, t + nc))
            t += nc
        self.n_terms = t
        self._shared_edges = all(np.array_equal(H.edges, H0.edges) for H in self.hamiltonians)
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        inc = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(t, self.k))
        inc.data[:] = 1.0
        inc.sum_duplicates()
        inc.data[:] = 1.0
        self.incidence = inc

    def set_weights(self, weights):
        self.weights = [float(w) for w in weights]

    def term_energies(self, U, weighted=True):
        out = np.empty(self.n_terms)
        xi = None
        for H, w, (a, b, c) in zip(self.hamiltonians, self.weights, self._slices):
            if xi is None or not self._shared_edges:
                xi = U[H.edges[:, 0]] - U[H.edges[:, 1]]
            out[a:b] = H._pair.energy(xi)
            if c > b:
                out[b:c] = H.cell_volumes * H.vol(H.cell_dets(U))
            if weighted:
                out[a:c] *= w
        return out

    def energy(self, U):
        return float(sum(w * H.energy(U) for H, w in zip(self.hamiltonians, self.weights) if w != 0))

    def energy_and_gradient(self, U):
        e, g = 0.0, np.zeros_like(U)
        for H, w in zip(self.hamiltonians, self.weights):
            if w != 0:
                ek, gk = H.energy_and_gradient(U)
                e += w * ek
                g += w * gk
        return e, g

    def components(self, U):
        """Unweighted energies ``H_k(U)``."""
        return np.array([H.energy(U) for H in self.hamiltonians])

    def colors(self):
        """Color classes of free vertices such that no term holds two vertices of one class."""
        inc = self.incidence[:, self.free_rows]
        adj = (inc.T @ inc).tocsr()
        adj.setdiag(0)
        adj.eliminate_zeros()
        col = greedy_coloring(adj)
        return [self.free_rows[col == c] for c in range(col.max() + 1)] if len(col) else []

    def in_box(self, U, rows):
        """Soft rows of ``rows`` stay strictly inside the unit ball around the datum."""
        s = rows[self.soft[rows]]
        if not len(s):
            return np.ones(len(rows), dtype=bool)
        ok = np.ones(len(rows), dtype=bool)
        dev = np.linalg.norm(U[s] - self.reference[s], axis=1)
        ok[self.soft[rows]] = dev < 1.0
        return ok

    def curvature(self, U, rng, h=1e-4):
        """Average curvature of the energy along a random free direction."""
        if not len(self.free_rows):
            return 1.0
        V = np.zeros_like(U)
        V[self.free_rows] = rng.standard_normal((len(self.free_rows), self.n))
        _, g0 = self.energy_and_gradient(U)
        _, g1 = self.energy_and_gradient(U + h * V)
        kappa = float(np.sum((g1 - g0) * V) / (h * np.sum(V**2)))
        return kappa if np.isfinite(kappa) and kappa > 0 else 1.0


@dataclass
class GibbsChain:
    """Output of :func:`run_chain`.

    ``samples`` holds the free-vertex values of the kept sweeps (when
    stored), ``energies`` the target energy and ``observables`` the
    recorded observable per kept sweep.
    """

    beta: float
    kernel: str
    samples: np.ndarray
    energies: np.ndarray
    observables: np.ndarray
    acceptance: float
    step: float
    n_sweeps: int
    burn_in: int
    guard_hits: int
    free_rows: np.ndarray
    final: np.ndarray = field(repr=False, default=None)

    def ess(self, n_batches=50):
        return batch_means(self.energies, n_batches)[2]

    def full_samples(self, U0):
        """Full value arrays (clamped rows from ``U0``) for each stored sample."""
        out = np.repeat(U0[None], len(self.samples), axis=0)
        out[:, self.free_rows] = self.samples
        return out


def _color_blocks(target):
    """Per color: rows, term-by-row incidence and its transpose (dense when small)."""
    blocks = []
    for rows in target.colors():
        inc = target.incidence[:, rows]
        if inc.shape[0] * inc.shape[1] <= 250_000:
            inc = inc.toarray()
            blocks.append((rows, inc, inc.T.copy()))
        else:
            blocks.append((rows, inc.tocsr(), inc.T.tocsr()))
    return blocks


def _metropolis_sweep(target, U, T, beta, step, rng, blocks, guard, e_cur):
    acc = prop = hits = 0
    for rows, inc, incT in blocks:
        Up = U.copy()
        Up[rows] += step * rng.standard_normal((len(rows), target.n))
        Tp = target.term_energies(Up)
        with np.errstate(invalid="ignore"):
            dv = incT @ (Tp - T)
        ok = target.in_box(Up, rows) & np.isfinite(dv)
        over = e_cur + np.where(np.isfinite(dv), dv, np.inf) > guard
        hits += int(np.sum(over & ok))
        ok &= ~over
        take = ok & (rng.random(len(rows)) < accept_probability(beta * np.where(ok, dv, 0.0)))
        if take.any():
            U[rows[take]] = Up[rows[take]]
            touched = (inc @ take.astype(float)) > 0
            T[touched] = Tp[touched]
            e_cur = float(T.sum())
        acc += int(take.sum())
        prop += len(rows)
    return U, T, e_cur, acc / max(prop, 1), hits


def _mala_step(target, U, e_cur, g_cur, beta, tau, rng, guard):
    f = target.free_rows
    noise = rng.standard_normal((len(f), target.n))
    Up = U.copy()
    Up[f] = U[f] - tau * beta * g_cur[f] + np.sqrt(2 * tau) * noise
    if not target.in_box(Up, f).all():
        return U, e_cur, g_cur, False, 0
    e_new, g_new = target.energy_and_gradient(Up)
    if not np.isfinite(e_new) or e_new > guard:
        return U, e_cur, g_cur, False, 1
    fwd = np.sum((Up[f] - U[f] + tau * beta * g_cur[f]) ** 2) / (4 * tau)
    bwd = np.sum((U[f] - Up[f] + tau * beta * g_new[f]) ** 2) / (4 * tau)
    log_a = -beta * (e_new - e_cur) - bwd + fwd
    if np.log(rng.random()) < log_a:
        return Up, e_new, g_new, True, 0
    return U, e_cur, g_cur, False, 0


def run_chain(target, beta, kernel="metropolis", n_sweeps=2000, burn_in=500, thin=1, seed=0, step=None,
              start=None, observable=None, store_samples=True, target_accept=None):
    """Sample ``exp(-β Σ w_k H_k)`` restricted to the admissible class.

    Parameters
    ----------
    target : GibbsTarget
    kernel : {"metropolis", "mala"}
        Random-walk Metropolis sweeps over color classes of free vertices, or
        Metropolis-adjusted Langevin proposals of all free vertices.
    n_sweeps, burn_in, thin : int
        Kept sweeps after burn-in, burn-in sweeps, thinning.
    step : float, optional
        Initial proposal scale (Metropolis) or Langevin time step (MALA);
        adapted toward the target acceptance during burn-in, then frozen.
    start : ndarray, optional
        Initial values (default the datum).
    observable : callable, optional
        ``observable(U)`` recorded at every kept sweep.

    Raises
    ------
    ChainDiverged
        When the energy becomes non-finite or most proposals hit the overflow
        guard ``H > 10³ (H_start + 1)``.
    """
    if kernel not in KERNELS:
        raise ValueError(f"kernel must be one of {KERNELS}, got {kernel!r}")
    beta = check_positive(beta, "beta")
    rng = np.random.default_rng(seed)
    U = (target.U0 if start is None else np.asarray(start, dtype=float)).copy()
    f = target.free_rows
    e_cur = target.energy(U)
    if not np.isfinite(e_cur):
        raise ChainDiverged("initial energy is not finite")
    guard = GUARD_FACTOR * (e_cur + 1.0)
    goal = TARGET_ACCEPT[kernel] if target_accept is None else float(target_accept)
    kappa = target.curvature(U, rng)
    if kernel == "metropolis":
        colors = _color_blocks(target)
        T = target.term_energies(U)
        e_cur = float(T.sum())
        h = 1.0 / np.sqrt(2 * beta * kappa) if step is None else float(step)
    else:
        _, g = target.energy_and_gradient(U)
        h = 0.5 / (beta * kappa) * max(len(f) * target.n, 1) ** (-1 / 3) if step is None else float(step)
    keep = []
    energies, obs = [], []
    accepted = proposed = hits = 0
    window_acc, window_n = 0.0, 0
    n_adapt, log_h = 0, []
    total = burn_in + n_sweeps
    for sweep in range(total):
        if not len(f):
            a = 1.0
        elif kernel == "metropolis":
            U, T, e_cur, a, hh = _metropolis_sweep(target, U, T, beta, h, rng, colors, guard, e_cur)
            hits += hh
        else:
            U, e_cur, g, ok, hh = _mala_step(target, U, e_cur, g, beta, h, rng, guard)
            a = float(ok)
            hits += hh
        if not np.isfinite(e_cur):
            raise ChainDiverged(f"energy became non-finite at sweep {sweep}")
        if sweep < burn_in:
            window_acc += a
            window_n += 1
            if window_n == 10:
                # diminishing gain; the frozen step averages the second half of burn-in
                n_adapt += 1
                h *= float(np.exp(2.0 * (window_acc / window_n - goal) / np.sqrt(n_adapt)))
                window_acc, window_n = 0.0, 0
                if sweep >= burn_in // 2:
                    log_h.append(np.log(h))
            if sweep == burn_in - 1 and log_h:
                h = float(np.exp(np.mean(log_h)))
            continue
        accepted += a
        proposed += 1
        if (sweep - burn_in) % thin == 0:
            if store_samples:
                keep.append(U[f].copy())
            energies.append(e_cur)
            if observable is not None:
                obs.append(observable(U))
    n_prop = max(total * max(len(f), 1), 1)
    if hits > 0.5 * n_prop:
        raise ChainDiverged(f"{hits} proposals exceeded the overflow guard")
    samples = np.array(keep) if keep else np.zeros((0, len(f), target.n))
    return GibbsChain(beta, kernel, samples, np.array(energies), np.array(obs), accepted / max(proposed, 1), float(h),
                      n_sweeps, burn_in, hits, f, U)


def sample_gibbs(G, D, eps, datum, beta, pair, vol=None, mode="clamped", kernel="metropolis", band=None,
                 **chain):
    """Sample the Gibbs measure of ``H_ε(D, ·)`` with boundary datum ``φ``.

    Parameters
    ----------
    datum : array_like or callable
        ``Λ`` for the affine datum, or a map ``φ`` applied to rows of ``εx``.
    mode : {"clamped", "soft"}
        Soft-mode proposals leaving the open unit ball around the datum are
        rejected.
    chain : dict
        Forwarded to :func:`run_chain`.

    Returns
    -------
    (GibbsChain, GibbsTarget)
    """
    H = Hamiltonian(G, D, eps, pair, vol)
    if callable(datum):
        u = Deformation.from_map(G, D, eps, datum, band=band, mode=mode)
    else:
        u = Deformation.affine(G, D, eps, datum, band=band, mode=mode)
    target = GibbsTarget([H], [1.0], u)
    return run_chain(target, beta, kernel=kernel, **chain), target
