"""Thermodynamic integration from an exactly solvable Gaussian reference."""

import numpy as np

from .._validation import check_positive
from ..energy import Deformation, Hamiltonian, PairPotential
from ..exceptions import OverlapFailure
from .quadratic import FreeEnergyEstimate, QuadraticModel, gaussian_free_energy
from .sampler import GibbsTarget, batch_means, run_chain

REFERENCES = ("scalar", "edgewise")


def _edge_hessians(H, U, h=1e-6):
    """Central-difference Hessians of every chain energy at the increments of ``U``."""
    xi = H.increments(U)
    n = xi.shape[1]
    out = np.empty((len(xi), n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h * max(1.0, float(np.max(np.abs(xi)))) if len(xi) else h
        out[:, :, k] = (H._pair.gradient(xi + e) - H._pair.gradient(xi - e)) / (2 * e[k])
    return 0.5 * (out + np.swapaxes(out, 1, 2))


def reference_pair(H, U, kind="scalar"):
    """Quadratic reference matched to the chain stiffness at the state ``U``.

    ``kind="scalar"`` gives ``A_ref = c_ref I`` with ``c_ref`` half the mean
    Hessian trace per component; ``kind="edgewise"`` keeps one matrix per
    chain (half its Hessian, projected to be positive definite).
    """
    hess = _edge_hessians(H, U)
    n = U.shape[1]
    if kind == "scalar":
        c = 0.5 * float(np.mean(np.trace(hess, axis1=1, axis2=2))) / n if len(hess) else 1.0
        return PairPotential(kind="quadratic", matrix=np.eye(n) * max(c, 1e-12))
    if kind != "edgewise":
        raise ValueError(f"reference must be one of {REFERENCES} or a PairPotential")
    w, V = np.linalg.eigh(0.5 * hess)
    floor = 1e-6 * max(float(np.max(w)), 1e-12)
    A = np.einsum("eij,ej,ekj->eik", V, np.maximum(w, floor), V)
    full = np.zeros((len(H.graph.edges), n, n))
    full[H.edge_ids] = A
    return PairPotential(kind="quadratic", matrix=full)


def _minimize_target(target):
    # chains start at the minimizer of H_λ so burn-in only has to thermalize
    from ..zero_temp.cell import _run_lbfgs

    f = target.free_rows
    if not len(f):
        return target.U0.copy()
    U0 = target.U0

    def fg(y):
        U = U0.copy()
        U[f] = y.reshape(-1, target.n)
        e, g = target.energy_and_gradient(U)
        return e, g[f].ravel()

    x, *_ = _run_lbfgs(fg, U0[f].ravel(), 1e-10 * (1 + abs(target.energy(U0))), 20000)
    U = U0.copy()
    U[f] = x.reshape(-1, target.n)
    return U


def _node_chain(target, lam, beta, seed, node, chain_kw, n_batches, ess_min, max_extend):
    target.set_weights([1.0 - lam, lam])
    start = _minimize_target(target)

    def delta(U):
        c = target.components(U)
        return c[1] - c[0]

    ch = run_chain(target, beta, seed=[seed, node], start=start, observable=delta, store_samples=False, **chain_kw)
    obs = list(ch.observables)
    acc = [ch.acceptance]
    ext = 0
    mean, se, ess = batch_means(obs, n_batches)
    while ess < ess_min and ext < max_extend:
        ext += 1
        kw = dict(chain_kw)
        kw["burn_in"] = 0
        kw["n_sweeps"] = chain_kw.get("n_sweeps", 2000) * 2**ext
        kw.pop("step", None)
        ch = run_chain(target, beta, seed=[seed, node, ext], start=ch.final, observable=delta, store_samples=False,
                       step=ch.step, **kw)
        obs.extend(ch.observables)
        acc.append(ch.acceptance)
        mean, se, ess = batch_means(obs, n_batches)
    obs = np.asarray(obs)
    return {
        "lambda": float(lam), "mean": mean, "stderr": se, "ess": ess, "var": float(np.var(obs)),
        "acceptance": float(np.mean(acc)), "n": len(obs), "extensions": ext, "ess_ok": bool(ess >= ess_min),
        "mean_H_ref": None,
    }


def free_energy_ti(G, D, eps, Lambda, beta, pair, vol=None, reference="scalar", n_nodes=8, n_sweeps=2000,
                   burn_in=500, thin=1, seed=0, kernel="metropolis", n_batches=50, ess_min=100, max_extend=3,
                   overlap_max=1e3, refit=True, band=None, phi=None):
    """Free energy density by thermodynamic integration with clamped data.

    ``F = F_ref + (1/|D_ε|) ∫₀¹ ⟨H - H_ref⟩_λ dλ`` along
    ``H_λ = H_ref + λ (H - H_ref)``, with Gauss-Legendre nodes in ``λ`` and
    one independent chain per node.

    Parameters
    ----------
    reference : {"scalar", "edgewise"} or PairPotential
        Quadratic reference on the same graph. The default ``A_ref = c_ref I``
        matches the chain stiffness at the affine state.
    n_nodes : int
        Gauss-Legendre nodes (at least 8).
    overlap_max : float
        Largest accepted ``β² Var(H - H_ref) / max(m, 1)`` at a node.
    refit : bool
        On overlap failure rescale ``c_ref`` by ``⟨H⟩/⟨H_ref⟩`` measured at
        ``λ = 1/2`` and retry once.

    Returns
    -------
    FreeEnergyEstimate
        Method ``"ti-mcmc"``; the standard error propagates the batch-means
        errors through the quadrature weights.

    Raises
    ------
    OverlapFailure
        When a node's overlap statistic stays above ``overlap_max``; the
        offending node is in ``exc.node``.
    """
    beta = check_positive(beta, "beta")
    if n_nodes < 8:
        raise ValueError("thermodynamic integration uses at least 8 Gauss-Legendre nodes")
    H_t = Hamiltonian(G, D, eps, pair, vol)
    if phi is None:
        u = Deformation.affine(G, D, eps, Lambda, band=band)
    else:
        u = Deformation.from_map(G, D, eps, phi, band=band)
    U_aff = H_t.values_from(u)
    ref = reference if isinstance(reference, PairPotential) else reference_pair(H_t, U_aff, reference)
    chain_kw = dict(kernel=kernel, n_sweeps=n_sweeps, burn_in=burn_in, thin=thin)
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    lams, wts = 0.5 * (x + 1.0), 0.5 * w

    for attempt in range(2 if refit else 1):
        H_r = Hamiltonian(G, D, eps, ref)
        model = QuadraticModel(H_r, u)
        F_ref = gaussian_free_energy(model, beta)
        target = GibbsTarget([H_r, H_t], [1.0, 0.0], u)
        m = max(model.m, 1)
        nodes = []
        bad = None
        for i, lam in enumerate(lams):
            st = _node_chain(target, lam, beta, seed, i, chain_kw, n_batches, ess_min, max_extend)
            st["overlap"] = beta**2 * st["var"] / m
            nodes.append(st)
            if st["overlap"] > overlap_max:
                bad = i
                break
        if bad is None:
            break
        if attempt == 0 and refit and ref.kind == "quadratic" and not isinstance(reference, PairPotential):
            target.set_weights([0.5, 0.5])
            ch = run_chain(target, beta, seed=[seed, 10_000], start=_minimize_target(target),
                           observable=target.components, store_samples=False, **chain_kw)
            ratio = float(np.mean(ch.observables[:, 1]) / max(np.mean(ch.observables[:, 0]), 1e-300))
            A = np.asarray(ref.matrix) * ratio
            ref = PairPotential(kind="quadratic", matrix=A)
            continue
        exc = OverlapFailure(f"overlap statistic {nodes[bad]['overlap']:.3g} above {overlap_max:g} at node "
                             f"{bad} (lambda={nodes[bad]['lambda']:.4f})")
        exc.node = bad
        exc.nodes = nodes
        raise exc

    V = model.volume
    means = np.array([s["mean"] for s in nodes])
    ses = np.array([s["stderr"] for s in nodes])
    integral = float(wts @ means)
    se = float(np.sqrt(np.sum((wts * ses) ** 2)))
    meta = {
        "beta": beta, "volume": V, "m": model.m, "F_ref": F_ref.value, "integral": integral,
        "nodes": nodes, "weights": wts.tolist(), "reference": ref.to_dict() if ref.matrix is None or np.ndim(
            ref.matrix) == 2 else {"kind": "quadratic", "matrix": "edgewise"},
        "kernel": kernel, "seed": seed,
        "acceptance": float(np.mean([s["acceptance"] for s in nodes])),
        "min_ess": float(min(s["ess"] for s in nodes)), "ess_ok": all(s["ess_ok"] for s in nodes),
    }
    return FreeEnergyEstimate(F_ref.value + integral / V, se / V, "ti-mcmc", meta)
