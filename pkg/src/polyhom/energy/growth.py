"""Runtime check of the two-sided growth hypotheses on a sample grid."""

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linprog

from ..exceptions import SandwichViolated
from .langevin import P10_COEFFICIENTS


@dataclass
class GrowthReport:
    """Fitted sandwich ``C₂|ξ|² + C_p|ξ|^p ≤ f ≤ C₂'|ξ|² + C_p'|ξ|^p``.

    ``exponent_small`` / ``exponent_large`` are log-log slopes of ``f`` over
    the lowest and highest decade of the grid. ``expected`` holds reference
    constants where a closed form exists; ``consistent`` records the
    factor-of-4 agreement of ``C2`` with it.
    """

    p: float
    C2: float
    Cp: float
    C2_upper: float
    Cp_upper: float
    exponent_small: float
    exponent_large: float
    W_constant: float = None
    W_exponent: float = None
    expected: dict = field(default_factory=dict)
    consistent: bool = None
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return asdict(self)


def _default_edge(pair, d):
    z = np.zeros(d)
    z[0] = np.sqrt(pair.n_mean) * pair.monomer_length if pair.kind.startswith("kuhn-grun") else 1.0
    return z


def _default_xi_max(pair, z):
    L = np.linalg.norm(z)
    if pair.kind == "kuhn-grun-p10":
        # relative extension t = |ξ| ℓ / |z|² up to 1e3, deep in the |ξ|^p regime
        return 1e3 * L**2 / pair.monomer_length
    if pair.kind == "kuhn-grun-exact":
        return 0.999 * L**2 / pair.monomer_length
    return 100.0


def _slope(s, f):
    return float(np.polyfit(np.log(s), np.log(f), 1)[0])


def _lp_sandwich(s, f, p, lower):
    # relative constraints C2 s²/f + Cp s^p/f <= 1 (or >= 1), columns rescaled to unit max
    A = np.stack([s**2 / f, s**p / f], axis=1)
    scale = A.max(axis=0)
    A = A / scale
    obj = A.sum(axis=0)
    one = np.ones(len(f))
    if lower:
        res = linprog(-obj, A_ub=A, b_ub=one * (1 - 1e-12), bounds=[(0, None)] * 2, method="highs")
    else:
        res = linprog(obj, A_ub=-A, b_ub=-one * (1 + 1e-12), bounds=[(0, None)] * 2, method="highs")
    return res.x / scale if res.status == 0 else np.array([np.nan, np.nan])


def growth_check(pair, vol=None, z=None, xi_max=None, n_grid=600, decades=6, n_dirs=8, d=None, tol=0.25, seed=0,
                 raise_on_fail=True):
    """Fit the growth constants of a pair potential (and bound of the volumetric one).

    Parameters
    ----------
    pair : PairPotential
    vol : VolumetricPotential, optional
    z : array_like, optional
        Reference edge vector. For Kuhn-Grün kinds the default has length
        ``sqrt(N°) ℓ`` so that ``N_xy = N°``.
    xi_max : float, optional
        Largest increment norm; the grid is geometric over ``decades`` decades.
    n_dirs : int
        Number of sampled unit directions for ξ (seeded).
    tol : float
        Tolerance on the end-decade log-log slopes.

    Returns
    -------
    GrowthReport

    Raises
    ------
    SandwichViolated
        When the end slopes show that no finite constants bound ``f`` from
        below (``f`` grows slower than ``|ξ|^p`` or vanishes faster than
        ``|ξ|^2``) or from above, or when ``W`` is negative or outgrows
        ``|t|^{p/d}``. The report is attached to the exception.
    """
    d = d if d is not None else (vol.d if vol is not None and vol.kind != "none" else 2)
    z = _default_edge(pair, d) if z is None else np.asarray(z, dtype=float)
    n = len(z)
    xi_max = _default_xi_max(pair, z) if xi_max is None else float(xi_max)
    s = np.geomspace(xi_max * 10.0**-decades, xi_max, n_grid)
    rng = np.random.default_rng(seed)
    dirs = np.vstack([np.eye(n)[0], rng.standard_normal((n_dirs - 1, n))]) if n_dirs > 1 else np.eye(n)[:1]
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    cp = pair.compile(np.tile(z, (len(s), 1)))
    F = np.stack([cp.energy(s[:, None] * e) for e in dirs])  # (dirs, grid)

    p = pair.p
    violations = []
    if pair.kind == "kuhn-grun-exact":
        violations.append("upper: exact Kuhn-Grün energy diverges at full extension (no p-growth bound)")
    if np.any(F <= 0):
        violations.append("lower: f vanishes at nonzero increment")
        F = np.maximum(F, np.finfo(float).tiny)
    dec = n_grid // decades
    a0 = [_slope(s[:dec], f[:dec]) for f in F]
    a1 = [_slope(s[-dec:], f[-dec:]) for f in F]
    a0_min, a0_max, a1_min, a1_max = min(a0), max(a0), min(a1), max(a1)
    if a0_max > 2 + tol:
        violations.append(f"lower: f vanishes faster than |ξ|^2 at 0 (slope {a0_max:.3f})")
    if a0_min < 2 - tol:
        violations.append(f"upper: f exceeds C|ξ|^2 near 0 (slope {a0_min:.3f})")
    if pair.kind != "kuhn-grun-exact":
        if a1_min < p - tol:
            violations.append(f"lower: f grows slower than |ξ|^{p:g} (slope {a1_min:.3f})")
        if a1_max > p + tol:
            violations.append(f"upper: f outgrows |ξ|^{p:g} (slope {a1_max:.3f})")

    ss = np.tile(s, len(dirs))
    ff = F.ravel()
    if p == 2:
        r = ff / ss**2
        lo, hi = np.array([r.min(), 0.0]), np.array([r.max(), 0.0])
    else:
        lo = _lp_sandwich(ss, ff, p, lower=True)
        hi = _lp_sandwich(ss, ff, p, lower=False)

    report = GrowthReport(
        p=float(p), C2=float(lo[0]), Cp=float(lo[1]), C2_upper=float(hi[0]), Cp_upper=float(hi[1]),
        exponent_small=float(np.mean(a0)), exponent_large=float(np.mean(a1)), violations=violations,
    )

    if pair.kind.startswith("kuhn-grun"):
        L = np.linalg.norm(z)
        # λ = |ξ|/|z| and N_xy = (|z|/ℓ)²: the quadratic coefficient in |ξ| is
        # (3/2) / (N° |z|²), which is 3/(2N°) on an edge with N_xy = N° and |z| = 1
        Nxy = (L / pair.monomer_length) ** 2
        c2 = pair.scale * 1.5 / (pair.n_mean * L**2)
        report.expected["C2"] = c2
        report.expected["C2_reduced"] = 1.5 / pair.n_mean
        if pair.kind == "kuhn-grun-p10":
            report.expected["Cp"] = pair.scale * (Nxy / pair.n_mean) * P10_COEFFICIENTS[-1] * (
                pair.monomer_length / L**2) ** 10
            report.consistent = bool(c2 / 4 <= report.C2 <= 4 * c2)

    if vol is not None and vol.kind != "none":
        q = vol.q
        t = np.concatenate([-np.geomspace(1e-3, 1e3, n_grid)[::-1], np.geomspace(1e-3, 1e3, n_grid)])
        W = vol(t)
        if np.any(W < 0):
            violations.append("volumetric: W takes negative values")
        report.W_constant = float(np.max(W / (1 + np.abs(t) ** q)))
        big = np.abs(t) > 1e2
        slopes = [_slope(np.abs(t[m]), np.maximum(W[m], 1e-300)) for m in (big & (t > 0), big & (t < 0))]
        report.W_exponent = float(max(slopes))
        if report.W_exponent > q + tol:
            violations.append(f"volumetric: W outgrows |t|^{q:g} (slope {report.W_exponent:.3f})")

    if violations and raise_on_fail:
        raise SandwichViolated("; ".join(violations), report)
    return report
