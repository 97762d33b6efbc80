"""Pair (chain) and volumetric potentials."""

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DegenerateEdge, NonDifferentiablePotential
from .langevin import kuhn_grun, kuhn_grun_derivative

PAIR_KINDS = ("quadratic", "kuhn-grun-p10", "kuhn-grun-exact", "polynomial")
VOLUMETRIC_KINDS = ("none", "convex-well")


def _safe_unit(xi, norm):
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = xi / norm[:, None]
    unit[norm == 0] = 0.0
    return unit


@dataclass(frozen=True, eq=False)
class PairPotential:
    """Edge energy ``f(z, ξ)`` with ``z = x - y`` and ``ξ = u(x) - u(y)``.

    Parameters
    ----------
    kind : {"quadratic", "kuhn-grun-p10", "kuhn-grun-exact", "polynomial"}
    n_mean : float
        Mean monomer count ``N°`` (Kuhn-Grün kinds).
    monomer_length : float
        Monomer length ``ℓ``; an edge of length ``|z|`` carries
        ``N_xy = (|z| / ℓ)**2`` monomers.
    scale : float
        Global prefactor. ``1`` gives the reduced Hamiltonian; ``N° / β°``
        gives physical units.
    matrix : array_like or callable, optional
        Quadratic kind: one symmetric ``(n, n)`` matrix, per-edge matrices
        ``(E, n, n)`` aligned with the graph edges, or a callable ``z -> A``.
        Defaults to the identity.
    coefficients : sequence of (power, coefficient)
        Polynomial kind: ``f = Σ c_k |ξ|**k``.
    exponent : float, optional
        Claimed growth exponent of the polynomial kind; defaults to
        ``max(2, highest power)``.
    edge_multipliers : ndarray, optional
        Per-edge stiffness multipliers aligned with the graph edges
        (inclusion hook, see :meth:`ExtendedGraph.edge_multipliers`).

    Notes
    -----
    Kuhn-Grün kinds evaluate ``scale * (N_xy / N°) * f(λ / sqrt(N_xy))`` with
    ``λ = |ξ| / |z|``, which depends on ξ only through its norm.
    """

    kind: str = "kuhn-grun-p10"
    n_mean: float = 100.0
    monomer_length: float = 0.1
    scale: float = 1.0
    matrix: object = None
    coefficients: tuple = ()
    exponent: float = None
    edge_multipliers: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in PAIR_KINDS:
            raise ValueError(f"pair kind must be one of {PAIR_KINDS}, got {self.kind!r}")
        if self.n_mean < 1:
            raise ValueError("n_mean must be >= 1")
        if self.monomer_length <= 0 or self.scale <= 0:
            raise ValueError("monomer_length and scale must be positive")
        if self.kind == "polynomial":
            coeffs = tuple((float(k), float(c)) for k, c in self.coefficients)
            if not coeffs or any(k <= 0 for k, _ in coeffs):
                raise ValueError("polynomial kind needs positive powers")
            object.__setattr__(self, "coefficients", coeffs)
        if self.p <= 1:
            raise ValueError("growth exponent p must exceed 1")

    @property
    def p(self):
        """Growth exponent."""
        if self.kind == "quadratic":
            return 2.0
        if self.kind == "polynomial":
            if self.exponent is not None:
                return float(self.exponent)
            return max(2.0, max(k for k, _ in self.coefficients))
        return 10.0

    @property
    def differentiable(self):
        if self.kind == "polynomial":
            return all(k > 1 for k, c in self.coefficients if c != 0)
        return True

    def to_dict(self):
        d = {"kind": self.kind, "n_mean": self.n_mean, "monomer_length": self.monomer_length, "scale": self.scale}
        if self.kind == "polynomial":
            d["coefficients"] = [list(c) for c in self.coefficients]
            if self.exponent is not None:
                d["exponent"] = self.exponent
        if self.kind == "quadratic" and self.matrix is not None and not callable(self.matrix):
            d["matrix"] = np.asarray(self.matrix).tolist()
        return d

    def compile(self, z, edge_ids=None):
        """Freeze per-edge constants for a fixed set of reference edge vectors."""
        return CompiledPair(self, np.asarray(z, dtype=float).reshape(len(z), -1), edge_ids)

    def energy(self, z, xi, edge_ids=None):
        """Vectorized edge energies for ``z`` of shape (E, d) and ``ξ`` of shape (E, n)."""
        return self.compile(z, edge_ids).energy(np.asarray(xi, dtype=float).reshape(len(z), -1))

    def gradient(self, z, xi, edge_ids=None):
        """Derivative of the edge energies with respect to ξ, shape (E, n)."""
        return self.compile(z, edge_ids).gradient(np.asarray(xi, dtype=float).reshape(len(z), -1))


class CompiledPair:
    """Pair potential bound to fixed edges; evaluation needs only the increments."""

    def __init__(self, pot, z, edge_ids=None):
        self.pot = pot
        lengths = np.linalg.norm(z, axis=1)
        if np.any(lengths == 0):
            raise DegenerateEdge("zero-length edge")
        E = len(z)
        mult = np.ones(E)
        if pot.edge_multipliers is not None:
            m = np.asarray(pot.edge_multipliers, dtype=float)
            mult = m[edge_ids] if edge_ids is not None else m
        self.weight = pot.scale * mult
        kind = pot.kind
        if kind.startswith("kuhn-grun"):
            N = (lengths / pot.monomer_length) ** 2
            self.weight = self.weight * N / pot.n_mean
            # t = λ / sqrt(N) = |ξ| ℓ / |z|²
            self.arg = pot.monomer_length / lengths**2
            self.mode = "p10" if kind == "kuhn-grun-p10" else "exact"
        elif kind == "quadratic":
            A = pot.matrix
            if A is None:
                self.A = None
            elif callable(A):
                self.A = np.stack([np.asarray(A(zz), dtype=float) for zz in z]) if E else np.zeros((0, 1, 1))
            else:
                A = np.asarray(A, dtype=float)
                if A.ndim == 3 and edge_ids is not None:
                    A = A[edge_ids]
                self.A = A

    def energy(self, xi):
        pot = self.pot
        if pot.kind.startswith("kuhn-grun"):
            r = np.linalg.norm(xi, axis=1)
            return self.weight * kuhn_grun(self.arg * r, self.mode)
        if pot.kind == "quadratic":
            if self.A is None:
                q = np.einsum("ei,ei->e", xi, xi)
            elif self.A.ndim == 2:
                q = np.einsum("ei,ij,ej->e", xi, self.A, xi)
            else:
                q = np.einsum("ei,eij,ej->e", xi, self.A, xi)
            return self.weight * q
        r = np.linalg.norm(xi, axis=1)
        out = np.zeros_like(r)
        for k, c in pot.coefficients:
            out += c * r**k
        return self.weight * out

    def gradient(self, xi):
        pot = self.pot
        if pot.kind.startswith("kuhn-grun"):
            r = np.linalg.norm(xi, axis=1)
            dr = self.weight * self.arg * kuhn_grun_derivative(self.arg * r, self.mode)
            return dr[:, None] * _safe_unit(xi, r)
        if pot.kind == "quadratic":
            if self.A is None:
                g = 2.0 * xi
            elif self.A.ndim == 2:
                g = xi @ (self.A + self.A.T)
            else:
                g = np.einsum("eij,ej->ei", self.A + np.swapaxes(self.A, 1, 2), xi)
            return self.weight[:, None] * g
        r = np.linalg.norm(xi, axis=1)
        if not pot.differentiable and np.any(r == 0):
            raise NonDifferentiablePotential("polynomial pair potential with power <= 1 is not differentiable at 0")
        dr = np.zeros_like(r)
        for k, c in pot.coefficients:
            with np.errstate(divide="ignore", invalid="ignore"):
                dr += np.where(r > 0, c * k * r ** (k - 1), 0.0)
        return (self.weight * dr)[:, None] * _safe_unit(xi, r)


def pair_energy(potential, x, y, xi):
    """Energy of a single chain between reference points ``x`` and ``y`` with increment ξ."""
    z = np.atleast_2d(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    return float(potential.energy(z, xi)[0])


@dataclass(frozen=True)
class VolumetricPotential:
    """Determinant penalty ``W(t) = weight * [(t - 1)**2 + c_neg * max(0, -t)**q]``.

    ``q = p / d`` is the growth exponent in the determinant. ``kind="none"``
    switches the volumetric term off.
    """

    kind: str = "convex-well"
    weight: float = 1.0
    c_neg: float = 1.0
    p: float = 10.0
    d: int = 2

    def __post_init__(self):
        if self.kind not in VOLUMETRIC_KINDS:
            raise ValueError(f"volumetric kind must be one of {VOLUMETRIC_KINDS}, got {self.kind!r}")
        if self.weight < 0 or self.c_neg < 0:
            raise ValueError("weight and c_neg must be nonnegative")

    @classmethod
    def physical(cls, beta0=1.0, n_mean=100.0, K=1.0, reduced=True, **kw):
        """Weight ``β° / (N° K)`` for the reduced Hamiltonian, ``1 / K`` for physical units."""
        w = beta0 / (n_mean * K) if reduced else 1.0 / K
        return cls(weight=w, **kw)

    @property
    def q(self):
        return self.p / self.d

    @property
    def active(self):
        return self.kind != "none" and self.weight > 0

    def to_dict(self):
        return {"kind": self.kind, "weight": self.weight, "c_neg": self.c_neg, "p": self.p, "d": self.d}

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "none":
            return np.zeros_like(t)
        return self.weight * ((t - 1.0) ** 2 + self.c_neg * np.maximum(0.0, -t) ** self.q)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "none":
            return np.zeros_like(t)
        neg = np.maximum(0.0, -t)
        tail = self.q * neg ** (self.q - 1.0) if self.q > 1 else np.where(t < 0, self.q, 0.0)
        return self.weight * (2.0 * (t - 1.0) - self.c_neg * tail)
