"""Exact Gaussian free energies of quadratic (phantom) Hamiltonians."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix, csc_matrix
from scipy.sparse.linalg import splu

from .._validation import check_positive
from ..energy import CLAMPED, Deformation, Hamiltonian
from ..exceptions import NotPositiveDefinite

METHODS = ("exact-gaussian", "ti-mcmc", "minimization")

# above this many degrees of freedom the log-determinant uses a sparse factorization
_DENSE_LIMIT = 3000


@dataclass
class FreeEnergyEstimate:
    """A free energy density with its error bar and provenance."""

    value: float
    stderr: float
    method: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.stderr >= 0:
            raise ValueError("stderr must be nonnegative")

    def to_dict(self):
        return {"value": self.value, "stderr": self.stderr, "method": self.method, "metadata": self.metadata}


def _edge_matrices(H, n):
    """Symmetric per-edge matrices ``B_e`` with ``f_e(ξ) = ξᵀ B_e ξ``."""
    if H.pair.kind != "quadratic":
        raise ValueError("a quadratic model needs a quadratic pair potential")
    cp = H._pair
    E = len(H.edges)
    A = cp.A
    if A is None:
        B = np.broadcast_to(np.eye(n), (E, n, n))
    elif A.ndim == 2:
        B = np.broadcast_to(0.5 * (A + A.T), (E,) + A.shape)
    else:
        B = 0.5 * (A + np.swapaxes(A, 1, 2))
    if B.shape[1] != n:
        raise ValueError(f"edge matrices are {B.shape[1]}x{B.shape[1]}, values have n={n}")
    return cp.weight[:, None, None] * B


def stiffness_matrix(H, n):
    """Sparse ``K_full`` with ``H(U) = vec(U)ᵀ K_full vec(U)`` (row-major ``vec``)."""
    B = _edge_matrices(H, n)
    i, j = H.edges[:, 0], H.edges[:, 1]
    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    a, b = a.ravel(), b.ravel()
    vals = B.reshape(len(B), -1)
    rows, cols, data = [], [], []
    for p, q, sgn in ((i, i, 1.0), (j, j, 1.0), (i, j, -1.0), (j, i, -1.0)):
        rows.append((p[:, None] * n + a).ravel())
        cols.append((q[:, None] * n + b).ravel())
        data.append(sgn * vals.ravel())
    N = H.n_vertices * n
    K = coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    return K.tocsr()


def logdet_spd(K):
    """``log det K`` for a symmetric positive-definite matrix (dense or sparse).

    Raises
    ------
    NotPositiveDefinite
    """
    m = K.shape[0]
    if m == 0:
        return 0.0
    if m <= _DENSE_LIMIT:
        dense = K.toarray() if hasattr(K, "toarray") else np.asarray(K)
        try:
            c = scipy.linalg.cholesky(dense, lower=True, check_finite=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from exc
        return float(2.0 * np.sum(np.log(np.diag(c))))
    # symmetric ordering without pivoting: the LU of an SPD matrix has a positive diagonal
    try:
        lu = splu(csc_matrix(K), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options=dict(SymmetricMode=True))
    except RuntimeError as exc:
        raise NotPositiveDefinite(f"sparse factorization failed: {exc}") from exc
    dg = lu.U.diagonal()
    if np.any(dg <= 0) or not np.all(np.isfinite(dg)):
        raise NotPositiveDefinite("non-positive pivot in the sparse factorization")
    return float(np.sum(np.log(dg)))


class QuadraticModel:
    """Quadratic Hamiltonian with clamped data: ``H(û + v) = H(û) + vᵀ K v``.

    Parameters
    ----------
    hamiltonian : Hamiltonian
        Quadratic pair potential and no active volumetric term.
    datum : Deformation
        Clamped values and roles; non-clamped vertices are the free degrees
        of freedom.

    Attributes
    ----------
    K : scipy.sparse.csr_matrix
        Reduced Hessian over the ``m`` free scalar degrees of freedom.
    minimizer : Deformation
    min_energy : float
    volume : float
        ``|D_ε|``.
    """

    def __init__(self, hamiltonian, datum):
        H = hamiltonian
        if H.vol.active:
            raise ValueError("the volumetric term is not quadratic")
        self.hamiltonian = H
        U0 = H.values_from(datum)
        n = U0.shape[1]
        pos = np.full(H.graph.n_vertices, -1, dtype=np.int64)
        pos[datum.vertices] = np.arange(len(datum.vertices))
        roles = datum.roles[pos[H.vertices]]
        free_rows = roles != CLAMPED
        Kfull = stiffness_matrix(H, n)
        dof_free = np.repeat(free_rows, n)
        f = np.flatnonzero(dof_free)
        c = np.flatnonzero(~dof_free)
        self.K = Kfull[f][:, f].tocsr()
        self.n_components = n
        self.m = len(f)
        x = U0.ravel().copy()
        if self.m:
            rhs = -(Kfull[f][:, c] @ x[c])
            try:
                if self.m <= _DENSE_LIMIT:
                    cf = scipy.linalg.cho_factor(self.K.toarray())
                    x[f] = scipy.linalg.cho_solve(cf, rhs)
                else:
                    x[f] = splu(csc_matrix(self.K)).solve(rhs)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefinite(f"reduced Hessian is singular: {exc}") from exc
        U = x.reshape(-1, n)
        vals = datum.values.copy()
        vals[pos[H.vertices]] = U
        self.minimizer = datum.copy(values=vals)
        self.min_energy = float(H.energy(U))
        self.volume = float(np.prod(H.box[1] - H.box[0]))
        self._logdet = None

    @classmethod
    def from_problem(cls, problem):
        """Model for a clamped :class:`~polyhom.zero_temp.CellProblem`."""
        if problem.mode != "clamped":
            raise ValueError("exact Gaussian free energies need clamped boundary data")
        return cls(problem.hamiltonian, problem.datum)

    @classmethod
    def build(cls, G, D, eps, pair, Lambda=None, phi=None, band=None):
        H = Hamiltonian(G, D, eps, pair)
        if phi is None:
            u = Deformation.affine(G, D, eps, np.zeros((G.dimension, G.dimension)) if Lambda is None else Lambda,
                                   band=band)
        else:
            u = Deformation.from_map(G, D, eps, phi, band=band)
        return cls(H, u)

    @property
    def logdet_K(self):
        if self._logdet is None:
            self._logdet = logdet_spd(self.K)
        return self._logdet

    def lambda_min(self):
        """Smallest eigenvalue of ``K``."""
        if self.m == 0:
            return np.inf
        return float(scipy.linalg.eigvalsh(self.K.toarray(), subset_by_index=[0, 0])[0])

    def covariance(self, beta):
        """Covariance ``(2βK)^{-1}`` of the Gibbs measure (dense)."""
        return np.linalg.inv(2.0 * beta * self.K.toarray())


def gaussian_free_energy(model, beta, volume=None):
    """Exact free energy density of a quadratic model.

    ``F = H(û)/|D_ε| + (log det(βK) - m log π) / (2β|D_ε|)``.

    Parameters
    ----------
    model : QuadraticModel
    beta : float
    volume : float, optional
        ``|D_ε|``; defaults to the model's domain volume.

    Returns
    -------
    FreeEnergyEstimate
        Method ``"exact-gaussian"`` with zero standard error.
    """
    beta = check_positive(beta, "beta")
    V = model.volume if volume is None else check_positive(volume, "volume")
    m = model.m
    entropic = (m * np.log(beta) + model.logdet_K - m * np.log(np.pi)) / (2.0 * beta * V)
    value = model.min_energy / V + entropic
    return FreeEnergyEstimate(float(value), 0.0, "exact-gaussian", {
        "beta": beta, "volume": V, "m": m, "min_energy": model.min_energy, "entropic": float(entropic),
        "logdet_K": model.logdet_K,
    })
