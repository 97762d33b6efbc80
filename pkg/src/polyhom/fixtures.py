"""Small deterministic problems used by the examples, tests and CLI fixtures."""

from dataclasses import dataclass

import numpy as np

from .energy import PairPotential, VolumetricPotential
from .graph import GraphParams
from .zero_temp import cell_graph

# 5 x 4 lattice points at integer coordinates; the outer ring is clamped
SMALL_DOMAIN = np.array([[-0.5, -0.5], [4.5, 3.5]])
SMALL_BAND = 0.5


@dataclass
class Fixture:
    """A graph, domain and potentials ready for the solvers."""

    graph: object
    D: np.ndarray
    eps: float
    band: float
    pair: PairPotential
    vol: VolumetricPotential = None

    @property
    def args(self):
        """``(G, D, eps)`` positional arguments."""
        return self.graph, self.D, self.eps


def quad20(matrix=None):
    """Zero-jitter lattice with 20 vertices in the domain (6 free), quadratic chains."""
    G = cell_graph(GraphParams(jitter=0.0), SMALL_DOMAIN)
    pair = PairPotential(kind="quadratic", matrix=matrix)
    return Fixture(G, SMALL_DOMAIN.copy(), 1.0, SMALL_BAND, pair)


def kuhn_grun_small(n_mean=100.0, beta0=1.0, K=1.0, physical=True, seed=5):
    """Jittered graph on the small domain with Kuhn-Grün (p10) chains and the volumetric well.

    ``physical=True`` gives the Hamiltonian in physical units (prefactor
    ``N°/β°``, volumetric weight ``1/K``); otherwise the reduced Hamiltonian
    (prefactor 1, weight ``β°/(N° K)``).
    """
    G = cell_graph(GraphParams(seed=seed), SMALL_DOMAIN)
    scale = n_mean / beta0 if physical else 1.0
    pair = PairPotential(n_mean=n_mean, scale=scale)
    vol = VolumetricPotential.physical(beta0, n_mean, K, reduced=not physical)
    return Fixture(G, SMALL_DOMAIN.copy(), 1.0, SMALL_BAND, pair, vol)


def kuhn_grun_reduced(n_mean=100.0, beta0=1.0, K=1.0):
    """Reduced Kuhn-Grün potentials (no graph) for window sweeps."""
    return PairPotential(n_mean=n_mean), VolumetricPotential.physical(beta0, n_mean, K, reduced=True)
