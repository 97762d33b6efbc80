"""Chain and volumetric potentials and the discrete Hamiltonian."""

from .deformation import CLAMPED, FREE, SOFT, Deformation, domain_vertices, load_deformation, save_deformation
from .growth import GrowthReport, growth_check
from .hamiltonian import Hamiltonian, discrete_norms, gradient_check, hamiltonian, hamiltonian_gradient
from .langevin import P10_COEFFICIENTS, inverse_langevin, kuhn_grun, kuhn_grun_derivative, langevin
from .potentials import PairPotential, VolumetricPotential, pair_energy

__all__ = [
    "CLAMPED",
    "FREE",
    "P10_COEFFICIENTS",
    "SOFT",
    "Deformation",
    "GrowthReport",
    "Hamiltonian",
    "PairPotential",
    "VolumetricPotential",
    "discrete_norms",
    "gradient_check",
    "domain_vertices",
    "growth_check",
    "hamiltonian",
    "hamiltonian_gradient",
    "inverse_langevin",
    "kuhn_grun",
    "kuhn_grun_derivative",
    "langevin",
    "load_deformation",
    "pair_energy",
    "save_deformation",
]
