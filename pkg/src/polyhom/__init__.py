"""Effective energy densities of random polymer-chain networks.

Zero-temperature densities come from cell-problem minimization, finite-temperature
free energies from exact Gaussian integrals (quadratic Hamiltonians) or from
thermodynamic integration along a path from a Gaussian reference.
"""

__version__ = "0.1.0"

from .exceptions import PolyhomError  # noqa: E402

__all__ = ["__version__", "PolyhomError"]
