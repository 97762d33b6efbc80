"""Free energies at finite temperature: exact Gaussian, sampling and integration."""

from .analysis import (
    ConcentrationReport,
    ConcentrationSweep,
    GapReport,
    TwoTemperatureReport,
    concentration_diagnostic,
    concentration_sweep,
    gap_report,
    rescaling_point,
    two_temperature_report,
    two_temperature_study,
    zero_temp_gap,
)
from .quadratic import FreeEnergyEstimate, QuadraticModel, gaussian_free_energy, logdet_spd, stiffness_matrix
from .sampler import GibbsChain, GibbsTarget, batch_means, run_chain, sample_gibbs
from .ti import free_energy_ti, reference_pair

__all__ = [
    "ConcentrationReport", "ConcentrationSweep", "FreeEnergyEstimate", "GapReport", "GibbsChain", "GibbsTarget", "QuadraticModel",
    "TwoTemperatureReport", "batch_means", "concentration_diagnostic", "concentration_sweep", "free_energy_ti", "gap_report", "gaussian_free_energy",
    "logdet_spd", "reference_pair", "rescaling_point", "run_chain", "sample_gibbs", "stiffness_matrix", "two_temperature_report", "two_temperature_study",
    "zero_temp_gap",
]
