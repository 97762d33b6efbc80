"""Zero-temperature cell problems: minimization, extrapolation and structural probes."""

from .cell import CellProblem, MinimizationResult, cell_graph, minimize_cell
from .estimate import (
    RankOneReport,
    SubadditivityReport,
    WInfEstimate,
    estimate_W_inf,
    fit_inverse_l,
    growth_sandwich,
    interior_surface,
    partition_grid,
    rank_one_probe,
    rank_one_report,
    subadditivity_check,
    w_inf_from_densities,
    window_density,
)

__all__ = [
    "CellProblem",
    "MinimizationResult",
    "RankOneReport",
    "SubadditivityReport",
    "WInfEstimate",
    "cell_graph",
    "estimate_W_inf",
    "fit_inverse_l",
    "growth_sandwich",
    "interior_surface",
    "minimize_cell",
    "partition_grid",
    "rank_one_probe",
    "rank_one_report",
    "subadditivity_check",
    "w_inf_from_densities",
    "window_density",
]
