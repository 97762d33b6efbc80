"""Parameter sweeps with checkpointed execution, scaling fits and verdicts."""

from ..fitting import FitReport, fit_scaling
from .config import DEFAULT_THRESHOLDS, KINDS, SCHEMA, StudyConfig
from .poincare import PoincareReport, poincare_probe, poincare_ratio, smooth_bump
from .runner import StudyResult, pool_size, run_study

__all__ = [
    "DEFAULT_THRESHOLDS", "FitReport", "KINDS", "PoincareReport", "SCHEMA", "StudyConfig", "StudyResult",
    "fit_scaling", "poincare_probe", "poincare_ratio", "pool_size", "run_study", "smooth_bump",
]
