"""Weighted least-squares fits of the two scaling forms used by the studies."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import IllConditionedFit

MODELS = ("power-log", "inverse-L")


@dataclass
class FitReport:
    """Result of :func:`fit_scaling`.

    ``coefficients`` is ``(c,)`` for ``y = c log(x)/x`` and ``(a, b)`` for
    ``y = a + b/x``. ``residual`` is the weighted root-mean-square misfit and
    ``standardized`` holds the studentized residuals (only meaningful with
    error bars). ``ratio_factor`` is ``max/min`` of ``y / (log x / x)``.
    """

    model: str
    coefficients: tuple
    residual: float
    standardized: np.ndarray
    flagged: list
    ratio_factor: float
    factor: float
    verdict: bool
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "model": self.model,
            "coefficients": list(self.coefficients),
            "residual": self.residual,
            "standardized": self.standardized.tolist(),
            "flagged": list(self.flagged),
            "ratio_factor": self.ratio_factor,
            "factor": self.factor,
            "verdict": self.verdict,
        }


def fit_scaling(x, y, sigma=None, model="power-log", factor=3.0, outlier=3.0):
    """Fit ``y = c log(x)/x`` (power-log) or ``y = a + b/x`` (inverse-L).

    Parameters
    ----------
    x, y : array_like
        At least four points; power-log needs ``x > 1``.
    sigma : array_like, optional
        One-sigma errors of ``y``; weights are ``1/sigma``.
    factor : float
        Allowed ``max/min`` of ``y / (log x / x)`` for the bounded-ratio
        verdict (power-log only).
    outlier : float
        Studentized residual above which a point is flagged.

    Returns
    -------
    FitReport

    Raises
    ------
    IllConditionedFit
        Too few points, invalid abscissae or a numerically singular design.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise IllConditionedFit("x and y must be one-dimensional of equal length")
    if len(x) < 4:
        raise IllConditionedFit(f"need at least 4 points, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise IllConditionedFit("non-finite data")
    has_sigma = sigma is not None
    s = np.ones_like(y) if sigma is None else np.asarray(sigma, dtype=float)
    if np.any(s <= 0):
        raise IllConditionedFit("sigma must be positive")
    if model == "power-log":
        if np.any(x <= 1):
            raise IllConditionedFit("power-log needs x > 1")
        A = (np.log(x) / x)[:, None]
    else:
        if np.any(x == 0):
            raise IllConditionedFit("inverse-L needs nonzero x")
        A = np.stack([np.ones_like(x), 1.0 / x], axis=1)
    Aw = A / s[:, None]
    yw = y / s
    if np.linalg.cond(Aw) > 1e12:
        raise IllConditionedFit("design matrix is numerically singular")
    coef, *_ = np.linalg.lstsq(Aw, yw, rcond=None)
    r = yw - Aw @ coef
    Q, _ = np.linalg.qr(Aw)
    lev = np.sum(Q**2, axis=1)
    stud = r / np.sqrt(np.maximum(1.0 - lev, 1e-12))
    flagged = np.flatnonzero(np.abs(stud) > outlier).tolist() if has_sigma else []
    ratio = float("nan")
    if model == "power-log":
        q = y / (np.log(x) / x)
        ratio = float(q.max() / q.min()) if np.all(q > 0) else float("inf")
        verdict = bool(ratio <= factor and not flagged)
    else:
        verdict = not flagged
    return FitReport(model, tuple(float(c) for c in coef), float(np.sqrt(np.mean(r**2))), stud, flagged, ratio,
                     float(factor), verdict)
