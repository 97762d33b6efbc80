"""Langevin function, its inverse, and the Kuhn-Grün chain free energy."""

import numpy as np

from ..exceptions import OutOfRange

# Coefficients of the degree-10 surrogate, as displayed for the p = 10 model.
_P10_RATIONALS = ((3, 2), (9, 20), (9, 350), (81, 7000), (243, 673750))
P10_COEFFICIENTS = tuple(a / b for a, b in _P10_RATIONALS)

# Taylor coefficients of the exact free energy f(t) in powers t^2, t^4, ...
_EXACT_SERIES = (3 / 2, 9 / 20, 99 / 350, 1539 / 7000, 126117 / 673750)

_SMALL = 0.1


def langevin(theta):
    """Langevin function ``coth(θ) - 1/θ``, accurate near zero."""
    th = np.asarray(theta, dtype=float)
    out = np.empty_like(th)
    small = np.abs(th) < _SMALL
    s = th[small]
    s2 = s * s
    out[small] = s * (1 / 3 - s2 * (1 / 45 - s2 * (2 / 945 - s2 / 4725)))
    b = th[~small]
    out[~small] = 1.0 / np.tanh(b) - 1.0 / b
    return out if out.ndim else float(out)


def _langevin_prime(theta):
    th = np.asarray(theta, dtype=float)
    out = np.empty_like(th)
    small = np.abs(th) < _SMALL
    s2 = th[small] ** 2
    out[small] = 1 / 3 - s2 * (1 / 15 - s2 * (2 / 189 - s2 / 675))
    b = th[~small]
    # 1/sinh^2 underflows gracefully for large |b|
    with np.errstate(over="ignore"):
        out[~small] = 1.0 / b**2 - 1.0 / np.sinh(b) ** 2
    return out


def inverse_langevin(x, tol=1e-13, maxiter=200):
    """Solve ``coth(θ) - 1/θ = x`` for θ.

    Parameters
    ----------
    x : float or array_like
        Values in the open interval (-1, 1).
    tol : float
        Absolute tolerance on the residual in x.

    Returns
    -------
    float or ndarray

    Raises
    ------
    OutOfRange
        If any ``|x| >= 1``.

    Notes
    -----
    Newton iteration started from the Padé guess ``x (3 - x^2) / (1 - x^2)``,
    safeguarded by bisection on the bracket ``(0, 1e3 / (1 - |x|))``. The
    function is odd, so the iteration runs on ``|x|``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(np.abs(xa) >= 1):
        raise OutOfRange("inverse Langevin requires |x| < 1")
    sign = np.sign(xa)
    y = np.abs(xa).ravel()
    lo = np.zeros_like(y)
    hi = 1e3 / (1.0 - y)
    th = y * (3.0 - y * y) / (1.0 - y * y)
    th = np.clip(th, lo, hi)
    active = y > 0
    for _ in range(maxiter):
        if not active.any():
            break
        t = th[active]
        r = langevin(np.atleast_1d(t)) - y[active]
        done = np.abs(r) <= tol
        # the Langevin function is increasing: shrink the bracket
        lo_a, hi_a = lo[active], hi[active]
        lo_a = np.where(r < 0, t, lo_a)
        hi_a = np.where(r > 0, t, hi_a)
        step = r / _langevin_prime(t)
        new = t - step
        outside = (new <= lo_a) | (new >= hi_a) | ~np.isfinite(new)
        new = np.where(outside, 0.5 * (lo_a + hi_a), new)
        new = np.where(done, t, new)
        idx = np.flatnonzero(active)
        th[idx], lo[idx], hi[idx] = new, lo_a, hi_a
        active[idx[done]] = False
    out = (sign.ravel() * th).reshape(xa.shape)
    return out if out.ndim else float(out)


def _log_theta_over_sinh(th):
    out = np.empty_like(th)
    small = th < _SMALL
    s2 = th[small] ** 2
    # log(θ / sinh θ) = -θ²/6 + θ⁴/180 - θ⁶/2835 + ...
    out[small] = -s2 * (1 / 6 - s2 * (1 / 180 - s2 / 2835))
    b = th[~small]
    out[~small] = np.log(b) - b + np.log(2.0) - np.log1p(-np.exp(-2.0 * b))
    return out


def kuhn_grun(t, mode="p10"):
    """Free energy per monomer of a freely jointed chain at relative extension ``t``.

    Parameters
    ----------
    t : float or array_like
        Relative extension ``L / (N ℓ)``; only ``|t|`` enters.
    mode : {"p10", "exact"}
        ``"exact"`` evaluates ``t θ(t) + log(θ(t) / sinh θ(t))`` with θ the
        inverse Langevin function (finite for ``t < 1``); ``"p10"`` evaluates
        the even degree-10 polynomial surrogate. The polynomial is evaluated
        in the input's floating dtype, so ``np.longdouble`` input gives
        extended-precision values.

    Returns
    -------
    float or ndarray
        Energy in units of ``1/β`` per monomer.
    """
    ta = np.abs(np.asarray(t))
    if not np.issubdtype(ta.dtype, np.floating):
        ta = ta.astype(float)
    if mode == "p10":
        u = ta * ta
        out = np.zeros_like(u)
        for a, b in reversed(_P10_RATIONALS):
            out = (out + u.dtype.type(a) / u.dtype.type(b)) * u
    elif mode == "exact":
        ta = ta.astype(float)
        if np.any(ta >= 1):
            raise OutOfRange("exact Kuhn-Grün energy requires t < 1")
        out = np.empty_like(ta)
        small = ta < 1e-3
        u = ta[small] ** 2
        acc = np.zeros_like(u)
        for c in reversed(_EXACT_SERIES):
            acc = (acc + c) * u
        out[small] = acc
        b = ta[~small]
        th = np.atleast_1d(inverse_langevin(b))
        out[~small] = b * th + _log_theta_over_sinh(th)
    else:
        raise ValueError(f"unknown Kuhn-Grün mode {mode!r}")
    return out if out.ndim else float(out)


def kuhn_grun_derivative(t, mode="p10"):
    """Derivative ``f'(t)``; in exact mode this is θ(t) itself."""
    ta = np.asarray(t, dtype=float)
    if mode == "p10":
        u = ta * ta
        out = np.zeros_like(u)
        for k, c in reversed(list(enumerate(P10_COEFFICIENTS, start=1))):
            out = out * u + 2 * k * c
        out = out * ta
    elif mode == "exact":
        if np.any(np.abs(ta) >= 1):
            raise OutOfRange("exact Kuhn-Grün energy requires t < 1")
        out = np.asarray(inverse_langevin(ta), dtype=float)
    else:
        raise ValueError(f"unknown Kuhn-Grün mode {mode!r}")
    return out if out.ndim else float(out)
