"""Kernel-weighted local-linear regression on the unit time grid.

One engine serves every estimator in the package: the difference-based
product regressions, the trend fit of the plug-in route, and the hat-matrix
diagnostics that generalized cross validation needs.  The 2x2 normal
equations are solved in the centered parametrization ``(x_j - t)`` for
numerical stability.

All functions are pure; evaluation points are independent of each other, so
callers may freely split grids across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularDesign

# Condition-number ceiling for the weighted 2x2 normal matrix.
COND_LIMIT = 1e12

# Evaluation points processed per broadcast block; bounds peak memory at
# roughly CHUNK * n doubles.
_CHUNK = 256


@dataclass
class LocalLinearFit:
    """Level and slope estimates of a local-linear fit on an ordered grid."""

    grid: np.ndarray
    beta0: np.ndarray
    beta1: np.ndarray


def _solve_many(x, y, bandwidth, kernel, grid, want_trace=False):
    """Weighted local-linear solve for one or many response columns.

    ``y`` has shape (n,) or (n, q).  Returns (beta0, beta1) with matching
    leading grid dimension, plus the hat-matrix trace when requested (only
    meaningful when ``grid`` is the design ``x`` itself).
    """
    x = np.asarray(x, dtype=float)
    grid = np.asarray(grid, dtype=float)
    y2 = np.asarray(y, dtype=float)
    squeeze = y2.ndim == 1
    if squeeze:
        y2 = y2[:, None]
    g = grid.size
    q = y2.shape[1]
    beta0 = np.empty((g, q))
    beta1 = np.empty((g, q))
    trace = 0.0
    k0 = float(kernel(0.0))
    for lo in range(0, g, _CHUNK):
        hi = min(lo + _CHUNK, g)
        d = x[None, :] - grid[lo:hi, None]
        w = kernel(d / bandwidth)
        s0 = w.sum(axis=1)
        wd = w * d
        s1 = wd.sum(axis=1)
        s2 = (wd * d).sum(axis=1)
        det = s0 * s2 - s1 * s1
        # Condition number |lambda|_max / |lambda|_min of the symmetric 2x2
        # moment matrix.  Fourth-order kernels have negative lobes, so the
        # matrix is routinely indefinite; only the magnitude ratio matters.
        half_tr = 0.5 * (s0 + s2)
        disc = np.sqrt(np.maximum(0.25 * (s0 - s2) ** 2 + s1 * s1, 0.0))
        amin = np.abs(half_tr - disc)
        amax = np.abs(half_tr + disc)
        lo_e, hi_e = np.minimum(amin, amax), np.maximum(amin, amax)
        bad = (lo_e <= 0.0) | (hi_e > COND_LIMIT * lo_e) | ~np.isfinite(det)
        bad |= (w > 0.0).sum(axis=1) < 3
        if np.any(bad):
            t_bad = grid[lo:hi][bad][0]
            raise SingularDesign(
                f"local-linear design singular at t={t_bad:.6g} "
                f"(bandwidth {bandwidth} too small for the design)"
            )
        t0 = w @ y2
        t1 = wd @ y2
        beta0[lo:hi] = (s2[:, None] * t0 - s1[:, None] * t1) / det[:, None]
        beta1[lo:hi] = (s0[:, None] * t1 - s1[:, None] * t0) / det[:, None]
        if want_trace:
            trace += float(np.sum(k0 * s2 / det))
    if squeeze:
        beta0 = beta0[:, 0]
        beta1 = beta1[:, 0]
    if want_trace:
        return beta0, beta1, trace
    return beta0, beta1


def local_linear_fit(responses, bandwidth, kernel, grid, design=None) -> LocalLinearFit:
    """Local-linear regression of ``responses`` on the time grid.

    Parameters
    ----------
    responses : array-like, shape (n,)
        Observations at the design points.
    bandwidth : float
        Kernel bandwidth, in (0, 1/2).
    kernel : callable
        Weight function, typically a :class:`~tvnet.kernels.KernelSpec`.
    grid : array-like
        Evaluation points in [0, 1].
    design : array-like, optional
        Design points; defaults to ``t_j = j/n`` for ``n = len(responses)``.

    Returns
    -------
    LocalLinearFit
        Level (``beta0``) and slope (``beta1``) at each grid point.

    Raises
    ------
    SingularDesign
        If the weighted normal matrix is ill-conditioned at some grid point.
    """
    responses = np.asarray(responses, dtype=float)
    if bandwidth <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    n = responses.size
    if design is None:
        design = (np.arange(1, n + 1)) / n
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    b0, b1 = _solve_many(design, responses, bandwidth, kernel, grid)
    return LocalLinearFit(grid=grid, beta0=b0, beta1=b1)


@dataclass
class HatMatrixDiagnostics:
    """Fitted values at the design points and the smoother-matrix trace."""

    fitted: np.ndarray
    trace: float


def hat_diagnostics(responses, bandwidth, kernel, design=None) -> HatMatrixDiagnostics:
    """Fitted values and trace of the local-linear smoother matrix.

    The fit at a design point is linear in the responses; the trace
    accumulates each point's weight on its own fit, which is what the GCV
    denominator needs.
    """
    responses = np.asarray(responses, dtype=float)
    if bandwidth <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    n = responses.size
    if design is None:
        design = (np.arange(1, n + 1)) / n
    design = np.asarray(design, dtype=float)
    b0, _, trace = _solve_many(design, responses, bandwidth, kernel, design, want_trace=True)
    return HatMatrixDiagnostics(fitted=b0, trace=trace)
