"""Plug-in pipeline for panels with smooth trends (no jumps).

Removes each trend by a local-linear fit, then estimates correlation curves
from kernel averages of residual products and runs the same shared-multiplier
bootstrap with index ranges trimmed by the trend bandwidth.  Invalid under
trend jumps; the difference-based routes exist precisely for that case, and
the pipeline exposes this one only behind an explicit algorithm switch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bootstrap import (
    QuantileResult,
    block_sums,
    bootstrap_quantile,
    build_block_vectors,
)
from .diffest import BandSet, CurveSet, Panel, _variance_floors
from .errors import ConfigError, DegenerateVariance
from .lrv import LrvCurve, XiSeries, lrv_curve
from .network import SCBBand, build_scb
from .smoother import _solve_many


@dataclass
class TrendFit:
    """Per-series local-linear trend estimates and the residual panel."""

    panel: Panel
    taus: np.ndarray
    mu: np.ndarray
    residuals: np.ndarray

    @property
    def tau(self) -> float:
        return float(self.taus.max())


def trend_fit(panel: Panel, tau, kernel) -> TrendFit:
    """Fit each series' trend by local-linear regression at bandwidth tau.

    ``tau`` may be a scalar or one bandwidth per series, each in (0, 1/2).
    Residuals are the observations minus the fitted trend at the design
    points.
    """
    taus = np.broadcast_to(np.asarray(tau, dtype=float), (panel.p,)).copy()
    if np.any(taus <= 0.0) or np.any(taus >= 0.5):
        raise ValueError(f"trend bandwidths must lie in (0, 1/2), got {taus}")
    mu = np.empty((panel.p, panel.n))
    for i in range(panel.p):
        b0, _ = _solve_many(panel.t, panel.values[:, i], taus[i], kernel, panel.t)
        mu[i] = b0
    residuals = panel.values - mu.T
    return TrendFit(panel=panel, taus=taus, mu=mu, residuals=residuals)


def _shift(y: np.ndarray, lag: int) -> np.ndarray:
    """``y`` advanced by ``lag``: out[j] = y[j + lag], NaN once exhausted."""
    if lag == 0:
        return y.copy()
    out = np.full(y.size, np.nan)
    out[:-lag] = y[lag:]
    return out


def _nw_average(products, t, bandwidth, kernel, n):
    """Kernel average normalized by n*b, skipping unavailable products."""
    avail = np.isfinite(products)
    vals = products[avail]
    tv = t[avail]
    out = np.empty(n)
    for lo in range(0, n, 512):
        hi = min(lo + 512, n)
        w = kernel((tv[None, :] - t[lo:hi, None]) / bandwidth)
        out[lo:hi] = (w @ vals) / (n * bandwidth)
    return out


def rho_plugin(trend: TrendFit, bands: BandSet, kernel) -> CurveSet:
    """Correlation curves from kernel averages of residual products.

    The lag covariance at t is the kernel average of
    ``resid[j] * resid[j+k]`` normalized by ``n * b_z``; the correlation
    divides by the same-bandwidth marginal curves.  The curves live on the
    interior domain [tau + b, 1 - tau - b].
    """
    panel = trend.panel
    n = panel.n
    t = panel.t
    eps = trend.residuals
    floors = _variance_floors(panel, bands.triples)
    nz = len(bands.triples)
    gamma = np.empty((nz, n))
    g0s = np.empty((nz, n))
    g0t = np.empty((nz, n))
    sigma = np.empty((nz, n))
    rho = np.empty((nz, n))
    for j, z in enumerate(bands.triples):
        b_z = bands.bandwidths[j]
        gamma[j] = _nw_average(
            eps[:, z.src] * _shift(eps[:, z.tgt], z.lag), t, b_z, kernel, n
        )
        g0s[j] = _nw_average(eps[:, z.src] ** 2, t, b_z, kernel, n)
        g0t[j] = _nw_average(eps[:, z.tgt] ** 2, t, b_z, kernel, n)
        for name, curve in (("gamma0(src)", g0s[j]), ("gamma0(tgt)", g0t[j])):
            if curve.min() <= floors[j]:
                raise DegenerateVariance(
                    f"plug-in marginal variance {name} non-positive for triple "
                    f"{tuple(z)} (min {curve.min():.3g})"
                )
        # sigma = gamma0 directly on same-series pairs: keeps rho == 1 exact.
        if z.src == z.tgt:
            sigma[j] = g0s[j]
        else:
            sigma[j] = np.sqrt(g0s[j] * g0t[j])
        rho[j] = gamma[j] / sigma[j]
    return CurveSet(
        variant="plugin",
        triples=list(bands.triples),
        grid=t,
        rho=rho,
        gamma=gamma,
        sigma=sigma,
        gamma0_src=g0s,
        gamma0_tgt=g0t,
        domain=(trend.tau + bands.b, 1.0 - trend.tau - bands.b),
    )


def plugin_xi(trend: TrendFit, curves: CurveSet, bands: BandSet, center: bool) -> XiSeries:
    """Innovation series of the plug-in route.

    Raw form: standardized residual products minus half the correlation
    times the standardized lag-0 self products.  The centered form subtracts
    each product's own kernel-average curve first; it collapses to exactly
    zero for same-series lag-0 triples, where the cross and self terms
    cancel.
    """
    if curves.variant != "plugin":
        raise ValueError(f"plug-in innovations need plugin curves, got {curves.variant}")
    eps = trend.residuals
    n = trend.panel.n
    nz = len(bands.triples)
    vals = np.full((nz, n), np.nan)
    for j, z in enumerate(bands.triples):
        cross = eps[:, z.src] * _shift(eps[:, z.tgt], z.lag)
        self_src = eps[:, z.src] ** 2
        self_tgt = eps[:, z.tgt] ** 2
        if center:
            cross = cross - curves.gamma[j]
            self_src = self_src - curves.gamma0_src[j]
            self_tgt = self_tgt - curves.gamma0_tgt[j]
        xi = cross / curves.sigma[j]
        xi -= (curves.rho[j] / 2.0) * (
            self_src / curves.gamma0_src[j] + self_tgt / curves.gamma0_tgt[j]
        )
        vals[j] = xi
    tag = "plugin-residual" if center else "plugin-raw"
    return XiSeries(variant=tag, triples=list(bands.triples), values=vals, start=0)


def plugin_lrv(
    trend: TrendFit, curves: CurveSet, bands: BandSet, kernel, *, eta: float, m
) -> LrvCurve:
    """LRV curves of the centered plug-in innovations (base-kernel constant)."""
    xi_res = plugin_xi(trend, curves, bands, center=True)
    return lrv_curve(xi_res, m, eta, kernel, kernel.kappa)


def plugin_window_range(n: int, b: float, tau: float, w: int) -> tuple[int, int, float]:
    """Trimmed window-index range and draw normalizer of the plug-in bootstrap.

    Raises :class:`ConfigError` when ``ceil(n*b) <= ceil(n*tau)`` or the
    range is empty.
    """
    half = int(np.ceil(n * b))
    trim = int(np.ceil(n * tau))
    if half <= trim:
        raise ConfigError(
            f"ceil(n*b)={half} must exceed ceil(n*tau)={trim}; "
            "trend bandwidth too large relative to the band bandwidths"
        )
    j_first = w + trim - 1
    j_last = 2 * half - w - trim
    if j_last < j_first:
        raise ConfigError(
            f"empty plug-in window range [{j_first}, {j_last}]; reduce w or tau"
        )
    return j_first, j_last, float(np.sqrt(2.0 * w * (half - trim)))


def plugin_bootstrap(
    trend: TrendFit,
    bands: BandSet,
    kernel,
    B: int,
    alpha: float,
    seed: int,
    *,
    w: int,
    eta: float,
    m,
    curves: CurveSet | None = None,
) -> tuple[QuantileResult, SCBBand]:
    """Bootstrap quantile and band for the plug-in route.

    Same contract as the difference-based bootstrap, with window-index sums
    trimmed by ``ceil(n*tau)`` on both sides and draws normalized by
    ``sqrt(2 w (ceil(n*b) - ceil(n*tau)))``.
    """
    if curves is None:
        curves = rho_plugin(trend, bands, kernel)
    n = trend.panel.n
    j_first, j_last, normalizer = plugin_window_range(n, bands.b, trend.tau, w)
    lrv = plugin_lrv(trend, curves, bands, kernel, eta=eta, m=m)
    xi_raw = plugin_xi(trend, curves, bands, center=False)
    vectors = build_block_vectors(xi_raw, lrv, bands, kernel)
    sums = block_sums(vectors, w, j_first=j_first, j_last=j_last, normalizer=normalizer)
    quant = bootstrap_quantile(sums, B=B, alpha=alpha, seed=seed)
    band = build_scb(curves, lrv, quant, bands)
    return quant, band
