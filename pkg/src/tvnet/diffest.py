"""Difference-based estimation of cross-covariance and cross-correlation curves.

Lagged differences cancel piecewise-smooth trends (jumps included) without
estimating them.  For a triple ``z = (i, l, k)`` the product series
``dy_i(k) * dy_l(h)`` is regressed locally on time; with a large differencing
lag ``h`` the level fit estimates ``gamma_0 - gamma_k``, the ``h``-lag fit
estimates ``2 * gamma_0``, and correlation curves follow by plugging in.

Two curve variants are produced: the plain estimator and the
variance-reduced one, which recombines plain fits at interpolation points
shifted by ``delta(t) * b_z``.  At the domain edges the shift collapses to
zero and the two variants coincide exactly.

Estimation across triples is embarrassingly parallel; the panel is only ever
read.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DataError, DegenerateVariance, LagTooLarge
from .kernels import ReductionParams
from .smoother import _solve_many

# A marginal-variance curve at or below VARIANCE_FLOOR_RATIO times the sample
# variance of the underlying series counts as degenerate.
VARIANCE_FLOOR_RATIO = 1e-10

# Default floor on min_z b_z / max_z b_z; keeps the bandwidths comparable.
BANDWIDTH_RATIO_FLOOR = 0.05


class LagTriple(NamedTuple):
    """Directed source/target pair with a non-negative lag."""

    src: int
    tgt: int
    lag: int


class Panel:
    """An n x p observation matrix on the implicit time grid ``t_j = j/n``.

    Parameters
    ----------
    values : array-like, shape (n, p)
        One row per time point, one column per series.  All entries must be
        finite and ``n >= 50``.
    names : sequence of str, optional
        Column labels; defaults to ``s0, s1, ...``.
    """

    def __init__(self, values, names=None):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DataError(f"panel must be 2-d, got shape {values.shape}")
        n, p = values.shape
        if p < 1:
            raise DataError("panel needs at least one series")
        if n < 50:
            raise DataError(f"panel too short: n={n} < 50")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(
                f"non-finite entry at row {bad[0] + 1}, column {bad[1] + 1}"
            )
        if names is None:
            names = [f"s{i}" for i in range(p)]
        names = [str(x) for x in names]
        if len(names) != p:
            raise DataError(f"{len(names)} names for {p} columns")
        self.values = values
        self.names = names
        self.n = n
        self.p = p
        self.t = np.arange(1, n + 1) / n

    def __repr__(self):
        return f"Panel(n={self.n}, p={self.p}, names={self.names})"


def difference(panel: Panel, series: int, lag: int) -> np.ndarray:
    """Lagged difference ``y_j - y_{j-lag}`` of one panel column.

    Positions where the lagged value does not exist are NaN.  Lag zero yields
    an all-zero series.
    """
    if lag >= panel.n:
        raise LagTooLarge(f"lag {lag} >= series length {panel.n}")
    if lag < 0:
        raise ValueError(f"lag must be non-negative, got {lag}")
    y = panel.values[:, series]
    out = np.full(panel.n, np.nan)
    out[lag:] = y[lag:] - y[: panel.n - lag]
    return out


def auto_lags(n: int, max_lag: int) -> tuple[int, int]:
    """Default differencing lag ``h`` and tail cut ``h_tilde``.

    Log-order keeps the bias from the neglected autocovariance tail small
    while guaranteeing ``max_lag < h - h_tilde``.
    """
    h_tilde = int(np.ceil(np.log(n)))
    h = max(int(np.ceil(2.0 * np.log(n))), 2 * max_lag + 2, max_lag + h_tilde + 1)
    return h, h_tilde


@dataclass
class BandSet:
    """The triple index set with per-triple bandwidths and differencing lags.

    Attributes
    ----------
    triples : list of LagTriple
    bandwidths : ndarray
        Per-triple bandwidth ``b_z``, aligned with ``triples``.
    h, h_tilde : int
        Differencing lag and tail cut, ``h_tilde < h``.
    """

    triples: list
    bandwidths: np.ndarray
    h: int
    h_tilde: int
    ratio_floor: float = BANDWIDTH_RATIO_FLOOR

    def __post_init__(self):
        self.triples = [LagTriple(*z) for z in self.triples]
        self.bandwidths = np.asarray(self.bandwidths, dtype=float)
        if len(self.triples) < 1:
            raise ValueError("band set must contain at least one triple")
        if self.bandwidths.shape != (len(self.triples),):
            raise ValueError("one bandwidth per triple required")
        b = float(self.bandwidths.max())
        if not np.all(self.bandwidths > 0.0) or b >= 0.5:
            raise ValueError("bandwidths must lie in (0, 1/2)")
        if self.h_tilde >= self.h:
            raise ValueError(f"h_tilde={self.h_tilde} must be below h={self.h}")
        for z in self.triples:
            if z.lag < 0:
                raise ValueError(f"negative lag in {z}")
            if z.lag >= self.h - self.h_tilde:
                raise ValueError(
                    f"lag {z.lag} needs headroom below h - h_tilde = "
                    f"{self.h - self.h_tilde}; raise h"
                )
        if float(self.bandwidths.min()) / b < self.ratio_floor:
            raise ValueError(
                "bandwidths too disparate: min/max ratio "
                f"{self.bandwidths.min() / b:.3g} below floor {self.ratio_floor}"
            )

    @property
    def b(self) -> float:
        """Maximal bandwidth; the band domain is [b, 1-b]."""
        return float(self.bandwidths.max())

    @property
    def scale_factors(self) -> np.ndarray:
        """Per-triple normalizers ``sqrt(b / b_z)``."""
        return np.sqrt(self.b / self.bandwidths)

    def __len__(self):
        return len(self.triples)


def all_pairs_triples(p: int, max_lag: int) -> list[LagTriple]:
    """Every ordered pair of distinct series at lags 1..max_lag."""
    return [
        LagTriple(i, l, k)
        for i in range(p)
        for l in range(p)
        if i != l
        for k in range(1, max_lag + 1)
    ]


def within_series_triples(p: int, max_lag: int) -> list[LagTriple]:
    """Autocorrelation triples (i, i, k) at lags 1..max_lag."""
    return [LagTriple(i, i, k) for i in range(p) for k in range(1, max_lag + 1)]


@dataclass
class CurveSet:
    """Estimated correlation machinery for every triple, on the design grid.

    All arrays have shape (n_triples, n).  ``rho`` is never clipped to
    [-1, 1]; bands exceeding that range are meaningful output.  The centering
    curves (``beta_*``) are kept because the residual-based innovation
    statistics need them; they are ``None`` for the plug-in variant, whose
    centering curves are ``gamma`` and ``gamma0_*`` themselves.
    """

    variant: str
    triples: list
    grid: np.ndarray
    rho: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray
    gamma0_src: np.ndarray
    gamma0_tgt: np.ndarray
    beta_lag: np.ndarray | None = None
    beta_h_cross: np.ndarray | None = None
    beta_h_src: np.ndarray | None = None
    beta_h_tgt: np.ndarray | None = None
    domain: tuple[float, float] = (0.0, 1.0)

    def domain_indices(self) -> np.ndarray:
        lo, hi = self.domain
        return np.flatnonzero((self.grid >= lo - 1e-12) & (self.grid <= hi + 1e-12))


def delta_profile(t, b: float, params: ReductionParams):
    """Smoothing-range function ``delta(t)`` of the variance-reduced fit.

    Piecewise linear and continuous: equals ``params.delta`` on the interior
    plateau, falls linearly to zero at ``t = b`` and ``t = 1 - b``, and is
    clamped at zero outside.
    """
    t = np.asarray(t, dtype=float)
    slope = (params.r + 1.0) * b
    val = np.minimum(params.delta, np.minimum((t - b) / slope, (1.0 - b - t) / slope))
    return np.maximum(val, 0.0)


def _product_design(panel: Panel, z: LagTriple, h: int):
    """Design points and the four product-response columns for one triple.

    Columns: lag-product (src_k * tgt_h), cross h-product, source self
    h-product, target self h-product.  Rows with unavailable differences are
    dropped; kernel sums downstream renormalize automatically.
    """
    d_src_k = difference(panel, z.src, z.lag)
    d_src_h = difference(panel, z.src, h)
    d_tgt_h = difference(panel, z.tgt, h)
    valid = slice(h, panel.n)
    cols = np.column_stack(
        [
            d_src_k[valid] * d_tgt_h[valid],
            d_src_h[valid] * d_tgt_h[valid],
            d_src_h[valid] ** 2,
            d_tgt_h[valid] ** 2,
        ]
    )
    return panel.t[valid], cols


def beta_hat(panel: Panel, z, bands: BandSet, kernel, grid=None):
    """Level curve of the product regression for one triple.

    This is the local-linear fit of ``dy_src(lag) * dy_tgt(h)`` at the
    triple's bandwidth, the building block of every correlation estimate.
    """
    z = LagTriple(*z)
    idx = bands.triples.index(z)
    if grid is None:
        grid = panel.t
    x, cols = _product_design(panel, z, bands.h)
    b0, _ = _solve_many(x, cols[:, 0], bands.bandwidths[idx], kernel, np.atleast_1d(grid))
    return b0


def _variance_floors(panel: Panel, triples) -> np.ndarray:
    sample_var = panel.values.var(axis=0, ddof=1)
    return np.array(
        [
            VARIANCE_FLOOR_RATIO * max(sample_var[z.src], sample_var[z.tgt])
            for z in triples
        ]
    )


def _check_positive(name, curve, floor, z):
    if np.min(curve) <= floor:
        t_bad = float(np.argmin(curve))
        raise DegenerateVariance(
            f"marginal variance {name} non-positive for triple {tuple(z)} "
            f"(min {curve.min():.3g} at grid index {int(t_bad)}); "
            "not enough data or differencing lag h too large"
        )


def _curves_from_betas(variant, panel, bands, betas):
    """Assemble gamma/sigma/rho curves from the four beta curves per triple."""
    floors = _variance_floors(panel, bands.triples)
    nz = len(bands)
    n = panel.n
    gamma = np.empty((nz, n))
    sigma = np.empty((nz, n))
    rho = np.empty((nz, n))
    g0s = np.empty((nz, n))
    g0t = np.empty((nz, n))
    for j, z in enumerate(bands.triples):
        b_lag, b_cross, b_src, b_tgt = betas[j]
        g0s[j] = b_src / 2.0
        g0t[j] = b_tgt / 2.0
        _check_positive("gamma0(src)", g0s[j], floors[j], z)
        _check_positive("gamma0(tgt)", g0t[j], floors[j], z)
        gamma[j] = b_cross / 2.0 - b_lag
        # Same-series pairs take sigma = gamma0 directly so that the
        # self-correlation identity rho == 1 holds bit-exactly.
        if z.src == z.tgt:
            sigma[j] = g0s[j]
        else:
            sigma[j] = np.sqrt(g0s[j] * g0t[j])
        rho[j] = gamma[j] / sigma[j]
    b = bands.b
    return CurveSet(
        variant=variant,
        triples=list(bands.triples),
        grid=panel.t,
        rho=rho,
        gamma=gamma,
        sigma=sigma,
        gamma0_src=g0s,
        gamma0_tgt=g0t,
        beta_lag=np.stack([bb[0] for bb in betas]),
        beta_h_cross=np.stack([bb[1] for bb in betas]),
        beta_h_src=np.stack([bb[2] for bb in betas]),
        beta_h_tgt=np.stack([bb[3] for bb in betas]),
        domain=(b, 1.0 - b),
    )


def rho_plain(panel: Panel, bands: BandSet, kernel) -> CurveSet:
    """Plain difference-based correlation curves on the full design grid.

    Each triple's four product regressions share that triple's bandwidth.
    Raises :class:`DegenerateVariance` when a marginal-variance curve touches
    the positivity floor anywhere on the grid.
    """
    betas = []
    for j, z in enumerate(bands.triples):
        x, cols = _product_design(panel, z, bands.h)
        b0, _ = _solve_many(x, cols, bands.bandwidths[j], kernel, panel.t)
        betas.append([b0[:, c] for c in range(4)])
    return _curves_from_betas("plain", panel, bands, betas)


def rho_reduced(
    panel: Panel, bands: BandSet, kernel, params: ReductionParams
) -> CurveSet:
    """Variance-reduced correlation curves.

    Recombines plain level fits at six points shifted by multiples of
    ``delta(t) * b_z`` with the interpolation weights; where ``delta(t)`` is
    zero (the domain edges, or everywhere when ``params.delta == 0``) the
    plain fit is reused unchanged, so the two variants agree there exactly.
    """
    t = panel.t
    dprof = delta_profile(t, bands.b, params)
    active = dprof > 0.0
    betas = []
    for j, z in enumerate(bands.triples):
        x, cols = _product_design(panel, z, bands.h)
        b_z = bands.bandwidths[j]
        plain, _ = _solve_many(x, cols, b_z, kernel, t)
        combo = np.zeros_like(plain)
        if np.any(active):
            ta = t[active]
            shift_unit = dprof[active] * b_z
            for sign in (1.0, -1.0):
                coeffs = params.coefficients(sign * params.r)
                for jj, a in enumerate(coeffs):
                    pts = ta - (sign * params.r + 1.0 - jj) * shift_unit
                    b0, _ = _solve_many(x, cols, b_z, kernel, pts)
                    combo[active] += 0.5 * a * b0
        combo[~active] = plain[~active]
        betas.append([combo[:, c] for c in range(4)])
    return _curves_from_betas("reduced", panel, bands, betas)
