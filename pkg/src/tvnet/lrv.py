"""Innovation statistics and block-sum long-run variance curves.

The deviation of an estimated correlation curve behaves like a moving
kernel average of an innovation series, one value per design index.  Two
flavours of that series are materialized on purpose: the raw-product form
feeds the bootstrap block vectors, and the residual-centered form feeds the
long-run variance estimator; they are different objects and stay different.

The long-run variance curve aggregates squared sums of ``m`` consecutive
innovations, reweighted in time by a kernel of bandwidth ``eta``, and scaled
by the squared integral of whichever kernel governs the curve estimator
(base for plain, composite for variance-reduced).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffest import BandSet, CurveSet, Panel, difference
from .errors import BlockTooLong

# Relative floor applied to the LRV scale wherever it is used as a divisor.
SD_FLOOR_RATIO = 1e-8

_RAW_VARIANTS = {"plain": "raw-plain", "reduced": "raw-reduced"}
_RES_VARIANTS = {"plain": "residual-plain", "reduced": "residual-reduced"}


@dataclass
class XiSeries:
    """Innovation values per triple and design index.

    ``values[z, j]`` is defined for ``j >= start`` (0-based); earlier entries
    are NaN because the differences backing them do not exist.
    """

    variant: str
    triples: list
    values: np.ndarray
    start: int

    def filled(self, fill=0.0) -> np.ndarray:
        """Values with unavailable entries replaced, for windowed sums."""
        out = self.values.copy()
        out[np.isnan(out)] = fill
        return out


def xi_series(panel: Panel, curves: CurveSet, bands: BandSet, center: bool) -> XiSeries:
    """Innovation series for every triple of the band set.

    With ``center=False`` the raw product form is returned: the h-lag product
    halved minus the lag product, self-normalized, with the two self products
    weighted by a quarter of the correlation.  With ``center=True`` every
    product is first centered at its fitted level curve (the residual form
    used by the long-run variance).

    The curve variant must match: plain curves produce plain innovations.
    """
    if curves.variant not in ("plain", "reduced"):
        raise ValueError(f"difference-based innovations need plain/reduced curves, got {curves.variant}")
    h = bands.h
    n = panel.n
    nz = len(bands)
    vals = np.full((nz, n), np.nan)
    for j, z in enumerate(bands.triples):
        d_src_k = difference(panel, z.src, z.lag)
        d_src_h = difference(panel, z.src, h)
        d_tgt_h = difference(panel, z.tgt, h)
        cross_h = d_src_h * d_tgt_h
        cross_k = d_src_k * d_tgt_h
        self_src = d_src_h**2
        self_tgt = d_tgt_h**2
        if center:
            cross_h = cross_h - curves.beta_h_cross[j]
            cross_k = cross_k - curves.beta_lag[j]
            self_src = self_src - curves.beta_h_src[j]
            self_tgt = self_tgt - curves.beta_h_tgt[j]
        xi = cross_h / 2.0 - cross_k
        xi /= curves.sigma[j]
        xi -= (curves.rho[j] / 4.0) * (
            self_src / curves.gamma0_src[j] + self_tgt / curves.gamma0_tgt[j]
        )
        vals[j] = xi
    tag = (_RES_VARIANTS if center else _RAW_VARIANTS)[curves.variant]
    return XiSeries(variant=tag, triples=list(bands.triples), values=vals, start=h)


@dataclass
class LrvCurve:
    """Squared long-run variance curves on the design grid.

    ``values[z, j] = Gamma^2_z(t_j)``, always non-negative.  ``block_lengths``
    records the per-triple m actually used; ``kappa`` the kernel constant.
    """

    triples: list
    grid: np.ndarray
    values: np.ndarray
    block_lengths: np.ndarray
    eta: float
    kappa: float
    floor_warnings: int = 0

    def sd(self) -> np.ndarray:
        return np.sqrt(self.values)

    def sd_floored(self) -> np.ndarray:
        """Scale curves floored away from zero for use as divisors.

        The floor is ``SD_FLOOR_RATIO`` times each triple's grid median;
        ``floor_warnings`` counts how many entries were lifted.
        """
        s = self.sd()
        floor = SD_FLOOR_RATIO * np.median(s, axis=1, keepdims=True)
        lifted = s < floor
        self.floor_warnings += int(lifted.sum())
        return np.maximum(s, floor)


def block_difference_sums(values: np.ndarray, start: int, m: int) -> tuple[np.ndarray, int]:
    """Sums of m consecutive innovations, for blocks fully inside the data.

    Returns the per-block sums and the 0-based index of the first block.
    """
    filled = np.nan_to_num(values, nan=0.0)
    csum = np.concatenate([[0.0], np.cumsum(filled)])
    n = values.size
    first = start
    last = n - m
    if last < first:
        raise BlockTooLong(f"block length {m} leaves no complete block")
    s = np.arange(first, last + 1)
    return csum[s + m] - csum[s], first


def lrv_curve(xi: XiSeries, m, eta: float, kernel, kappa: float, grid=None) -> LrvCurve:
    """Long-run variance curves from residual-centered innovations.

    Parameters
    ----------
    xi : XiSeries
        Residual-centered innovations (the raw form would inflate the level).
    m : int or array of int
        Block length, per triple or shared; must satisfy ``1 <= m <= n/3``.
    eta : float
        Time-smoothing bandwidth for the block weights, in (0, 1/2).
    kernel : callable
        Base kernel for the time weights.
    kappa : float
        Squared-integral constant of the curve estimator's kernel.
    """
    n = xi.values.shape[1]
    nz = xi.values.shape[0]
    ms = np.broadcast_to(np.asarray(m, dtype=int), (nz,)).copy()
    if np.any(ms < 1) or np.any(ms > n // 3):
        raise BlockTooLong(f"block length must lie in [1, n/3], got {m}")
    if not 0.0 < eta < 0.5:
        raise ValueError(f"eta must lie in (0, 1/2), got {eta}")
    if grid is None:
        grid = np.arange(1, n + 1) / n
    grid = np.asarray(grid, dtype=float)
    t = np.arange(1, n + 1) / n
    out = np.empty((nz, grid.size))
    for j in range(nz):
        mj = int(ms[j])
        sums, first = block_difference_sums(xi.values[j], xi.start, mj)
        sq = sums**2
        t_blocks = t[first : first + sums.size]
        # Chunked normalized kernel weighting over the valid block range.
        for lo in range(0, grid.size, 512):
            hi = min(lo + 512, grid.size)
            w = kernel((grid[lo:hi, None] - t_blocks[None, :]) / eta)
            denom = w.sum(axis=1)
            out[j, lo:hi] = (kappa / mj) * (w @ sq) / denom
    out = np.maximum(out, 0.0)
    return LrvCurve(
        triples=list(xi.triples),
        grid=grid,
        values=out,
        block_lengths=ms,
        eta=float(eta),
        kappa=float(kappa),
    )
