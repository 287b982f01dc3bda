"""Simultaneous confidence bands, the induced networks, and the heatmap.

A band is centered at the estimated correlation curve with half-width
``r_boot * Gamma_z(t) / sqrt(n * b_z)``; a directed edge exists at time t
exactly when some lag's hypothesized curve escapes the band there.  Edge
decisions and band membership are computed from the same comparison, so the
test/band duality is an identity, not an approximation.

The heatmap reports, per ordered pair and time point, the fraction of
bootstrap draws strictly below the observed standardized deviation: the
smallest level at which the band family would exclude the null there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bootstrap import QuantileResult
from .diffest import BandSet, CurveSet
from .errors import DomainError
from .lrv import LrvCurve


class NullSpec:
    """Hypothesized curves per triple: constant, affine, or tabulated.

    Entries are one of ``("constant", c)``, ``("affine", (a, c))`` for
    ``a + c*t``, or ``("table", (t_points, values))`` with linear
    interpolation inside the tabulated range.
    """

    def __init__(self, entries):
        self.entries = list(entries)

    @classmethod
    def zero(cls, n_triples: int) -> "NullSpec":
        return cls([("constant", 0.0)] * n_triples)

    @classmethod
    def constant(cls, value: float, n_triples: int) -> "NullSpec":
        return cls([("constant", float(value))] * n_triples)

    @classmethod
    def affine(cls, intercept: float, slope: float, n_triples: int) -> "NullSpec":
        return cls([("affine", (float(intercept), float(slope)))] * n_triples)

    @classmethod
    def table(cls, t_points, values, n_triples: int) -> "NullSpec":
        t_points = np.asarray(t_points, dtype=float)
        values = np.asarray(values, dtype=float)
        return cls([("table", (t_points, values))] * n_triples)

    def values(self, grid) -> np.ndarray:
        """Null curves evaluated on the grid, shape (n_triples, len(grid))."""
        grid = np.asarray(grid, dtype=float)
        out = np.empty((len(self.entries), grid.size))
        for i, (kind, params) in enumerate(self.entries):
            if kind == "constant":
                out[i] = params
            elif kind == "affine":
                a, c = params
                out[i] = a + c * grid
            elif kind == "table":
                tp, vals = params
                if grid.min() < tp.min() - 1e-12 or grid.max() > tp.max() + 1e-12:
                    raise DomainError(
                        "tabulated null does not cover the evaluation grid "
                        f"[{grid.min():.4g}, {grid.max():.4g}]"
                    )
                out[i] = np.interp(grid, tp, vals)
            else:
                raise ValueError(f"unknown null kind {kind!r}")
        return out


@dataclass
class SCBBand:
    """Simultaneous confidence band for every triple on the domain grid.

    ``upper - lower`` equals ``2 * r_boot * sd / sqrt(n * b_z)`` by
    construction; curves are not clipped to [-1, 1].
    """

    triples: list
    grid: np.ndarray
    center: np.ndarray
    sd: np.ndarray
    sd_divisor: np.ndarray
    half: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    r_boot: float
    alpha: float
    bandwidths: np.ndarray
    n: int

    def outside(self, nulls: NullSpec) -> np.ndarray:
        """Boolean (triples, grid): null curve escapes the band."""
        g = nulls.values(self.grid)
        return (g < self.lower) | (g > self.upper)

    def standardized_deviation(self, nulls: NullSpec) -> np.ndarray:
        """``sqrt(n b_z) |g - center| / sd`` per triple and grid point."""
        g = nulls.values(self.grid)
        root = np.sqrt(self.n * self.bandwidths)[:, None]
        return root * np.abs(g - self.center) / self.sd_divisor


def build_scb(
    curves: CurveSet, lrv: LrvCurve, quantile: QuantileResult, bands: BandSet
) -> SCBBand:
    """Assemble the band from curves, LRV scale, and the bootstrap quantile."""
    idx = curves.domain_indices()
    if idx.size == 0:
        raise DomainError("band domain is empty; bandwidths too large")
    sd_full = lrv.sd()
    sd_div_full = lrv.sd_floored()
    center = curves.rho[:, idx]
    sd = sd_full[:, idx]
    n = curves.grid.size
    half = quantile.r_boot * sd / np.sqrt(n * bands.bandwidths)[:, None]
    return SCBBand(
        triples=list(curves.triples),
        grid=curves.grid[idx],
        center=center,
        sd=sd,
        sd_divisor=sd_div_full[:, idx],
        half=half,
        lower=center - half,
        upper=center + half,
        r_boot=float(quantile.r_boot),
        alpha=float(quantile.alpha),
        bandwidths=np.asarray(bands.bandwidths, dtype=float),
        n=n,
    )


class EdgeHit(NamedTuple):
    """One directed edge with its triggering lags and largest deviation."""

    src: int
    tgt: int
    lags: tuple
    stat: float


@dataclass
class NetworkSnapshot:
    """Directed graph at one time point."""

    t: float
    edges: list


def connect(band: SCBBand, nulls: NullSpec, times=None) -> list:
    """Network snapshots over the grid (or a requested subset of times).

    An edge src -> tgt is present at time t iff some lag's null value lies
    outside that triple's band at t; the reported statistic is the largest
    standardized deviation among the triggering lags.
    """
    outside = band.outside(nulls)
    stats = band.standardized_deviation(nulls)
    if times is None:
        cols = np.arange(band.grid.size)
    else:
        cols = np.array(
            [int(np.argmin(np.abs(band.grid - t))) for t in np.atleast_1d(times)]
        )
    pair_to_rows = {}
    for row, z in enumerate(band.triples):
        pair_to_rows.setdefault((z.src, z.tgt), []).append(row)
    snapshots = []
    for c in cols:
        edges = []
        for (src, tgt), rows in pair_to_rows.items():
            lags = tuple(band.triples[r].lag for r in rows if outside[r, c])
            if lags:
                stat = max(float(stats[r, c]) for r in rows if outside[r, c])
                edges.append(EdgeHit(src=src, tgt=tgt, lags=lags, stat=stat))
        snapshots.append(NetworkSnapshot(t=float(band.grid[c]), edges=edges))
    return snapshots


HEATMAP_DTYPE = np.dtype(
    [("t", float), ("src", int), ("tgt", int), ("level", float)]
)


def confidence_heatmap(band: SCBBand, draws: np.ndarray, nulls: NullSpec) -> np.ndarray:
    """Pairwise confidence-level cells over the grid.

    The cell at (src, tgt, t) is the fraction of bootstrap draws strictly
    below the pair's observed standardized deviation at t (maximum over its
    lags).  Ties with a draw count as non-exceedance, which is conservative
    toward coverage.
    """
    stats = band.standardized_deviation(nulls)
    draws = np.sort(np.asarray(draws, dtype=float))
    b = draws.size
    pair_to_rows = {}
    for row, z in enumerate(band.triples):
        pair_to_rows.setdefault((z.src, z.tgt), []).append(row)
    cells = np.empty(len(pair_to_rows) * band.grid.size, dtype=HEATMAP_DTYPE)
    pos = 0
    for (src, tgt), rows in sorted(pair_to_rows.items()):
        pair_stat = stats[rows].max(axis=0)
        # Count of draws strictly below each statistic.
        counts = np.searchsorted(draws, pair_stat, side="left")
        for c in range(band.grid.size):
            cells[pos] = (band.grid[c], src, tgt, counts[c] / b)
            pos += 1
    return cells
