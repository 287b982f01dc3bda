"""Shared-multiplier block wild bootstrap for the band quantile.

The estimation-error field is compressed into a sparse block layout: for
anchor index ``s`` only design indices within the kernel window contribute,
so the n x n field collapses to windows of width ``2*ceil(n*b)`` whose
row-wise maxima are exactly preserved.  Windowed block-sum differences are
then multiplied by standard normals and the maximum over all offsets and
coordinates mimics the uniform deviation of the correlation curves.

The one structural rule that distinguishes this bootstrap from classic
multiplier schemes: two block sums share the same normal draw whenever their
offset and window indices have equal sum.  The generator is counter-based
and keyed by (seed, replicate), so the rule holds by construction and
replicates can run in any order or in parallel without coordination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .diffest import BandSet
from .errors import BandwidthTooLarge, WindowTooLarge
from .lrv import LrvCurve, XiSeries

# Upper bound on the scratch buffer used per replicate batch, in doubles.
_BATCH_BUDGET = 1 << 24


def multiplier_normals(seed: int, replicate: int, count: int) -> np.ndarray:
    """The replicate's standard-normal multipliers.

    Counter-based and keyed by ``(seed, replicate)``: the j-th entry depends
    only on the key and on j, which is what makes the shared-multiplier rule
    and parallel replicates reproducible from the seed alone.
    """
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(replicate)])
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.standard_normal(count)


@dataclass
class BlockVectors:
    """Sparse block layout of the standardized innovation field.

    Stores the ingredients of the weighting rule rather than the dense
    field: innovation values (zero-filled where unavailable), the per-triple
    kernel profile over a window of width ``2 * ceil(n*b)``, the bandwidth
    normalizers, and the LRV scale at the anchor points.
    """

    triples: list
    xi: np.ndarray
    profiles: np.ndarray
    scale: np.ndarray
    anchor_sd: np.ndarray
    half_window: int
    n_offsets: int
    n: int
    bandwidths: np.ndarray
    kernel: object

    def entry(self, j: int, s: int) -> np.ndarray:
        """The weighted vector at design index j and anchor s (both 1-based)."""
        t_diff = (j - s) / self.n
        w = np.array([self.kernel(t_diff / b) for b in self.bandwidths])
        sd = np.array(
            [
                self._anchor_value(z, s)
                for z in range(len(self.triples))
            ]
        )
        return self.scale * w * self.xi[:, j - 1] / sd

    def _anchor_value(self, z: int, s: int) -> float:
        a = s - self.half_window
        if 0 <= a <= self.n_offsets:
            return self.anchor_sd[z, a]
        raise IndexError(f"anchor {s} outside the rearranged layout")

    def rearranged(self, j: int) -> np.ndarray:
        """The concatenated vector at window position j (1-based, up to 2*ceil(n*b)).

        Component block a holds the entry at design index ``j + a`` and
        anchor ``ceil(n*b) + a``; summing these over j reproduces every
        anchor's full window sum, so the overall maximum is preserved.
        """
        m = self.half_window
        if not 1 <= j <= 2 * m:
            raise IndexError(f"window position {j} outside 1..{2 * m}")
        a = np.arange(self.n_offsets + 1)
        w = np.stack(
            [
                self.profiles[z, j - 1] * np.ones_like(a, dtype=float)
                for z in range(len(self.triples))
            ]
        )
        vals = self.xi[:, j - 1 + a] * w / self.anchor_sd
        return (self.scale[:, None] * vals).T.ravel()


def build_block_vectors(
    xi: XiSeries, lrv: LrvCurve, bands: BandSet, kernel
) -> BlockVectors:
    """Assemble the block layout from raw innovations and LRV curves.

    ``kernel`` is the base kernel; its support radius 1 is what keeps every
    triple's weights inside the ``ceil(n*b)`` window and the rearranged
    maximum identity exact.
    """
    n = xi.values.shape[1]
    b = bands.b
    m = int(np.ceil(n * b))
    a_max = n - 2 * m
    if a_max < 1:
        raise BandwidthTooLarge(
            f"ceil(n*b)={m} leaves n - 2*ceil(n*b) = {a_max} < 1; shrink bandwidths"
        )
    nz = len(bands.triples)
    # Per-triple kernel profile over the window: position d (0-based) sits at
    # time offset (d + 1 - m)/n from the anchor.
    d = np.arange(1, 2 * m + 1)
    offsets = (d - m) / n
    profiles = np.stack([kernel(offsets / bz) for bz in bands.bandwidths])
    sd = lrv.sd_floored()
    anchors = np.arange(m, n - m + 1)  # 1-based anchor indices
    anchor_sd = sd[:, anchors - 1]
    return BlockVectors(
        triples=list(bands.triples),
        xi=xi.filled(0.0),
        profiles=profiles,
        scale=bands.scale_factors,
        anchor_sd=anchor_sd,
        half_window=m,
        n_offsets=a_max,
        n=n,
        bandwidths=np.asarray(bands.bandwidths, dtype=float),
        kernel=kernel,
    )


@dataclass
class BlockSums:
    """Differences of adjacent w-windows of the block vectors.

    ``values[z, l, jj]`` is the sum over the w positions ending at window
    index ``j_values[jj]`` minus the sum over the following w positions, at
    offset ``l``.  ``normalizer`` is the denominator of the bootstrap draws.
    """

    triples: list
    values: np.ndarray
    j_values: np.ndarray
    w: int
    half_window: int
    n: int
    normalizer: float


def block_sums(vectors: BlockVectors, w: int, j_first=None, j_last=None, normalizer=None) -> BlockSums:
    """Windowed block-sum differences for every offset.

    The default window-index range ``w .. 2*ceil(n*b) - w`` is the one the
    quantile computation sums over; the plug-in variant narrows it and
    adjusts the normalizer.
    """
    m = vectors.half_window
    if w < 2 or w > m - 1:
        raise WindowTooLarge(f"window w={w} must lie in [2, ceil(n*b)-1={m - 1}]")
    if j_first is None:
        j_first = w
    if j_last is None:
        j_last = 2 * m - w
    if j_last < j_first:
        raise WindowTooLarge(f"empty window-index range [{j_first}, {j_last}]")
    j_values = np.arange(j_first, j_last + 1)
    nz, n = vectors.xi.shape
    n_off = vectors.n_offsets + 1
    out = np.empty((nz, n_off, j_values.size))
    for z in range(nz):
        # Row l of the sliding view is the window of xi starting at offset l;
        # multiplying by the fixed kernel profile gives the weighted window,
        # and cumulative sums turn the two adjacent w-blocks into slices.
        wm = sliding_window_view(vectors.xi[z], 2 * m) * vectors.profiles[z]
        wm = wm / vectors.anchor_sd[z][:, None]
        csum = np.concatenate([np.zeros((n_off, 1)), np.cumsum(wm, axis=1)], axis=1)
        s_hi = csum[:, j_values + w]
        s_mid = csum[:, j_values]
        s_lo = csum[:, j_values - w]
        out[z] = vectors.scale[z] * (2.0 * s_mid - s_lo - s_hi)
    if normalizer is None:
        normalizer = np.sqrt(2.0 * w * m)
    return BlockSums(
        triples=list(vectors.triples),
        values=out,
        j_values=j_values,
        w=w,
        half_window=m,
        n=n,
        normalizer=float(normalizer),
    )


@dataclass
class QuantileResult:
    """Bootstrap draws and the family-wise quantile.

    ``r_boot`` is the ``ceil((1-alpha) * B)``-th order statistic of the
    draws (the conservative upper convention).
    """

    draws: np.ndarray
    alpha: float
    r_boot: float
    seed: int
    B: int

    def requantile(self, alpha: float) -> "QuantileResult":
        """Same draws, different level."""
        return QuantileResult(
            draws=self.draws,
            alpha=alpha,
            r_boot=empirical_upper_quantile(self.draws, alpha),
            seed=self.seed,
            B=self.B,
        )


def empirical_upper_quantile(draws: np.ndarray, alpha: float) -> float:
    """The ceil((1-alpha)*B)-th order statistic of the draws."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    b = draws.size
    rank = int(np.ceil((1.0 - alpha) * b))
    rank = min(max(rank, 1), b)
    return float(np.sort(draws)[rank - 1])


def bootstrap_quantile(sums: BlockSums, B: int, alpha: float, seed: int) -> QuantileResult:
    """Monte Carlo quantile of the maximum multiplier statistic.

    For each replicate, every block sum is multiplied by the normal draw
    indexed by the sum of its offset and window indices, the products are
    summed over the window range, and the draw is the maximum absolute value
    over offsets and coordinates, scaled by the normalizer.
    """
    if B < 100:
        raise ValueError(f"need at least 100 bootstrap replicates, got {B}")
    s = sums.values
    nz, n_off, nj = s.shape
    # Multiplier index for offset l (0-based) and window index j: l + j.
    idx = np.arange(n_off)[:, None] + sums.j_values[None, :] - 1
    draws = np.empty(B)
    batch = max(1, int(_BATCH_BUDGET // max(1, n_off * nj)))
    for lo in range(0, B, batch):
        hi = min(lo + batch, B)
        rmat = np.stack(
            [multiplier_normals(seed, rep, sums.n) for rep in range(lo + 1, hi + 1)]
        )
        gathered = rmat[:, idx]
        tot = np.einsum("zlj,rlj->rzl", s, gathered)
        draws[lo:hi] = np.abs(tot).max(axis=(1, 2)) / sums.normalizer
    return QuantileResult(
        draws=draws,
        alpha=alpha,
        r_boot=empirical_upper_quantile(draws, alpha),
        seed=seed,
        B=B,
    )
