"""Smoothing-parameter selection.

Two selectors cover every tuning knob in the package: generalized cross
validation for regression bandwidths (curve bandwidths ``b_z`` and trend
bandwidths), and the extended minimum-volatility method for the bootstrap
window ``w``, the LRV smoothing bandwidth ``eta``, and the LRV block lengths.
Default grids follow the large-sample rate guidance: ``w ~ n^(2/5)``,
``eta ~ n^(-1/7)``, ``m ~ n^(2/7)``, ``b ~ n^(-1/5)``.

Grid cells are independent deterministic sub-computations; ties are broken
by fixed rules (GCV: largest bandwidth; MV: lexicographically smallest grid
index) so selections are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllSingular, GridTooSmall, SingularDesign
from .smoother import hat_diagnostics

# Scores within this relative distance of the grid minimum count as tied.
_TIE_RTOL = 1e-10

_GRID_MULTIPLIERS = (0.5, 0.75, 1.0, 1.5, 2.0)
_M_MULTIPLIERS = (0.5, 1.0, 1.5, 2.0, 3.0)


def default_bandwidth_grid(n: int) -> np.ndarray:
    """Candidate curve bandwidths around the n^(-1/5) rate."""
    base = n ** (-0.2)
    grid = np.array([m * base for m in _GRID_MULTIPLIERS])
    grid = grid[(grid < 0.5) & (grid * n >= 10.0)]
    if grid.size == 0:
        raise GridTooSmall(f"no feasible bandwidth candidates for n={n}")
    return grid


def default_trend_grid(n: int) -> np.ndarray:
    """Candidate trend bandwidths around the n^(-1/6) rate."""
    base = n ** (-1.0 / 6.0)
    grid = np.array([m * base for m in _GRID_MULTIPLIERS])
    grid = grid[(grid < 0.5) & (grid * n >= 10.0)]
    if grid.size == 0:
        raise GridTooSmall(f"no feasible trend bandwidths for n={n}")
    return grid


def default_window_grid(n: int, half_window: int) -> np.ndarray:
    """Candidate bootstrap windows around the n^(2/5) rate."""
    base = int(n**0.4)
    grid = sorted({int(round(m * base)) for m in _GRID_MULTIPLIERS})
    grid = [w for w in grid if 2 <= w <= half_window - 1]
    if len(grid) < 3:
        raise GridTooSmall(
            f"need at least 3 feasible windows in [2, {half_window - 1}], got {grid}"
        )
    return np.array(grid, dtype=int)


def default_eta_grid(n: int) -> np.ndarray:
    """Candidate LRV smoothing bandwidths around the n^(-1/7) rate."""
    base = n ** (-1.0 / 7.0)
    grid = np.array(sorted({m * base for m in _GRID_MULTIPLIERS}))
    grid = grid[(grid > 0.0) & (grid < 0.5)]
    if grid.size < 3:
        raise GridTooSmall(f"need at least 3 eta candidates below 1/2, got {grid}")
    return grid


def default_block_grid(n: int) -> np.ndarray:
    """Candidate LRV block lengths around the n^(2/7) rate."""
    base = int(n ** (2.0 / 7.0))
    grid = sorted({max(1, int(round(m * base))) for m in _M_MULTIPLIERS})
    grid = [m for m in grid if m <= n // 3]
    if len(grid) < 3:
        raise GridTooSmall(f"need at least 3 block-length candidates, got {grid}")
    return np.array(grid, dtype=int)


def rate_block_length(n: int) -> int:
    """The n^(2/7) pilot block length used while scanning (w, eta)."""
    return max(1, int(n ** (2.0 / 7.0)))


@dataclass
class GcvResult:
    """GCV scores over a bandwidth grid and the selected bandwidth.

    Ties (within a small relative tolerance, which covers the exactly-fitted
    case where every numerator vanishes) resolve to the largest bandwidth.
    """

    bandwidths: np.ndarray
    scores: np.ndarray
    selected: float


def gcv_select(responses, bandwidths, kernel, design=None) -> GcvResult:
    """Select a bandwidth by generalized cross validation.

    The score is the mean squared residual of the local-linear fit at the
    design points, divided by ``(1 - trace/n)^2`` where the trace is that of
    the smoother matrix.  Candidates where the fit is singular or the trace
    reaches n are skipped; if none survive, :class:`AllSingular` is raised.
    """
    responses = np.asarray(responses, dtype=float)
    bandwidths = np.sort(np.asarray(bandwidths, dtype=float))
    n = responses.size
    scores = np.full(bandwidths.size, np.inf)
    for i, b in enumerate(bandwidths):
        try:
            diag = hat_diagnostics(responses, b, kernel, design=design)
        except SingularDesign:
            continue
        if diag.trace >= n:
            continue
        rss = float(np.sum((responses - diag.fitted) ** 2))
        scores[i] = (rss / n) / (1.0 - diag.trace / n) ** 2
    if not np.any(np.isfinite(scores)):
        raise AllSingular("no bandwidth candidate produced a usable fit")
    best = scores.min()
    tied = scores <= best * (1.0 + _TIE_RTOL) + 1e-300
    selected = float(bandwidths[np.flatnonzero(tied)[-1]])
    return GcvResult(bandwidths=bandwidths, scores=scores, selected=selected)


@dataclass
class MvSelection:
    """Minimum-volatility scan over the (w, eta) grid.

    ``table[i, j]`` holds the bootstrap-variance functional at
    ``(w_grid[i], eta_grid[j])``; ``volatility`` the neighborhood SD at
    interior cells (NaN at the border).  Per-triple block-length refinements
    are filled in by the pipeline after the scan.
    """

    w_grid: np.ndarray
    eta_grid: np.ndarray
    table: np.ndarray
    volatility: np.ndarray
    selected_w: int
    selected_eta: float
    block_grid: np.ndarray | None = None
    block_lengths: np.ndarray | None = None


def mv_select(s2_fn, w_grid, eta_grid) -> MvSelection:
    """Pick the (w, eta) cell whose neighborhood is most stable.

    ``s2_fn(w, eta)`` must return the scalar variance functional.  The
    neighborhood of an interior cell is the plus-shaped set of five cells
    (itself plus the four axis neighbors); its sample standard deviation is
    minimized, ties resolving to the lexicographically smallest index pair.
    """
    w_grid = np.asarray(w_grid)
    eta_grid = np.asarray(eta_grid)
    m1, m2 = w_grid.size, eta_grid.size
    if m1 < 3 or m2 < 3:
        raise GridTooSmall(f"MV needs grids of length >= 3, got {m1} x {m2}")
    table = np.empty((m1, m2))
    for i, w in enumerate(w_grid):
        for j, eta in enumerate(eta_grid):
            table[i, j] = s2_fn(int(w), float(eta))
    vol = np.full((m1, m2), np.nan)
    for i in range(1, m1 - 1):
        for j in range(1, m2 - 1):
            hood = np.array(
                [
                    table[i, j - 1],
                    table[i, j],
                    table[i, j + 1],
                    table[i - 1, j],
                    table[i + 1, j],
                ]
            )
            vol[i, j] = float(np.std(hood, ddof=1))
    best = np.nanmin(vol)
    ties = np.argwhere(vol <= best * (1.0 + _TIE_RTOL) + 1e-300)
    i_sel, j_sel = min(map(tuple, ties))
    return MvSelection(
        w_grid=w_grid,
        eta_grid=eta_grid,
        table=table,
        volatility=vol,
        selected_w=int(w_grid[i_sel]),
        selected_eta=float(eta_grid[j_sel]),
    )


def select_block_length(gamma2_fn, m_grid) -> tuple[int, np.ndarray]:
    """Refine one triple's LRV block length by the stability criterion.

    ``gamma2_fn(m)`` returns the squared LRV curve on the evaluation grid.
    For each interior grid index the pointwise SD across the three
    neighboring block lengths is averaged over the grid; the index with the
    smallest average wins, ties resolving to the smallest index.
    """
    m_grid = np.asarray(m_grid, dtype=int)
    if m_grid.size < 3:
        raise GridTooSmall(f"block-length grid needs >= 3 candidates, got {m_grid}")
    curves = [np.asarray(gamma2_fn(int(m)), dtype=float) for m in m_grid]
    scores = np.full(m_grid.size, np.inf)
    for j in range(1, m_grid.size - 1):
        trio = np.stack([curves[j - 1], curves[j], curves[j + 1]])
        scores[j] = float(np.mean(np.std(trio, axis=0, ddof=1)))
    best = scores.min()
    tied = np.flatnonzero(scores <= best * (1.0 + _TIE_RTOL) + 1e-300)
    j_sel = int(tied[0])
    return int(m_grid[j_sel]), scores
