"""End-to-end orchestration: tuning, curves, bootstrap, bands.

`analyze` runs one algorithm variant on one panel and returns everything a
caller needs: resolved tuning parameters, curves, LRV scale, bootstrap
quantile, and the band.  The three variants are

- ``"red"``   variance-reduced difference-based bands (the default),
- ``"diff"``  plain difference-based bands,
- ``"plugin"`` smooth-trend plug-in bands (invalid under trend jumps).

Everything downstream of the input panel is deterministic given the
configuration, including the bootstrap (counter-based multipliers keyed by
the seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import tuning
from .bootstrap import QuantileResult, block_sums, bootstrap_quantile, build_block_vectors
from .diffest import (
    BandSet,
    CurveSet,
    LagTriple,
    Panel,
    auto_lags,
    difference,
    rho_plain,
    rho_reduced,
)
from .errors import ConfigError
from .kernels import KernelSpec, ReductionParams, ReducedKernel
from .lrv import LrvCurve, lrv_curve, xi_series
from .network import SCBBand, build_scb
from .plugin import (
    TrendFit,
    plugin_window_range,
    plugin_xi,
    rho_plugin,
    trend_fit,
)

ALGORITHMS = ("red", "diff", "plugin")


@dataclass
class PipelineConfig:
    """Resolved-or-auto knobs of one analysis run.

    ``None`` means "select automatically": GCV for bandwidths, the
    minimum-volatility scan for ``w``/``eta``, the stability criterion for
    the LRV block lengths.  Grids may be overridden for tuning studies.
    """

    triples: list
    algorithm: str = "red"
    alpha: float = 0.1
    B: int = 1000
    seed: int = 0
    kernel_r: float = 1.0 / np.sqrt(2.0)
    kernel_delta: float = 1.3
    h: int | None = None
    h_tilde: int | None = None
    bandwidths: object = None
    w: int | None = None
    eta: float | None = None
    blocks: object = None
    tau: object = None
    b_grid: object = None
    w_grid: object = None
    eta_grid: object = None
    m_grid: object = None
    tau_grid: object = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.B < 100:
            raise ConfigError(f"B must be at least 100, got {self.B}")
        self.triples = [LagTriple(*z) for z in self.triples]
        if len(self.triples) == 0:
            raise ConfigError("at least one (source, target, lag) triple required")


@dataclass
class AnalysisResult:
    """Everything one variant produced on one panel."""

    algorithm: str
    panel: Panel
    config: PipelineConfig
    bands: BandSet
    curves: CurveSet
    lrv: LrvCurve
    quantile: QuantileResult | None
    scb: SCBBand | None
    resolved: dict
    mv: tuning.MvSelection | None = None
    trend: TrendFit | None = None
    gcv: dict = field(default_factory=dict)

    def band_at(self, alpha: float) -> tuple[QuantileResult, SCBBand]:
        """Band at a different level, reusing the stored draws."""
        q = self.quantile.requantile(alpha)
        return q, build_scb(self.curves, self.lrv, q, self.bands)


def _gcv_responses(panel: Panel, z: LagTriple, h: int):
    """Responses driving the bandwidth GCV: the triple's product series.

    Lag-0 triples use the h-lag product pair (their own lag product is
    identically zero).
    """
    lag = z.lag if z.lag != 0 else h
    d_src = difference(panel, z.src, lag)
    d_tgt = difference(panel, z.tgt, h)
    valid = slice(h, panel.n)
    return panel.t[valid], d_src[valid] * d_tgt[valid]


def resolve_bandwidths(panel: Panel, triples, h: int, kernel, grid=None):
    """Per-triple GCV bandwidths on the product responses."""
    if grid is None:
        grid = tuning.default_bandwidth_grid(panel.n)
    out = np.empty(len(triples))
    details = {}
    for j, z in enumerate(triples):
        x, y = _gcv_responses(panel, z, h)
        res = tuning.gcv_select(y, grid, kernel, design=x)
        out[j] = res.selected
        details[tuple(z)] = res
    return out, details


def _resolve_lags(panel: Panel, cfg: PipelineConfig) -> tuple[int, int]:
    k_max = max(z.lag for z in cfg.triples)
    h_auto, ht_auto = auto_lags(panel.n, k_max)
    h = cfg.h if cfg.h is not None else h_auto
    h_tilde = cfg.h_tilde if cfg.h_tilde is not None else min(ht_auto, h - 1)
    if h_tilde >= h:
        raise ConfigError(f"h_tilde={h_tilde} must be below h={h}")
    return int(h), int(h_tilde)


def _resolve_bandset(panel: Panel, cfg: PipelineConfig, kernel) -> tuple[BandSet, dict]:
    h, h_tilde = _resolve_lags(panel, cfg)
    gcv_details = {}
    if cfg.bandwidths is None:
        grid = None if cfg.b_grid is None else np.asarray(cfg.b_grid, dtype=float)
        bw, gcv_details = resolve_bandwidths(panel, cfg.triples, h, kernel, grid=grid)
    else:
        bw = np.broadcast_to(
            np.asarray(cfg.bandwidths, dtype=float), (len(cfg.triples),)
        ).copy()
    try:
        bands = BandSet(triples=cfg.triples, bandwidths=bw, h=h, h_tilde=h_tilde)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return bands, gcv_details


def _resolve_taus(panel: Panel, cfg: PipelineConfig, kernel) -> np.ndarray:
    if cfg.tau is not None:
        return np.broadcast_to(np.asarray(cfg.tau, dtype=float), (panel.p,)).copy()
    grid = (
        tuning.default_trend_grid(panel.n)
        if cfg.tau_grid is None
        else np.asarray(cfg.tau_grid, dtype=float)
    )
    taus = np.empty(panel.p)
    for i in range(panel.p):
        res = tuning.gcv_select(panel.values[:, i], grid, kernel, design=panel.t)
        taus[i] = res.selected
    return taus


def _diff_s2_builder(xi_res, xi_raw, bands, kernel, kappa, pilot_m):
    """s2(w, eta) functional for the difference-based MV scan."""
    cache = {}

    def s2(w: int, eta: float) -> float:
        if eta not in cache:
            lrv = lrv_curve(xi_res, pilot_m, eta, kernel, kappa)
            cache[eta] = build_block_vectors(xi_raw, lrv, bands, kernel)
        sums = block_sums(cache[eta], w)
        return float(np.sum(sums.values**2))

    return s2


def _plugin_s2_builder(trend, curves, bands, kernel, pilot_m):
    """s2(w, eta) functional for the plug-in MV scan (trimmed range)."""
    from .plugin import plugin_lrv

    xi_raw = plugin_xi(trend, curves, bands, center=False)
    n = trend.panel.n
    cache = {}

    def s2(w: int, eta: float) -> float:
        if eta not in cache:
            lrv = plugin_lrv(trend, curves, bands, kernel, eta=eta, m=pilot_m)
            cache[eta] = build_block_vectors(xi_raw, lrv, bands, kernel)
        j_first, j_last, norm = plugin_window_range(n, bands.b, trend.tau, w)
        sums = block_sums(cache[eta], w, j_first=j_first, j_last=j_last, normalizer=norm)
        return float(np.sum(sums.values**2))

    return s2


def _select_w_eta(cfg: PipelineConfig, panel: Panel, half_window: int, s2_fn):
    if cfg.w is not None and cfg.eta is not None:
        return int(cfg.w), float(cfg.eta), None
    w_grid = (
        tuning.default_window_grid(panel.n, half_window)
        if cfg.w_grid is None
        else np.asarray(cfg.w_grid, dtype=int)
    )
    eta_grid = (
        tuning.default_eta_grid(panel.n)
        if cfg.eta_grid is None
        else np.asarray(cfg.eta_grid, dtype=float)
    )
    mv = tuning.mv_select(s2_fn, w_grid, eta_grid)
    w = int(cfg.w) if cfg.w is not None else mv.selected_w
    eta = float(cfg.eta) if cfg.eta is not None else mv.selected_eta
    return w, eta, mv


def _select_blocks(cfg: PipelineConfig, panel: Panel, gamma2_by_m):
    """Per-triple block lengths via the stability criterion (or overrides)."""
    nz = len(cfg.triples)
    if cfg.blocks is not None:
        return np.broadcast_to(np.asarray(cfg.blocks, dtype=int), (nz,)).copy(), None
    m_grid = (
        tuning.default_block_grid(panel.n)
        if cfg.m_grid is None
        else np.asarray(cfg.m_grid, dtype=int)
    )
    curves_by_m = {int(m): gamma2_by_m(int(m)) for m in m_grid}
    out = np.empty(nz, dtype=int)
    for row in range(nz):
        sel, _ = tuning.select_block_length(
            lambda m: curves_by_m[int(m)][row], m_grid
        )
        out[row] = sel
    return out, m_grid


def analyze(panel: Panel, cfg: PipelineConfig, bootstrap: bool = True) -> AnalysisResult:
    """Run one algorithm variant end to end on a panel.

    With ``bootstrap=False`` the run stops after the LRV curves (no quantile
    and no band); curve-only consumers avoid the Monte Carlo cost.
    """
    base = KernelSpec()
    params = ReductionParams(r=cfg.kernel_r, delta=cfg.kernel_delta)
    if cfg.algorithm == "plugin":
        return _analyze_plugin(panel, cfg, base, params, bootstrap)
    return _analyze_diff(panel, cfg, base, params, bootstrap)


def _analyze_diff(panel, cfg, base, params, bootstrap=True):
    bands, gcv_details = _resolve_bandset(panel, cfg, base)
    reduced = cfg.algorithm == "red"
    if reduced:
        curves = rho_reduced(panel, bands, base, params)
        kappa = ReducedKernel(base, params).kappa
    else:
        curves = rho_plain(panel, bands, base)
        kappa = base.kappa
    xi_raw = xi_series(panel, curves, bands, center=False)
    xi_res = xi_series(panel, curves, bands, center=True)
    pilot_m = tuning.rate_block_length(panel.n)
    half_window = int(np.ceil(panel.n * bands.b))
    s2_fn = _diff_s2_builder(xi_res, xi_raw, bands, base, kappa, pilot_m)
    w, eta, mv = _select_w_eta(cfg, panel, half_window, s2_fn)
    blocks, m_grid = _select_blocks(
        cfg, panel,
        lambda m: lrv_curve(xi_res, m, eta, base, kappa).values,
    )
    if mv is not None:
        mv.block_grid = m_grid
        mv.block_lengths = blocks
    lrv = lrv_curve(xi_res, blocks, eta, base, kappa)
    quant = scb = None
    if bootstrap:
        vectors = build_block_vectors(xi_raw, lrv, bands, base)
        sums = block_sums(vectors, w)
        quant = bootstrap_quantile(sums, B=cfg.B, alpha=cfg.alpha, seed=cfg.seed)
        scb = build_scb(curves, lrv, quant, bands)
    resolved = _manifest(panel, cfg, bands, w, eta, blocks, kappa, curves.domain, taus=None)
    return AnalysisResult(
        algorithm=cfg.algorithm,
        panel=panel,
        config=cfg,
        bands=bands,
        curves=curves,
        lrv=lrv,
        quantile=quant,
        scb=scb,
        resolved=resolved,
        mv=mv,
        gcv=gcv_details,
    )


def _analyze_plugin(panel, cfg, base, params, bootstrap=True):
    bands, gcv_details = _resolve_bandset(panel, cfg, base)
    taus = _resolve_taus(panel, cfg, base)
    trend = trend_fit(panel, taus, base)
    curves = rho_plugin(trend, bands, base)
    pilot_m = tuning.rate_block_length(panel.n)
    s2_fn = _plugin_s2_builder(trend, curves, bands, base, pilot_m)
    half_window = int(np.ceil(panel.n * bands.b))
    w, eta, mv = _select_w_eta(cfg, panel, half_window, s2_fn)
    from .plugin import plugin_lrv

    blocks, m_grid = _select_blocks(
        cfg, panel,
        lambda m: plugin_lrv(trend, curves, bands, base, eta=eta, m=m).values,
    )
    if mv is not None:
        mv.block_grid = m_grid
        mv.block_lengths = blocks
    lrv = plugin_lrv(trend, curves, bands, base, eta=eta, m=blocks)
    quant = scb = None
    if bootstrap:
        xi_raw = plugin_xi(trend, curves, bands, center=False)
        vectors = build_block_vectors(xi_raw, lrv, bands, base)
        j_first, j_last, norm = plugin_window_range(panel.n, bands.b, trend.tau, w)
        sums = block_sums(vectors, w, j_first=j_first, j_last=j_last, normalizer=norm)
        quant = bootstrap_quantile(sums, B=cfg.B, alpha=cfg.alpha, seed=cfg.seed)
        scb = build_scb(curves, lrv, quant, bands)
    resolved = _manifest(panel, cfg, bands, w, eta, blocks, base.kappa, curves.domain, taus=taus)
    return AnalysisResult(
        algorithm=cfg.algorithm,
        panel=panel,
        config=cfg,
        bands=bands,
        curves=curves,
        lrv=lrv,
        quantile=quant,
        scb=scb,
        resolved=resolved,
        mv=mv,
        trend=trend,
        gcv=gcv_details,
    )


def _manifest(panel, cfg, bands, w, eta, blocks, kappa, domain, taus):
    """Every resolved parameter needed to reproduce the run exactly."""
    out = {
        "algorithm": cfg.algorithm,
        "n": panel.n,
        "p": panel.p,
        "names": list(panel.names),
        "triples": [list(map(int, z)) for z in bands.triples],
        "alpha": cfg.alpha,
        "B": cfg.B,
        "seed": cfg.seed,
        "kernel_r": cfg.kernel_r,
        "kernel_delta": cfg.kernel_delta,
        "kappa": kappa,
        "h": bands.h,
        "h_tilde": bands.h_tilde,
        "bandwidths": [float(b) for b in bands.bandwidths],
        "w": int(w),
        "eta": float(eta),
        "blocks": [int(m) for m in np.atleast_1d(blocks)],
        "domain": [float(domain[0]), float(domain[1])],
    }
    if taus is not None:
        out["tau"] = [float(x) for x in np.atleast_1d(taus)]
    return out
