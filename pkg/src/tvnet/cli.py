"""Command-line interface: config parsing, CSV ingestion, artifact emission.

Subcommands
-----------
estimate   correlation curves only (no bootstrap)
bands      curves plus simultaneous confidence bands
network    full run: bands, network snapshots, confidence heatmap
simulate   Monte Carlo study on the built-in generating process
tune       run the selectors and emit their tables

The configuration file is TOML; unknown keys are rejected.  All floats in
CSV outputs carry 17 significant digits.  Output files are written to a
temporary name and atomically renamed, so failures never leave partial
artifacts.

Exit codes: 2 configuration error, 3 data error, 4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .diffest import LagTriple, Panel, all_pairs_triples, within_series_triples
from .errors import (
    AllSingular,
    ConfigError,
    DataError,
    DegenerateVariance,
    TvnetError,
)
from .network import NullSpec, confidence_heatmap, connect
from .pipeline import PipelineConfig, analyze
from .simgen import DgpSpec, monte_carlo

_KNOWN_KEYS = {
    "": {"algorithm"},
    "input": {"path"},
    "bands": {"triples", "mode", "max_lag", "b"},
    "null": {"kind", "value", "intercept", "slope", "t", "values"},
    "kernel": {"r", "delta"},
    "diff": {"h", "h_tilde"},
    "lrv": {"m", "eta"},
    "boot": {"B", "alpha", "seed", "w"},
    "plugin": {"tau"},
    "tune": {"b_grid", "w_grid", "eta_grid", "m_grid", "tau_grid"},
    "sim": {"n", "replicates", "burn_in", "noise_scale", "algorithms", "alphas"},
    "output": {"snapshots"},
}

FLOAT_FMT = "%.17g"


def _load_toml(path: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}")


def _check_keys(doc: dict):
    for key, val in doc.items():
        if isinstance(val, dict):
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"unknown config section [{key}]")
            extra = set(val) - _KNOWN_KEYS[key]
            if extra:
                raise ConfigError(f"unknown keys in [{key}]: {sorted(extra)}")
        else:
            if key not in _KNOWN_KEYS[""]:
                raise ConfigError(f"unknown top-level key {key!r}")


def _auto(value, cast):
    """Translate the TOML value: the string 'auto' means unset."""
    if value is None or value == "auto":
        return None
    return cast(value)


def read_panel_csv(path: str) -> Panel:
    """Strict CSV ingestion: header row, numeric body, no missing cells."""
    if not os.path.exists(path):
        raise ConfigError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file")
        rows = []
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{ln}: expected {len(header)} cells, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise DataError(f"{path}:{ln}: non-numeric cell {bad!r}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Panel(np.asarray(rows, dtype=float), names=[h.strip() for h in header])


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _resolve_triples(doc: dict, panel: Panel) -> list:
    sec = doc.get("bands", {})
    name_to_idx = {name: i for i, name in enumerate(panel.names)}
    if "triples" in sec:
        triples = []
        for item in sec["triples"]:
            if len(item) != 3:
                raise ConfigError(f"triple must have 3 entries, got {item}")
            src, tgt, lag = item
            src = _series_index(src, name_to_idx, panel.p)
            tgt = _series_index(tgt, name_to_idx, panel.p)
            if not isinstance(lag, int) or lag < 0:
                raise ConfigError(f"lag must be a non-negative integer, got {lag}")
            triples.append(LagTriple(src, tgt, lag))
        return triples
    mode = sec.get("mode", "all_pairs")
    max_lag = sec.get("max_lag", 1)
    if not isinstance(max_lag, int) or max_lag < 1:
        raise ConfigError(f"max_lag must be a positive integer, got {max_lag}")
    if mode == "all_pairs":
        return all_pairs_triples(panel.p, max_lag)
    if mode == "within":
        return within_series_triples(panel.p, max_lag)
    raise ConfigError(f"bands.mode must be 'all_pairs' or 'within', got {mode!r}")


def _series_index(ref, name_to_idx, p):
    if isinstance(ref, str):
        if ref not in name_to_idx:
            raise ConfigError(f"series {ref!r} not found in the input header")
        return name_to_idx[ref]
    if isinstance(ref, int) and 0 <= ref < p:
        return ref
    raise ConfigError(f"series reference {ref!r} invalid for {p} columns")


def _resolve_nulls(doc: dict, n_triples: int) -> NullSpec:
    sec = doc.get("null", {})
    kind = sec.get("kind", "zero")
    if kind == "zero":
        return NullSpec.zero(n_triples)
    if kind == "constant":
        if "value" not in sec:
            raise ConfigError("null.kind='constant' requires null.value")
        return NullSpec.constant(float(sec["value"]), n_triples)
    if kind == "affine":
        return NullSpec.affine(
            float(sec.get("intercept", 0.0)), float(sec.get("slope", 0.0)), n_triples
        )
    if kind == "table":
        if "t" not in sec or "values" not in sec:
            raise ConfigError("null.kind='table' requires null.t and null.values")
        return NullSpec.table(sec["t"], sec["values"], n_triples)
    raise ConfigError(f"unknown null.kind {kind!r}")


def build_pipeline_config(doc: dict, panel: Panel, seed_override=None) -> PipelineConfig:
    _check_keys(doc)
    triples = _resolve_triples(doc, panel)
    boot = doc.get("boot", {})
    kern = doc.get("kernel", {})
    diff = doc.get("diff", {})
    lrv_sec = doc.get("lrv", {})
    plug = doc.get("plugin", {})
    tune = doc.get("tune", {})
    bands_sec = doc.get("bands", {})
    seed = seed_override if seed_override is not None else int(boot.get("seed", 0))
    try:
        return PipelineConfig(
            triples=triples,
            algorithm=doc.get("algorithm", "red"),
            alpha=float(boot.get("alpha", 0.1)),
            B=int(boot.get("B", 1000)),
            seed=seed,
            kernel_r=float(kern.get("r", 1.0 / np.sqrt(2.0))),
            kernel_delta=float(kern.get("delta", 1.3)),
            h=_auto(diff.get("h"), int),
            h_tilde=_auto(diff.get("h_tilde"), int),
            bandwidths=_auto(bands_sec.get("b"), lambda v: v),
            w=_auto(boot.get("w"), int),
            eta=_auto(lrv_sec.get("eta"), float),
            blocks=_auto(lrv_sec.get("m"), lambda v: v),
            tau=_auto(plug.get("tau"), lambda v: v),
            b_grid=tune.get("b_grid"),
            w_grid=tune.get("w_grid"),
            eta_grid=tune.get("eta_grid"),
            m_grid=tune.get("m_grid"),
            tau_grid=tune.get("tau_grid"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration value: {exc}")


def _atomic_write(path: str, data: str):
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tvnet-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def write_curves_csv(path, result, with_bands: bool):
    """curves.csv: t,i,l,k,rho,gamma_sd[,lower,upper] on the band domain."""
    names = result.panel.names
    if with_bands:
        band = result.scb
        grid = band.grid
        center = band.center
        sd = band.sd
        lower, upper = band.lower, band.upper
    else:
        idx = result.curves.domain_indices()
        grid = result.curves.grid[idx]
        center = result.curves.rho[:, idx]
        sd = result.lrv.sd()[:, idx]
        lower = upper = None
    buf = io.StringIO()
    header = ["t", "i", "l", "k", "rho", "gamma_sd"]
    if with_bands:
        header += ["lower", "upper"]
    buf.write(",".join(header) + "\n")
    for row, z in enumerate(result.curves.triples):
        for c, t in enumerate(grid):
            cells = [
                _fmt(t),
                names[z.src],
                names[z.tgt],
                str(z.lag),
                _fmt(center[row, c]),
                _fmt(sd[row, c]),
            ]
            if with_bands:
                cells += [_fmt(lower[row, c]), _fmt(upper[row, c])]
            buf.write(",".join(cells) + "\n")
    _atomic_write(path, buf.getvalue())


def write_bootstrap_json(path, result):
    q = result.quantile
    draws = np.sort(q.draws)
    payload = {
        "r_boot": q.r_boot,
        "alpha": q.alpha,
        "B": q.B,
        "seed": q.seed,
        "draw_summary": {
            "min": float(draws[0]),
            "median": float(np.median(draws)),
            "q90": float(draws[int(np.ceil(0.9 * q.B)) - 1]),
            "q95": float(draws[int(np.ceil(0.95 * q.B)) - 1]),
            "max": float(draws[-1]),
            "mean": float(draws.mean()),
        },
    }
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_manifest(path, result, extra=None):
    payload = dict(result.resolved)
    payload["package_version"] = __version__
    if extra:
        payload.update(extra)
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_snapshots(out_dir, snapshots, names):
    for idx, snap in enumerate(snapshots):
        payload = {
            "t": snap.t,
            "edges": [
                {
                    "source": names[e.src],
                    "target": names[e.tgt],
                    "lags": list(e.lags),
                    "max_stat": e.stat,
                }
                for e in snap.edges
            ],
        }
        path = os.path.join(out_dir, f"network_{idx:06d}.json")
        _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_heatmap_csv(path, cells, names):
    buf = io.StringIO()
    buf.write("t,i,l,level\n")
    for cell in cells:
        buf.write(
            f"{_fmt(cell['t'])},{names[cell['src']]},{names[cell['tgt']]},{_fmt(cell['level'])}\n"
        )
    _atomic_write(path, buf.getvalue())


def write_tune_report(out_dir, result):
    if result.gcv:
        buf = io.StringIO()
        buf.write("i,l,k,bandwidth,gcv\n")
        for z, res in result.gcv.items():
            for b, s in zip(res.bandwidths, res.scores):
                buf.write(f"{z[0]},{z[1]},{z[2]},{_fmt(b)},{_fmt(s)}\n")
        _atomic_write(os.path.join(out_dir, "gcv.csv"), buf.getvalue())
    if result.mv is not None:
        buf = io.StringIO()
        buf.write("w,eta,s2,volatility\n")
        mv = result.mv
        for i, w in enumerate(mv.w_grid):
            for j, eta in enumerate(mv.eta_grid):
                buf.write(
                    f"{int(w)},{_fmt(eta)},{_fmt(mv.table[i, j])},{_fmt(mv.volatility[i, j])}\n"
                )
        _atomic_write(os.path.join(out_dir, "s2.csv"), buf.getvalue())


def _cmd_analysis(args, emit: str) -> int:
    doc = _load_toml(args.config)
    _check_keys(doc)
    if "input" not in doc or "path" not in doc["input"]:
        raise ConfigError("config needs [input] path = ...")
    panel = read_panel_csv(doc["input"]["path"])
    cfg = build_pipeline_config(doc, panel, seed_override=args.seed)
    os.makedirs(args.out, exist_ok=True)
    if emit == "estimate":
        result = analyze(panel, cfg, bootstrap=False)
        write_curves_csv(os.path.join(args.out, "curves.csv"), result, with_bands=False)
        write_manifest(os.path.join(args.out, "run_manifest.json"), result)
    else:
        result = analyze(panel, cfg)
        write_curves_csv(os.path.join(args.out, "curves.csv"), result, with_bands=True)
        write_bootstrap_json(os.path.join(args.out, "bootstrap.json"), result)
        write_manifest(os.path.join(args.out, "run_manifest.json"), result)
        if emit == "network":
            nulls = _resolve_nulls(doc, len(cfg.triples))
            times = None
            snap_cfg = doc.get("output", {}).get("snapshots", "all")
            if isinstance(snap_cfg, int):
                times = np.linspace(result.scb.grid[0], result.scb.grid[-1], snap_cfg)
            elif isinstance(snap_cfg, list):
                times = [float(x) for x in snap_cfg]
            elif snap_cfg != "all":
                raise ConfigError("output.snapshots must be 'all', a count, or a list of times")
            snapshots = connect(result.scb, nulls, times=times)
            write_snapshots(args.out, snapshots, panel.names)
            cells = confidence_heatmap(result.scb, result.quantile.draws, nulls)
            write_heatmap_csv(os.path.join(args.out, "heatmap.csv"), cells, panel.names)
    if args.tune_report:
        write_tune_report(args.out, result)
    return 0


def _cmd_tune(args) -> int:
    doc = _load_toml(args.config)
    _check_keys(doc)
    if "input" not in doc or "path" not in doc["input"]:
        raise ConfigError("config needs [input] path = ...")
    panel = read_panel_csv(doc["input"]["path"])
    cfg = build_pipeline_config(doc, panel, seed_override=args.seed)
    os.makedirs(args.out, exist_ok=True)
    result = analyze(panel, cfg)
    write_tune_report(args.out, result)
    selected = {
        "bandwidths": result.resolved["bandwidths"],
        "w": result.resolved["w"],
        "eta": result.resolved["eta"],
        "blocks": result.resolved["blocks"],
    }
    if "tau" in result.resolved:
        selected["tau"] = result.resolved["tau"]
    _atomic_write(
        os.path.join(args.out, "selected.json"),
        json.dumps(selected, indent=2, sort_keys=True) + "\n",
    )
    return 0


def _cmd_simulate(args) -> int:
    doc = _load_toml(args.config)
    _check_keys(doc)
    sim = doc.get("sim", {})
    n = int(sim.get("n", 500))
    replicates = int(args.reps if args.reps is not None else sim.get("replicates", 200))
    algorithms = tuple(sim.get("algorithms", ["red", "diff"]))
    alphas = tuple(float(a) for a in sim.get("alphas", [0.1, 0.05]))
    dgp = DgpSpec(
        n=n,
        burn_in=int(sim.get("burn_in", 200)),
        noise_scale=float(sim.get("noise_scale", 1.0)),
    )
    dummy = Panel(np.zeros((max(n, 50), dgp.p)), names=[f"s{i + 1}" for i in range(dgp.p)])
    cfg = build_pipeline_config(doc, dummy, seed_override=args.seed)
    nulls = _resolve_nulls(doc, len(cfg.triples))
    report = monte_carlo(
        dgp,
        cfg,
        replicates,
        algorithms=algorithms,
        alphas=alphas,
        nulls=nulls,
        n_jobs=args.threads,
    )
    os.makedirs(os.path.dirname(args.report_out) or ".", exist_ok=True)
    _atomic_write(args.report_out, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvnet",
        description="Time-varying cross-correlation networks with simultaneous confidence bands",
    )
    parser.add_argument("--version", action="version", version=f"tvnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="tvnet-out"):
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--seed", type=int, default=None, help="override boot.seed")
        p.add_argument("--threads", type=int, default=-1, help="parallel workers (-1: all cores)")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--tune-report", action="store_true", help="also emit GCV and s2 tables")

    for name, hlp in (
        ("estimate", "estimate correlation curves only"),
        ("bands", "curves plus simultaneous confidence bands"),
        ("network", "full run: bands, network snapshots, heatmap"),
    ):
        p = sub.add_parser(name, help=hlp)
        common(p)
    p = sub.add_parser("simulate", help="Monte Carlo study on the built-in process")
    common(p)
    p.add_argument("--reps", type=int, default=None, help="number of replicates")
    p.add_argument("--report-out", default="report.json", help="report JSON path")
    p = sub.add_parser("tune", help="run the selectors; emit tables and choices")
    common(p)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command in ("estimate", "bands", "network"):
            return _cmd_analysis(args, args.command)
        if args.command == "tune":
            return _cmd_tune(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (DegenerateVariance, AllSingular) as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return 4
    except TvnetError as exc:
        # Remaining package errors signal unusable parameter combinations.
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
