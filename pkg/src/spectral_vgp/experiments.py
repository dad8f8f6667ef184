"""Replicated coverage, contraction and figure-data studies.

Every run writes ``metadata.json`` into its output directory before any
result file. Result CSVs use a fixed column order (``COLUMNS``) and ``%.17g``
floats, so reruns with the same config are byte-identical apart from
``wall_time_ms``.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from functools import lru_cache
import json
import logging
import math
import os
from pathlib import Path
import subprocess
import time

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import ConfigError
from .credible import l2_distance_to_truth, pointwise_band, radius
from .inducing import Strategy, build_blocks
from .posterior import elbo, fit_exact, fit_variational, posterior_l2_spread
from .synthetic_data import PRNG_NAME, sample_dataset
from .theory import rate_terms

log = logging.getLogger(__name__)

COLUMNS = (
    "row_type", "n", "m", "strategy", "replicate", "seed",
    "mse", "rho", "covered", "covered_blowup", "spread",
    "B_n", "W_n", "V_n", "R_n", "elbo", "wall_time_ms", "n_ok", "error",
)
BAND_COLUMNS = ("x", "mean", "sd", "lower", "upper")
FIGURE_GRID = 512


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_rows(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _git_hash():
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def write_metadata(out_dir, cfg, command, extra=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "command": command,
        "config": cfg.to_dict(),
        "prng": PRNG_NAME,
        "base_seed": cfg["base_seed"],
        "replicate_seed_rule": "seed = base_seed + replicate",
        "version": __version__,
        "git_hash": _git_hash(),
        "warnings": cfg.warnings(),
    }
    if extra:
        meta.update(extra)
    path = out_dir / "metadata.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def sub_seeds(seed):
    """Seeds for the m-DPP draw and the radius Monte Carlo of one replicate."""
    kids = np.random.SeedSequence(seed).spawn(4)
    return int(kids[2].generate_state(1)[0]), int(kids[3].generate_state(1)[0])


# --------------------------------------------------------------------------
# per-replicate work (module level so worker processes can pickle it)


@lru_cache(maxsize=8)
def _config(cfg_json):
    return ExperimentConfig.from_dict(json.loads(cfg_json))


@lru_cache(maxsize=32)
def _cell(cfg_json, n):
    cfg = _config(cfg_json)
    kernel = cfg.kernel(n)
    return kernel, cfg.truth()


@lru_cache(maxsize=64)
def _theory(cfg_json, n, m):
    cfg = _config(cfg_json)
    kernel, truth = _cell(cfg_json, n)
    return rate_terms(kernel.spectrum, truth, n, m, cfg["sigma"] ** 2)


def run_replicate(cfg_json, kind, n, m, strategy, replicate):
    """One ``ResultRow`` for ``kind`` in {"coverage", "contraction"}."""
    cfg = _config(cfg_json)
    seed = cfg["base_seed"] + replicate
    row = {"row_type": "replicate", "n": n, "m": m, "strategy": strategy, "replicate": replicate, "seed": seed}
    start = time.perf_counter()
    try:
        kernel, truth = _cell(cfg_json, n)
        data = sample_dataset(truth, n, cfg["sigma"], seed)
        dpp_seed, radius_seed = sub_seeds(seed)
        strat = Strategy(strategy)
        K_ff = kernel.matrix(data.x) if strat in (Strategy.SAMPLE_SPECTRAL, Strategy.MDPP) else None
        blocks = build_blocks(strat, kernel, data, m, seed=dpp_seed, K_ff=K_ff)
        post = fit_variational(kernel, data, blocks)
        dist = l2_distance_to_truth(post, truth)
        row["mse"] = dist**2
        row["spread"] = posterior_l2_spread(post)
        rt = _theory(cfg_json, n, m)
        row.update(B_n=rt.B_n, W_n=rt.W_n, V_n=rt.V_n, R_n=rt.R_n)
        row["elbo"] = elbo(kernel, data, blocks)
        if kind == "coverage":
            rho = radius(post, cfg["gamma"], cfg["mc_samples"], radius_seed)
            row["rho"] = rho
            row["covered"] = dist <= rho
            row["covered_blowup"] = dist <= cfg["blowup"] * rho
        if blocks.points is not None:
            row["_inducing"] = blocks.metadata()
    except Exception as exc:  # recorded as an error row; the run continues
        row["row_type"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_time_ms"] = 1000.0 * (time.perf_counter() - start)
    return row


def _run_tasks(tasks, threads):
    if threads is None:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(tasks) <= 1:
        return [run_replicate(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_replicate, *zip(*tasks), chunksize=max(1, len(tasks) // (8 * threads))))


def _cells(cfg):
    for n in cfg["n_grid"]:
        spectrum = cfg.spectrum(n)
        for m in cfg.m_list(n, spectrum):
            for strategy in cfg["strategies"]:
                yield n, m, strategy


def _summaries(rows):
    out = []
    keyed = {}
    for r in rows:
        keyed.setdefault((r["n"], r["m"], r["strategy"]), []).append(r)
    for (n, m, strategy), group in keyed.items():
        ok = [r for r in group if r["row_type"] == "replicate"]
        s = {"row_type": "summary", "n": n, "m": m, "strategy": strategy, "n_ok": len(ok)}
        for col in ("mse", "rho", "covered", "covered_blowup", "spread", "elbo"):
            vals = [float(r[col]) for r in ok if r.get(col) is not None]
            s[col] = float(np.mean(vals)) if vals else None
        if ok:
            s.update({k: ok[0][k] for k in ("B_n", "W_n", "V_n", "R_n")})
        s["wall_time_ms"] = float(sum(r["wall_time_ms"] for r in group))
        if len(ok) < len(group):
            s["error"] = f"{len(group) - len(ok)} replicate(s) failed"
        out.append(s)
    return out


def _replicated(cfg, kind, out_dir, threads, command):
    out_dir = Path(out_dir)
    write_metadata(out_dir, cfg, command)
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)
    tasks = [
        (cfg_json, kind, n, m, strategy, rep)
        for n, m, strategy in _cells(cfg)
        for rep in range(cfg["replicates"])
    ]
    log.info("%s: %d replicate fits", kind, len(tasks))
    rows = _run_tasks(tasks, threads)
    order = {key: i for i, key in enumerate(_cells(cfg))}
    rows.sort(key=lambda r: (order[(r["n"], r["m"], r["strategy"])], r["replicate"]))
    inducing = [
        {"n": r["n"], "strategy": r["strategy"], "replicate": r["replicate"], **r.pop("_inducing")}
        for r in rows if "_inducing" in r
    ]
    summaries = _summaries(rows)
    path = out_dir / f"{kind}.csv"
    write_rows(path, COLUMNS, rows + summaries)
    if inducing:
        (out_dir / "inducing.json").write_text(json.dumps(inducing) + "\n")
    return rows, summaries, path


def run_coverage(cfg, out_dir=None, threads=1, command="coverage"):
    """Replicated fits with credible radius and coverage indicators per cell."""
    out_dir = out_dir or cfg["output_dir"]
    rows, summaries, path = _replicated(cfg, "coverage", out_dir, threads, command)
    return {"rows": rows, "summary": summaries, "csv": path}


def loglog_slope(ns, values):
    """Least-squares slope and intercept of ``log(values)`` on ``log(ns)``."""
    slope, intercept = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)
    return float(slope), float(intercept)


def run_contraction(cfg, out_dir=None, threads=1, command="contraction"):
    """Replicated fits over the n grid plus a log-log MSE slope per strategy."""
    if len(cfg["n_grid"]) < 4:
        log.warning("contraction slope from fewer than 4 sample sizes")
    out_dir = out_dir or cfg["output_dir"]
    rows, summaries, path = _replicated(cfg, "contraction", out_dir, threads, command)
    slopes = []
    fixed_m = bool(cfg["m_values"])
    groups = {}
    for s in summaries:
        if s["mse"] is not None:
            key = (s["strategy"], s["m"] if fixed_m else None)
            groups.setdefault(key, []).append((s["n"], s["mse"]))
    for (strategy, m), pts in groups.items():
        pts.sort()
        if len(pts) >= 2:
            slope, icpt = loglog_slope(*zip(*pts))
        else:
            slope = icpt = None
        rule = f"m={m}" if m is not None else _rule_label(cfg)
        slopes.append({"strategy": strategy, "m_rule": rule, "slope": slope, "intercept": icpt, "n_points": len(pts)})
    slope_path = Path(out_dir) / "contraction_slopes.csv"
    write_rows(slope_path, ("strategy", "m_rule", "slope", "intercept", "n_points"), slopes)
    return {"rows": rows, "summary": summaries, "slopes": slopes, "csv": path, "slopes_csv": slope_path}


def _rule_label(cfg):
    rule = cfg["m_rule"]
    if rule["kind"] == "fixed":
        return f"m={rule['value']}"
    if rule["kind"] == "power":
        return f"m=ceil(n^{rule['exponent']})"
    return "m=J_n"


# --------------------------------------------------------------------------
# figure data


def figure_grid(points=FIGURE_GRID):
    return np.linspace(-math.pi, math.pi, points)


def _band_rows(band):
    return [dict(zip(BAND_COLUMNS, vals)) for vals in zip(*band)]


def run_figures(cfg, out_dir=None, plot=False, command="figures"):
    """Predictive bands of the exact and variational posteriors at ``n_grid[0]``.

    Writes ``figures_exact.csv``, ``figures_<strategy>_m<m>.csv``,
    ``figures_truth.csv``, ``figures_data.csv`` and ``figures_summary.csv``.
    """
    out_dir = Path(out_dir or cfg["output_dir"])
    n = cfg["n_grid"][0]
    seed = cfg["base_seed"]
    ms = cfg["m_values"] or [30, 60]
    write_metadata(out_dir, cfg, command, {"figure_n": n, "figure_m": ms, "figure_seed": seed})

    kernel, truth = cfg.kernel(n), cfg.truth()
    data = sample_dataset(truth, n, cfg["sigma"], seed)
    dpp_seed, _ = sub_seeds(seed)
    grid = figure_grid(cfg["grid_points"])
    K_ff = kernel.matrix(data.x)
    gamma = cfg["gamma"]

    exact = pointwise_band(fit_exact(kernel, data, K_ff), grid, gamma)
    write_rows(out_dir / "figures_exact.csv", BAND_COLUMNS, _band_rows(exact))
    f0 = truth(grid)
    write_rows(out_dir / "figures_truth.csv", ("x", "f0"), [{"x": a, "f0": b} for a, b in zip(grid, f0)])
    write_rows(out_dir / "figures_data.csv", ("x", "y"), [{"x": a, "y": b} for a, b in zip(data.x, data.y)])

    bands, summary, inducing = {}, [], []
    exact_half = exact.upper - exact.mean
    for strategy in cfg["strategies"]:
        for m in ms:
            blocks = build_blocks(strategy, kernel, data, m, seed=dpp_seed, K_ff=K_ff)
            band = pointwise_band(fit_variational(kernel, data, blocks), grid, gamma)
            bands[(strategy, m)] = band
            write_rows(out_dir / f"figures_{strategy}_m{m}.csv", BAND_COLUMNS, _band_rows(band))
            half = band.upper - band.mean
            summary.append({
                "strategy": strategy,
                "m": m,
                "mean_half_width": float(np.mean(half)),
                "exact_mean_half_width": float(np.mean(exact_half)),
                "frac_within_25pct_of_exact": float(np.mean(np.abs(half - exact_half) <= 0.25 * exact_half)),
                "frac_truth_inside": float(np.mean((f0 >= band.lower) & (f0 <= band.upper))),
            })
            if blocks.points is not None:
                inducing.append(blocks.metadata())
    write_rows(out_dir / "figures_summary.csv", tuple(summary[0]) if summary else ("strategy",), summary)
    if inducing:
        (out_dir / "inducing.json").write_text(json.dumps(inducing) + "\n")
    pngs = []
    if plot:
        try:
            from .plotting import plot_figures
        except ImportError as exc:
            raise ConfigError(f"--plot needs matplotlib (install the 'plot' extra): {exc}") from exc
        pngs = plot_figures(out_dir, grid, f0, data, exact, bands)
    return {"exact": exact, "bands": bands, "truth": f0, "grid": grid, "summary": summary, "png": pngs}
