"""Command-line interface.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.
Flag values override the config file, which overrides built-in defaults.
"""

import argparse
import csv
import logging
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .credible import l2_distance_to_truth, pointwise_band, radius
from .errors import ConfigError, DomainError, NumericError, UnsupportedOperation
from .experiments import (
    BAND_COLUMNS,
    figure_grid,
    run_contraction,
    run_coverage,
    run_figures,
    sub_seeds,
    write_metadata,
    write_rows,
)
from .inducing import Strategy, build_blocks
from .krr_oracle import KrrProblem, coordinate_check, hessian_min_eigenvalue, perturbation_check, stationarity_residual
from .posterior import elbo, fit_variational, posterior_l2_spread
from .synthetic_data import sample_dataset
from .theory import predicted_rate, rate_terms


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_common(p):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--n", type=int, help="single sample size (replaces n_grid)")
    p.add_argument("--m", type=int, help="fixed number of inducing variables")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--strategy", action="append", choices=[s.value for s in Strategy], help="repeatable")
    p.add_argument("--replicates", type=int)
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: CPU count)")


def build_parser():
    parser = _Parser(prog="spectral-vgp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"spectral-vgp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "fit": "fit one dataset and export predictive bands",
        "figures": "figure data: exact and variational bands at fixed n",
        "coverage": "replicated credible-ball coverage study",
        "contraction": "replicated MSE study with log-log slopes",
        "theory-terms": "print rate terms for the n grid as CSV",
        "verify-krr": "check the variational mean against the KRR score",
        "verify-posterior": "compare the spectral and general posterior formulas",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_common(p)
        if name == "figures":
            p.add_argument("--plot", action="store_true", help="also render PNG files")
    return parser


def _load_config(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict({})
    over = {
        "n_grid": [args.n] if args.n is not None else None,
        "base_seed": args.seed,
        "strategies": args.strategy,
        "replicates": args.replicates,
        "mc_samples": args.mc_samples,
        "output_dir": args.output_dir,
    }
    if args.m is not None:
        over["m_rule"] = {"kind": "fixed", "value": args.m, "exponent": None}
        over["m_values"] = []
    return cfg.with_overrides(**over)


def _single(cfg):
    n = cfg["n_grid"][0]
    kernel, truth = cfg.kernel(n), cfg.truth()
    data = sample_dataset(truth, n, cfg["sigma"], cfg["base_seed"])
    return n, kernel, truth, data


def _csv_out(rows, columns, stream=None):
    w = csv.writer(stream or sys.stdout, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([r[c] if not isinstance(r[c], float) else f"{r[c]:.10g}" for c in columns])


def cmd_fit(cfg, args):
    n, kernel, truth, data = _single(cfg)
    out = Path(cfg["output_dir"])
    write_metadata(out, cfg, "fit")
    dpp_seed, radius_seed = sub_seeds(cfg["base_seed"])
    m = cfg.m_list(n, kernel.spectrum)[0]
    grid = figure_grid(cfg["grid_points"])
    rows = []
    for strategy in cfg["strategies"]:
        blocks = build_blocks(strategy, kernel, data, m, seed=dpp_seed)
        post = fit_variational(kernel, data, blocks)
        band = pointwise_band(post, grid, cfg["gamma"])
        write_rows(out / f"fit_{strategy}.csv", BAND_COLUMNS, [dict(zip(BAND_COLUMNS, v)) for v in zip(*band)])
        rows.append({
            "strategy": strategy, "n": n, "m": m,
            "mse": l2_distance_to_truth(post, truth) ** 2,
            "spread": posterior_l2_spread(post),
            "rho": radius(post, cfg["gamma"], cfg["mc_samples"], radius_seed),
            "elbo": elbo(kernel, data, blocks),
        })
    _csv_out(rows, ("strategy", "n", "m", "mse", "spread", "rho", "elbo"))
    return 0


def cmd_theory(cfg, args):
    s = cfg["spectrum"]
    t = cfg["truth"]
    truth = cfg.truth()
    rows = []
    for n in cfg["n_grid"]:
        spectrum = cfg.spectrum(n)
        for m in cfg.m_list(n, spectrum):
            rt = rate_terms(spectrum, truth, n, m, cfg["sigma"] ** 2)
            r = cfg["m_rule"]["exponent"] if cfg["m_rule"]["kind"] == "power" else None
            pr = predicted_rate(s["kind"], s["alpha"], t["beta"], s["d"], r)
            rows.append({**rt.row(), "exponent": pr.exponent, "regime": pr.regime})
    _csv_out(rows, ("n", "m", "J_n", "B_n", "W_n", "V_n", "R_n", "exponent", "regime"))
    return 0


def cmd_verify_krr(cfg, args):
    n, kernel, truth, data = _single(cfg)
    m = cfg.m_list(n, kernel.spectrum)[0]
    dpp_seed, _ = sub_seeds(cfg["base_seed"])
    rows = []
    for strategy in cfg["strategies"]:
        blocks = build_blocks(strategy, kernel, data, m, seed=dpp_seed)
        post = fit_variational(kernel, data, blocks)
        prob = KrrProblem.from_blocks(data, blocks)
        rows.append({
            "strategy": strategy, "n": n, "m": m,
            "residual": stationarity_residual(prob, post.a_star),
            "min_perturbation_gain": perturbation_check(prob, post.a_star),
            "min_coordinate_gain": coordinate_check(prob, post.a_star),
            "hessian_min_eig": hessian_min_eigenvalue(prob),
        })
    _csv_out(rows, tuple(rows[0]))
    return 0


def cmd_verify_posterior(cfg, args):
    n, kernel, truth, data = _single(cfg)
    m = cfg.m_list(n, kernel.spectrum)[0]
    post = fit_variational(kernel, data, build_blocks(Strategy.POPULATION_SPECTRAL, kernel, data, m))
    rng = np.random.Generator(np.random.PCG64(cfg["base_seed"]))
    x = rng.uniform(-np.pi, np.pi, 50)
    ms, mg = post.mean(x, "spectral"), post.mean(x, "general")
    vs, vg = post.variance(x, "spectral"), post.variance(x, "general")
    mean_err = float(np.max(np.abs(ms - mg)) / max(np.max(np.abs(mg)), 1e-300))
    var_err = float(np.max(np.abs(vs - vg) / np.abs(vg)))
    print(f"n={n} m={m}")
    print(f"max relative mean discrepancy: {mean_err:.3e}")
    print(f"max relative variance discrepancy: {var_err:.3e}")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load_config(args)
        for w in cfg.warnings():
            logging.getLogger("spectral_vgp").warning("technical condition: %s", w)
        cmd = args.command
        if cmd == "coverage":
            res = run_coverage(cfg, threads=args.threads)
            _print_summary(res["summary"], ("n", "m", "strategy", "n_ok", "covered", "covered_blowup", "mse", "rho"))
        elif cmd == "contraction":
            res = run_contraction(cfg, threads=args.threads)
            _print_summary(res["slopes"], ("strategy", "m_rule", "slope", "n_points"))
        elif cmd == "figures":
            res = run_figures(cfg, plot=args.plot)
            _print_summary(res["summary"], tuple(res["summary"][0]))
        elif cmd == "fit":
            return cmd_fit(cfg, args)
        elif cmd == "theory-terms":
            return cmd_theory(cfg, args)
        elif cmd == "verify-krr":
            return cmd_verify_krr(cfg, args)
        else:
            return cmd_verify_posterior(cfg, args)
        return 0
    except (ConfigError, DomainError, UnsupportedOperation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2


def _print_summary(rows, columns):
    rows = [{c: ("" if r.get(c) is None else r[c]) for c in columns} for r in rows]
    _csv_out(rows, columns)


if __name__ == "__main__":
    sys.exit(main())
