"""Experiment configuration: JSON schema, defaults and object construction.

A config is a JSON object. Missing keys take the defaults in ``DEFAULTS``;
unknown keys raise :class:`ConfigError` naming the key. The fully
materialised dict (``ExperimentConfig.to_dict``) is what run metadata echoes.
"""

import copy
from dataclasses import dataclass
import json
import math
from pathlib import Path

from .errors import ConfigError
from .inducing import Strategy
from .spectral_kernel import (
    ExponentialExperimentSpectrum,
    ExponentialSpectrum,
    PolynomialSpectrum,
    SpectralKernel,
    rescaling_tau,
)
from .synthetic_data import f0_lowerbound, f0_oversmooth, f0_paper, f0_power, zero_truth
from .theory import effective_dim

DEFAULTS = {
    "name": "custom",
    "spectrum": {"kind": "polynomial", "alpha": 0.5, "tau": None, "d": 1, "scale": 1.0},
    "truncation": {"tail_tol": 1e-8, "max_terms": 16384},
    "truth": {"kind": "paper", "beta": 0.5, "p": None, "r": None, "q": None, "n_terms": 10000},
    "sigma": 0.1,
    "strategies": ["population_spectral"],
    "n_grid": [500],
    "m_rule": {"kind": "power", "value": None, "exponent": 0.5},
    "m_values": [],
    "gamma": 0.05,
    "blowup": 2.0,
    "replicates": 200,
    "base_seed": 0,
    "mc_samples": 100000,
    "grid_points": 512,
    "output_dir": "results",
}

SPECTRUM_KINDS = ("polynomial", "exponential_theory", "exponential_experiment")
TRUTH_KINDS = ("paper", "lowerbound", "oversmooth", "power", "zero")
M_RULES = ("fixed", "power", "effective_dim")


def _merge(defaults, given, prefix=""):
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key '{path}'")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key '{path}' must be an object")
            out[key] = _merge(defaults[key], value, path + ".")
        else:
            out[key] = value
    return out


def _positive(cfg, path, value, integer=False):
    if value is None or isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config key '{path}' must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"config key '{path}' must be an integer, got {value!r}")
    if not value > 0:
        raise ConfigError(f"config key '{path}' must be positive, got {value!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict

    @classmethod
    def from_dict(cls, given):
        if not isinstance(given, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(DEFAULTS, given)
        _validate(cfg)
        out = cls(cfg)
        out.truth()  # surfaces band violations of the truth parameters
        return out

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config '{path}': {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config '{path}' is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        return copy.deepcopy(self.raw)

    def with_overrides(self, **flags):
        """Copy with top-level or dotted keys replaced (``None`` values are skipped)."""
        cfg = self.to_dict()
        for key, value in flags.items():
            if value is None:
                continue
            node = cfg
            parts = key.split(".")
            for part in parts[:-1]:
                node = node[part]
            node[parts[-1]] = value
        return ExperimentConfig.from_dict(cfg)

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def strategies(self):
        return [Strategy(s) for s in self.raw["strategies"]]

    def spectrum(self, n):
        s = self.raw["spectrum"]
        kind, d = s["kind"], s["d"]
        if kind == "polynomial":
            return PolynomialSpectrum(s["alpha"], d, s["scale"])
        tau = s["tau"] if s["tau"] is not None else rescaling_tau(n, s["alpha"], d)
        if kind == "exponential_theory":
            return ExponentialSpectrum(tau, d, s["scale"])
        return ExponentialExperimentSpectrum(tau)

    def kernel(self, n):
        t = self.raw["truncation"]
        return SpectralKernel.from_spectrum(self.spectrum(n), t["tail_tol"], t["max_terms"])

    def truth(self):
        t = self.raw["truth"]
        s = self.raw["spectrum"]
        kind, n_terms, beta = t["kind"], t["n_terms"], t["beta"]
        if kind == "paper":
            return f0_paper(beta, n_terms)
        if kind == "lowerbound":
            return f0_lowerbound(t["p"], t["r"], beta, s["d"], n_terms)
        if kind == "oversmooth":
            return f0_oversmooth(t["q"], s["alpha"], beta, s["d"], n_terms)
        if kind == "power":
            return f0_power(t["q"], n_terms)
        return zero_truth(n_terms)

    def m_for(self, n, spectrum=None):
        rule = self.raw["m_rule"]
        if rule["kind"] == "fixed":
            return int(rule["value"])
        if rule["kind"] == "power":
            return max(1, math.ceil(n ** rule["exponent"] - 1e-9))
        return max(1, effective_dim(spectrum if spectrum is not None else self.spectrum(n), n))

    def m_list(self, n, spectrum=None):
        """Explicit ``m_values`` if given, else the single value of the m rule."""
        if self.raw["m_values"]:
            return [int(m) for m in self.raw["m_values"]]
        return [self.m_for(n, spectrum)]

    def warnings(self):
        """Cells where ``m^2 log n / n >= 1``."""
        out = []
        for n in self.raw["n_grid"]:
            for m in self.m_list(n):
                if m * m * math.log(n) / n >= 1:
                    out.append(f"n={n}, m={m}: m^2 log n / n = {m * m * math.log(n) / n:.3g} >= 1")
        return out


def _validate(cfg):
    s = cfg["spectrum"]
    if s["kind"] not in SPECTRUM_KINDS:
        raise ConfigError(f"config key 'spectrum.kind' must be one of {SPECTRUM_KINDS}, got {s['kind']!r}")
    _positive(cfg, "spectrum.alpha", s["alpha"])
    _positive(cfg, "spectrum.d", s["d"], integer=True)
    _positive(cfg, "spectrum.scale", s["scale"])
    if s["tau"] is not None:
        _positive(cfg, "spectrum.tau", s["tau"])
    if s["kind"] == "exponential_experiment" and s["d"] != 1:
        raise ConfigError("config key 'spectrum.d' must be 1 for exponential_experiment")
    _positive(cfg, "truncation.tail_tol", cfg["truncation"]["tail_tol"])
    _positive(cfg, "truncation.max_terms", cfg["truncation"]["max_terms"], integer=True)

    t = cfg["truth"]
    if t["kind"] not in TRUTH_KINDS:
        raise ConfigError(f"config key 'truth.kind' must be one of {TRUTH_KINDS}, got {t['kind']!r}")
    _positive(cfg, "truth.n_terms", t["n_terms"], integer=True)
    _positive(cfg, "truth.beta", t["beta"])
    needed = {"lowerbound": ("p", "r"), "oversmooth": ("q",), "power": ("q",)}.get(t["kind"], ())
    for key in needed:
        if t[key] is None:
            raise ConfigError(f"config key 'truth.{key}' is required for truth.kind={t['kind']!r}")

    if not isinstance(cfg["sigma"], (int, float)) or cfg["sigma"] < 0:
        raise ConfigError(f"config key 'sigma' must be nonnegative, got {cfg['sigma']!r}")
    if not cfg["strategies"]:
        raise ConfigError("config key 'strategies' must be a non-empty list")
    for name in cfg["strategies"]:
        try:
            Strategy(name)
        except ValueError:
            raise ConfigError(
                f"config key 'strategies' has unknown strategy {name!r}; "
                f"expected one of {[x.value for x in Strategy]}"
            ) from None
    if not cfg["n_grid"]:
        raise ConfigError("config key 'n_grid' must be a non-empty list")
    for n in cfg["n_grid"]:
        _positive(cfg, "n_grid", n, integer=True)
        if n < 2:
            raise ConfigError(f"config key 'n_grid' entries must be at least 2, got {n}")

    rule = cfg["m_rule"]
    if rule["kind"] not in M_RULES:
        raise ConfigError(f"config key 'm_rule.kind' must be one of {M_RULES}, got {rule['kind']!r}")
    if rule["kind"] == "fixed":
        _positive(cfg, "m_rule.value", rule["value"], integer=True)
    if rule["kind"] == "power":
        _positive(cfg, "m_rule.exponent", rule["exponent"])
    for m in cfg["m_values"]:
        _positive(cfg, "m_values", m, integer=True)

    g = cfg["gamma"]
    if not isinstance(g, (int, float)) or not 0 < g < 1:
        raise ConfigError(f"config key 'gamma' must lie in (0, 1), got {g!r}")
    _positive(cfg, "blowup", cfg["blowup"])
    _positive(cfg, "replicates", cfg["replicates"], integer=True)
    if not isinstance(cfg["base_seed"], int) or cfg["base_seed"] < 0:
        raise ConfigError(f"config key 'base_seed' must be a nonnegative integer, got {cfg['base_seed']!r}")
    _positive(cfg, "mc_samples", cfg["mc_samples"], integer=True)
    if cfg["mc_samples"] < 1000:
        raise ConfigError(f"config key 'mc_samples' must be at least 1000, got {cfg['mc_samples']}")
    _positive(cfg, "grid_points", cfg["grid_points"], integer=True)
    if not isinstance(cfg["output_dir"], str):
        raise ConfigError("config key 'output_dir' must be a string")
