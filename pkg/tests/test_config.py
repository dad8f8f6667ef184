import json
import math
from pathlib import Path

import pytest

from spectral_vgp.config import DEFAULTS, ExperimentConfig
from spectral_vgp.errors import ConfigError
from spectral_vgp.spectral_kernel import ExponentialExperimentSpectrum, PolynomialSpectrum

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_defaults_materialised():
    cfg = ExperimentConfig.from_dict({})
    assert cfg.to_dict() == DEFAULTS
    assert cfg.to_dict() is not DEFAULTS


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = ExperimentConfig.load(path)
    assert set(cfg.to_dict()) == set(DEFAULTS)
    cfg.truth()
    for n in cfg["n_grid"]:
        assert all(m >= 1 for m in cfg.m_list(n))


@pytest.mark.parametrize(
    "given, key",
    [
        ({"sigmaa": 0.1}, "sigmaa"),
        ({"spectrum": {"alpah": 1}}, "spectrum.alpah"),
        ({"spectrum": {"kind": "matern"}}, "spectrum.kind"),
        ({"spectrum": {"alpha": -1}}, "spectrum.alpha"),
        ({"gamma": 1.5}, "gamma"),
        ({"strategies": ["random"]}, "strategies"),
        ({"n_grid": [1]}, "n_grid"),
        ({"truth": {"kind": "power"}}, "truth.q"),
        ({"m_rule": {"kind": "fixed"}}, "m_rule.value"),
        ({"mc_samples": 10}, "mc_samples"),
    ],
)
def test_errors_name_key(given, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        ExperimentConfig.from_dict(given)


def test_inadmissible_truth_rejected():
    with pytest.raises(ConfigError, match="truth.q"):
        ExperimentConfig.from_dict({"spectrum": {"alpha": 1.5}, "truth": {"kind": "oversmooth", "q": 2.0}})


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)


def test_overrides():
    cfg = ExperimentConfig.from_dict({"replicates": 5})
    out = cfg.with_overrides(replicates=None, base_seed=9, **{"spectrum.alpha": 1.0})
    assert out["replicates"] == 5 and out["base_seed"] == 9
    assert out["spectrum"]["alpha"] == 1.0
    assert cfg["spectrum"]["alpha"] == 0.5


def test_round_trip(tmp_path):
    cfg = ExperimentConfig.load(CONFIGS / "matched.json")
    p = tmp_path / "echo.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(p).to_dict() == cfg.to_dict()


class TestMRules:
    def test_power(self):
        cfg = ExperimentConfig.from_dict({"m_rule": {"kind": "power", "exponent": 0.5}})
        assert cfg.m_for(2500) == 50 and cfg.m_for(500) == 23

    def test_power_small_exponent(self):
        cfg = ExperimentConfig.from_dict({"m_rule": {"kind": "power", "exponent": 0.3}})
        assert cfg.m_for(3200) == math.ceil(3200**0.3) == 12

    def test_effective_dim(self):
        cfg = ExperimentConfig.from_dict({"m_rule": {"kind": "effective_dim"}})
        assert cfg.m_for(2500) == 50

    def test_fixed_and_values(self):
        cfg = ExperimentConfig.from_dict({"m_rule": {"kind": "fixed", "value": 7}})
        assert cfg.m_list(100) == [7]
        cfg = ExperimentConfig.from_dict({"m_values": [30, 60]})
        assert cfg.m_list(2500) == [30, 60]


def test_spectrum_construction():
    cfg = ExperimentConfig.from_dict({"spectrum": {"kind": "exponential_experiment", "alpha": 0.5}})
    s = cfg.spectrum(2500)
    assert isinstance(s, ExponentialExperimentSpectrum)
    assert s.tau == pytest.approx(2500**-0.5 * math.log(2500))
    assert isinstance(ExperimentConfig.from_dict({}).spectrum(10), PolynomialSpectrum)


def test_technical_condition_warning():
    cfg = ExperimentConfig.from_dict({"n_grid": [3200], "m_rule": {"kind": "fixed", "value": 60}})
    assert len(cfg.warnings()) == 1
    cfg = ExperimentConfig.from_dict({"n_grid": [100000], "m_rule": {"kind": "fixed", "value": 10}})
    assert cfg.warnings() == []
