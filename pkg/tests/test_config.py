"""Config file parsing, validation, and manifest round trips."""
import pytest
import yaml

from evotrade.config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    write_manifest,
)


def test_empty_config_is_reference_scale():
    cfg = config_from_dict({})
    assert cfg.seed == 0
    assert cfg.evolution.generations == 100
    assert cfg.evolution.markets == 24
    assert cfg.evolution.timesteps == 500
    assert cfg.evolution.tournament_size == 17
    assert cfg.corpus.n_runs == 200
    assert cfg.corpus.k_neighbors == 10
    assert cfg.risk.max_shares == 150
    assert cfg.backtest.validation_start == "2010-01"
    assert cfg.backtest.episode_seconds == 1_000_000


def test_sections_override_fields():
    cfg = config_from_dict({
        "seed": 7,
        "evolution": {"generations": 5, "markets": 3},
        "corpus": {"n_runs": 10},
        "risk": {"max_shares": 99},
        "agents": {"vol_scale": 2.5},
    })
    assert cfg.seed == 7
    assert cfg.evolution.generations == 5
    assert cfg.evolution.markets == 3
    assert cfg.evolution.timesteps == 500  # untouched default
    assert cfg.corpus.n_runs == 10
    assert cfg.risk.max_shares == 99
    assert cfg.agents.vol_scale == 2.5


def test_seed_propagates_into_evolution():
    cfg = config_from_dict({"seed": 13})
    assert cfg.evolution.seed == 13
    # an explicit evolution seed wins over the top-level one
    cfg = config_from_dict({"seed": 13, "evolution": {"seed": 99}})
    assert cfg.evolution.seed == 99


def test_agents_section_reaches_evolution_markets():
    cfg = config_from_dict({"agents": {"mean_order_size": 50}})
    assert cfg.evolution.agents.mean_order_size == 50
    assert cfg.evolution.agents is cfg.agents


def test_unknown_fields_are_named():
    with pytest.raises(ConfigError, match="unknown config field bogus"):
        config_from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match=r"evolution\.typo"):
        config_from_dict({"evolution": {"typo": 1}})
    with pytest.raises(ConfigError, match=r"risk\.max_share\b"):
        config_from_dict({"risk": {"max_share": 10}})


def test_bad_values_are_config_errors():
    with pytest.raises(ConfigError):
        config_from_dict({"seed": -3})
    with pytest.raises(ConfigError):
        config_from_dict({"seed": "twelve"})
    with pytest.raises(ConfigError):
        config_from_dict({"evolution": {"tournament_size": 1}})
    with pytest.raises(ConfigError):
        config_from_dict({"corpus": {"n_runs": 0}})
    with pytest.raises(ConfigError):
        config_from_dict({"evolution": "not a mapping"})
    with pytest.raises(ConfigError):
        config_from_dict([1, 2, 3])


def test_static_probs_list_becomes_tuple():
    cfg = config_from_dict({"evolution": {"static_probs": [0.5, 0.5, 0, 0, 0, 0]}})
    assert cfg.evolution.static_probs == (0.5, 0.5, 0, 0, 0, 0)


def test_load_config_from_file(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("seed: 4\nevolution:\n  generations: 2\n")
    cfg = load_config(p)
    assert cfg.seed == 4 and cfg.evolution.generations == 2
    assert load_config(None).seed == 0


def test_config_round_trips_through_dict():
    cfg = config_from_dict({"seed": 5, "evolution": {"markets": 2}})
    again = config_from_dict(config_to_dict(cfg))
    assert again.seed == cfg.seed
    assert again.evolution == cfg.evolution
    assert again.backtest == cfg.backtest


def test_manifest_is_loadable_and_deterministic(tmp_path):
    cfg = config_from_dict({"seed": 11, "corpus": {"n_runs": 3}})
    p1 = tmp_path / "m1.yaml"
    p2 = tmp_path / "m2.yaml"
    write_manifest(cfg, p1, "evolve", "cython", {"note": 1})
    write_manifest(cfg, p2, "evolve", "cython", {"note": 1})
    # byte-identical across calls: no timestamps or environment leakage
    assert p1.read_bytes() == p2.read_bytes()

    doc = yaml.safe_load(p1.read_text())
    assert doc["meta"]["command"] == "evolve"
    assert doc["meta"]["kernels"] == "cython"

    # a manifest is itself a valid --config input
    cfg2 = load_config(p1)
    assert cfg2.seed == 11
    assert cfg2.corpus.n_runs == 3
    assert cfg2.evolution == cfg.evolution


def test_numeric_strings_coerce_like_yaml_would():
    # YAML 1.1 reads "1.0e6" (no exponent sign) as a string; the loader
    # repairs that instead of letting it crash mid-run.
    cfg = config_from_dict({"risk": {"loss_lower_limit": "-1.0e6"}})
    assert cfg.risk.loss_lower_limit == -1.0e6
    cfg = config_from_dict({"backtest": {"episode_seconds": "3000"}})
    assert cfg.backtest.episode_seconds == 3000
    cfg = config_from_dict({"evolution": {"timesteps": 60.0}})
    assert cfg.evolution.timesteps == 60


def test_type_mismatches_are_named():
    with pytest.raises(ConfigError, match=r"risk\.loss_lower_limit"):
        config_from_dict({"risk": {"loss_lower_limit": "a lot"}})
    with pytest.raises(ConfigError, match=r"evolution\.timesteps"):
        config_from_dict({"evolution": {"timesteps": 60.5}})
    with pytest.raises(ConfigError, match=r"evolution\.generations"):
        config_from_dict({"evolution": {"generations": True}})
    with pytest.raises(ConfigError, match=r"risk\.loss_method"):
        config_from_dict({"risk": {"loss_method": 3}})
