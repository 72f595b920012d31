"""
Tests for run configuration loading and layering.
"""

import pytest

from dreammpc.config.settings import PRESETS, RunConfig, load_run_config, parse_config_text, parse_override
from dreammpc.errors import ConfigError
from dreammpc.model.models import EnvName, PlannerKind, ProposalKind


class TestDefaults:
    """Built-in defaults"""

    def test_planner_defaults(self):
        config = load_run_config(environ={})
        assert config.planner.horizon == 3
        assert config.planner.iterations == 1
        assert config.planner.num_candidates == 5
        assert config.planner.step_size == pytest.approx(0.1)
        assert config.planner.reuse_coef == pytest.approx(0.1)
        assert config.planner.uncertainty_coef == pytest.approx(0.01)
        assert config.planner.mppi.population == 512
        assert config.planner.mppi.iterations == 6

    def test_env_defaults(self):
        config = load_run_config(environ={})
        assert config.env.name is EnvName.PENDULUM_SWINGUP
        assert config.env.action_repeat == 2
        assert config.env.episode_length is None


class TestLayering:
    """Source priority"""

    def test_file_values(self, tiny_config_file):
        config = load_run_config(tiny_config_file, environ={})
        assert config.run.name == "tiny"
        assert config.planner.num_candidates == 4
        assert config.planner.mppi.elites == 4
        assert config.train.total_steps == 14

    def test_environment_beats_file(self, tiny_config_file):
        config = load_run_config(tiny_config_file, environ={"DMPC_PLANNER_HORIZON": "5"})
        assert config.planner.horizon == 5

    def test_set_beats_environment(self, tiny_config_file):
        config = load_run_config(
            tiny_config_file, ["planner.horizon=7"], environ={"DMPC_PLANNER_HORIZON": "5"}
        )
        assert config.planner.horizon == 7

    def test_environment_read_from_process(self, monkeypatch):
        """Without an explicit mapping os.environ is used."""
        monkeypatch.setenv("DMPC_MPPI_TEMPERATURE", "0.25")
        assert load_run_config().planner.mppi.temperature == pytest.approx(0.25)

    def test_preset_is_lowest_file_layer(self, tmp_path):
        """A preset sets values that a config file can still override."""
        config = load_run_config(preset="no_policy_prior", environ={})
        assert config.planner.proposal is ProposalKind.GAUSSIAN
        assert config.planner.num_candidates == 512
        assert config.planner.iterations == 5
        path = tmp_path / "run.ini"
        path.write_text("[planner]\niterations = 2\n", encoding="utf-8")
        assert load_run_config(str(path), preset="no_policy_prior", environ={}).planner.iterations == 2

    @pytest.mark.parametrize("preset", sorted(PRESETS))
    def test_presets_load(self, preset):
        assert isinstance(load_run_config(preset=preset, environ={}), RunConfig)

    def test_none_string(self):
        """'none' maps to None for optional values."""
        config = load_run_config(overrides=["env.episode_length=none"], environ={})
        assert config.env.episode_length is None

    def test_enum_values(self):
        config = load_run_config(overrides=["train.planner=mppi", "env.name=cartpole_swingup"], environ={})
        assert config.train.planner is PlannerKind.MPPI
        assert config.env.name is EnvName.CARTPOLE_SWINGUP


class TestErrors:
    """Rejected configurations"""

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[optimizer]\nlr = 1\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="unknown section"):
            load_run_config(str(path), environ={})

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            load_run_config(overrides=["planner.depth=3"], environ={})

    def test_invalid_value(self):
        with pytest.raises(ConfigError, match="invalid configuration"):
            load_run_config(overrides=["planner.reuse_coef=1.5"], environ={})

    def test_cross_field_validation(self):
        """Elites cannot exceed the population."""
        with pytest.raises(ConfigError):
            load_run_config(overrides=["mppi.population=8", "mppi.elites=16"], environ={})

    def test_indivisible_latent(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides=["model.latent_dim=10", "model.simnorm_dim=4"], environ={})

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            load_run_config(preset="everything", environ={})

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_run_config("/nonexistent/run.ini", environ={})

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("horizon = 3\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_run_config(str(path), environ={})

    @pytest.mark.parametrize("override", ["planner.horizon", "horizon=3"])
    def test_malformed_override(self, override):
        with pytest.raises(ConfigError):
            parse_override(override)

    def test_run_name_must_be_plain(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides=["run.name=../escape"], environ={})


class TestSnapshot:
    """Rendered snapshots"""

    def test_render_round_trip(self, tiny_config_file):
        """The rendered snapshot reloads to an equal configuration."""
        config = load_run_config(tiny_config_file, ["planner.step_size=0.123456789"], environ={})
        assert parse_config_text(config.render()) == config

    def test_render_is_stable(self):
        config = load_run_config(environ={})
        assert parse_config_text(config.render()).render() == config.render()

    def test_render_layout(self):
        text = load_run_config(environ={}).render()
        assert text.startswith("[run]\n")
        assert "episode_length = none\n" in text
        assert "stochastic_candidates = true\n" in text
        assert text.endswith("\n")
