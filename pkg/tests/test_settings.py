import pytest
from pydantic import ValidationError

from sobolev_jets.errors import ConfigError
from sobolev_jets.settings import RunConfig, load_settings


class TestSettings:
    def test_defaults(self, settings):
        assert settings.whitney.depth_cap == "auto"
        assert settings.whitney.inflate == 4.0
        assert settings.lacunae.tau == 4.0
        assert settings.gamma == pytest.approx(1.8e6)
        assert settings.graph.bruteforce_max_points == 8

    def test_explicit_gamma(self, settings):
        assert settings.with_overrides({"graph.gamma": 50.0}).gamma == 50.0

    def test_overrides_skip_none(self, settings):
        assert settings.with_overrides({"lacunae.tau": None}) == settings

    @pytest.mark.parametrize(
        "overrides",
        [
            {"whitney.depth_cap": 0},
            {"whitney.depth_cap": "deep"},
            {"whitney.inflate": 2.0},
            {"quadrature.order": 13},
        ],
    )
    def test_invalid_overrides(self, settings, overrides):
        with pytest.raises(ConfigError):
            settings.with_overrides(overrides)

    def test_environment(self, settings, monkeypatch, tmp_path):
        monkeypatch.setenv("SOBOLEV_JETS_OUTPUT_DIR", str(tmp_path))
        monkeypatch.setenv("SOBOLEV_JETS_LOG_LEVEL", "DEBUG")
        loaded = load_settings()
        assert loaded.output_dir == str(tmp_path)
        assert loaded.logging.level == "DEBUG"

    def test_config_file(self, settings, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("whitney:\n  depth_cap: 6\nlacunae:\n  tau: 2.0\n")
        loaded = load_settings(path)
        assert loaded.whitney.depth_cap == 6
        assert loaded.lacunae.tau == 2.0
        assert loaded.quadrature.order == settings.quadrature.order

    def test_missing_config_file(self, settings, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(tmp_path / "absent.yaml")

    def test_config_root_must_be_a_mapping(self, settings, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            load_settings(path)


class TestRunConfig:
    def test_field_commands_need_input(self):
        with pytest.raises(ValidationError):
            RunConfig(command="seminorm")

    @pytest.mark.parametrize("command", ["gen", "sweep", "metric"])
    def test_standalone_commands(self, command):
        assert RunConfig(command=command).input_path is None

    def test_apply(self, settings, tmp_path):
        run = RunConfig(command="gen", tau=2.0, depth_cap=7, quad_order=6, output_dir=tmp_path)
        applied = run.apply(settings)
        assert applied.lacunae.tau == 2.0
        assert applied.whitney.depth_cap == 7
        assert applied.quadrature.order == 6
        assert applied.output_dir == str(tmp_path)

    def test_rejects_small_gamma(self):
        with pytest.raises(ValidationError):
            RunConfig(command="gen", gamma=0.5)
