import pytest

from core.config import RuntimeSettings, load_config, parse_config_text
from core.constants import NUMERICS, REFERENCE, ConfigError

from tests.conftest import config_text


def test_defaults_fill_optional_sections():
    config = parse_config_text(config_text(n=33))
    assert config.grid.n == 33
    assert config.initial_data.B == REFERENCE.DEVIATION_B
    assert config.initial_data.r1 == NUMERICS.RING_INNER
    assert config.diagnostics.cadence == NUMERICS.CADENCE_STEPS
    assert config.rattle_config().dt == pytest.approx(NUMERICS.DT_OVER_H / 32)
    assert config.fit is None and config.search is None


def test_explicit_time_step():
    text = config_text(n=33).replace("[time]\n", "[time]\ndt = 0.001\n")
    assert parse_config_text(text).rattle_config().dt == 0.001
    text = config_text(n=33).replace("[time]\n", "[time]\ndt_over_h = 0.125\n")
    assert parse_config_text(text).rattle_config().dt == pytest.approx(0.125 / 32)
    assert parse_config_text(config_text(n=33)).time.dt is None


@pytest.mark.parametrize("text", [
    config_text(n=33).replace("[time]\n", "[time]\ndt = 0.001\ndt_over_h = 0.25\n"),
    config_text(n=33).replace("[grid]\n", "[grid]\nnx = 4\n"),
    config_text(n=33).replace("[grid]\nn = 33\n", ""),
    config_text(n=33, A=-0.5),
    config_text(n=33, B=1.5),
    config_text(n=5),
    "[grid\nn = 33\n",
    config_text(n=33, extra="[search]\nA_lo = 0.9\nA_hi = 0.8\n"),
    config_text(n=33, extra="[fit]\nt_lo = 0.9\nt_hi = 0.8\n"),
])
def test_invalid_configs_raise_config_error(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_inner_ring_must_clear_stencil():
    with pytest.raises(ConfigError, match="2h"):
        parse_config_text(config_text(n=17))
    assert parse_config_text(config_text(n=17, r1=0.2, r2=0.8)).initial_data.r1 == 0.2


def test_slice_times_parsed_and_sorted():
    config = parse_config_text(config_text(extra="[diagnostics]\nslice_times = 0.5, 0.1 0.25\n"))
    assert config.diagnostics.slice_times == (0.1, 0.25, 0.5)


def test_hash_is_stable_and_sensitive():
    a = parse_config_text(config_text(A=0.5))
    b = parse_config_text(config_text(A=0.5))
    assert a.hash_hex() == b.hash_hex()
    assert len(a.config_hash()) == 32
    assert a.with_amplitude(0.6).hash_hex() != a.hash_hex()
    assert a.with_t_end(1.0).hash_hex() != a.hash_hex()
    assert a.with_amplitude(0.6).initial_data.A == 0.6


def test_ini_round_trip_preserves_hash():
    config = parse_config_text(config_text(extra=(
        "[diagnostics]\nslice_times = 0.1, 0.2\n"
        "[search]\nA_lo = 0.6\nA_hi = 1.6\ntol_A = 1e-6\n"
    )))
    again = parse_config_text(config.to_ini())
    assert again == config
    assert again.hash_hex() == config.hash_hex()


def test_load_config_from_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(config_text(n=65, A=0.87150779))
    assert load_config(path).initial_data.A == 0.87150779
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_runtime_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("WAVEMAP_LOG_LEVEL", "DEBUG")
    monkeypatch.setenv("WAVEMAP_LOG_FORMAT", "json")
    monkeypatch.setenv("WAVEMAP_RUNS_ROOT", str(tmp_path))
    settings = RuntimeSettings()
    assert settings.log_level == "DEBUG"
    assert settings.log_format == "json"
    assert settings.runs_root == tmp_path


def test_fit_residual_ceiling():
    config = parse_config_text(config_text(extra="[fit]\nt_lo = 0.865\nt_hi = 0.8816\n"))
    assert config.fit.residual_ceiling == NUMERICS.FIT_RESIDUAL_CEILING
    config = parse_config_text(config_text(extra="[fit]\nt_lo = 0.865\nt_hi = 0.8816\nresidual_ceiling = 1e-9\n"))
    assert config.fit.residual_ceiling == 1e-9
    with pytest.raises(ConfigError):
        parse_config_text(config_text(extra="[fit]\nt_lo = 0.865\nt_hi = 0.8816\nresidual_ceiling = 0\n"))
