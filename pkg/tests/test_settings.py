import pytest

from mel_refine.utils.exceptions import ConfigurationError


def test_defaults(fresh_settings, monkeypatch):
    for name in ("MEL_REFINE_SEARCH_WORKERS", "MEL_REFINE_STRUCTURE_CHANNELS", "MEL_REFINE_N_MELS"):
        monkeypatch.delenv(name, raising=False)
    fresh_settings.reset()
    assert fresh_settings.search.workers == 4
    assert fresh_settings.refine.structure_channels == "all"
    assert fresh_settings.audio.n_mels == 64


def test_environment_overrides(fresh_settings, monkeypatch):
    monkeypatch.setenv("MEL_REFINE_SEARCH_WORKERS", "2")
    monkeypatch.setenv("MEL_REFINE_CACHE_ENABLED", "false")
    monkeypatch.setenv("MEL_REFINE_STRUCTURE_CHANNELS", "HALF")
    monkeypatch.setenv("MEL_REFINE_HOP", "256")
    fresh_settings.reset()
    assert fresh_settings.search.workers == 2
    assert fresh_settings.search.cache_enabled is False
    assert fresh_settings.refine.structure_channels == "half"
    assert fresh_settings.audio.hop == 256


@pytest.mark.parametrize(
    "name, value, group",
    [
        ("MEL_REFINE_SEARCH_WORKERS", "0", "search"),
        ("MEL_REFINE_SEARCH_WORKERS", "many", "search"),
        ("MEL_REFINE_STRUCTURE_CHANNELS", "odd", "refine"),
        ("MEL_REFINE_EPS", "tiny", "refine"),
        ("MEL_REFINE_PORT", "http", "server"),
    ],
)
def test_bad_values(fresh_settings, monkeypatch, name, value, group):
    monkeypatch.setenv(name, value)
    fresh_settings.reset()
    with pytest.raises(ConfigurationError, match=name):
        getattr(fresh_settings, group)
