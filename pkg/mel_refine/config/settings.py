import os
from dataclasses import dataclass
from typing import Optional
from dotenv import load_dotenv
from mel_refine.utils.exceptions import ConfigurationError

load_dotenv()


def _env_int(name: str, default: str) -> int:
    raw = os.getenv(name, default)
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be an integer, got {raw!r}")


def _env_float(name: str, default: str) -> float:
    raw = os.getenv(name, default)
    try:
        return float(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be a number, got {raw!r}")


@dataclass
class ServerConfig:
    """MCP server and logging settings."""

    transport: str = "stdio"  # or "http", "sse"
    host: str = "127.0.0.1"
    port: int = 8000
    log_level: str = "INFO"  # Options: DEBUG, INFO, WARNING, ERROR, CRITICAL


@dataclass
class RefineConfig:
    """Defaults for the refinement hook."""

    eps: float = 1e-8
    structure_channels: str = "all"  # or "half"


@dataclass
class AudioConfig:
    """Mel front-end defaults."""

    sample_rate: int = 16000
    n_fft: int = 1024
    hop: int = 160
    n_mels: int = 64
    log_floor: float = 1e-5


@dataclass
class SearchConfig:
    """Parameter search settings."""

    workers: int = 4
    cache_enabled: bool = True
    cache_max_entries: int = 4096
    command_timeout: float = 600.0  # seconds


class Settings:
    """Application settings manager."""

    def __init__(self):
        self._server_config: Optional[ServerConfig] = None
        self._refine_config: Optional[RefineConfig] = None
        self._audio_config: Optional[AudioConfig] = None
        self._search_config: Optional[SearchConfig] = None

    @property
    def server(self) -> ServerConfig:
        """Get server configuration."""
        if self._server_config is None:
            self._server_config = self._load_server_config()
        return self._server_config

    @property
    def refine(self) -> RefineConfig:
        """Get refinement configuration."""
        if self._refine_config is None:
            self._refine_config = self._load_refine_config()
        return self._refine_config

    @property
    def audio(self) -> AudioConfig:
        """Get mel front-end configuration."""
        if self._audio_config is None:
            self._audio_config = self._load_audio_config()
        return self._audio_config

    @property
    def search(self) -> SearchConfig:
        """Get search configuration."""
        if self._search_config is None:
            self._search_config = self._load_search_config()
        return self._search_config

    def reset(self) -> None:
        """Forget loaded groups so the environment is read again."""
        self.__init__()

    def _load_server_config(self) -> ServerConfig:
        """Load server configuration from environment variables."""
        return ServerConfig(
            transport=os.getenv("MEL_REFINE_TRANSPORT", "stdio"),
            host=os.getenv("MEL_REFINE_HOST", "127.0.0.1"),
            port=_env_int("MEL_REFINE_PORT", "8000"),
            log_level=os.getenv("MEL_REFINE_LOG_LEVEL", "INFO"),
        )

    def _load_refine_config(self) -> RefineConfig:
        """Load refinement defaults from environment variables."""
        channels = os.getenv("MEL_REFINE_STRUCTURE_CHANNELS", "all").lower()
        if channels not in ("all", "half"):
            raise ConfigurationError(
                f"MEL_REFINE_STRUCTURE_CHANNELS must be 'all' or 'half', got {channels!r}"
            )
        return RefineConfig(
            eps=_env_float("MEL_REFINE_EPS", "1e-8"),
            structure_channels=channels,
        )

    def _load_audio_config(self) -> AudioConfig:
        """Load mel front-end defaults from environment variables."""
        return AudioConfig(
            sample_rate=_env_int("MEL_REFINE_SAMPLE_RATE", "16000"),
            n_fft=_env_int("MEL_REFINE_N_FFT", "1024"),
            hop=_env_int("MEL_REFINE_HOP", "160"),
            n_mels=_env_int("MEL_REFINE_N_MELS", "64"),
            log_floor=_env_float("MEL_REFINE_LOG_FLOOR", "1e-5"),
        )

    def _load_search_config(self) -> SearchConfig:
        """Load search configuration from environment variables."""
        workers = _env_int("MEL_REFINE_SEARCH_WORKERS", "4")
        if workers < 1:
            raise ConfigurationError(f"MEL_REFINE_SEARCH_WORKERS must be >= 1, got {workers}")
        return SearchConfig(
            workers=workers,
            cache_enabled=os.getenv("MEL_REFINE_CACHE_ENABLED", "true").lower() == "true",
            cache_max_entries=_env_int("MEL_REFINE_CACHE_MAX_ENTRIES", "4096"),
            command_timeout=_env_float("MEL_REFINE_COMMAND_TIMEOUT", "600"),
        )


settings = Settings()
