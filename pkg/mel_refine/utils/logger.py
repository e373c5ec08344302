import logging
import sys
from typing import Optional
from mel_refine.config.settings import settings

ROOT_LOGGER_NAME = "mel_refine"


class Logger:
    """Logger configuration and management."""

    _root: Optional[logging.Logger] = None

    @classmethod
    def get_logger(cls, name: str = ROOT_LOGGER_NAME) -> logging.Logger:
        """Get a logger under the configured package root."""
        if cls._root is None:
            cls._root = cls._setup_logger(ROOT_LOGGER_NAME)
        if name == ROOT_LOGGER_NAME or name.startswith(ROOT_LOGGER_NAME + "."):
            return logging.getLogger(name)
        return cls._root.getChild(name)

    @staticmethod
    def _setup_logger(name: str) -> logging.Logger:
        """Setup and configure the package root logger."""
        logger = logging.getLogger(name)

        # Remove existing handlers to avoid duplicates
        if logger.handlers:
            logger.handlers.clear()

        log_level = getattr(logging, settings.server.log_level.upper(), logging.INFO)
        logger.setLevel(log_level)

        # stdout carries CLI results and the stdio MCP transport
        handler = logging.StreamHandler(sys.stderr)
        handler.setLevel(log_level)

        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
        handler.setFormatter(formatter)

        logger.addHandler(handler)
        logger.propagate = False

        return logger
