"""
Configuration for cokernel-lab.

Settings come from environment variables (optionally placed in a ``.env``
file) and from an optional JSON config file. Command-line flags override
both.
"""

import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from .errors import ConfigError

logger = logging.getLogger(__name__)

# Load environment variables
load_dotenv()

DEFAULT_CONFIG_PATH = 'config/config.json'


@dataclass
class Settings:
    """Process-wide settings read from the environment."""
    threads: int
    log_level: str = 'INFO'
    sur_cap_exponent: int = 8
    chunk_size: int = 2000


def _int_from_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")


def load_settings() -> Settings:
    """
    Build settings from ``COKLAB_*`` environment variables.

    Returns:
        Settings with the worker count, log level, submodule enumeration cap
        and Monte-Carlo chunk size
    """
    threads = _int_from_env('COKLAB_THREADS', os.cpu_count() or 1)
    if threads < 1:
        raise ConfigError(f"COKLAB_THREADS must be at least 1, got {threads}")

    chunk_size = _int_from_env('COKLAB_CHUNK_SIZE', 2000)
    if chunk_size < 1:
        raise ConfigError(f"COKLAB_CHUNK_SIZE must be at least 1, got {chunk_size}")

    sur_cap = _int_from_env('COKLAB_SUR_CAP', 8)
    if sur_cap < 0:
        raise ConfigError(f"COKLAB_SUR_CAP must be non-negative, got {sur_cap}")

    level = os.getenv('COKLAB_LOG_LEVEL', 'INFO').upper()
    if level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        raise ConfigError(f"COKLAB_LOG_LEVEL not recognised: {level}")

    return Settings(threads=threads, log_level=level, sur_cap_exponent=sur_cap, chunk_size=chunk_size)


def load_config(path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load a JSON config file.

    Args:
        path: Config file path; defaults to ``config/config.json``

    Returns:
        Parsed config dictionary, empty when the file does not exist
    """
    path = path or DEFAULT_CONFIG_PATH
    if not os.path.exists(path):
        logger.debug(f"No config file at {path}, using defaults")
        return {}
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Malformed config file {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return data


def merge_options(cli_options: Dict[str, Any], file_config: Dict[str, Any]) -> Dict[str, Any]:
    """Overlay CLI options (ignoring unset ones) on file config values."""
    merged = dict(file_config)
    for key, value in cli_options.items():
        if value is not None:
            merged[key] = value
    return merged
