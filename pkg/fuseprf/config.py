"""
Configuration loading: TOML files, environment defaults and flag overrides.

A config file may hold a ``[pipeline]`` table (with ``fusion``, ``prf`` and
``bm25`` sub-tables, same keys as PipelineConfig) and a ``[data]`` table of
default input paths. Precedence is defaults < file < command-line flags.
"""

import copy
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Dict, Mapping, Optional

from pydantic import ValidationError

from .errors import ConfigError
from .schemas import PipelineConfig

logger = logging.getLogger("fuseprf_logger")

DATA_DIR_ENV = "FUSEPRF_DATA_DIR"


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """Read a TOML config file; a missing path gives an empty config."""
    if not path:
        return {}
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    unknown = set(data) - {"pipeline", "data"}
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    logger.debug(f"Loaded config file {path}")
    return data


def deep_merge(base: Mapping[str, Any], updates: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively overlay ``updates`` on ``base``; None values in updates are ignored."""
    merged = copy.deepcopy(dict(base))
    for key, value in updates.items():
        if value is None:
            continue
        if isinstance(value, Mapping):
            current = merged.get(key)
            merged[key] = deep_merge(current if isinstance(current, Mapping) else {}, value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def build_pipeline_config(
    file_config: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None
) -> PipelineConfig:
    """Validate the file's ``[pipeline]`` table with flag overrides applied on top."""
    merged = deep_merge(file_config.get("pipeline", {}), overrides or {})
    try:
        return PipelineConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"invalid pipeline configuration: {e}") from e


def data_default(file_config: Mapping[str, Any], key: str) -> Optional[str]:
    value = file_config.get("data", {}).get(key)
    return str(value) if value is not None else None


def resolve_data_path(path: Optional[str]) -> Optional[str]:
    """
    Resolve an input path, falling back to the default data directory.

    A path that exists as given (or is absolute) is returned unchanged; a
    relative path that does not exist is looked up under ``$FUSEPRF_DATA_DIR``.
    """
    if path is None or os.path.isabs(path) or os.path.exists(path):
        return path
    data_dir = os.getenv(DATA_DIR_ENV)
    if data_dir:
        candidate = os.path.join(data_dir, path)
        if os.path.exists(candidate):
            return candidate
    return path
