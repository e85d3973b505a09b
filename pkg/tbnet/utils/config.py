import json
import logging
import os
from pathlib import Path
from typing import Tuple, Type, TypeVar

from pydantic import BaseModel, ValidationError

from ..errors import ConfigError

logger = logging.getLogger(__name__)

# ~/.tbnet/config.json unless TBNET_HOME points elsewhere
HOME_ENV = "TBNET_HOME"
THREADS_ENV = "TBNET_THREADS"

DEFAULT_CONFIG = {
    "training": {
        "arch": "squeezenet",
        "epochs": 20,
        "batch_size": 32,
        "optimizer": "adam",
        "lr": 1e-3,
        "momentum": 0.9,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "patience": None,
    },
    "augmentation": {
        "rotation_deg": 40.0,
        "shift_frac": 0.2,
        "shear_frac": 0.2,
        "zoom_frac": 0.2,
        "horizontal_flip": True,
    },
    "runtime": {
        "threads": 1,
        "image_cache": True,
    },
}

M = TypeVar("M", bound=BaseModel)


def config_dir() -> Path:
    return Path(os.environ.get(HOME_ENV) or Path.home() / ".tbnet")


def config_file() -> Path:
    return config_dir() / "config.json"


def read_config() -> Tuple[dict, bool]:
    """
    Reads the config file without writing anything. Returns the config with defaults
    filled in and whether the file on disk is missing keys (or missing entirely).
    """
    path = config_file()
    if not path.exists():
        return _defaults(), True

    try:
        with open(path, "r", encoding="utf-8") as f:
            user_config = json.load(f)
    except json.JSONDecodeError:
        logger.warning("Config file %s is not valid JSON; using defaults", path)
        return _defaults(), False

    if not isinstance(user_config, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")

    merged = _merge_configs(_defaults(), user_config)
    return merged, merged != user_config


def load_config() -> dict:
    """Loads the config file, creating it with defaults on first use and adding any keys it is missing."""
    config, stale = read_config()
    if stale:
        persist_config(config)
    return config


def persist_config(config_data: dict) -> None:
    try:
        save_config(config_data)
    except OSError as e:
        # read-only home: keep going on what was loaded
        logger.debug("Could not write config: %s", e)


def save_config(config_data: dict) -> None:
    config_dir().mkdir(parents=True, exist_ok=True)
    with open(config_file(), "w", encoding="utf-8") as f:
        json.dump(config_data, f, indent=4)


def _defaults() -> dict:
    return json.loads(json.dumps(DEFAULT_CONFIG))


def _merge_configs(default: dict, user: dict) -> dict:
    merged = dict(default)
    for key, value in user.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge_configs(merged[key], value)
        else:
            merged[key] = value
    return merged


def validate_config(model: Type[M], **values) -> M:
    """Builds a pydantic config, turning validation failures into a ConfigError naming the fields."""
    try:
        return model(**values)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"Invalid {model.__name__}: {problems}") from e
