# utils/config.py
import copy
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

load_dotenv()

ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = ROOT / "config"
DEFAULTS_YAML = CONFIG_DIR / "defaults.yml"
TESTS_YAML = CONFIG_DIR / "tests.yml"


class ConfigError(ValueError):
    """Invalid configuration value; `key` is the dotted path, e.g. 'mppi.samples'."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key} {message}")


# -----------------------------------------
# Environment
# -----------------------------------------

def env_seed() -> Optional[int]:
    raw = os.getenv("MPPIVS_SEED", "").strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError("MPPIVS_SEED", f"must be an integer, got {raw!r}")


def env_db_path() -> str:
    return os.getenv("MPPIVS_DB_PATH", "./data/mppivs.duckdb")


def env_out_dir() -> str:
    return os.getenv("MPPIVS_OUT_DIR", "./out")


# -----------------------------------------
# YAML
# -----------------------------------------

def load_yaml(path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"file not found: {path}")
    with open(path, "r") as f:
        try:
            data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError("config", f"could not parse {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a mapping at the top level")
    return data


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """New dict: `override` on top of `base`, merging nested mappings key by key."""
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_defaults() -> Dict[str, Any]:
    return load_yaml(DEFAULTS_YAML)


def dotted(d: Dict[str, Any], key: str, default: Any = None) -> Any:
    cur: Any = d
    for part in key.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return default
        cur = cur[part]
    return cur
