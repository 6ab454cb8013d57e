from __future__ import annotations

import json
import logging
import os
import shutil
from pathlib import Path
from typing import Any, Mapping

from src.errors import ConfigurationError
from src.version import APP_VERSION

from .models import ExperimentConfig

logger = logging.getLogger(__name__)

_CONFIG_DIR = Path(__file__).resolve().parent.parent.parent / "config"
_DEFAULT_CONFIG_PATH = _CONFIG_DIR / "default_config.json"
_PRESETS_DIR = _CONFIG_DIR / "presets"

ENV_PREFIX = "FSRIR_"


def deep_merge(base: dict, override: Mapping[str, Any]) -> dict:
    """Recursively merge *override* into a copy of *base*."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def write_json_atomic(path: Path, data: Any) -> None:
    """Write JSON with sorted keys through a temp file so readers never see a partial file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    try:
        tmp_path.write_text(
            json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        shutil.move(str(tmp_path), str(path))
    except Exception:
        if tmp_path.exists():
            tmp_path.unlink()
        raise


def config_diff(left: Mapping[str, Any], right: Mapping[str, Any], prefix: str = "") -> list[str]:
    """Dotted keys whose values differ between two config dicts."""
    out: list[str] = []
    for key in sorted(set(left) | set(right)):
        name = f"{prefix}{key}"
        a, b = left.get(key), right.get(key)
        if isinstance(a, Mapping) and isinstance(b, Mapping):
            out.extend(config_diff(a, b, name + "."))
        elif a != b:
            out.append(f"{name}: {a!r} != {b!r}")
    return out


class ConfigManager:
    def __init__(self, presets_dir: Path | None = None, default_path: Path | None = None) -> None:
        self._config = ExperimentConfig()
        self._presets_dir = presets_dir or _PRESETS_DIR
        self._default_path = default_path or _DEFAULT_CONFIG_PATH
        self._sources: list[str] = []

    @property
    def config(self) -> ExperimentConfig:
        return self._config

    @property
    def sources(self) -> list[str]:
        return list(self._sources)

    def available_presets(self) -> list[str]:
        if not self._presets_dir.is_dir():
            return []
        return sorted(p.stem for p in self._presets_dir.glob("*.json"))

    def load(
        self,
        user_path: Path | None = None,
        preset: str | None = None,
        environ: Mapping[str, str] | None = None,
    ) -> ExperimentConfig:
        """Layer built-in defaults, default_config.json, a user file, a preset and env overrides."""
        data: dict = ExperimentConfig().to_dict()
        self._sources = ["built-in"]

        if self._default_path.exists():
            data = deep_merge(data, self._read(self._default_path))
            self._sources.append(str(self._default_path))
        else:
            logger.warning("Default config %s missing, using built-in defaults", self._default_path)

        if user_path is not None:
            data = deep_merge(data, self._read(Path(user_path)))
            self._sources.append(str(user_path))

        if preset:
            preset_path = self._presets_dir / f"{preset}.json"
            if not preset_path.exists():
                raise ConfigurationError(
                    f"Unknown preset '{preset}' (available: {', '.join(self.available_presets()) or 'none'})"
                )
            data = deep_merge(data, self._read(preset_path))
            self._sources.append(str(preset_path))

        overrides = self.env_overrides(os.environ if environ is None else environ)
        if overrides:
            data = deep_merge(data, overrides)
            self._sources.append("environment")

        old_app_version = data.get("app_version", "")
        if old_app_version and old_app_version != APP_VERSION:
            logger.info("Config written by %s, running %s", old_app_version, APP_VERSION)

        self._config = ExperimentConfig.from_dict(data)
        self._config.validate()
        logger.info("Loaded config from %s", " -> ".join(self._sources))
        return self._config

    @staticmethod
    def env_overrides(environ: Mapping[str, str]) -> dict:
        """Parse FSRIR_SECTION__KEY=value pairs into a nested dict (values JSON-decoded when possible)."""
        result: dict = {}
        for name, raw in sorted(environ.items()):
            if not name.startswith(ENV_PREFIX):
                continue
            path = [part.lower() for part in name[len(ENV_PREFIX):].split("__") if part]
            if not path:
                continue
            try:
                value: Any = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            node = result
            for part in path[:-1]:
                node = node.setdefault(part, {})
            node[path[-1]] = value
            logger.debug("Env override %s=%r", ".".join(path), value)
        return result

    @staticmethod
    def _read(path: Path) -> dict:
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"Failed to read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config {path} must hold a JSON object")
        return data

    def save(self, path: Path) -> None:
        write_json_atomic(path, self._config.to_dict())
        logger.info("Config saved to %s", path)
