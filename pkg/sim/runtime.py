from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

from util import atomic_write_text


PROJECT_ROOT = Path(__file__).resolve().parents[1]


@dataclass(frozen=True)
class RuntimePaths:
    project_root: Path
    root: Path
    cache_dir: Path
    exports_dir: Path
    logs_dir: Path
    manifest_path: Path

    def public_dict(self) -> Dict[str, str]:
        return {
            "root": str(self.root),
            "cache": str(self.cache_dir),
            "exports": str(self.exports_dir),
            "logs": str(self.logs_dir),
            "manifest": str(self.manifest_path),
        }


@dataclass(frozen=True)
class RuntimeConfig:
    paths: RuntimePaths
    workers: int
    log_level: str
    progress: bool
    app_version: str

    def public_dict(self) -> Dict[str, Any]:
        return {
            "product": "Cooperative Aloha Lab",
            "app_version": self.app_version,
            "workers": self.workers,
            "log_level": self.log_level,
            "progress": self.progress,
            "paths": self.paths.public_dict(),
        }


def _bool_env(name: str, default: bool = False) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in {"1", "true", "yes", "on"}


def _path_env(name: str, default: Path, project_root: Path) -> Path:
    raw = os.getenv(name)
    if not raw:
        return default.resolve()
    path = Path(raw).expanduser()
    if not path.is_absolute():
        path = project_root / path
    return path.resolve()


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        return default


def build_runtime_config(project_root: Optional[Path] = None) -> RuntimeConfig:
    project_root = (project_root or PROJECT_ROOT).resolve()
    root = _path_env("COOPALOHA_RUNTIME_ROOT", project_root / "runtime_data", project_root)
    cache_dir = _path_env("COOPALOHA_CACHE_DIR", root / "cache", project_root)
    exports_dir = _path_env("COOPALOHA_EXPORTS_DIR", root / "exports", project_root)
    logs_dir = _path_env("COOPALOHA_LOGS_DIR", root / "logs", project_root)

    paths = RuntimePaths(
        project_root=project_root,
        root=root,
        cache_dir=cache_dir,
        exports_dir=exports_dir,
        logs_dir=logs_dir,
        manifest_path=root / "runtime-config.json",
    )
    log_level = (os.getenv("COOPALOHA_LOG_LEVEL", "INFO").strip() or "INFO").upper()
    return RuntimeConfig(
        paths=paths,
        workers=max(1, _int_env("COOPALOHA_WORKERS", 1)),
        log_level=log_level,
        progress=_bool_env("COOPALOHA_PROGRESS", False),
        app_version=os.getenv("COOPALOHA_APP_VERSION", "0.1.0-dev").strip() or "0.1.0-dev",
    )


def ensure_runtime_dirs(config: RuntimeConfig) -> None:
    paths = config.paths
    for directory in (paths.root, paths.cache_dir, paths.exports_dir, paths.logs_dir):
        directory.mkdir(parents=True, exist_ok=True)
    _write_runtime_manifest(config)


def _write_runtime_manifest(config: RuntimeConfig) -> None:
    payload = config.public_dict()
    payload["updated_at"] = _now_iso()
    atomic_write_text(config.paths.manifest_path, json.dumps(payload, indent=2, sort_keys=True))


def _now_iso() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
