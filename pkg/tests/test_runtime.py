from __future__ import annotations

import json

from runtime import build_runtime_config, ensure_runtime_dirs


def test_defaults_live_under_project_root(tmp_path, monkeypatch):
    for name in ("COOPALOHA_RUNTIME_ROOT", "COOPALOHA_CACHE_DIR", "COOPALOHA_WORKERS", "COOPALOHA_PROGRESS"):
        monkeypatch.delenv(name, raising=False)
    config = build_runtime_config(tmp_path)
    assert config.paths.root == (tmp_path / "runtime_data").resolve()
    assert config.paths.cache_dir == config.paths.root / "cache"
    assert config.workers == 1
    assert config.progress is False


def test_environment_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("COOPALOHA_RUNTIME_ROOT", "scratch")
    monkeypatch.setenv("COOPALOHA_EXPORTS_DIR", str(tmp_path / "csv"))
    monkeypatch.setenv("COOPALOHA_WORKERS", "4")
    monkeypatch.setenv("COOPALOHA_PROGRESS", "yes")
    monkeypatch.setenv("COOPALOHA_LOG_LEVEL", "debug")
    config = build_runtime_config(tmp_path)
    assert config.paths.root == (tmp_path / "scratch").resolve()
    assert config.paths.exports_dir == (tmp_path / "csv").resolve()
    assert config.workers == 4
    assert config.progress is True
    assert config.log_level == "DEBUG"


def test_bad_worker_count_falls_back(tmp_path, monkeypatch):
    monkeypatch.setenv("COOPALOHA_WORKERS", "many")
    assert build_runtime_config(tmp_path).workers == 1
    monkeypatch.setenv("COOPALOHA_WORKERS", "-3")
    assert build_runtime_config(tmp_path).workers == 1


def test_ensure_runtime_dirs_writes_manifest(tmp_path, monkeypatch):
    monkeypatch.setenv("COOPALOHA_RUNTIME_ROOT", str(tmp_path / "rt"))
    config = build_runtime_config(tmp_path)
    ensure_runtime_dirs(config)
    for directory in (config.paths.cache_dir, config.paths.exports_dir, config.paths.logs_dir):
        assert directory.is_dir()
    manifest = json.loads(config.paths.manifest_path.read_text(encoding="utf-8"))
    assert manifest["product"] == "Cooperative Aloha Lab"
    assert manifest["paths"]["cache"] == str(config.paths.cache_dir)
    assert "updated_at" in manifest
