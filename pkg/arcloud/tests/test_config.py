"""
测试配置加载

覆盖 YAML 错误处理、全局/项目合并、环境变量覆盖与 detect 段校验
"""

import logging
from pathlib import Path

import pytest

from arcloud.config import (
    DEFAULT_PORT,
    ConfigLoadError,
    _load_yaml_config,
    get_config,
    load_config,
    reset_config,
)


def _write_project_config(text: str) -> None:
    """conftest 已把工作目录切到 tmp_path"""
    project_dir = Path(".arcloud")
    project_dir.mkdir(exist_ok=True)
    (project_dir / "config.yaml").write_text(text)


class TestYamlErrorHandling:
    """测试 YAML 错误处理"""

    def test_valid_yaml_loads_successfully(self, tmp_path):
        """测试有效的 YAML 可以成功加载"""
        config_file = tmp_path / "config.yaml"
        config_file.write_text("""
port: 9000
detect:
  threshold_mode: global
        """)

        result = _load_yaml_config(config_file)
        assert result["port"] == 9000
        assert result["detect"] == {"threshold_mode": "global"}

    def test_missing_file_returns_empty_dict(self, tmp_path):
        """测试缺失的文件返回空字典"""
        assert _load_yaml_config(tmp_path / "does_not_exist.yaml") == {}

    def test_empty_yaml_returns_empty_dict(self, tmp_path):
        config_file = tmp_path / "empty.yaml"
        config_file.write_text("")
        assert _load_yaml_config(config_file) == {}

    def test_invalid_yaml_raises_config_load_error(self, tmp_path):
        """测试无效的 YAML 抛出 ConfigLoadError"""
        config_file = tmp_path / "invalid.yaml"
        config_file.write_text("""
port: 1
  detect:
    - this should fail
        """)

        with pytest.raises(ConfigLoadError, match="Invalid YAML"):
            _load_yaml_config(config_file)

    def test_non_mapping_root(self, tmp_path):
        config_file = tmp_path / "list.yaml"
        config_file.write_text("- a\n- b\n")
        with pytest.raises(ConfigLoadError, match="must be a mapping"):
            _load_yaml_config(config_file)


class TestLoadConfig:
    """测试配置合并与覆盖"""

    def test_defaults(self):
        config = load_config()
        assert config.host == "127.0.0.1"
        assert config.port == DEFAULT_PORT
        assert config.model_path is None
        assert config.detect.threshold_mode == "adaptive"
        assert config.flag_mode == "extent"

    def test_global_config(self, isolated_config):
        (isolated_config / "config.yaml").write_text("port: 8100\nserver_workers: 2\n")
        config = load_config()
        assert config.port == 8100
        assert config.server_workers == 2

    def test_project_overrides_global(self, isolated_config):
        (isolated_config / "config.yaml").write_text(
            "port: 8100\ndetect:\n  window: 21\n  c: 3\n"
        )
        _write_project_config("port: 8200\ndetect:\n  c: 9\n")
        config = load_config()
        assert config.port == 8200
        # detect 段按键合并
        assert config.detect.window == 21
        assert config.detect.c == 9

    def test_env_overrides(self, monkeypatch, tmp_path):
        _write_project_config("host: 0.0.0.0\nport: 8200\n")
        monkeypatch.setenv("ARC_HOST", "10.0.0.1")
        monkeypatch.setenv("ARC_PORT", "9300")
        monkeypatch.setenv("ARC_MODEL_PATH", str(tmp_path / "shapes.armlp"))
        monkeypatch.setenv("ARC_THRESHOLD_MODE", "global")
        config = load_config()
        assert config.host == "10.0.0.1"
        assert config.port == 9300
        assert config.model_path == tmp_path / "shapes.armlp"
        assert config.detect.threshold_mode == "global"

    def test_invalid_numeric_env_is_ignored(self, monkeypatch, caplog):
        _write_project_config("port: 8200\n")
        monkeypatch.setenv("ARC_PORT", "not-a-port")
        with caplog.at_level(logging.WARNING, logger="arcloud.config"):
            config = load_config()
        assert config.port == 8200
        assert "Invalid numeric value for ARC_PORT" in caplog.text

    def test_flag_mode_precedence(self, monkeypatch):
        """顶层 flag_mode 覆盖 detect.flag_mode，ARC_FLAG_MODE 覆盖两者"""
        _write_project_config("flag_mode: coverage\ndetect:\n  flag_mode: extent\n")
        assert load_config().detect.flag_mode == "coverage"

        monkeypatch.setenv("ARC_FLAG_MODE", "extent")
        config = load_config()
        assert config.detect.flag_mode == "extent"
        assert config.flag_mode == "extent"

    def test_allowed_ids_list(self):
        _write_project_config("detect:\n  allowed_ids: [1, 2, 3]\n")
        assert load_config().detect.allowed_ids == frozenset({1, 2, 3})

    @pytest.mark.parametrize(
        "detect_yaml",
        [
            "detect:\n  window: 16\n",
            "detect:\n  threshold_mode: otsu\n",
            "detect:\n  allowed_ids: [5000]\n",
            "detect:\n  min_score: 2\n",
        ],
    )
    def test_invalid_detect_section(self, detect_yaml):
        _write_project_config(detect_yaml)
        with pytest.raises(ConfigLoadError, match="Invalid detect configuration"):
            load_config()

    def test_invalid_numeric_yaml_value(self):
        _write_project_config("port: eighty\n")
        with pytest.raises(ConfigLoadError, match="Invalid numeric"):
            load_config()

    def test_explicit_config_dir(self, tmp_path):
        other = tmp_path / "other"
        other.mkdir()
        (other / "config.yaml").write_text("port: 7001\n")
        assert load_config(other).port == 7001


class TestConfigSingleton:
    """测试配置单例"""

    def test_get_config_is_cached(self, isolated_config):
        first = get_config()
        (isolated_config / "config.yaml").write_text("port: 8111\n")
        assert get_config() is first
        assert get_config(force_reload=True).port == 8111

    def test_reset_config(self, isolated_config):
        first = get_config()
        reset_config()
        assert get_config() is not first
