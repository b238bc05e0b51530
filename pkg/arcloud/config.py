"""
arcloud Configuration - 配置管理模块

支持三种配置来源（优先级从高到低）：
1. 环境变量（ARC_ 前缀，覆盖所有配置）
2. 项目配置文件（./.arcloud/config.yaml）
3. 全局配置文件（~/.arcloud/config.yaml，可用 ARC_CONFIG_DIR 改变目录）
4. 默认值

用法：
    from arcloud.config import get_config
    config = get_config()
    print(config.port)
    print(config.detect.threshold_mode)
"""

import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml
from pydantic import ValidationError

from arcloud.models.settings import DetectConfig, FlagMode

logger = logging.getLogger(__name__)

# 默认全局配置目录
DEFAULT_GLOBAL_CONFIG_DIR = Path.home() / ".arcloud"
DEFAULT_PROJECT_CONFIG_DIR = Path(".arcloud")
DEFAULT_PORT = 7700


class ConfigLoadError(Exception):
    """配置加载错误"""

    pass


@dataclass
class ArcConfig:
    """arcloud 配置"""

    # === 服务 ===
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    server_workers: int = 4  # 识别线程池大小
    client_timeout: float = 10.0  # 秒

    # === 模型与模板 ===
    model_path: Optional[Path] = None
    templates_dir: Optional[Path] = None
    flag_mode: str = FlagMode.EXTENT.value

    # === 检测参数（yaml 中的 detect: 段） ===
    detect: DetectConfig = field(default_factory=DetectConfig)


def _load_yaml_config(path: Path) -> dict:
    """
    加载 YAML 配置文件。

    Args:
        path: 配置文件路径

    Returns:
        配置字典，如果文件不存在则返回空字典

    Raises:
        ConfigLoadError: YAML 解析失败或其他错误
    """
    if not path.exists():
        logger.debug(f"Config file not found: {path}")
        return {}

    try:
        with open(path, "r", encoding="utf-8") as f:
            content = yaml.safe_load(f)
    except FileNotFoundError:
        # 文件在 exists() 检查后被删除（罕见情况）
        logger.debug(f"Config file disappeared: {path}")
        return {}
    except yaml.YAMLError as e:
        logger.error(f"Invalid YAML in {path}: {e}")
        raise ConfigLoadError(f"Invalid YAML in {path}: {e}") from e
    except Exception as e:
        logger.error(f"Failed to load config from {path}: {e}")
        raise ConfigLoadError(f"Failed to load config from {path}: {e}") from e

    if content is None:
        return {}
    if not isinstance(content, dict):
        logger.error(f"Config root in {path} is not a mapping")
        raise ConfigLoadError(f"Config root in {path} must be a mapping")
    return content


def _load_detect_config(merged: dict) -> DetectConfig:
    """
    从合并后的配置字典构建 DetectConfig（ARC_THRESHOLD_MODE / flag_mode 覆盖）

    Raises:
        ConfigLoadError: detect 段取值不合法
    """
    detect_cfg: dict[str, Any] = dict(merged.get("detect") or {})

    threshold_mode = os.getenv("ARC_THRESHOLD_MODE")
    if threshold_mode:
        detect_cfg["threshold_mode"] = threshold_mode
    # 顶层 flag_mode（yaml 或 ARC_FLAG_MODE）优先于 detect.flag_mode
    if merged.get("flag_mode"):
        detect_cfg["flag_mode"] = merged["flag_mode"]
    if detect_cfg.get("allowed_ids") is not None:
        detect_cfg["allowed_ids"] = frozenset(detect_cfg["allowed_ids"])

    try:
        return DetectConfig(**detect_cfg)
    except (ValidationError, TypeError) as e:
        logger.error(f"Invalid detect configuration: {e}")
        raise ConfigLoadError(f"Invalid detect configuration: {e}") from e


def load_config(config_dir: Optional[Path] = None) -> ArcConfig:
    """
    加载配置

    Args:
        config_dir: 全局配置目录（默认 ARC_CONFIG_DIR 或 ~/.arcloud）

    Returns:
        配置对象
    """
    # 1. 确定配置目录
    env_dir = os.getenv("ARC_CONFIG_DIR")
    global_config_dir = config_dir or (Path(env_dir).expanduser() if env_dir else DEFAULT_GLOBAL_CONFIG_DIR)

    # 2. 加载全局 / 项目配置，项目覆盖全局
    global_cfg = _load_yaml_config(global_config_dir / "config.yaml")
    project_cfg = _load_yaml_config(DEFAULT_PROJECT_CONFIG_DIR / "config.yaml")
    merged = {**global_cfg, **project_cfg}
    if "detect" in global_cfg and "detect" in project_cfg:
        merged["detect"] = {**(global_cfg["detect"] or {}), **(project_cfg["detect"] or {})}

    # 3. 环境变量覆盖（字符串）
    env_overrides = {
        "host": os.getenv("ARC_HOST"),
        "model_path": os.getenv("ARC_MODEL_PATH"),
        "templates_dir": os.getenv("ARC_TEMPLATES_DIR"),
        "flag_mode": os.getenv("ARC_FLAG_MODE"),
    }
    for key, value in env_overrides.items():
        if value:
            merged[key] = value

    # 数值环境变量覆盖（非法值忽略）
    numeric_env_mapping = {
        "port": ("ARC_PORT", int),
        "server_workers": ("ARC_SERVER_WORKERS", int),
        "client_timeout": ("ARC_CLIENT_TIMEOUT", float),
    }
    for config_key, (env_key, cast) in numeric_env_mapping.items():
        env_value = os.getenv(env_key)
        if env_value is not None:
            try:
                merged[config_key] = cast(env_value)
            except ValueError:
                logger.warning(f"Invalid numeric value for {env_key}: {env_value}")

    detect = _load_detect_config(merged)
    model_path = merged.get("model_path")
    templates_dir = merged.get("templates_dir")

    try:
        port = int(merged.get("port", DEFAULT_PORT))
        server_workers = int(merged.get("server_workers", 4))
        client_timeout = float(merged.get("client_timeout", 10.0))
    except (TypeError, ValueError) as e:
        logger.error(f"Invalid numeric configuration value: {e}")
        raise ConfigLoadError(f"Invalid numeric configuration value: {e}") from e

    # 4. 构建配置对象
    return ArcConfig(
        host=str(merged.get("host", "127.0.0.1")),
        port=port,
        server_workers=server_workers,
        client_timeout=client_timeout,
        model_path=Path(str(model_path)).expanduser() if model_path else None,
        templates_dir=Path(str(templates_dir)).expanduser() if templates_dir else None,
        flag_mode=FlagMode(detect.flag_mode).value,
        detect=detect,
    )


# === 全局单例 ===
_config: Optional[ArcConfig] = None
_config_lock = threading.Lock()


def get_config(force_reload: bool = False) -> ArcConfig:
    """
    获取配置单例

    Args:
        force_reload: 强制重新加载

    Returns:
        配置对象
    """
    global _config

    if _config is None or force_reload:
        with _config_lock:
            if _config is None or force_reload:
                _config = load_config()

    return _config


def reset_config() -> None:
    """重置配置单例（用于测试）"""
    global _config
    with _config_lock:
        _config = None


__all__ = [
    "ArcConfig",
    "ConfigLoadError",
    "DEFAULT_PORT",
    "get_config",
    "load_config",
    "reset_config",
]
