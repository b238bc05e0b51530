"""
Pytest configuration and fixtures for arcloud tests.

- 每个测试使用隔离的配置目录与工作目录，并清理 ARC_* 环境变量
- 配置单例在测试前后重置
- 提供训练好的五类形状模型（session 级，训练一次）与回环识别服务
"""

import os

import pytest

from arcloud.config import reset_config
from arcloud.core.shape_mlp import MlpModel, mlp_init, train
from arcloud.core.shapes import SHAPE_LABELS, dataset_from_masks, make_shape_samples
from arcloud.models.settings import DetectConfig, TrainConfig
from arcloud.services.registry import ModelRegistry
from arcloud.services.server import start_background

SHAPE_RAYS = 70
SHAPE_FLAG_MODE = "coverage"


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """隔离配置：全局目录指向临时目录，工作目录切到临时目录"""
    for key in list(os.environ):
        if key.startswith("ARC_"):
            monkeypatch.delenv(key, raising=False)
    global_dir = tmp_path / "global-config"
    global_dir.mkdir()
    monkeypatch.setenv("ARC_CONFIG_DIR", str(global_dir))
    monkeypatch.chdir(tmp_path)
    reset_config()

    yield global_dir

    reset_config()


@pytest.fixture(scope="session")
def shape_model() -> MlpModel:
    """五类合成形状上训练的 70-32-5 模型（coverage 旗标向量）"""
    samples = make_shape_samples(per_class=50, seed=1)
    dataset = dataset_from_masks(samples, SHAPE_RAYS, SHAPE_FLAG_MODE)
    model = mlp_init([SHAPE_RAYS, 32, len(SHAPE_LABELS)], seed=7, labels=SHAPE_LABELS)
    trained, _ = train(model, dataset, TrainConfig(learning_rate=0.1, epochs=500, seed=7))
    return trained


@pytest.fixture
def shape_detect_config() -> DetectConfig:
    return DetectConfig(threshold_mode="global", flag_mode=SHAPE_FLAG_MODE, rays=SHAPE_RAYS)


@pytest.fixture
def registry(shape_model, shape_detect_config) -> ModelRegistry:
    return ModelRegistry(detect=shape_detect_config, model=shape_model)


@pytest.fixture
def marker_registry() -> ModelRegistry:
    return ModelRegistry(detect=DetectConfig())


@pytest.fixture
def loopback(marker_registry):
    """只有检测参数（无模型、无模板）的回环服务"""
    server = start_background(marker_registry)
    yield server
    server.stop()


@pytest.fixture
def loopback_full(registry):
    """带形状模型的回环服务"""
    server = start_background(registry)
    yield server
    server.stop()
