"""
Model Registry - 服务端共享的只读资源

启动时加载一次（MLP 模型、模板库、检测参数），之后所有连接并发只读访问。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from arcloud.config import ArcConfig
from arcloud.core.shape_mlp import MlpModel, load_model_file
from arcloud.core.template_match import TemplateLibrary, load_library
from arcloud.models.settings import DetectConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelRegistry:
    """识别资源（不可变）"""

    detect: DetectConfig
    model: Optional[MlpModel] = None
    templates: Optional[TemplateLibrary] = None

    @classmethod
    def load(
        cls,
        detect: DetectConfig | None = None,
        model_path: Optional[Path] = None,
        templates_dir: Optional[Path] = None,
    ) -> "ModelRegistry":
        """
        加载模型与模板库

        模型的输入维度决定射线数：与 detect.rays 不一致时以模型为准。

        Raises:
            OSError / ModelFormatError / TemplateError / PgmFormatError: 加载失败
        """
        detect = detect or DetectConfig()
        model = load_model_file(model_path) if model_path else None
        templates = load_library(templates_dir, min_score=detect.min_score) if templates_dir else None
        if model is not None and model.input_dim != detect.rays:
            logger.warning(
                f"Model input dim {model.input_dim} overrides configured ray count {detect.rays}"
            )
            detect = detect.model_copy(update={"rays": model.input_dim})
        logger.info(
            f"Registry ready: model={'yes' if model else 'no'}, "
            f"templates={len(templates) if templates else 0}"
        )
        return cls(detect=detect, model=model, templates=templates)

    @classmethod
    def from_config(
        cls,
        config: ArcConfig,
        model_path: Optional[Path] = None,
        templates_dir: Optional[Path] = None,
    ) -> "ModelRegistry":
        """按配置加载；显式传入的路径优先于配置中的 model_path / templates_dir"""
        return cls.load(
            config.detect,
            model_path=model_path or config.model_path,
            templates_dir=templates_dir or config.templates_dir,
        )
