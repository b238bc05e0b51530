"""
arcloud classify - 形状分类（MLP）

IMAGE 为 PGM 图像时对最大的区域分类；加 --vector 时 IMAGE 是一个
空白分隔的旗标向量文本文件，直接送入模型。
"""

from pathlib import Path
from typing import Optional

import numpy as np
import typer

from arcloud.cli.common import exit_on_errors, load_image, load_settings, nothing_found
from arcloud.core.pipeline import recognize_shapes
from arcloud.core.shape_mlp import DatasetFormatError, classify
from arcloud.models.detection import format_label_score
from arcloud.sdk.recognition_client import RecognitionClient
from arcloud.services.registry import ModelRegistry


def read_vector_file(path: Path) -> np.ndarray:
    """
    读取向量文件（空白 / 制表符分隔的实数）

    Raises:
        OSError: 文件不可读
        DatasetFormatError: 含非数字内容或为空
    """
    tokens = path.read_text(encoding="utf-8").split()
    if not tokens:
        raise DatasetFormatError(f"{path}: empty vector file")
    try:
        values = np.array([float(t) for t in tokens], dtype=np.float32)
    except ValueError as e:
        raise DatasetFormatError(f"{path}: {e}") from e
    # 与线协议一致按 32 位浮点取值
    return values.astype(np.float64)


def classify_command(
    image: Path = typer.Argument(
        ...,
        help="输入 PGM 图像（或 --vector 时的向量文件）",
    ),
    model: Optional[Path] = typer.Option(
        None,
        "--model", "-m",
        help="ARMLP 模型文件（默认使用配置 model_path）",
    ),
    remote: Optional[str] = typer.Option(
        None,
        "--remote", "-r",
        help="识别服务地址 HOST[:PORT]",
    ),
    vector: bool = typer.Option(
        False,
        "--vector",
        help="输入是旗标向量文件而不是图像",
    ),
):
    """
    输出 label<TAB>confidence（4 位小数）
    """
    config = load_settings()
    model_path = model or config.model_path
    if not remote and model_path is None:
        raise typer.BadParameter("a model is required (--model or ARC_MODEL_PATH)")

    with exit_on_errors():
        values = read_vector_file(image) if vector else None
        img = None if values is not None else load_image(image)

        if remote:
            with RecognitionClient.from_address(remote) as client:
                if values is not None:
                    label, confidence = client.classify_vector(values)
                else:
                    assert img is not None
                    label, confidence = client.classify_image(img)
        else:
            registry = ModelRegistry.load(config.detect, model_path=model_path)
            assert registry.model is not None
            if values is not None:
                label, confidence = classify(registry.model, values)
            else:
                assert img is not None
                shapes = recognize_shapes(img, registry.detect, registry.model)
                label, confidence = (shapes[0].label, shapes[0].confidence) if shapes else ("", 0.0)

    if not label:
        raise nothing_found("no region qualified for classification")
    typer.echo(format_label_score(label, confidence))
