"""
arcloud detect - 检测图像中的 Golay 标记

本地计算或通过 --remote 交给识别服务；两种方式的输出逐字节一致。
"""

import json
from enum import Enum
from pathlib import Path
from typing import Optional

import typer

from arcloud.cli.common import exit_on_errors, load_image, load_settings, nothing_found
from arcloud.core.pipeline import detect_markers
from arcloud.models.detection import MarkerDetection
from arcloud.sdk.recognition_client import RecognitionClient


class OutputFormat(str, Enum):
    """detect 输出格式"""
    TSV = "tsv"
    JSON = "json"


def render_detections(detections: list[MarkerDetection], fmt: OutputFormat) -> str:
    if fmt == OutputFormat.JSON:
        records = [d.as_wire_values().model_dump(mode="json") for d in detections]
        return json.dumps(records) + "\n"
    return "".join(d.tsv_row() + "\n" for d in detections)


def detect_command(
    image: Path = typer.Argument(
        ...,
        help="输入 PGM 图像",
    ),
    remote: Optional[str] = typer.Option(
        None,
        "--remote", "-r",
        help="识别服务地址 HOST[:PORT]（缺省端口取 ARC_PORT）",
    ),
    fmt: OutputFormat = typer.Option(
        OutputFormat.TSV,
        "--format", "-f",
        case_sensitive=False,
        help="输出格式: tsv / json",
    ),
):
    """
    检测标记，每个检测一行：

    id  rotation  corrected  x0  y0  x1  y1  x2  y2  x3  y3
    """
    config = load_settings()
    img = load_image(image)

    with exit_on_errors():
        if remote:
            with RecognitionClient.from_address(remote) as client:
                detections = client.detect(img)
        else:
            detections = detect_markers(img, config.detect)

    typer.echo(render_detections(detections, fmt), nl=False)
    if not detections:
        raise nothing_found("no markers detected")
