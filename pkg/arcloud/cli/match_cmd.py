"""
arcloud match - 模板识别（NCC）

输入尺寸等于模板尺寸时视为规范图块，直接与模板库比较；
否则在画面中查找四边形，逐个透视校正后匹配。
"""

from pathlib import Path
from typing import Optional

import typer

from arcloud.cli.common import exit_on_errors, load_image, load_settings, nothing_found
from arcloud.core.pipeline import match_templates
from arcloud.core.template_match import best_match, first_match, load_library
from arcloud.models.detection import format_label_score


def match_command(
    image: Path = typer.Argument(
        ...,
        help="输入 PGM 图像（规范图块或整幅画面）",
    ),
    templates: Optional[Path] = typer.Option(
        None,
        "--templates", "-t",
        help="模板目录（*.pgm，默认使用配置 templates_dir）",
    ),
    first: bool = typer.Option(
        False,
        "--first",
        help="规范图块按库顺序取第一个达到阈值的模板",
    ),
):
    """
    每个匹配输出一行 label<TAB>score（4 位小数）
    """
    config = load_settings()
    templates_dir = templates or config.templates_dir
    if templates_dir is None:
        raise typer.BadParameter("a template directory is required (--templates or ARC_TEMPLATES_DIR)")

    img = load_image(image)
    with exit_on_errors():
        lib = load_library(templates_dir, min_score=config.detect.min_score)
        if lib.size == (img.width, img.height):
            match = first_match(img, lib) if first else best_match(img, lib)
            rows = [] if match is None else [(match.label, match.score)]
        else:
            rows = [(d.label, d.score) for d in match_templates(img, config.detect, lib)]

    if not rows:
        raise nothing_found("no template matched")
    for label, score in rows:
        typer.echo(format_label_score(label, score))
