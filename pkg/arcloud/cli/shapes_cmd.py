"""
arcloud shapes-gen - 生成五类合成形状训练目录
"""

from pathlib import Path

import typer

from arcloud.cli.common import console_stderr, exit_on_errors
from arcloud.core.shapes import SHAPE_LABELS, make_shape_samples, write_training_dir


def shapes_gen_command(
    out: Path = typer.Option(
        ...,
        "--out", "-o",
        help="输出目录（每类一个子目录）",
    ),
    per_class: int = typer.Option(
        50,
        "--per-class", "-n",
        min=0,
        help="每类样本数",
    ),
    seed: int = typer.Option(
        0,
        "--seed",
        min=0,
        help="随机种子",
    ),
):
    """
    按种子生成 disc / square / triangle / cross / ring 掩码（随机旋转与尺度）

    输出布局与 train --data DIR 的输入一致。
    """
    samples = make_shape_samples(per_class, seed)
    with exit_on_errors():
        count = write_training_dir(out, samples)
    console_stderr.print(
        f"[green]✓[/green] {count} masks in {len(SHAPE_LABELS)} classes → {out}", highlight=False
    )
