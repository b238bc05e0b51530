"""
arcloud train - 训练形状分类 MLP

--data 为目录时按「每类一个子目录的 PGM 掩码」读取并提取旗标向量；
为 .tsv 文件时直接读取外部描述子（label<TAB>v1<TAB>…）。
"""

from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError

from arcloud.cli.common import console_stderr, exit_on_errors, load_settings
from arcloud.core.shape_mlp import (
    DatasetFormatError,
    LabeledDataset,
    mlp_init,
    save_model_file,
    train,
)
from arcloud.core.shapes import load_training_dir
from arcloud.models.settings import FlagMode, TrainConfig


def train_command(
    data: Path = typer.Option(
        ...,
        "--data", "-d",
        help="训练目录或 .tsv 描述子文件",
    ),
    out: Path = typer.Option(
        ...,
        "--out", "-o",
        help="输出模型文件",
    ),
    hidden: int = typer.Option(32, "--hidden", min=1, help="隐藏层宽度"),
    epochs: int = typer.Option(500, "--epochs", min=1, help="训练轮数"),
    lr: float = typer.Option(0.1, "--lr", help="学习率（> 0）"),
    seed: int = typer.Option(0, "--seed", min=0, help="随机种子（初始化、洗牌与增广）"),
    rays: int = typer.Option(70, "--rays", min=1, help="旗标向量射线数（目录输入）"),
    flag_mode: Optional[FlagMode] = typer.Option(
        None,
        "--flag-mode",
        case_sensitive=False,
        help="旗标向量模式: extent / coverage（默认使用配置 flag_mode）",
    ),
    augment: int = typer.Option(0, "--augment", min=0, help="每个掩码额外的随机旋转副本数"),
    shuffle: bool = typer.Option(True, "--shuffle/--no-shuffle", help="每轮洗牌"),
):
    """
    训练并保存模型，标准输出打印最后一轮的平均损失（6 位小数）
    """
    config = load_settings()
    try:
        train_cfg = TrainConfig(learning_rate=lr, epochs=epochs, seed=seed, shuffle=shuffle)
    except ValidationError as e:
        raise typer.BadParameter(e.errors()[0]["msg"]) from e
    mode = flag_mode.value if flag_mode is not None else config.flag_mode

    with exit_on_errors():
        if data.is_file() and data.suffix.lower() == ".tsv":
            dataset = LabeledDataset.from_tsv(data)
        elif data.is_dir():
            dataset = load_training_dir(data, rays, mode, augment=augment, seed=seed)
        else:
            raise FileNotFoundError(2, "training data must be a directory or a .tsv file", str(data))
        if len(dataset) == 0:
            raise DatasetFormatError(f"no samples in {data}")

        console_stderr.print(
            f"Training on {len(dataset)} samples, {len(dataset.labels)} classes, dim {dataset.dim}",
            highlight=False,
        )
        model = mlp_init([dataset.dim, hidden, len(dataset.labels)], seed, dataset.labels)
        trained, trace = train(model, dataset, train_cfg)
        save_model_file(out, trained)

    typer.echo(f"{trace[-1]:.6f}")
