"""
arcloud bench - 本地计算与远程调用的延迟对比

未指定 --remote 时在后台线程启动一个回环服务作为远程端。
"""

from pathlib import Path
from typing import Optional

import typer

from arcloud.cli.common import console_stderr, exit_on_errors, load_image, load_settings
from arcloud.services.bench import run_bench
from arcloud.services.registry import ModelRegistry
from arcloud.services.server import start_background


def bench_command(
    image: Path = typer.Argument(
        ...,
        help="输入 PGM 图像",
    ),
    iters: int = typer.Option(
        100,
        "--iters", "-n",
        min=1,
        help="每种模式的迭代次数",
    ),
    remote: Optional[str] = typer.Option(
        None,
        "--remote", "-r",
        help="识别服务地址 HOST[:PORT]（默认使用本机回环服务）",
    ),
):
    """
    输出延迟统计 TSV（mode iters mean_ms p50_ms p95_ms min_ms max_ms）
    """
    config = load_settings()
    img = load_image(image)

    with exit_on_errors():
        if remote:
            stats = run_bench(img, iters, remote, config.detect, config.client_timeout)
        else:
            registry = ModelRegistry(detect=config.detect)
            with start_background(registry, workers=config.server_workers) as server:
                console_stderr.print(f"Loopback server on {server.address}", highlight=False)
                stats = run_bench(img, iters, server.address, config.detect, config.client_timeout)

    typer.echo(stats.to_tsv(), nl=False)
