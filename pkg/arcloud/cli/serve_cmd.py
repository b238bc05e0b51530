"""
arcloud serve - 启动识别服务

加载模型 / 模板库后在 HOST:PORT 上接受 ARC1 帧请求，Ctrl+C 停止。
"""

import asyncio
from pathlib import Path
from typing import Optional

import typer
from rich.panel import Panel

from arcloud.cli.common import ExitCode, console_stderr, exit_on_errors, fail, load_settings
from arcloud.services.registry import ModelRegistry
from arcloud.services.server import RecognitionServer


async def _serve(server: RecognitionServer) -> None:
    await server.start()
    try:
        await server.serve_forever()
    finally:
        await server.stop()


def serve_command(
    host: Optional[str] = typer.Option(
        None,
        "--host",
        help="监听地址（默认 127.0.0.1 或 ARC_HOST）",
    ),
    port: Optional[int] = typer.Option(
        None,
        "--port", "-p",
        min=0,
        max=65535,
        help="监听端口（默认 7700 或 ARC_PORT）",
    ),
    model: Optional[Path] = typer.Option(
        None,
        "--model", "-m",
        help="ARMLP 模型文件（CLASSIFY 请求需要）",
    ),
    templates: Optional[Path] = typer.Option(
        None,
        "--templates", "-t",
        help="模板目录（MATCH_PATCH 请求需要）",
    ),
):
    """
    启动识别服务（TCP，长度前缀二进制帧）
    """
    config = load_settings()
    host = host or config.host
    port = port if port is not None else config.port

    with exit_on_errors():
        registry = ModelRegistry.from_config(config, model_path=model, templates_dir=templates)

    server = RecognitionServer(registry, host, port, config.server_workers)
    console_stderr.print(
        Panel.fit(
            f"[bold blue]arcloud[/bold blue] - 识别服务\n\n"
            f"[bold]地址:[/bold] {host}:{port}\n"
            f"[bold]模型:[/bold] {'已加载' if registry.model else '无'}\n"
            f"[bold]模板:[/bold] {len(registry.templates) if registry.templates else 0}\n"
            f"[bold]线程:[/bold] {config.server_workers}",
            border_style="blue",
        )
    )
    try:
        asyncio.run(_serve(server))
    except KeyboardInterrupt:
        console_stderr.print("[yellow]服务已停止[/yellow]")
    except OSError as e:
        raise fail(ExitCode.IO, f"cannot listen on {host}:{port}: {e}") from e
