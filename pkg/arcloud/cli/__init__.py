"""
arcloud CLI - 命令行工具

提供主要命令：
- arcloud marker-gen: 生成 Golay 标记图像
- arcloud detect: 检测标记（本地或远程）
- arcloud train: 训练形状分类 MLP
- arcloud classify: 形状分类
- arcloud match: 模板识别
- arcloud serve: 启动识别服务
- arcloud bench: 本地 / 远程延迟对比
- arcloud shapes-gen: 生成合成形状训练目录

退出码：0 成功，1 用法错误，2 I/O 错误，3 未检测到结果，4 远程 / 传输错误。
"""

import logging
import sys
from typing import Optional, Sequence

import typer

try:  # newer typer vendors its own click; catch the exceptions it actually raises
    from typer import _click as click
except ImportError:
    import click

from arcloud.cli.bench_cmd import bench_command
from arcloud.cli.classify_cmd import classify_command
from arcloud.cli.common import ExitCode, console_stderr
from arcloud.cli.detect_cmd import detect_command
from arcloud.cli.marker_cmd import marker_gen_command
from arcloud.cli.match_cmd import match_command
from arcloud.cli.serve_cmd import serve_command
from arcloud.cli.shapes_cmd import shapes_gen_command
from arcloud.cli.train_cmd import train_command

app = typer.Typer(
    name="arcloud",
    help="arcloud - 标记检测与物体识别工具\n\nGolay 标记、NCC 模板、MLP 形状分类，以及云端识别服务。",
    add_completion=False,
    no_args_is_help=True,
    rich_markup_mode="rich",
)


@app.callback()
def _root(
    verbose: bool = typer.Option(
        False,
        "--verbose", "-v",
        help="输出调试日志",
    ),
):
    """日志统一写到 stderr"""
    level = logging.DEBUG if verbose else logging.WARNING
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


# 注册子命令
app.command(name="marker-gen", help="生成 Golay 标记 PGM")(marker_gen_command)
app.command(name="detect", help="检测图像中的标记")(detect_command)
app.command(name="train", help="训练形状分类 MLP")(train_command)
app.command(name="classify", help="形状分类")(classify_command)
app.command(name="match", help="模板识别（NCC）")(match_command)
app.command(name="serve", help="启动识别服务")(serve_command)
app.command(name="bench", help="本地 / 远程延迟对比")(bench_command)
app.command(name="shapes-gen", help="生成合成形状训练目录")(shapes_gen_command)


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """
    运行 CLI 并返回退出码（不调用 sys.exit）

    click 的用法错误统一映射为 1；--help 返回 0。
    """
    try:
        result = app(
            args=list(argv) if argv is not None else None,
            prog_name="arcloud",
            standalone_mode=False,
        )
    except click.exceptions.Abort:
        console_stderr.print("[yellow]Aborted[/yellow]")
        return int(ExitCode.USAGE)
    except click.ClickException as e:
        e.show()
        return int(ExitCode.USAGE)
    return result if isinstance(result, int) else int(ExitCode.OK)


def main():
    """CLI 入口点"""
    sys.exit(run_cli())


if __name__ == "__main__":
    main()


__all__ = ["app", "main", "run_cli"]
