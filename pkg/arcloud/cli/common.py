"""
CLI 公共部分：退出码、错误流控制台、异常 → 退出码映射
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from enum import IntEnum
from pathlib import Path
from typing import Iterator

import typer
from rich.console import Console

from arcloud.config import ArcConfig, ConfigLoadError, get_config
from arcloud.core.imaging import GrayImage, PgmFormatError, read_pgm_file
from arcloud.core.shape_mlp import DatasetFormatError, EmptyRegionError, ModelFormatError
from arcloud.core.template_match import TemplateError
from arcloud.sdk.recognition_client import RemoteError, TransportError
from arcloud.services.bench import BenchError

logger = logging.getLogger(__name__)

# 标准输出只承载数据格式，诊断信息一律走 stderr
console_stderr = Console(stderr=True)


class ExitCode(IntEnum):
    """进程退出码"""
    OK = 0
    USAGE = 1
    IO = 2
    NOTHING_FOUND = 3
    REMOTE = 4


def fail(code: ExitCode, message: str) -> typer.Exit:
    """打印诊断并返回对应的 Exit（由调用方 raise）"""
    console_stderr.print(f"[red]错误:[/red] {message}", highlight=False)
    return typer.Exit(int(code))


@contextmanager
def exit_on_errors() -> Iterator[None]:
    """
    把各层异常映射为退出码

    - TransportError / RemoteError / BenchError → 4
    - ConfigLoadError / OSError / 输入文件内容错误（PGM、模型、模板、数据集、空区域）→ 2
    - 其余 ValueError（含 DimensionError，参数与模型或取值范围不符）→ 1
    """
    try:
        yield
    except (TransportError, RemoteError, BenchError) as e:
        raise fail(ExitCode.REMOTE, str(e)) from e
    except (
        ConfigLoadError,
        PgmFormatError,
        ModelFormatError,
        TemplateError,
        DatasetFormatError,
        EmptyRegionError,
    ) as e:
        raise fail(ExitCode.IO, str(e)) from e
    except OSError as e:
        raise fail(ExitCode.IO, f"{e.strerror or e}: {e.filename}" if e.filename else str(e)) from e
    except ValueError as e:
        raise fail(ExitCode.USAGE, str(e)) from e


def load_settings() -> ArcConfig:
    with exit_on_errors():
        return get_config()


def load_image(path: Path) -> GrayImage:
    """读取 PGM 输入图像（失败 → 退出码 2）"""
    with exit_on_errors():
        img = read_pgm_file(path)
    logger.debug(f"Loaded {path}: {img.width}x{img.height}")
    return img


def nothing_found(what: str) -> typer.Exit:
    console_stderr.print(f"[yellow]{what}[/yellow]", highlight=False)
    return typer.Exit(int(ExitCode.NOTHING_FOUND))


__all__ = [
    "ExitCode",
    "console_stderr",
    "exit_on_errors",
    "fail",
    "load_image",
    "load_settings",
    "nothing_found",
]
