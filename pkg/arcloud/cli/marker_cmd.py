"""
arcloud marker-gen - 生成 Golay 标记图像
"""

from pathlib import Path

import typer

from arcloud.cli.common import console_stderr, exit_on_errors
from arcloud.core.golay_marker import MAX_MARKER_ID, render_marker
from arcloud.core.imaging import write_pgm_file


def marker_gen_command(
    marker_id: int = typer.Option(
        ...,
        "--id",
        min=0,
        max=MAX_MARKER_ID,
        help="标记 ID（0..4095）",
    ),
    cell_px: int = typer.Option(
        8,
        "--cell-px",
        min=1,
        help="每个网格单元的像素数",
    ),
    out: Path = typer.Option(
        ...,
        "--out", "-o",
        help="输出 PGM 文件",
    ),
):
    """
    渲染一个带静区的 7×7 标记并写为 PGM
    """
    img = render_marker(marker_id, cell_px)
    with exit_on_errors():
        write_pgm_file(out, img)
    console_stderr.print(
        f"[green]✓[/green] marker {marker_id} → {out} ({img.width}x{img.height})", highlight=False
    )
