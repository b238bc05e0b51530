"""
合成测试数据：标记画面、透视画面、形状画面
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from arcloud.core.geometry import Homography, apply, homography_from_points, warp_homography
from arcloud.core.golay_marker import render_marker
from arcloud.core.imaging import GrayImage
from arcloud.core.shapes import render_shape

CELL_PX = 8
MARKER_PX = 9 * CELL_PX  # 含静区


def paste(canvas: np.ndarray, img: GrayImage, x: int, y: int) -> None:
    canvas[y : y + img.height, x : x + img.width] = img.pixels


def marker_scene(
    placements: Iterable[tuple[int, int, int]], width: int = 320, height: int = 240
) -> GrayImage:
    """白底画面，按 (id, x, y) 放置 8 px/格的标记（x, y 为含静区的左上角）"""
    canvas = np.full((height, width), 255, dtype=np.uint8)
    for marker_id, x, y in placements:
        paste(canvas, render_marker(marker_id, CELL_PX), x, y)
    return GrayImage(canvas)


def marker_corners(x: int, y: int) -> list[tuple[float, float]]:
    """轴对齐标记黑色边框的外角（顺时针，从左上角开始）"""
    lo, hi = CELL_PX, 8 * CELL_PX
    return [(x + lo, y + lo), (x + hi, y + lo), (x + hi, y + hi), (x + lo, y + hi)]


def perspective_scene(
    marker_id: int, dst: Sequence[tuple[float, float]], size: int = 200
) -> tuple[GrayImage, list[tuple[float, float]]]:
    """
    把标记图像（含静区）的四角映射到 dst，返回画面与边框外角的真值
    """
    marker = render_marker(marker_id, CELL_PX)
    src = [(0.0, 0.0), (MARKER_PX, 0.0), (MARKER_PX, MARKER_PX), (0.0, MARKER_PX)]
    out_to_src = homography_from_points(dst, src)
    src_to_out: Homography = out_to_src.inverse()
    scene = warp_homography(marker, out_to_src, size, size)
    truth = [tuple(apply(src_to_out, c)) for c in marker_corners(0, 0)]
    return scene, truth  # type: ignore[return-value]


# 角点位移 ≤ 边长 15% 的温和透视
MILD_PERSPECTIVES: tuple[tuple[tuple[float, float], ...], ...] = (
    ((60, 50), (140, 58), (135, 140), (52, 132)),
    ((50, 60), (130, 50), (140, 130), (58, 138)),
    ((55, 55), (137, 62), (128, 137), (62, 128)),
    ((62, 52), (132, 56), (144, 138), (50, 134)),
)


def shape_scene(
    shapes: Iterable[tuple[str, float, float, float, float]], width: int = 240, height: int = 160
) -> GrayImage:
    """白底画面，按 (kind, size, angle, cx, cy) 绘制黑色形状"""
    mask = np.zeros((height, width), dtype=bool)
    for kind, size, angle, cx, cy in shapes:
        mask |= render_shape(kind, size, angle, canvas=(width, height), center=(cx, cy)).mask
    return GrayImage(np.where(mask, 0, 255).astype(np.uint8))


def max_corner_error(found: Sequence[Sequence[float]], truth: Sequence[Sequence[float]]) -> float:
    return max(float(np.hypot(f[0] - t[0], f[1] - t[1])) for f, t in zip(found, truth))
