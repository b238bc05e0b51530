"""
Golay Marker - 扩展 Golay [24,12,8] 编解码与方形标记格式

标记布局（7×7 网格）：
- 外圈 24 格黑色边框（同时作为黑色参考）
- 中心格 (3,3) 固定白色（白色参考）
- 其余 24 个内部格按行优先（左上 → 右下，跳过中心）承载码字，首格 = bit 23
- 渲染时四周再加 1 格白色静区

编码为系统码 c = [m | m·B]，可纠正任意 ≤3 位错误，检测 4 位错误。
"""

from __future__ import annotations

import logging
from functools import lru_cache
from itertools import combinations
from typing import NamedTuple

import numpy as np

from arcloud.core.imaging import GrayImage

logger = logging.getLogger(__name__)

MAX_MARKER_ID = 4095
GRID_CELLS = 7
CANONICAL_CELL_PX = 8
CANONICAL_SIZE = GRID_CELLS * CANONICAL_CELL_PX  # 56
DEFAULT_MIN_CONTRAST = 30
DEFAULT_MAX_BORDER_ERRORS = 0

# 扩展 Golay 码生成矩阵 G = [I | B] 的 B 部分（对称，每行首位对应第 0 列）
GOLAY_B_ROWS: tuple[int, ...] = (
    0xDC5, 0xB8B, 0x717, 0xE2D, 0xC5B, 0x8B7,
    0x16F, 0x2DD, 0x5D9, 0xB71, 0x6E3, 0xFFE,
)

_CENTER = (3, 3)
# 内部数据格（行, 列），按 bit 23 → bit 0 排列
DATA_CELLS: tuple[tuple[int, int], ...] = tuple(
    (r, c) for r in range(1, 6) for c in range(1, 6) if (r, c) != _CENTER
)
BORDER_CELLS: tuple[tuple[int, int], ...] = tuple(
    (r, c)
    for r in range(GRID_CELLS)
    for c in range(GRID_CELLS)
    if r in (0, GRID_CELLS - 1) or c in (0, GRID_CELLS - 1)
)
_DATA_ROWS = np.array([r for r, _ in DATA_CELLS])
_DATA_COLS = np.array([c for _, c in DATA_CELLS])
_BORDER_ROWS = np.array([r for r, _ in BORDER_CELLS])
_BORDER_COLS = np.array([c for _, c in BORDER_CELLS])
_BIT_WEIGHTS = np.array([1 << (23 - i) for i in range(24)], dtype=np.int64)


class GolayDecoded(NamedTuple):
    """解码结果：码字对应的 id 与纠正的位数"""

    id: int
    corrected: int


class MarkerRead(NamedTuple):
    """规范图块的读取结果"""

    id: int
    rotation: int
    corrected: int


def _check_id(marker_id: int) -> None:
    if not 0 <= marker_id <= MAX_MARKER_ID:
        raise ValueError(f"marker id must be in 0..{MAX_MARKER_ID}, got {marker_id}")


def _parity(message: int) -> int:
    """m·B（GF(2)）"""
    p = 0
    for i, row in enumerate(GOLAY_B_ROWS):
        if (message >> (11 - i)) & 1:
            p ^= row
    return p


def golay_encode(marker_id: int) -> int:
    """系统编码：高 12 位 = id，低 12 位 = 校验位"""
    _check_id(marker_id)
    return (marker_id << 12) | _parity(marker_id)


def _syndrome(word: int) -> int:
    return _parity((word >> 12) & 0xFFF) ^ (word & 0xFFF)


@lru_cache(maxsize=1)
def _syndrome_table() -> tuple[int, ...]:
    """伴随式 → 错误图样（权重 ≤ 3），其余为 -1；首次调用时构建，之后只读"""
    table = [-1] * 4096
    table[0] = 0
    for weight in (1, 2, 3):
        for positions in combinations(range(24), weight):
            error = 0
            for pos in positions:
                error |= 1 << pos
            table[_syndrome(error)] = error
    logger.debug(f"Golay syndrome table: {sum(1 for e in table if e >= 0)} correctable patterns")
    return tuple(table)


def golay_decode(word: int) -> GolayDecoded | None:
    """
    伴随式查表译码

    Returns:
        距离 ≤ 3 时返回 (id, 纠正位数)；否则 None（不可纠正）
    """
    word &= 0xFFFFFF
    error = _syndrome_table()[_syndrome(word)]
    if error < 0:
        return None
    return GolayDecoded(id=(word ^ error) >> 12, corrected=error.bit_count())


def codeword_weight_distribution() -> dict[int, int]:
    """全部 4096 个码字的重量分布"""
    dist: dict[int, int] = {}
    for m in range(4096):
        w = golay_encode(m).bit_count()
        dist[w] = dist.get(w, 0) + 1
    return dict(sorted(dist.items()))


def marker_grid(marker_id: int) -> np.ndarray:
    """7×7 布尔网格（True = 黑）"""
    word = golay_encode(marker_id)
    grid = np.zeros((GRID_CELLS, GRID_CELLS), dtype=bool)
    grid[_BORDER_ROWS, _BORDER_COLS] = True
    bits = ((word >> (23 - np.arange(24))) & 1).astype(bool)
    grid[_DATA_ROWS, _DATA_COLS] = bits
    return grid


def render_marker(marker_id: int, cell_px: int = 8) -> GrayImage:
    """
    渲染标记：(7+2)·cell_px 的正方形，含 1 格白色静区；bit 1 渲染为黑（0）

    Raises:
        ValueError: id 越界或 cell_px < 1
    """
    _check_id(marker_id)
    if cell_px < 1:
        raise ValueError(f"cell_px must be >= 1, got {cell_px}")
    cells = np.full((GRID_CELLS + 2, GRID_CELLS + 2), 255, dtype=np.uint8)
    cells[1:-1, 1:-1] = np.where(marker_grid(marker_id), 0, 255)
    return GrayImage(np.kron(cells, np.ones((cell_px, cell_px), dtype=np.uint8)))


def _cell_values(patch: np.ndarray) -> np.ndarray:
    """每个 8×8 格中心 4×4 像素的均值"""
    blocks = patch.astype(np.float64).reshape(
        GRID_CELLS, CANONICAL_CELL_PX, GRID_CELLS, CANONICAL_CELL_PX
    )
    return blocks[:, 2:6, :, 2:6].mean(axis=(1, 3))


def _grid_word(bits: np.ndarray) -> int:
    return int((bits[_DATA_ROWS, _DATA_COLS].astype(np.int64) * _BIT_WEIGHTS).sum())


def read_canonical(
    patch: GrayImage,
    min_contrast: float = DEFAULT_MIN_CONTRAST,
    max_border_errors: int = DEFAULT_MAX_BORDER_ERRORS,
) -> MarkerRead | None:
    """
    从 56×56 规范图块读取标记。

    rotation = 解码成功前对网格施加的顺时针 90° 旋转次数。
    多个旋转并列最少纠错位数时：id 相同（旋转对称码字）取最小旋转，否则视为歧义返回 None。

    Returns:
        MarkerRead 或 None（对比度不足 / 边框损坏 / 不可解码 / 歧义）

    Raises:
        ValueError: 图块尺寸不是 56×56
    """
    if patch.width != CANONICAL_SIZE or patch.height != CANONICAL_SIZE:
        raise ValueError(
            f"canonical patch must be {CANONICAL_SIZE}x{CANONICAL_SIZE}, "
            f"got {patch.width}x{patch.height}"
        )

    values = _cell_values(patch.pixels)
    black_ref = float(values[_BORDER_ROWS, _BORDER_COLS].mean())
    white_ref = float(values[_CENTER])
    if white_ref - black_ref < min_contrast:
        return None

    mid = (black_ref + white_ref) / 2.0
    bits = values < mid
    border_errors = int(np.count_nonzero(~bits[_BORDER_ROWS, _BORDER_COLS]))
    if border_errors > max_border_errors:
        return None

    decoded: list[tuple[int, int, int]] = []  # (corrected, rotation, id)
    for k in range(4):
        result = golay_decode(_grid_word(np.rot90(bits, -k)))
        if result is not None:
            decoded.append((result.corrected, k, result.id))
    if not decoded:
        return None

    best = min(c for c, _, _ in decoded)
    tied = sorted((k, i) for c, k, i in decoded if c == best)
    if len({i for _, i in tied}) > 1:
        logger.debug(f"Ambiguous marker read: rotations {tied} tie at {best} corrected bits")
        return None
    rotation, marker_id = tied[0]
    return MarkerRead(id=marker_id, rotation=rotation, corrected=best)


__all__ = [
    "BORDER_CELLS",
    "CANONICAL_SIZE",
    "DATA_CELLS",
    "GOLAY_B_ROWS",
    "GolayDecoded",
    "MarkerRead",
    "codeword_weight_distribution",
    "golay_decode",
    "golay_encode",
    "marker_grid",
    "read_canonical",
    "render_marker",
]
