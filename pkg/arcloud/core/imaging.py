"""
Imaging - 光栅类型、PGM 读写、灰度化与阈值化

处理流程的前三步（图像预处理）：
1. 相机图像 → 灰度图（to_grayscale）
2. 灰度图 → 二值图（threshold_global / threshold_adaptive）
3. 积分图（integral）为自适应阈值提供 O(1) 窗口求和

约定：
- 所有光栅均为行优先的 numpy 数组，像素 (x, y) 位于 pixels[y, x]
- 二值图中 1 = 前景 = 深色墨迹（标记是白底黑色）
- 所有函数均为纯函数，类型不可变，可跨线程共享
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

PGM_MAGIC = b"P5"
_WHITESPACE = b" \t\r\n\v\f"


class PgmFormatError(ValueError):
    """PGM 解析错误（头部损坏 / 数据截断 / 不支持的 maxval）"""

    pass


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class RgbImage:
    """RGB 彩色图（h × w × 3，uint8）"""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"RgbImage expects an (h, w, 3) array, got shape {px.shape}")
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8 位灰度图（0 = 黑，255 = 白）"""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"GrayImage expects a non-empty 2-D array, got shape {px.shape}")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise ValueError("GrayImage pixel values must lie in 0..255")
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", _freeze(np.ascontiguousarray(px)))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @classmethod
    def filled(cls, width: int, height: int, value: int = 255) -> "GrayImage":
        """创建单色图像"""
        return cls(np.full((height, width), value, dtype=np.uint8))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """1 位掩码（True = 前景 = 深色）"""

    mask: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mask)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ValueError(f"BinaryImage expects a non-empty 2-D array, got shape {m.shape}")
        object.__setattr__(self, "mask", _freeze(np.ascontiguousarray(m.astype(bool))))

    @property
    def width(self) -> int:
        return int(self.mask.shape[1])

    @property
    def height(self) -> int:
        return int(self.mask.shape[0])

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.mask))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return self.mask.shape == other.mask.shape and bool(np.array_equal(self.mask, other.mask))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """
    积分图：(h+1) × (w+1) 的 int64 前缀和

    S(x, y) = 灰度图在矩形 [0, x) × [0, y) 内的像素和，
    因此 S(0, ·) = S(·, 0) = 0。
    """

    table: np.ndarray

    @property
    def width(self) -> int:
        return int(self.table.shape[1]) - 1

    @property
    def height(self) -> int:
        return int(self.table.shape[0]) - 1

    def at(self, x: int, y: int) -> int:
        """S(x, y)"""
        return int(self.table[y, x])

    def window_sum(
        self, x0: int | np.ndarray, y0: int | np.ndarray, x1: int | np.ndarray, y1: int | np.ndarray
    ) -> int | np.ndarray:
        """
        矩形 [x0, x1) × [y0, y1) 的像素和（四角查表）

        参数可以是整数，也可以是可广播的下标数组（逐元素求和，返回数组）。
        """
        t = self.table
        sums = t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]
        return int(sums) if np.ndim(sums) == 0 else sums


# === PGM (P5) ===


class _PgmHeaderReader:
    """P5 头部词法分析：空白与 '#' 注释（到行尾）分隔的 token"""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _skip_whitespace_and_comments(self) -> None:
        data = self.data
        while self.pos < len(data):
            ch = data[self.pos : self.pos + 1]
            if ch in _WHITESPACE:
                self.pos += 1
            elif ch == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
            else:
                return

    def token(self, what: str) -> bytes:
        self._skip_whitespace_and_comments()
        start = self.pos
        data = self.data
        while self.pos < len(data) and data[self.pos : self.pos + 1] not in _WHITESPACE:
            if data[self.pos : self.pos + 1] == b"#":
                break
            self.pos += 1
        if self.pos == start:
            raise PgmFormatError(f"Malformed PGM header: missing {what}")
        return data[start : self.pos]

    def integer(self, what: str) -> int:
        raw = self.token(what)
        if not raw.isdigit():
            raise PgmFormatError(f"Malformed PGM header: {what} is not a number ({raw!r})")
        return int(raw)


def pgm_read(data: bytes) -> GrayImage:
    """
    解析二进制 PGM（P5）。

    Args:
        data: 文件内容

    Returns:
        灰度图；maxval < 255 时保留原始采样值（不做缩放）

    Raises:
        PgmFormatError: 头部损坏、像素数据截断或 maxval > 255（不支持 16 位）
    """
    if not data.startswith(PGM_MAGIC):
        raise PgmFormatError("Malformed PGM header: expected magic 'P5'")

    reader = _PgmHeaderReader(data)
    reader.pos = len(PGM_MAGIC)
    if reader.pos < len(data) and data[reader.pos : reader.pos + 1] not in _WHITESPACE + b"#":
        raise PgmFormatError("Malformed PGM header: expected whitespace after magic")

    width = reader.integer("width")
    height = reader.integer("height")
    maxval = reader.integer("maxval")

    if width < 1 or height < 1:
        raise PgmFormatError(f"Malformed PGM header: invalid size {width}x{height}")
    if maxval > 255:
        raise PgmFormatError(f"PGM maxval {maxval} unsupported (16-bit samples)")
    if maxval < 1:
        raise PgmFormatError(f"Malformed PGM header: invalid maxval {maxval}")

    # maxval 之后恰好一个空白字节，然后是像素
    if reader.pos >= len(data) or data[reader.pos : reader.pos + 1] not in _WHITESPACE:
        raise PgmFormatError("Malformed PGM header: missing whitespace before pixel data")
    start = reader.pos + 1
    expected = width * height
    raw = data[start : start + expected]
    if len(raw) < expected:
        raise PgmFormatError(f"Truncated PGM pixel data: expected {expected} bytes, got {len(raw)}")

    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width).copy()
    if maxval < 255 and int(pixels.max()) > maxval:
        raise PgmFormatError(f"PGM sample value exceeds maxval {maxval}")
    return GrayImage(pixels)


def pgm_write(img: GrayImage) -> bytes:
    """序列化为 P5：'P5\\n<w> <h>\\n255\\n' + 原始像素"""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def read_pgm_file(path: Path | str) -> GrayImage:
    """从文件读取 PGM（OSError 原样抛出）"""
    path = Path(path)
    logger.debug(f"Reading PGM {path}")
    return pgm_read(path.read_bytes())


def write_pgm_file(path: Path | str, img: GrayImage) -> None:
    """写入 PGM 文件（父目录需存在）"""
    Path(path).write_bytes(pgm_write(img))


# === 灰度化与阈值化 ===


def to_grayscale(img: RgbImage) -> GrayImage:
    """
    y = round(0.299·r + 0.587·g + 0.114·b)，四舍五入（half-up）。

    用整数千分比计算，避免浮点舍入误差。
    """
    px = img.pixels.astype(np.int64)
    weighted = 299 * px[..., 0] + 587 * px[..., 1] + 114 * px[..., 2]
    return GrayImage(((weighted + 500) // 1000).astype(np.uint8))


def threshold_global(img: GrayImage, t: int) -> BinaryImage:
    """前景 ⇔ pixel < t"""
    if not 0 <= t <= 255:
        raise ValueError(f"threshold t must be in 0..255, got {t}")
    return BinaryImage(img.pixels < t)


def integral(img: GrayImage) -> IntegralImage:
    """构建积分图"""
    table = np.zeros((img.height + 1, img.width + 1), dtype=np.int64)
    table[1:, 1:] = np.cumsum(np.cumsum(img.pixels.astype(np.int64), axis=0), axis=1)
    return IntegralImage(_freeze(table))


def threshold_adaptive(img: GrayImage, window: int = 15, c: int = 7) -> BinaryImage:
    """
    动态阈值：前景 ⇔ pixel < mean − c

    mean 为以像素为中心、边界裁剪后的窗口均值（除数 = 实际落在图内的像素数）。
    比较在整数域进行：pixel·count < sum − c·count，与逐窗口暴力定义逐位一致。

    Args:
        img: 灰度图
        window: 窗口边长（奇数，≥ 3）
        c: 偏移量（灰度级）
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")

    radius = window // 2
    table = integral(img)
    h, w = img.height, img.width

    xs = np.arange(w)
    ys = np.arange(h)
    x0 = np.clip(xs - radius, 0, w)
    x1 = np.clip(xs + radius + 1, 0, w)
    y0 = np.clip(ys - radius, 0, h)
    y1 = np.clip(ys + radius + 1, 0, h)

    sums = table.window_sum(x0[None, :], y0[:, None], x1[None, :], y1[:, None])
    counts = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    pixels = img.pixels.astype(np.int64)
    return BinaryImage(pixels * counts < sums - int(c) * counts)


def binarize(img: GrayImage, mode: str, t: int = 128, window: int = 15, c: int = 7) -> BinaryImage:
    """按模式选择阈值算法（'global' / 'adaptive'）"""
    if mode == "global":
        return threshold_global(img, t)
    if mode == "adaptive":
        return threshold_adaptive(img, window, c)
    raise ValueError(f"Unknown threshold mode: {mode}")


__all__ = [
    "BinaryImage",
    "GrayImage",
    "IntegralImage",
    "PgmFormatError",
    "RgbImage",
    "binarize",
    "integral",
    "pgm_read",
    "pgm_write",
    "read_pgm_file",
    "threshold_adaptive",
    "threshold_global",
    "to_grayscale",
    "write_pgm_file",
]
