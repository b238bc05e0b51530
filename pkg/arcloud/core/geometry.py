"""
Geometry - 平面单应变换与透视校正

处理流程第 5 步：把每个四边形候选变换到相机平面（规范正方形图块），
后续的标记解码 / 模板匹配都在这个规范图块上进行。
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple, Sequence

import numpy as np

from arcloud.core.imaging import GrayImage

if TYPE_CHECKING:
    from arcloud.core.segmentation import QuadCandidate

logger = logging.getLogger(__name__)

_INFINITY_EPS = 1e-12


class DegenerateGeometryError(ValueError):
    """退化几何：三点共线、奇异方程组或无穷远点"""

    pass


class Point2(NamedTuple):
    """图像坐标中的点（x 向右，y 向下）"""

    x: float
    y: float


@dataclass(frozen=True, eq=False)
class Homography:
    """3×3 单应矩阵，归一化使 h33 = 1"""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"Homography expects a 3x3 matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)) or abs(m[2, 2]) < _INFINITY_EPS:
            raise DegenerateGeometryError("Homography cannot be normalized (h33 = 0)")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) < _INFINITY_EPS:
            raise DegenerateGeometryError("Homography is singular")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, dx: float, dy: float) -> "Homography":
        return cls(np.array([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]]))

    def inverse(self) -> "Homography":
        """逆变换"""
        try:
            return Homography(np.linalg.inv(self.matrix))
        except np.linalg.LinAlgError as e:
            raise DegenerateGeometryError("Homography is not invertible") from e

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Homography):
            return NotImplemented
        return bool(np.array_equal(self.matrix, other.matrix))

    __hash__ = None  # type: ignore[assignment]


def _as_points(points: Sequence[Sequence[float]], what: str) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.shape != (4, 2):
        raise ValueError(f"{what} must be exactly 4 points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite coordinates")
    return arr


def _has_collinear_triple(pts: np.ndarray) -> bool:
    scale = max(1.0, float(np.abs(pts).max()))
    tol = 1e-12 * scale * scale
    for a, b, c in itertools.combinations(range(len(pts)), 3):
        ab = pts[b] - pts[a]
        ac = pts[c] - pts[a]
        if abs(ab[0] * ac[1] - ab[1] * ac[0]) <= tol:
            return True
    return False


def _normalizer(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """平移到重心、缩放到平均距离 √2；返回 (T, T⁻¹)"""
    cx, cy = pts.mean(axis=0)
    spread = float(np.hypot(pts[:, 0] - cx, pts[:, 1] - cy).mean())
    s = math.sqrt(2.0) / spread
    t = np.array([[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]])
    t_inv = np.array([[1.0 / s, 0.0, cx], [0.0, 1.0 / s, cy], [0.0, 0.0, 1.0]])
    return t, t_inv


def _transform(t: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return pts * t[0, 0] + t[:2, 2]


def homography_from_points(
    src: Sequence[Sequence[float]], dst: Sequence[Sequence[float]]
) -> Homography:
    """
    四点归一化直接线性变换（DLT）

    两组点先各自平移到重心并缩放到平均距离 √2，在归一化坐标中求解
    8×8 线性方程组（h33 = 1），用扩展精度残差做一轮迭代修正，再反归一化。

    Raises:
        DegenerateGeometryError: 存在三点共线或方程组奇异
    """
    s = _as_points(src, "src")
    d = _as_points(dst, "dst")
    if _has_collinear_triple(s) or _has_collinear_triple(d):
        raise DegenerateGeometryError("Three of the four correspondence points are collinear")

    t_src, _ = _normalizer(s)
    t_dst, t_dst_inv = _normalizer(d)
    ns = _transform(t_src, s)
    nd = _transform(t_dst, d)

    a = np.zeros((8, 8), dtype=np.float64)
    b = np.zeros(8, dtype=np.float64)
    for i, ((x, y), (u, v)) in enumerate(zip(ns, nd)):
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v

    try:
        h = np.linalg.solve(a, b)
        residual = b.astype(np.longdouble) - a.astype(np.longdouble) @ h.astype(np.longdouble)
        h = h + np.linalg.solve(a, residual.astype(np.float64))
    except np.linalg.LinAlgError as e:
        raise DegenerateGeometryError("Singular homography system") from e
    normalized = np.append(h, 1.0).reshape(3, 3)
    return Homography(t_dst_inv @ normalized @ t_src)


def apply(h: Homography, p: Sequence[float]) -> Point2:
    """
    投影变换（含透视除法）

    Raises:
        DegenerateGeometryError: |w| < 1e-12（无穷远点）
    """
    m = h.matrix
    x, y = float(p[0]), float(p[1])
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) < _INFINITY_EPS:
        raise DegenerateGeometryError(f"Point ({x}, {y}) maps to infinity")
    return Point2(
        float((m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w),
        float((m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w),
    )


def warp_homography(img: GrayImage, h: Homography, out_w: int, out_h: int) -> GrayImage:
    """
    按单应变换重采样。

    h 把输出坐标映射到源图坐标；输出像素中心 (x+0.5, y+0.5) 映射后做双线性插值，
    源图像素 (i, j) 的值位于其中心 (i+0.5, j+0.5)。落在源图之外的采样读作 255。
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"out_w and out_h must be >= 1, got {out_w}x{out_h}")

    gx, gy = np.meshgrid(np.arange(out_w) + 0.5, np.arange(out_h) + 0.5)
    m = h.matrix
    w = m[2, 0] * gx + m[2, 1] * gy + m[2, 2]
    valid = np.abs(w) >= _INFINITY_EPS
    safe_w = np.where(valid, w, 1.0)
    u = (m[0, 0] * gx + m[0, 1] * gy + m[0, 2]) / safe_w
    v = (m[1, 0] * gx + m[1, 1] * gy + m[1, 2]) / safe_w

    # 外围补一圈白色，越界坐标夹到补白区域
    padded = np.pad(img.pixels.astype(np.float64), 1, constant_values=255.0)
    ph, pw = padded.shape
    valid &= np.isfinite(u) & np.isfinite(v)
    fx = np.clip(np.where(valid, u + 0.5, 0.0), 0.0, pw - 1.0)
    fy = np.clip(np.where(valid, v + 0.5, 0.0), 0.0, ph - 1.0)
    x0 = np.floor(fx)
    y0 = np.floor(fy)
    ax = fx - x0
    ay = fy - y0
    x0i = x0.astype(np.int64)
    y0i = y0.astype(np.int64)
    x1i = np.minimum(x0i + 1, pw - 1)
    y1i = np.minimum(y0i + 1, ph - 1)

    top = padded[y0i, x0i] * (1.0 - ax) + padded[y0i, x1i] * ax
    bottom = padded[y1i, x0i] * (1.0 - ax) + padded[y1i, x1i] * ax
    values = top * (1.0 - ay) + bottom * ay
    values = np.where(valid, values, 255.0)
    return GrayImage(np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8))


def warp_patch(
    img: GrayImage,
    quad: "QuadCandidate | Sequence[Sequence[float]]",
    out_w: int,
    out_h: int,
) -> GrayImage:
    """
    把四边形候选校正为 out_w × out_h 的规范图块

    规范角点 (0,0), (out_w,0), (out_w,out_h), (0,out_h) 依次对应四边形角点。

    Raises:
        DegenerateGeometryError: 退化四边形
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"out_w and out_h must be >= 1, got {out_w}x{out_h}")
    corners = getattr(quad, "corners", quad)
    canonical = [(0.0, 0.0), (float(out_w), 0.0), (float(out_w), float(out_h)), (0.0, float(out_h))]
    h = homography_from_points(canonical, corners)
    return warp_homography(img, h, out_w, out_h)


__all__ = [
    "DegenerateGeometryError",
    "Homography",
    "Point2",
    "apply",
    "homography_from_points",
    "warp_homography",
    "warp_patch",
]
