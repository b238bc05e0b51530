"""
Segmentation - 轮廓追踪、层级树、多边形近似与四边形候选

处理流程第 4 步（形态学分析）：把二值图分解为带层级的区域树，
再从中挑出"四条边围成"的潜在标记。

拓扑约定：
- 前景 8 连通，背景 4 连通（避免区域与孔洞邻接关系自相矛盾）
- 孔洞（不接触图像边界的背景连通域）是其外围区域的子节点
- 嵌套在孔洞内的前景区域是该孔洞节点的子节点
- 遍历顺序由首个边界像素的光栅顺序（先 y 后 x）决定，完全确定
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence

import numpy as np
from scipy import ndimage

from arcloud.core.geometry import Point2
from arcloud.core.imaging import BinaryImage

logger = logging.getLogger(__name__)

# Moore 邻域，从西开始顺时针（图像坐标 y 向下）
_MOORE_DIRS: tuple[tuple[int, int], ...] = (
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
)
_DIR_INDEX = {d: i for i, d in enumerate(_MOORE_DIRS)}

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class ContourKind(str, Enum):
    """轮廓类型"""

    OUTER = "outer"
    HOLE = "hole"


@dataclass(frozen=True)
class BBox:
    """包围盒（闭区间，像素坐标）"""

    min_x: int
    min_y: int
    max_x: int
    max_y: int

    def contains(self, other: "BBox") -> bool:
        return (
            self.min_x <= other.min_x
            and self.min_y <= other.min_y
            and self.max_x >= other.max_x
            and self.max_y >= other.max_y
        )


@dataclass(frozen=True)
class Contour:
    """闭合的 8 连通边界点序列（整数像素坐标），末点与首点相邻"""

    points: tuple[tuple[int, int], ...]
    kind: ContourKind = ContourKind.OUTER

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("Contour needs at least one point")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def perimeter(self) -> float:
        """闭合折线长度"""
        pts = np.asarray(self.points, dtype=np.float64)
        if len(pts) < 2:
            return 0.0
        diffs = np.diff(np.vstack([pts, pts[:1]]), axis=0)
        return float(np.hypot(diffs[:, 0], diffs[:, 1]).sum())


@dataclass
class RegionNode:
    """
    区域树节点

    Attributes:
        contour: 边界轮廓（kind 区分外轮廓/孔洞）
        children: 孔洞或嵌套区域
        pixel_count: 区域自身像素数（外轮廓 = 前景像素，孔洞 = 背景像素）
        bbox: 包围盒
    """

    contour: Contour
    children: list["RegionNode"] = field(default_factory=list)
    pixel_count: int = 0
    bbox: BBox = field(default_factory=lambda: BBox(0, 0, 0, 0))

    @property
    def kind(self) -> ContourKind:
        return self.contour.kind

    @property
    def start(self) -> tuple[int, int]:
        """首个边界像素（光栅顺序最小）"""
        return self.contour.points[0]

    def walk(self) -> Iterator["RegionNode"]:
        """先序遍历本节点及所有后代"""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class QuadCandidate:
    """
    四边形候选

    corners: 4 个亚像素角点，图像坐标中顺时针，从距原点最近的角开始
    （find_quads 负责规范化；直接构造时按给定顺序使用）
    """

    corners: tuple[Point2, Point2, Point2, Point2]
    perimeter: float
    area: float

    @classmethod
    def from_corners(cls, corners: Sequence[Sequence[float]]) -> "QuadCandidate":
        if len(corners) != 4:
            raise ValueError(f"QuadCandidate needs exactly 4 corners, got {len(corners)}")
        pts = tuple(Point2(float(c[0]), float(c[1])) for c in corners)
        arr = np.asarray(pts, dtype=np.float64)
        return cls(
            corners=pts,  # type: ignore[arg-type]
            perimeter=_polygon_perimeter(arr),
            area=abs(_signed_area(arr)),
        )

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        xs = [p.x for p in self.corners]
        ys = [p.y for p in self.corners]
        return min(xs), min(ys), max(xs), max(ys)


# === 轮廓追踪 ===


def _moore_trace(mask: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """
    Moore 邻域边界追踪（顺时针）。

    mask 四周需有一圈 False 填充；start 必须是光栅顺序第一个前景像素，
    因此其西侧邻居一定是背景。当再次从起点走向第二个点时停止。
    """
    sx, sy = start
    contour = [start]
    cx, cy = sx, sy
    back = 0  # 回溯方向：西
    second: tuple[int, int] | None = None

    while True:
        found = False
        for k in range(1, 9):
            nd = (back + k) % 8
            dx, dy = _MOORE_DIRS[nd]
            nx, ny = cx + dx, cy + dy
            if mask[ny, nx]:
                found = True
                break
        if not found:
            return contour  # 孤立像素

        pdx, pdy = _MOORE_DIRS[(back + k - 1) % 8]
        px, py = cx + pdx, cy + pdy
        if (cx, cy) == start:
            if second is None:
                second = (nx, ny)
            elif (nx, ny) == second:
                break
        back = _DIR_INDEX[(px - nx, py - ny)]
        cx, cy = nx, ny
        contour.append((cx, cy))

    # 最后一次追加的是回到起点
    return contour[:-1]


def _first_pixel(component: np.ndarray) -> tuple[int, int]:
    ys, xs = np.nonzero(component)
    i = int(np.lexsort((xs, ys))[0])
    return int(xs[i]), int(ys[i])


def _trace_component(component: np.ndarray, offset: tuple[int, int]) -> list[tuple[int, int]]:
    """追踪裁剪后单一连通域的边界，返回全图坐标"""
    padded = np.pad(component, 1, constant_values=False)
    fx, fy = _first_pixel(component)
    local = _moore_trace(padded, (fx + 1, fy + 1))
    ox, oy = offset
    return [(x - 1 + ox, y - 1 + oy) for x, y in local]


def trace_contours(img: BinaryImage) -> list[RegionNode]:
    """
    轮廓追踪 + 层级构建

    Returns:
        顶层区域列表（每个 8 连通前景区域一个节点，孔洞为子节点），
        按首个边界像素的光栅顺序排列；空图返回 []
    """
    mask = img.mask
    fg_labels, n_fg = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if n_fg == 0:
        return []
    bg_labels, n_bg = ndimage.label(~mask)

    h, w = mask.shape
    border_bg = set(np.unique(np.concatenate([
        bg_labels[0, :], bg_labels[-1, :], bg_labels[:, 0], bg_labels[:, -1],
    ])).tolist())
    border_bg.discard(0)

    fg_counts = np.bincount(fg_labels.ravel(), minlength=n_fg + 1)
    bg_counts = np.bincount(bg_labels.ravel(), minlength=n_bg + 1)

    def build(labels: np.ndarray, label: int, slc: tuple[slice, slice], kind: ContourKind,
              count: int) -> RegionNode:
        ys, xs = slc
        component = labels[slc] == label
        points = _trace_component(component, (xs.start, ys.start))
        return RegionNode(
            contour=Contour(tuple(points), kind),
            pixel_count=count,
            bbox=BBox(xs.start, ys.start, xs.stop - 1, ys.stop - 1),
        )

    outer_nodes: dict[int, RegionNode] = {}
    for label, slc in enumerate(ndimage.find_objects(fg_labels), start=1):
        if slc is None:
            continue
        outer_nodes[label] = build(fg_labels, label, slc, ContourKind.OUTER, int(fg_counts[label]))

    hole_nodes: dict[int, RegionNode] = {}
    for label, slc in enumerate(ndimage.find_objects(bg_labels), start=1):
        if slc is None or label in border_bg:
            continue
        node = build(bg_labels, label, slc, ContourKind.HOLE, int(bg_counts[label]))
        hole_nodes[label] = node
        # 孔洞首像素的上邻居必是包围它的前景
        hx, hy = node.start
        outer_nodes[int(fg_labels[hy - 1, hx])].children.append(node)

    roots: list[RegionNode] = []
    for label, node in outer_nodes.items():
        x, y = node.start
        parent_bg = int(bg_labels[y - 1, x]) if y > 0 else 0
        if parent_bg in hole_nodes:
            hole_nodes[parent_bg].children.append(node)
        else:
            roots.append(node)

    def raster_key(node: RegionNode) -> tuple[int, int]:
        return node.start[1], node.start[0]

    for node in list(outer_nodes.values()) + list(hole_nodes.values()):
        node.children.sort(key=raster_key)
    roots.sort(key=raster_key)

    logger.debug(f"trace_contours: {n_fg} regions, {len(hole_nodes)} holes, {len(roots)} roots")
    return roots


def iter_regions(nodes: Sequence[RegionNode], kind: ContourKind | None = None) -> Iterator[RegionNode]:
    """把区域树展平（先序），可按类型过滤"""
    for root in nodes:
        for node in root.walk():
            if kind is None or node.kind == kind:
                yield node


# === 多边形近似 ===


def _point_segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    rel = points - a
    if denom == 0.0:
        return np.hypot(rel[:, 0], rel[:, 1])
    t = np.clip((rel @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = points - proj
    return np.hypot(d[:, 0], d[:, 1])


def _rdp_open(points: np.ndarray, eps: float) -> list[int]:
    """开折线 Ramer–Douglas–Peucker，返回保留点下标（含两端）"""
    n = len(points)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[n - 1] = True
    stack = [(0, n - 1)]
    while stack:
        s, e = stack.pop()
        if e <= s + 1:
            continue
        dists = _point_segment_distances(points[s + 1 : e], points[s], points[e])
        i = int(np.argmax(dists))
        if dists[i] > eps:
            idx = s + 1 + i
            keep[idx] = True
            stack.append((s, idx))
            stack.append((idx, e))
    return [int(i) for i in np.flatnonzero(keep)]


def _convex_hull_indices(points: np.ndarray) -> list[int]:
    """Andrew 单调链凸包，返回每个不同点首次出现的下标"""
    first_index: dict[tuple[float, float], int] = {}
    for i, (x, y) in enumerate(points.tolist()):
        first_index.setdefault((x, y), i)
    unique = sorted(first_index)
    if len(unique) <= 2:
        return [first_index[p] for p in unique]

    def cross(o: tuple[float, float], a: tuple[float, float], b: tuple[float, float]) -> float:
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in unique:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(unique):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return [first_index[p] for p in lower[:-1] + upper[:-1]]


def polygon_approx(contour: Contour, eps: float) -> list[tuple[int, int]]:
    """
    闭合轮廓的 RDP 近似。

    在互相最远的两点处切开轮廓，分别化简两段弧；结果是原轮廓点的子序列（按轮廓顺序），
    每个原始点到结果多边形的距离都不超过 eps。
    """
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    pts = np.asarray(contour.points, dtype=np.float64)
    n = len(pts)
    if n <= 2:
        return list(contour.points)

    hull = sorted(_convex_hull_indices(pts))
    best = (-1.0, 0, 0)
    if len(hull) >= 2:
        hp = pts[hull]
        d2 = ((hp[:, None, :] - hp[None, :, :]) ** 2).sum(axis=2)
        for a in range(len(hull)):
            for b in range(a + 1, len(hull)):
                if d2[a, b] > best[0]:
                    best = (float(d2[a, b]), hull[a], hull[b])
    _, i, j = best
    if i == j:
        return [contour.points[0]]

    arc1 = pts[i : j + 1]
    arc2 = np.vstack([pts[j:], pts[: i + 1]])
    kept = {i + k for k in _rdp_open(arc1, eps)}
    kept |= {(j + k) % n for k in _rdp_open(arc2, eps)}
    return [contour.points[k] for k in sorted(kept)]


# === 四边形候选 ===


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _polygon_perimeter(poly: np.ndarray) -> float:
    d = np.roll(poly, -1, axis=0) - poly
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def _is_strictly_convex_clockwise(poly: np.ndarray) -> bool:
    """图像坐标（y 向下）中顺时针 ⇔ 相邻边叉积全部 > 0"""
    e1 = np.roll(poly, -1, axis=0) - poly
    e2 = np.roll(e1, -1, axis=0)
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    return bool(np.all(cross > 0))


def _offset_outward(poly: np.ndarray, distance: float) -> np.ndarray | None:
    """顺时针凸多边形各边向外平移 distance 后求相邻边交点"""
    n = len(poly)
    lines = []
    for k in range(n):
        a, b = poly[k], poly[(k + 1) % n]
        d = b - a
        length = math.hypot(d[0], d[1])
        if length == 0:
            return None
        # 顺时针（y 向下）时外法线为 (d.y, -d.x)
        normal = np.array([d[1], -d[0]]) / length
        lines.append((a + normal * distance, d))
    out = np.empty_like(poly)
    for k in range(n):
        p1, d1 = lines[k - 1]
        p2, d2 = lines[k]
        det = d1[0] * (-d2[1]) - d1[1] * (-d2[0])
        if abs(det) < 1e-12:
            return None
        rhs = p2 - p1
        t = (rhs[0] * (-d2[1]) - rhs[1] * (-d2[0])) / det
        out[k] = p1 + t * d1
    return out


def _normalize_corner_order(poly: np.ndarray) -> np.ndarray:
    """顺时针，从距原点最近的角开始（并列时取 y 小、x 小者）"""
    if _signed_area(poly) < 0:
        poly = poly[::-1].copy()
    keys = [(float(p[0] ** 2 + p[1] ** 2), float(p[1]), float(p[0])) for p in poly]
    start = min(range(len(poly)), key=keys.__getitem__)
    return np.roll(poly, -start, axis=0)


def find_quads(
    nodes: Sequence[RegionNode],
    min_area: float = 100.0,
    eps_frac: float = 0.05,
) -> list[QuadCandidate]:
    """
    从区域树中挑出四边形候选（遍历展平后的外轮廓）。

    条件：eps = eps_frac·周长 的近似恰好 4 个顶点、严格凸、面积 ≥ min_area。
    角点从边界像素中心外移半个像素，落在像素外边缘上。
    """
    quads: list[QuadCandidate] = []
    for node in iter_regions(nodes, ContourKind.OUTER):
        contour = node.contour
        if len(contour) < 4:
            continue
        perimeter = contour.perimeter
        if perimeter <= 0:
            continue
        vertices = polygon_approx(contour, eps_frac * perimeter)
        if len(vertices) != 4:
            continue
        poly = np.asarray(vertices, dtype=np.float64) + 0.5
        if _signed_area(poly) < 0:
            poly = poly[::-1].copy()
        if not _is_strictly_convex_clockwise(poly):
            continue
        edged = _offset_outward(poly, 0.5)
        if edged is None or not _is_strictly_convex_clockwise(edged):
            continue
        area = abs(_signed_area(edged))
        if area < min_area:
            continue
        quads.append(QuadCandidate.from_corners(_normalize_corner_order(edged).tolist()))
    logger.debug(f"find_quads: {len(quads)} candidates")
    return quads


# === 区域像素 ===


def region_mask(node: RegionNode, img: BinaryImage) -> tuple[np.ndarray, int, int]:
    """
    取回节点自身的像素掩码（裁剪到包围盒）。

    Returns:
        (mask, x0, y0)：mask[y, x] 对应全图像素 (x0 + x, y0 + y)
    """
    b = node.bbox
    crop = img.mask[b.min_y : b.max_y + 1, b.min_x : b.max_x + 1]
    if node.kind == ContourKind.OUTER:
        labels, _ = ndimage.label(crop, structure=_EIGHT_CONNECTED)
    else:
        labels, _ = ndimage.label(~crop)
    sx, sy = node.start
    label = labels[sy - b.min_y, sx - b.min_x]
    if label == 0:
        raise ValueError("Region node does not match the image it is evaluated on")
    return labels == label, b.min_x, b.min_y


def centroid(node: RegionNode, img: BinaryImage) -> Point2:
    """
    区域重心：所有自身像素坐标的算术平均（孔洞不计入质量）

    Raises:
        ValueError: 空区域
    """
    if node.pixel_count < 1:
        raise ValueError("centroid of an empty region")
    mask, x0, y0 = region_mask(node, img)
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise ValueError("centroid of an empty region")
    return Point2(float(xs.mean()) + x0, float(ys.mean()) + y0)


__all__ = [
    "BBox",
    "Contour",
    "ContourKind",
    "QuadCandidate",
    "RegionNode",
    "centroid",
    "find_quads",
    "iter_regions",
    "polygon_approx",
    "region_mask",
    "trace_contours",
]
