"""
Pipeline - 端到端识别流程

detect_markers:   阈值化 → 轮廓追踪 → 四边形候选 → 透视校正(56×56) → Golay 解码 → 去重 → 排序
recognize_shapes: 阈值化 → 轮廓追踪 → 顶层区域 → 旗标向量 → 规范化 → MLP 分类
match_templates:  阈值化 → 四边形候选 → 透视校正 → 模板库 NCC 匹配
"""

from __future__ import annotations

import logging
from typing import Callable, TypeVar

from arcloud.core.geometry import DegenerateGeometryError, warp_patch
from arcloud.core.golay_marker import CANONICAL_SIZE, read_canonical
from arcloud.core.imaging import BinaryImage, GrayImage, binarize
from arcloud.core.segmentation import QuadCandidate, centroid, find_quads, trace_contours
from arcloud.core.shape_mlp import DimensionError, MlpModel, canonicalize, classify, extract_flag_vector
from arcloud.core.template_match import TemplateLibrary, best_match
from arcloud.models.detection import MarkerDetection, ShapeDetection, TemplateDetection
from arcloud.models.settings import DetectConfig, ThresholdMode

logger = logging.getLogger(__name__)

T = TypeVar("T")


def _binarize(img: GrayImage, cfg: DetectConfig) -> BinaryImage:
    return binarize(img, ThresholdMode(cfg.threshold_mode).value, t=cfg.t, window=cfg.window, c=cfg.c)


def _quads(img: GrayImage, cfg: DetectConfig) -> list[QuadCandidate]:
    roots = trace_contours(_binarize(img, cfg))
    return find_quads(roots, min_area=cfg.min_area, eps_frac=cfg.eps_frac)


def bbox_iou(a: QuadCandidate, b: QuadCandidate) -> float:
    """两个四边形包围盒的交并比"""
    ax0, ay0, ax1, ay1 = a.bbox
    bx0, by0, bx1, by1 = b.bbox
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union if union > 0 else 0.0


def _dedupe(
    items: list[tuple[T, QuadCandidate]],
    rank: Callable[[tuple[T, QuadCandidate]], tuple[float, ...]],
    iou: float,
) -> list[tuple[T, QuadCandidate]]:
    """按 rank 贪心保留，与已保留候选 IoU > iou 的丢弃；结果按首角点 (y, x) 排序"""
    kept: list[tuple[T, QuadCandidate]] = []
    for item in sorted(items, key=rank):
        if all(bbox_iou(item[1], other) <= iou for _, other in kept):
            kept.append(item)
    kept.sort(key=lambda it: (it[1].corners[0].y, it[1].corners[0].x))
    return kept


def detect_markers(img: GrayImage, cfg: DetectConfig | None = None) -> list[MarkerDetection]:
    """
    检测图像中的全部 Golay 标记

    重叠（包围盒 IoU > dedupe_iou）的检测只保留纠错位数最少者，并列取面积大者。
    设置了 allowed_ids 时丢弃不在列表中的 id。
    """
    cfg = cfg or DetectConfig()
    found: list[tuple[MarkerDetection, QuadCandidate]] = []
    for quad in _quads(img, cfg):
        try:
            patch = warp_patch(img, quad, CANONICAL_SIZE, CANONICAL_SIZE)
        except DegenerateGeometryError:
            continue
        read = read_canonical(patch, cfg.min_contrast, cfg.max_border_errors)
        if read is None:
            continue
        if cfg.allowed_ids is not None and read.id not in cfg.allowed_ids:
            logger.debug(f"Dropping marker {read.id}: not in allowed_ids")
            continue
        detection = MarkerDetection(
            id=read.id,
            corners=tuple((p.x, p.y) for p in quad.corners),  # type: ignore[arg-type]
            rotation=read.rotation,
            corrected_bits=read.corrected,
        )
        found.append((detection, quad))

    kept = _dedupe(found, lambda it: (it[0].corrected_bits, -it[1].area), cfg.dedupe_iou)
    logger.debug(f"detect_markers: {len(found)} decoded, {len(kept)} after dedupe")
    return [d for d, _ in kept]


def recognize_shapes(
    img: GrayImage, cfg: DetectConfig | None, model: MlpModel
) -> list[ShapeDetection]:
    """
    对每个 pixel_count ≥ min_area 的顶层区域做形状分类，按面积降序

    Raises:
        DimensionError: 模型输入维度 ≠ 射线数
    """
    cfg = cfg or DetectConfig()
    if model.input_dim != cfg.rays:
        raise DimensionError(f"model input dim {model.input_dim} != ray count {cfg.rays}")
    binary = _binarize(img, cfg)
    results: list[ShapeDetection] = []
    for node in trace_contours(binary):
        if node.pixel_count < cfg.min_area:
            continue
        vector = canonicalize(extract_flag_vector(binary, node, cfg.rays, cfg.flag_mode))
        label, confidence = classify(model, vector)
        c = centroid(node, binary)
        results.append(
            ShapeDetection(
                label=label,
                confidence=confidence,
                centroid=(c.x, c.y),
                pixel_count=node.pixel_count,
            )
        )
    results.sort(key=lambda d: -d.pixel_count)
    return results


def match_templates(
    img: GrayImage, cfg: DetectConfig | None, lib: TemplateLibrary
) -> list[TemplateDetection]:
    """在画面的四边形候选上做模板匹配，去重规则同 detect_markers（以分数代替纠错位数）"""
    cfg = cfg or DetectConfig()
    size = lib.size
    if size is None:
        return []
    w, h = size
    found: list[tuple[TemplateDetection, QuadCandidate]] = []
    for quad in _quads(img, cfg):
        try:
            patch = warp_patch(img, quad, w, h)
        except DegenerateGeometryError:
            continue
        match = best_match(patch, lib)
        if match is None:
            continue
        found.append(
            (
                TemplateDetection(
                    label=match.label,
                    score=match.score,
                    corners=tuple((p.x, p.y) for p in quad.corners),  # type: ignore[arg-type]
                ),
                quad,
            )
        )
    kept = _dedupe(found, lambda it: (-it[0].score, -it[1].area), cfg.dedupe_iou)
    return [d for d, _ in kept]


__all__ = ["bbox_iou", "detect_markers", "match_templates", "recognize_shapes"]
