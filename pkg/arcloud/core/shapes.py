"""
Shapes - 合成五类形状数据（圆盘 / 正方形 / 三角形 / 十字 / 圆环）

用于形状分类器的训练与验收：
- render_shape: 任意旋转、尺度下的形状掩码
- make_shape_samples: 种子确定的随机样本
- write_training_dir / load_training_dir: 训练目录（每类一个子目录，PGM 掩码）
- rotate_mask: 训练时的旋转增广
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import ndimage

from arcloud.core.imaging import BinaryImage, GrayImage, read_pgm_file, threshold_global, write_pgm_file
from arcloud.core.segmentation import trace_contours
from arcloud.core.shape_mlp import (
    DatasetFormatError,
    EmptyRegionError,
    FlagVector,
    LabeledDataset,
    SplitMix64,
    canonicalize,
    extract_flag_vector,
)
from arcloud.models.settings import FlagMode

logger = logging.getLogger(__name__)

SHAPE_LABELS: tuple[str, ...] = ("disc", "square", "triangle", "cross", "ring")
MASK_THRESHOLD = 128


def _inside(kind: str, qx: np.ndarray, qy: np.ndarray, size: float) -> np.ndarray:
    half = size / 2.0
    if kind == "disc":
        return qx * qx + qy * qy <= half * half
    if kind == "square":
        return (np.abs(qx) <= half) & (np.abs(qy) <= half)
    if kind == "triangle":
        # 外接圆半径 size/2，顶点朝上；三条边到中心的距离 = 内切圆半径 size/4
        inside = np.ones(qx.shape, dtype=bool)
        for angle in (90.0, 210.0, 330.0):
            a = math.radians(angle)
            inside &= qx * math.cos(a) + qy * math.sin(a) <= half / 2.0
        return inside
    if kind == "cross":
        arm = size / 6.0
        return ((np.abs(qx) <= half) & (np.abs(qy) <= arm)) | (
            (np.abs(qy) <= half) & (np.abs(qx) <= arm)
        )
    if kind == "ring":
        r2 = qx * qx + qy * qy
        return (r2 <= half * half) & (r2 >= (half / 2.0) ** 2)
    raise ValueError(f"Unknown shape kind: {kind}")


def render_shape(
    kind: str,
    size: float,
    angle_deg: float = 0.0,
    canvas: tuple[int, int] | None = None,
    center: tuple[float, float] | None = None,
) -> BinaryImage:
    """
    光栅化形状掩码（像素中心采样）

    Args:
        kind: SHAPE_LABELS 之一
        size: 形状跨度（px）
        angle_deg: 旋转角度（顺时针，图像坐标）
        canvas: (w, h)，缺省为留有边距的正方形
        center: 形状中心（连续坐标），缺省为画布中心
    """
    if kind not in SHAPE_LABELS:
        raise ValueError(f"Unknown shape kind: {kind}")
    if size <= 0:
        raise ValueError(f"size must be > 0, got {size}")
    if canvas is None:
        side = int(math.ceil(size * 1.5)) + 4
        canvas = (side, side)
    w, h = canvas
    cx, cy = center if center is not None else (w / 2.0, h / 2.0)

    gx, gy = np.meshgrid(np.arange(w) + 0.5 - cx, np.arange(h) + 0.5 - cy)
    a = math.radians(angle_deg)
    # 逆旋转到形状自身坐标系
    qx = gx * math.cos(a) + gy * math.sin(a)
    qy = -gx * math.sin(a) + gy * math.cos(a)
    return BinaryImage(_inside(kind, qx, qy, size))


def mask_to_gray(mask: BinaryImage) -> GrayImage:
    """前景 = 0（黑），背景 = 255"""
    return GrayImage(np.where(mask.mask, 0, 255).astype(np.uint8))


def rotate_mask(mask: BinaryImage, angle_deg: float) -> BinaryImage:
    """最近邻旋转（画布扩展以容纳整个形状）"""
    rotated = ndimage.rotate(
        mask.mask.astype(np.uint8), angle_deg, reshape=True, order=0, mode="constant", cval=0
    )
    return BinaryImage(np.pad(rotated > 0, 2, constant_values=False))


def make_shape_samples(
    per_class: int,
    seed: int,
    size_range: tuple[float, float] = (16.0, 64.0),
    labels: Iterable[str] = SHAPE_LABELS,
) -> list[tuple[str, BinaryImage]]:
    """
    种子确定的随机样本：每类 per_class 个，旋转 U(0, 360)，尺度 U(size_range)

    顺序为按类交错（disc, square, …, disc, square, …）。
    """
    if per_class < 0:
        raise ValueError(f"per_class must be >= 0, got {per_class}")
    lo, hi = size_range
    rng = SplitMix64(seed)
    kinds = list(labels)
    samples: list[tuple[str, BinaryImage]] = []
    for _ in range(per_class):
        for kind in kinds:
            angle = 360.0 * rng.next_float()
            size = lo + (hi - lo) * rng.next_float()
            samples.append((kind, render_shape(kind, size, angle)))
    return samples


def mask_features(
    mask: BinaryImage, rays: int = 70, mode: FlagMode | str = FlagMode.EXTENT
) -> FlagVector:
    """
    掩码 → 规范化旗标向量（取最大的顶层区域）

    Raises:
        EmptyRegionError: 掩码中没有前景
    """
    roots = trace_contours(mask)
    if not roots:
        raise EmptyRegionError("mask has no foreground region")
    largest = max(roots, key=lambda node: node.pixel_count)
    return canonicalize(extract_flag_vector(mask, largest, rays, mode))


def dataset_from_masks(
    samples: Iterable[tuple[str, BinaryImage]],
    rays: int = 70,
    mode: FlagMode | str = FlagMode.EXTENT,
    labels: Iterable[str] = SHAPE_LABELS,
) -> LabeledDataset:
    """把 (标签, 掩码) 序列转换为数据集"""
    names = list(labels)
    index = {name: i for i, name in enumerate(names)}
    data = [(mask_features(mask, rays, mode), index[label]) for label, mask in samples]
    return LabeledDataset(samples=data, labels=names)


def write_training_dir(out_dir: Path | str, samples: Iterable[tuple[str, BinaryImage]]) -> int:
    """
    写出训练目录：<out>/<label>/<label>_NNNN.pgm

    Returns:
        写入的文件数
    """
    root = Path(out_dir)
    counters: dict[str, int] = {}
    for label, mask in samples:
        (root / label).mkdir(parents=True, exist_ok=True)
        n = counters.get(label, 0)
        write_pgm_file(root / label / f"{label}_{n:04d}.pgm", mask_to_gray(mask))
        counters[label] = n + 1
    total = sum(counters.values())
    logger.info(f"Wrote {total} masks to {root}")
    return total


def load_training_dir(
    data_dir: Path | str,
    rays: int = 70,
    mode: FlagMode | str = FlagMode.EXTENT,
    augment: int = 0,
    seed: int = 0,
) -> LabeledDataset:
    """
    读取训练目录（每个子目录一类，按名称排序；深色像素为前景）

    Args:
        augment: 每个掩码额外生成的随机旋转副本数

    Raises:
        DatasetFormatError: 目录中没有类别或没有掩码
        ValueError: augment < 0
        PgmFormatError / EmptyRegionError: 掩码文件不合法
    """
    root = Path(data_dir)
    class_dirs = sorted((p for p in root.iterdir() if p.is_dir()), key=lambda p: p.name)
    if not class_dirs:
        raise DatasetFormatError(f"no class subdirectories in {root}")
    if augment < 0:
        raise ValueError(f"augment must be >= 0, got {augment}")

    rng = SplitMix64(seed)
    labels = [p.name for p in class_dirs]
    samples: list[tuple[np.ndarray, int]] = []
    for cls, class_dir in enumerate(class_dirs):
        for file in sorted(class_dir.glob("*.pgm"), key=lambda p: p.name):
            mask = threshold_global(read_pgm_file(file), MASK_THRESHOLD)
            samples.append((mask_features(mask, rays, mode), cls))
            for _ in range(augment):
                rotated = rotate_mask(mask, 360.0 * rng.next_float())
                samples.append((mask_features(rotated, rays, mode), cls))
    if not samples:
        raise DatasetFormatError(f"no *.pgm masks under {root}")
    logger.info(f"Loaded {len(samples)} samples in {len(labels)} classes from {root}")
    return LabeledDataset(samples=samples, labels=labels)


__all__ = [
    "SHAPE_LABELS",
    "dataset_from_masks",
    "load_training_dir",
    "make_shape_samples",
    "mask_features",
    "mask_to_gray",
    "render_shape",
    "rotate_mask",
    "write_training_dir",
]
