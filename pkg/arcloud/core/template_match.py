"""
Template Match - 基于归一化互相关（NCC）的模板识别

规范图块与模板库中的每个模板逐一计算零均值 NCC：
- best_match: 穷举全部模板取最大值（与扫描顺序无关，并列取库中靠前者）
- first_match: 顺序扫描，遇到第一个达到 min_score 的模板即停止
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from arcloud.core.imaging import GrayImage, PgmFormatError, read_pgm_file

logger = logging.getLogger(__name__)

DEFAULT_MIN_SCORE = 0.7


class TemplateError(ValueError):
    """模板错误（尺寸不一致 / 零方差 / 空库 / 标签重复）"""

    pass


class TemplateMatch(NamedTuple):
    """匹配结果"""

    label: str
    score: float


def _centered(pixels: np.ndarray) -> tuple[np.ndarray, float]:
    x = pixels.astype(np.float64)
    x = x - x.mean()
    return x, float(np.sqrt((x * x).sum()))


def ncc(a: GrayImage | np.ndarray, b: GrayImage | np.ndarray) -> float:
    """
    零均值归一化互相关

    Σ(a−ā)(b−b̄) / sqrt(Σ(a−ā)²·Σ(b−b̄)²)，64 位浮点计算，结果夹到 [−1, 1]。
    也接受实数数组（用于仿射不变性等性质检查）。

    Raises:
        TemplateError: 尺寸不一致或任一输入方差为零
    """
    pa = a.pixels if isinstance(a, GrayImage) else np.asarray(a)
    pb = b.pixels if isinstance(b, GrayImage) else np.asarray(b)
    if pa.shape != pb.shape:
        raise TemplateError(f"ncc dimension mismatch: {pa.shape} vs {pb.shape}")
    xa, na = _centered(pa)
    xb, nb = _centered(pb)
    if na == 0.0 or nb == 0.0:
        raise TemplateError("ncc undefined for zero-variance input")
    score = float((xa * xb).sum() / (na * nb))
    return max(-1.0, min(1.0, score))


@dataclass(frozen=True)
class Template:
    """带标签的模板（非零方差的规范图块）"""

    label: str
    image: GrayImage

    def __post_init__(self) -> None:
        if not self.label:
            raise TemplateError("template label must not be empty")
        if int(self.image.pixels.min()) == int(self.image.pixels.max()):
            raise TemplateError(f"template {self.label!r} has zero variance")


@dataclass(frozen=True)
class TemplateLibrary:
    """
    有序模板库

    Attributes:
        templates: 模板（标签唯一、尺寸一致）
        min_score: 接受阈值
    """

    templates: tuple[Template, ...] = field(default_factory=tuple)
    min_score: float = DEFAULT_MIN_SCORE

    def __post_init__(self) -> None:
        object.__setattr__(self, "templates", tuple(self.templates))
        labels = [t.label for t in self.templates]
        if len(set(labels)) != len(labels):
            raise TemplateError("template labels must be unique")
        sizes = {(t.image.width, t.image.height) for t in self.templates}
        if len(sizes) > 1:
            raise TemplateError(f"templates have inconsistent sizes: {sorted(sizes)}")
        if not -1.0 <= self.min_score <= 1.0:
            raise ValueError(f"min_score must be in [-1, 1], got {self.min_score}")

    def __len__(self) -> int:
        return len(self.templates)

    @property
    def labels(self) -> list[str]:
        return [t.label for t in self.templates]

    @property
    def size(self) -> tuple[int, int] | None:
        """模板尺寸 (w, h)，空库为 None"""
        if not self.templates:
            return None
        img = self.templates[0].image
        return img.width, img.height


def load_library(directory: Path | str, min_score: float = DEFAULT_MIN_SCORE) -> TemplateLibrary:
    """
    从目录加载模板库：*.pgm 按文件名字典序，标签 = 去掉扩展名的文件名

    Raises:
        TemplateError: 目录不存在、没有模板或模板不合法
        PgmFormatError: 模板文件损坏
    """
    path = Path(directory)
    if not path.is_dir():
        raise TemplateError(f"template directory not found: {path}")
    templates: list[Template] = []
    for file in sorted(path.glob("*.pgm"), key=lambda p: p.name):
        try:
            templates.append(Template(label=file.stem, image=read_pgm_file(file)))
        except PgmFormatError as e:
            raise PgmFormatError(f"{file.name}: {e}") from e
    if not templates:
        raise TemplateError(f"no *.pgm templates in {path}")
    logger.info(f"Loaded {len(templates)} templates from {path}")
    return TemplateLibrary(templates=tuple(templates), min_score=min_score)


def _prepare(patch: GrayImage, lib: TemplateLibrary) -> tuple[np.ndarray, float] | None:
    if not lib.templates:
        raise TemplateError("template library is empty")
    if lib.size != (patch.width, patch.height):
        raise TemplateError(
            f"patch size {patch.width}x{patch.height} does not match library size {lib.size}"
        )
    xp, np_ = _centered(patch.pixels)
    if np_ == 0.0:
        return None
    return xp, np_


def _score(prepared: tuple[np.ndarray, float], template: Template) -> float:
    xp, np_ = prepared
    xt, nt = _centered(template.image.pixels)
    return max(-1.0, min(1.0, float((xp * xt).sum() / (np_ * nt))))


def _scores(patch: GrayImage, lib: TemplateLibrary) -> Sequence[float] | None:
    prepared = _prepare(patch, lib)
    if prepared is None:
        return None
    return [_score(prepared, t) for t in lib.templates]


def best_match(patch: GrayImage, lib: TemplateLibrary) -> TemplateMatch | None:
    """
    穷举匹配：返回最高分模板（≥ min_score），并列取库中靠前者

    零方差图块没有定义的相关系数，返回 None。

    Raises:
        TemplateError: 空库或尺寸不匹配
    """
    scores = _scores(patch, lib)
    if scores is None:
        return None
    best = int(np.argmax(scores))
    score = scores[best]
    if score < lib.min_score:
        return None
    return TemplateMatch(lib.templates[best].label, score)


def first_match(patch: GrayImage, lib: TemplateLibrary) -> TemplateMatch | None:
    """顺序匹配：返回第一个分数 ≥ min_score 的模板"""
    prepared = _prepare(patch, lib)
    if prepared is None:
        return None
    for t in lib.templates:
        score = _score(prepared, t)
        if score >= lib.min_score:
            return TemplateMatch(t.label, score)
    return None


__all__ = [
    "Template",
    "TemplateError",
    "TemplateLibrary",
    "TemplateMatch",
    "best_match",
    "first_match",
    "load_library",
    "ncc",
]
