"""
Detection models - 识别结果

MarkerDetection / ShapeDetection / TemplateDetection 在本地流水线、
线协议和 CLI 输出之间共享。实数坐标在线协议上以 32 位浮点传输，
因此文本输出统一先转为 float32 再格式化，保证本地与远程输出逐字节一致。
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


def f32(value: float) -> float:
    """按 32 位浮点舍入"""
    return float(np.float32(value))


class MarkerDetection(BaseModel):
    """标记检测结果"""

    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=0, le=4095, description="标记 ID")
    corners: tuple[
        tuple[float, float], tuple[float, float], tuple[float, float], tuple[float, float]
    ] = Field(..., description="图像坐标角点（顺时针，从距原点最近的角开始）")
    rotation: int = Field(..., ge=0, le=3, description="解码前施加的顺时针 90° 旋转次数")
    corrected_bits: int = Field(..., ge=0, le=3, description="纠正的位数")

    def tsv_row(self) -> str:
        """id  rotation  corrected  x0  y0 … x3  y3（坐标 2 位小数）"""
        coords = [f"{f32(v):.2f}" for corner in self.corners for v in corner]
        return "\t".join([str(self.id), str(self.rotation), str(self.corrected_bits), *coords])

    def as_wire_values(self) -> "MarkerDetection":
        """坐标舍入为 32 位浮点后的副本"""
        corners = tuple((f32(x), f32(y)) for x, y in self.corners)
        return self.model_copy(update={"corners": corners})


class ShapeDetection(BaseModel):
    """形状识别结果"""

    model_config = ConfigDict(frozen=True)

    label: str = Field(..., description="类别")
    confidence: float = Field(..., ge=0.0, le=1.0, description="置信度")
    centroid: tuple[float, float] = Field(..., description="区域重心")
    pixel_count: int = Field(..., ge=1, description="区域像素数")


class TemplateDetection(BaseModel):
    """画面中的模板匹配结果"""

    model_config = ConfigDict(frozen=True)

    label: str
    score: float = Field(..., ge=-1.0, le=1.0)
    corners: tuple[
        tuple[float, float], tuple[float, float], tuple[float, float], tuple[float, float]
    ]


def format_label_score(label: str, value: float) -> str:
    """label\\t值（4 位小数，32 位浮点）"""
    return f"{label}\t{f32(value):.4f}"
