"""
Settings models - 检测与训练参数

DetectConfig 同时被本地流水线、识别服务端和 YAML 配置（detect: 段）使用，
因此放在 models 层，由 pydantic 负责范围校验。
"""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator


class ThresholdMode(str, Enum):
    """二值化模式"""
    GLOBAL = "global"       # 全局阈值
    ADAPTIVE = "adaptive"   # 局部均值阈值


class FlagMode(str, Enum):
    """旗标向量射线长度定义"""
    EXTENT = "extent"       # 射线上最远的前景采样点
    COVERAGE = "coverage"   # 射线上前景总长度


class DetectConfig(BaseModel):
    """检测流水线参数"""

    model_config = ConfigDict(frozen=True, use_enum_values=True)

    threshold_mode: ThresholdMode = Field(default=ThresholdMode.ADAPTIVE, description="二值化模式")
    t: int = Field(default=128, ge=0, le=255, description="全局阈值")
    window: int = Field(default=15, ge=3, description="自适应窗口（奇数）")
    c: int = Field(default=7, description="自适应偏移")
    min_area: float = Field(default=100.0, ge=0, description="最小四边形/区域面积（px²）")
    eps_frac: float = Field(default=0.05, gt=0, le=1, description="多边形近似容差（周长比例）")
    min_contrast: float = Field(default=30.0, ge=0, le=255, description="标记黑白参考最小差值")
    max_border_errors: int = Field(default=0, ge=0, le=24, description="允许的白色边框格数")
    min_score: float = Field(default=0.7, ge=-1, le=1, description="模板匹配接受阈值")
    dedupe_iou: float = Field(default=0.5, ge=0, le=1, description="去重 IoU 阈值")
    allowed_ids: frozenset[int] | None = Field(default=None, description="已定义标记列表（可选）")
    rays: int = Field(default=70, ge=1, description="旗标向量射线数")
    flag_mode: FlagMode = Field(default=FlagMode.EXTENT, description="旗标向量模式")

    @field_validator("window")
    @classmethod
    def _odd_window(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"window must be odd, got {v}")
        return v

    @field_validator("allowed_ids")
    @classmethod
    def _valid_ids(cls, v: frozenset[int] | None) -> frozenset[int] | None:
        if v is not None and any(not 0 <= i <= 4095 for i in v):
            raise ValueError("allowed_ids must lie in 0..4095")
        return v


class TrainConfig(BaseModel):
    """MLP 训练参数"""

    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(default=0.1, gt=0, description="学习率")
    epochs: int = Field(default=500, ge=0, description="训练轮数")
    seed: int = Field(default=0, ge=0, lt=2**64, description="SplitMix64 种子")
    shuffle: bool = Field(default=True, description="每轮 Fisher-Yates 洗牌")
