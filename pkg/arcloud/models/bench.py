"""
Bench models - 本地 / 远程延迟统计
"""

from pydantic import BaseModel, ConfigDict, Field, model_validator

TSV_HEADER = "mode\titers\tmean_ms\tp50_ms\tp95_ms\tmin_ms\tmax_ms"


class ModeStats(BaseModel):
    """单一模式（local / remote）的延迟统计（毫秒）"""

    model_config = ConfigDict(frozen=True)

    mode: str = Field(..., description="local | remote")
    iterations: int = Field(..., ge=1)
    mean_ms: float = Field(..., ge=0)
    p50_ms: float = Field(..., ge=0)
    p95_ms: float = Field(..., ge=0)
    min_ms: float = Field(..., ge=0)
    max_ms: float = Field(..., ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> "ModeStats":
        if not (self.min_ms <= self.mean_ms <= self.max_ms and self.p50_ms <= self.p95_ms):
            raise ValueError("latency stats violate min <= mean <= max or p50 <= p95")
        return self

    def tsv_row(self) -> str:
        values = (self.mean_ms, self.p50_ms, self.p95_ms, self.min_ms, self.max_ms)
        return "\t".join([self.mode, str(self.iterations), *(f"{v:.3f}" for v in values)])


class LatencyStats(BaseModel):
    """基准结果：local 必有，remote 可选"""

    model_config = ConfigDict(frozen=True)

    local: ModeStats
    remote: ModeStats | None = None

    @property
    def modes(self) -> list[ModeStats]:
        return [m for m in (self.local, self.remote) if m is not None]

    def to_tsv(self) -> str:
        """表头 + 每个模式一行（3 位小数）"""
        return "\n".join([TSV_HEADER, *(m.tsv_row() for m in self.modes)]) + "\n"
