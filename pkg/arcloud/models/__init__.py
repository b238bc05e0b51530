"""Data models for arcloud"""

from arcloud.models.bench import LatencyStats, ModeStats
from arcloud.models.detection import (
    MarkerDetection,
    ShapeDetection,
    TemplateDetection,
)
from arcloud.models.settings import DetectConfig, FlagMode, ThresholdMode, TrainConfig

__all__ = [
    "DetectConfig",
    "FlagMode",
    "LatencyStats",
    "MarkerDetection",
    "ModeStats",
    "ShapeDetection",
    "TemplateDetection",
    "ThresholdMode",
    "TrainConfig",
]
