"""arcloud - 人工标记与形状识别工具包（支持云端卸载）"""

__version__ = "1.0.0"
