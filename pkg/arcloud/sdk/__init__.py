"""
arcloud SDK - 识别服务的 Python 客户端

瘦客户端：本地只做灰度化等基础预处理，把图像或特征向量发送到识别服务。

核心类：
- RecognitionClient: 同步客户端（持久连接，可作为上下文管理器）
"""

from arcloud.sdk.recognition_client import (
    RecognitionClient,
    RemoteError,
    TransportError,
    client_request,
    parse_address,
)

__all__ = [
    "RecognitionClient",
    "RemoteError",
    "TransportError",
    "client_request",
    "parse_address",
]
