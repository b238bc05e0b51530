"""
RecognitionClient - arcloud 识别服务客户端

同步接口，一个实例维护一条 TCP 连接，请求按顺序发送。

使用示例：
    from arcloud.sdk import RecognitionClient

    with RecognitionClient("127.0.0.1", 7700) as client:
        for d in client.detect(image):
            print(d.id, d.corners)
"""

from __future__ import annotations

import logging
import socket
from typing import Optional, Sequence

import numpy as np

from arcloud.config import get_config
from arcloud.core.imaging import GrayImage
from arcloud.models.detection import MarkerDetection
from arcloud.services.protocol import (
    Frame,
    FrameType,
    PayloadError,
    ProtocolError,
    decode_classification,
    decode_detections,
    decode_error,
    encode_frame,
    encode_image,
    encode_vector,
    recv_frame,
    response_type,
)

logger = logging.getLogger(__name__)


class TransportError(Exception):
    """连接失败、超时或连接被关闭"""

    pass


class RemoteError(Exception):
    """服务端返回 ERROR 帧"""

    def __init__(self, code: int, message: str):
        super().__init__(f"remote error {code}: {message}")
        self.code = code
        self.message = message


def parse_address(address: str, default_port: Optional[int] = None) -> tuple[str, int]:
    """
    解析 HOST[:PORT]；缺省端口取 default_port 或配置中的 port（ARC_PORT）

    Raises:
        ValueError: 端口不是 1..65535 的整数
    """
    host, sep, port_text = address.rpartition(":")
    if not sep:
        host, port_text = address, ""
    host = host or "127.0.0.1"
    if not port_text:
        return host, default_port if default_port is not None else get_config().port
    try:
        port = int(port_text)
    except ValueError as e:
        raise ValueError(f"invalid port in address {address!r}") from e
    if not 1 <= port <= 65535:
        raise ValueError(f"port out of range in address {address!r}")
    return host, port


class RecognitionClient:
    """
    识别服务客户端

    - 首次请求时建立连接，之后复用
    - 默认超时 client_timeout（10 秒）
    - 传输层问题抛 TransportError，服务端 ERROR 帧抛 RemoteError
    """

    def __init__(
        self,
        host: Optional[str] = None,
        port: Optional[int] = None,
        timeout: Optional[float] = None,
    ):
        config = get_config()
        self.host = host or config.host
        self.port = port if port is not None else config.port
        self.timeout = timeout if timeout is not None else config.client_timeout
        self._sock: Optional[socket.socket] = None

    @classmethod
    def from_address(cls, address: str, timeout: Optional[float] = None) -> "RecognitionClient":
        host, port = parse_address(address)
        return cls(host, port, timeout)

    # === 连接管理 ===

    def connect(self) -> None:
        if self._sock is not None:
            return
        try:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        except OSError as e:
            raise TransportError(f"cannot connect to {self.host}:{self.port}: {e}") from e
        logger.debug(f"Connected to {self.host}:{self.port}")

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def __enter__(self) -> "RecognitionClient":
        self.connect()
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    # === 请求 ===

    def request(self, frame_type: int, payload: bytes = b"") -> Frame:
        """
        发送一个请求并等待响应

        Raises:
            TransportError: 连接 / 超时 / 帧错误
            RemoteError: 服务端返回 ERROR
        """
        self.connect()
        assert self._sock is not None
        try:
            self._sock.sendall(encode_frame(frame_type, payload))
            response = recv_frame(self._sock)
        except (OSError, ProtocolError) as e:
            self.close()
            raise TransportError(f"request to {self.host}:{self.port} failed: {e}") from e

        if response.is_error:
            try:
                code, message = decode_error(response.payload)
            except PayloadError as e:
                raise TransportError(f"malformed ERROR frame: {e}") from e
            raise RemoteError(code, message)
        if response.type != response_type(frame_type):
            self.close()
            raise TransportError(
                f"unexpected response type 0x{response.type:02x} for request 0x{frame_type:02x}"
            )
        return response

    def _decode_label(self, frame: Frame) -> tuple[str, float]:
        try:
            return decode_classification(frame.payload)
        except PayloadError as e:
            raise TransportError(f"malformed response: {e}") from e

    def ping(self) -> None:
        self.request(FrameType.PING)

    def detect(self, img: GrayImage) -> list[MarkerDetection]:
        frame = self.request(FrameType.DETECT_MARKERS, encode_image(img))
        try:
            return decode_detections(frame.payload)
        except PayloadError as e:
            raise TransportError(f"malformed response: {e}") from e

    def classify_vector(self, vector: Sequence[float] | np.ndarray) -> tuple[str, float]:
        return self._decode_label(self.request(FrameType.CLASSIFY_VECTOR, encode_vector(vector)))

    def classify_image(self, img: GrayImage) -> tuple[str, float]:
        """最大区域的分类；没有合格区域时返回 ("", 0.0)"""
        return self._decode_label(self.request(FrameType.CLASSIFY_IMAGE, encode_image(img)))

    def match_patch(self, patch: GrayImage) -> tuple[str, float]:
        """规范图块的模板匹配；没有达到阈值的模板时返回 ("", 0.0)"""
        return self._decode_label(self.request(FrameType.MATCH_PATCH, encode_image(patch)))


def client_request(
    address: str, frame_type: int, payload: bytes = b"", timeout: Optional[float] = None
) -> Frame:
    """单次请求：建立连接、发送、接收、关闭"""
    with RecognitionClient.from_address(address, timeout) as client:
        return client.request(frame_type, payload)


__all__ = [
    "RecognitionClient",
    "RemoteError",
    "TransportError",
    "client_request",
    "parse_address",
]
