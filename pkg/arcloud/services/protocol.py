"""
Protocol - 识别服务线协议（长度前缀二进制帧，全部大端）

帧：magic "ARC1" | type:u8 | payload_len:u32 | payload
请求类型：
    0x01 DETECT_MARKERS   w:u16 h:u16 + w·h 灰度字节
    0x02 CLASSIFY_VECTOR  dim:u16 + dim 个 f32
    0x03 CLASSIFY_IMAGE   同 DETECT_MARKERS
    0x04 MATCH_PATCH      同 DETECT_MARKERS（规范图块）
    0x05 PING             空
响应类型 = 请求 | 0x80；0xFF ERROR = code:u8 msg_len:u16 + UTF-8
"""

from __future__ import annotations

import asyncio
import socket
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np
from pydantic import ValidationError

from arcloud.core.imaging import GrayImage
from arcloud.models.detection import MarkerDetection, f32

MAGIC = b"ARC1"
HEADER = struct.Struct(">4sBI")
MAX_PAYLOAD = 16 * 1024 * 1024
RESPONSE_FLAG = 0x80

_IMAGE_HEAD = struct.Struct(">HH")
_DETECTION = struct.Struct(">HBB8f")
_ERROR_HEAD = struct.Struct(">BH")


class FrameType(IntEnum):
    """帧类型"""
    DETECT_MARKERS = 0x01
    CLASSIFY_VECTOR = 0x02
    CLASSIFY_IMAGE = 0x03
    MATCH_PATCH = 0x04
    PING = 0x05
    ERROR = 0xFF


class ErrorCode(IntEnum):
    """ERROR 帧错误码"""
    MALFORMED = 1       # 帧或负载格式错误
    UNSUPPORTED = 2     # 未知请求类型
    INTERNAL = 3        # 服务端内部错误
    MODEL_MISSING = 4   # 模型 / 模板库未加载


class ProtocolError(ValueError):
    """帧级错误"""

    pass


class BadMagicError(ProtocolError):
    """magic 不是 ARC1"""

    pass


class OversizeFrameError(ProtocolError):
    """payload_len 超过 16 MiB"""

    pass


class TruncatedFrameError(ProtocolError):
    """数据不足一个完整帧"""

    pass


class PayloadError(ValueError):
    """负载内容不合法（帧本身完好）"""

    pass


@dataclass(frozen=True)
class Frame:
    type: int
    payload: bytes = b""

    @property
    def is_error(self) -> bool:
        return self.type == FrameType.ERROR


def response_type(request_type: int) -> int:
    return request_type | RESPONSE_FLAG


# === 帧 ===


def encode_frame(frame_type: int, payload: bytes = b"") -> bytes:
    """
    编码一帧

    Raises:
        OversizeFrameError: 负载超过 16 MiB
    """
    if len(payload) > MAX_PAYLOAD:
        raise OversizeFrameError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    if not 0 <= frame_type <= 0xFF:
        raise ValueError(f"frame type must fit in one byte, got {frame_type}")
    return HEADER.pack(MAGIC, frame_type, len(payload)) + payload


def parse_header(header: bytes) -> tuple[int, int]:
    """
    解析 9 字节帧头

    Returns:
        (type, payload_len)
    """
    if len(header) < HEADER.size:
        raise TruncatedFrameError(f"frame header needs {HEADER.size} bytes, got {len(header)}")
    magic, frame_type, length = HEADER.unpack(header[: HEADER.size])
    if magic != MAGIC:
        raise BadMagicError(f"bad frame magic {magic!r}")
    if length > MAX_PAYLOAD:
        raise OversizeFrameError(f"payload length {length} exceeds {MAX_PAYLOAD}")
    return frame_type, length


def decode_frame(data: bytes) -> Frame:
    """
    解码一个完整帧（多余的尾部字节视为错误）

    Raises:
        BadMagicError / OversizeFrameError / TruncatedFrameError
    """
    frame_type, length = parse_header(data)
    end = HEADER.size + length
    if len(data) < end:
        raise TruncatedFrameError(f"frame payload needs {length} bytes, got {len(data) - HEADER.size}")
    if len(data) > end:
        raise ProtocolError(f"{len(data) - end} trailing bytes after frame")
    return Frame(frame_type, bytes(data[HEADER.size : end]))


async def read_frame(reader: asyncio.StreamReader) -> Frame | None:
    """
    从流中读取一帧；对端在帧边界处关闭时返回 None

    Raises:
        ProtocolError: 帧头非法或帧中途断开
    """
    try:
        header = await reader.readexactly(HEADER.size)
    except asyncio.IncompleteReadError as e:
        if not e.partial:
            return None
        raise TruncatedFrameError("connection closed inside a frame header") from e
    frame_type, length = parse_header(header)
    try:
        payload = await reader.readexactly(length)
    except asyncio.IncompleteReadError as e:
        raise TruncatedFrameError("connection closed inside a frame payload") from e
    return Frame(frame_type, payload)


def _recv_exactly(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(min(remaining, 1 << 16))
        if not chunk:
            raise TruncatedFrameError(f"connection closed with {remaining} bytes outstanding")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> Frame:
    """阻塞读取一帧（同步客户端使用）"""
    frame_type, length = parse_header(_recv_exactly(sock, HEADER.size))
    return Frame(frame_type, _recv_exactly(sock, length))


# === 负载 ===


def encode_image(img: GrayImage) -> bytes:
    if img.width > 0xFFFF or img.height > 0xFFFF:
        raise PayloadError(f"image {img.width}x{img.height} too large for the wire format")
    return _IMAGE_HEAD.pack(img.width, img.height) + img.pixels.tobytes()


def decode_image(payload: bytes) -> GrayImage:
    if len(payload) < _IMAGE_HEAD.size:
        raise PayloadError("image payload shorter than its header")
    w, h = _IMAGE_HEAD.unpack_from(payload)
    if w < 1 or h < 1:
        raise PayloadError(f"invalid image size {w}x{h}")
    if len(payload) != _IMAGE_HEAD.size + w * h:
        raise PayloadError(f"image payload length {len(payload)} does not match {w}x{h}")
    pixels = np.frombuffer(payload, dtype=np.uint8, offset=_IMAGE_HEAD.size).reshape(h, w)
    return GrayImage(pixels.copy())


def encode_vector(values: Sequence[float] | np.ndarray) -> bytes:
    arr = np.asarray(values, dtype=">f4")
    if arr.ndim != 1 or arr.shape[0] > 0xFFFF:
        raise PayloadError("vector must be 1-D with at most 65535 entries")
    return struct.pack(">H", arr.shape[0]) + arr.tobytes()


def decode_vector(payload: bytes) -> np.ndarray:
    if len(payload) < 2:
        raise PayloadError("vector payload shorter than its header")
    (dim,) = struct.unpack_from(">H", payload)
    if len(payload) != 2 + 4 * dim:
        raise PayloadError(f"vector payload length {len(payload)} does not match dim {dim}")
    return np.frombuffer(payload, dtype=">f4", offset=2).astype(np.float64)


def encode_detections(detections: Sequence[MarkerDetection]) -> bytes:
    if len(detections) > 0xFFFF:
        raise PayloadError("too many detections for one response")
    parts = [struct.pack(">H", len(detections))]
    for d in detections:
        coords = [v for corner in d.corners for v in corner]
        parts.append(_DETECTION.pack(d.id, d.corrected_bits, d.rotation, *coords))
    return b"".join(parts)


def decode_detections(payload: bytes) -> list[MarkerDetection]:
    if len(payload) < 2:
        raise PayloadError("detection payload shorter than its header")
    (count,) = struct.unpack_from(">H", payload)
    if len(payload) != 2 + count * _DETECTION.size:
        raise PayloadError(f"detection payload length {len(payload)} does not match count {count}")
    detections = []
    for i in range(count):
        marker_id, corrected, rotation, *coords = _DETECTION.unpack_from(
            payload, 2 + i * _DETECTION.size
        )
        corners = tuple((coords[2 * k], coords[2 * k + 1]) for k in range(4))
        try:
            detection = MarkerDetection(
                id=marker_id,
                corners=corners,  # type: ignore[arg-type]
                rotation=rotation,
                corrected_bits=corrected,
            )
        except ValidationError as e:
            raise PayloadError(f"invalid detection record {i}: {e}") from e
        detections.append(detection)
    return detections


def encode_classification(label: str, confidence: float) -> bytes:
    raw = label.encode("utf-8")
    if len(raw) > 0xFF:
        raise PayloadError(f"label longer than 255 bytes: {label[:20]!r}...")
    return struct.pack(">B", len(raw)) + raw + struct.pack(">f", confidence)


def decode_classification(payload: bytes) -> tuple[str, float]:
    if len(payload) < 1:
        raise PayloadError("classification payload is empty")
    n = payload[0]
    if len(payload) != 1 + n + 4:
        raise PayloadError(f"classification payload length {len(payload)} does not match label {n}")
    try:
        label = payload[1 : 1 + n].decode("utf-8")
    except UnicodeDecodeError as e:
        raise PayloadError("classification label is not UTF-8") from e
    (confidence,) = struct.unpack_from(">f", payload, 1 + n)
    return label, f32(confidence)


def encode_error(code: int, message: str) -> bytes:
    raw = message.encode("utf-8")[:0xFFFF]
    return _ERROR_HEAD.pack(code, len(raw)) + raw


def decode_error(payload: bytes) -> tuple[int, str]:
    if len(payload) < _ERROR_HEAD.size:
        raise PayloadError("error payload shorter than its header")
    code, n = _ERROR_HEAD.unpack_from(payload)
    if len(payload) != _ERROR_HEAD.size + n:
        raise PayloadError("error payload length does not match message length")
    return code, payload[_ERROR_HEAD.size :].decode("utf-8", errors="replace")


__all__ = [
    "BadMagicError",
    "ErrorCode",
    "Frame",
    "FrameType",
    "HEADER",
    "MAGIC",
    "MAX_PAYLOAD",
    "OversizeFrameError",
    "PayloadError",
    "ProtocolError",
    "TruncatedFrameError",
    "decode_classification",
    "decode_detections",
    "decode_error",
    "decode_frame",
    "decode_image",
    "decode_vector",
    "encode_classification",
    "encode_detections",
    "encode_error",
    "encode_frame",
    "encode_image",
    "encode_vector",
    "parse_header",
    "read_frame",
    "recv_frame",
    "response_type",
]
