"""
Recognition Server - 云端识别服务

asyncio TCP 服务端：
- 每个连接顺序处理请求（同一连接上同时只有一个请求在处理）
- 识别计算放到线程池执行，不阻塞事件循环
- 帧格式错误 → ERROR(1) 后关闭连接；负载错误 → ERROR(1)，连接保持
- 请求处理中的任何异常都映射为 ERROR 帧，服务端不会因此退出
"""

from __future__ import annotations

import asyncio
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from arcloud.core.pipeline import detect_markers, recognize_shapes
from arcloud.core.shape_mlp import DimensionError, classify
from arcloud.core.template_match import TemplateError, best_match
from arcloud.services.protocol import (
    ErrorCode,
    Frame,
    FrameType,
    PayloadError,
    ProtocolError,
    decode_image,
    decode_vector,
    encode_classification,
    encode_detections,
    encode_error,
    encode_frame,
    read_frame,
    response_type,
)
from arcloud.services.registry import ModelRegistry

logger = logging.getLogger(__name__)


def error_frame(code: ErrorCode, message: str) -> bytes:
    return encode_frame(FrameType.ERROR, encode_error(code, message))


def handle_request(frame: Frame, registry: ModelRegistry) -> bytes:
    """
    处理单个请求帧，返回编码后的响应帧（同步，可在线程池中执行）

    响应负载 = 本地计算结果的序列化，与本地调用逐字节一致。
    """
    try:
        kind = frame.type
        if kind == FrameType.PING:
            payload = b""
        elif kind == FrameType.DETECT_MARKERS:
            img = decode_image(frame.payload)
            payload = encode_detections(detect_markers(img, registry.detect))
        elif kind == FrameType.CLASSIFY_VECTOR:
            if registry.model is None:
                return error_frame(ErrorCode.MODEL_MISSING, "no classification model loaded")
            vector = decode_vector(frame.payload)
            if vector.shape[0] != registry.model.input_dim:
                raise PayloadError(
                    f"vector dim {vector.shape[0]} != model input {registry.model.input_dim}"
                )
            result = classify(registry.model, vector)
            payload = encode_classification(result.label, result.confidence)
        elif kind == FrameType.CLASSIFY_IMAGE:
            if registry.model is None:
                return error_frame(ErrorCode.MODEL_MISSING, "no classification model loaded")
            img = decode_image(frame.payload)
            shapes = recognize_shapes(img, registry.detect, registry.model)
            if shapes:
                payload = encode_classification(shapes[0].label, shapes[0].confidence)
            else:
                payload = encode_classification("", 0.0)
        elif kind == FrameType.MATCH_PATCH:
            if registry.templates is None:
                return error_frame(ErrorCode.MODEL_MISSING, "no template library loaded")
            patch = decode_image(frame.payload)
            match = best_match(patch, registry.templates)
            if match is None:
                payload = encode_classification("", 0.0)
            else:
                payload = encode_classification(match.label, match.score)
        else:
            return error_frame(ErrorCode.UNSUPPORTED, f"unsupported request type 0x{kind:02x}")
        return encode_frame(response_type(kind), payload)
    except (PayloadError, DimensionError, TemplateError) as e:
        logger.debug(f"Malformed payload for type 0x{frame.type:02x}: {e}")
        return error_frame(ErrorCode.MALFORMED, str(e))
    except Exception as e:
        logger.exception(f"Internal error handling request type 0x{frame.type:02x}")
        return error_frame(ErrorCode.INTERNAL, f"internal error: {type(e).__name__}")


class RecognitionServer:
    """
    识别服务端

    用法：
        server = RecognitionServer(registry, port=7700)
        await server.start()
        await server.serve_forever()
    """

    def __init__(
        self,
        registry: ModelRegistry,
        host: str = "127.0.0.1",
        port: int = 7700,
        workers: int = 4,
    ):
        self.registry = registry
        self.host = host
        self.port = port
        self._workers = max(1, workers)
        self._server: Optional[asyncio.Server] = None
        self._executor: Optional[ThreadPoolExecutor] = None
        self._connections: set[asyncio.Task] = set()

    async def start(self) -> None:
        """
        绑定端口并开始接受连接（port=0 时由系统分配，实际端口写回 self.port）

        Raises:
            OSError: 端口绑定失败
        """
        self._executor = ThreadPoolExecutor(
            max_workers=self._workers, thread_name_prefix="arcloud-worker"
        )
        try:
            self._server = await asyncio.start_server(self._handle_connection, self.host, self.port)
        except OSError:
            self._executor.shutdown(wait=False)
            self._executor = None
            raise
        sockets = self._server.sockets or []
        if sockets:
            self.port = sockets[0].getsockname()[1]
        logger.info(f"Recognition server listening on {self.host}:{self.port}")

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        assert self._server is not None
        async with self._server:
            await self._server.serve_forever()

    async def stop(self) -> None:
        """停止接受连接，等待在途连接结束"""
        if self._server is not None:
            self._server.close()
        for task in list(self._connections):
            task.cancel()
        if self._connections:
            await asyncio.gather(*self._connections, return_exceptions=True)
        if self._server is not None:
            await self._server.wait_closed()
            self._server = None
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
        logger.info("Recognition server stopped")

    async def _handle_connection(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        task = asyncio.current_task()
        if task is not None:
            self._connections.add(task)
        peer = writer.get_extra_info("peername")
        logger.debug(f"Connection from {peer}")
        loop = asyncio.get_running_loop()
        try:
            while True:
                try:
                    frame = await read_frame(reader)
                except ProtocolError as e:
                    logger.warning(f"Rejected frame from {peer}: {e}")
                    writer.write(error_frame(ErrorCode.MALFORMED, str(e)))
                    await writer.drain()
                    break
                if frame is None:
                    break
                response = await loop.run_in_executor(
                    self._executor, handle_request, frame, self.registry
                )
                writer.write(response)
                await writer.drain()
        except (ConnectionError, asyncio.CancelledError):
            logger.debug(f"Connection from {peer} dropped")
        finally:
            if task is not None:
                self._connections.discard(task)
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, asyncio.CancelledError):
                pass


class BackgroundServer:
    """在守护线程的事件循环中运行的识别服务（测试、bench 与示例使用）"""

    def __init__(self, server: RecognitionServer):
        self.server = server
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(target=self._run, name="arcloud-server", daemon=True)
        self._ready = threading.Event()
        self._error: Optional[BaseException] = None

    @property
    def host(self) -> str:
        return self.server.host

    @property
    def port(self) -> int:
        return self.server.port

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def _run(self) -> None:
        asyncio.set_event_loop(self._loop)
        try:
            self._loop.run_until_complete(self.server.start())
        except BaseException as e:
            self._error = e
            self._ready.set()
            self._loop.close()
            return
        self._ready.set()
        try:
            self._loop.run_forever()
        finally:
            self._loop.run_until_complete(self.server.stop())
            self._loop.close()

    def start(self, timeout: float = 10.0) -> "BackgroundServer":
        self._thread.start()
        if not self._ready.wait(timeout):
            raise TimeoutError("recognition server did not start in time")
        if self._error is not None:
            raise self._error
        return self

    def stop(self, timeout: float = 10.0) -> None:
        if self._thread.is_alive():
            self._loop.call_soon_threadsafe(self._loop.stop)
            self._thread.join(timeout)

    def __enter__(self) -> "BackgroundServer":
        return self

    def __exit__(self, *exc: object) -> None:
        self.stop()


def start_background(
    registry: ModelRegistry,
    host: str = "127.0.0.1",
    port: int = 0,
    workers: int = 4,
) -> BackgroundServer:
    """在后台线程启动服务端，返回已在监听的句柄"""
    return BackgroundServer(RecognitionServer(registry, host, port, workers)).start()


__all__ = [
    "BackgroundServer",
    "RecognitionServer",
    "error_frame",
    "handle_request",
    "start_background",
]
