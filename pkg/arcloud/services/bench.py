"""
Offload Bench - 本地计算与远程调用的延迟对比

对同一图像重复运行 detect_markers：
- local: 进程内直接计算
- remote: 通过 RecognitionClient 发送 DETECT_MARKERS

每次迭代的结果都与本地结果比较（序列化后逐字节），不一致即报错。
"""

from __future__ import annotations

import logging
import time
from typing import Callable, Optional

import numpy as np

from arcloud.core.imaging import GrayImage
from arcloud.core.pipeline import detect_markers
from arcloud.models.bench import LatencyStats, ModeStats
from arcloud.models.settings import DetectConfig
from arcloud.sdk.recognition_client import RecognitionClient
from arcloud.services.protocol import FrameType, encode_detections, encode_image

logger = logging.getLogger(__name__)


class BenchError(Exception):
    """基准参数错误或本地 / 远程结果不一致"""

    pass


def summarize(mode: str, samples_ns: list[int]) -> ModeStats:
    """纳秒样本 → 毫秒统计（均值夹在 [min, max] 内以消除浮点误差）"""
    if not samples_ns:
        raise BenchError("no timing samples")
    ms = np.asarray(samples_ns, dtype=np.float64) / 1e6
    lo, hi = float(ms.min()), float(ms.max())
    p50, p95 = (float(v) for v in np.percentile(ms, [50, 95]))
    return ModeStats(
        mode=mode,
        iterations=len(samples_ns),
        mean_ms=min(max(float(ms.mean()), lo), hi),
        p50_ms=p50,
        p95_ms=max(p50, p95),
        min_ms=lo,
        max_ms=hi,
    )


def _time(iters: int, step: Callable[[], bytes], reference: Optional[bytes]) -> tuple[list[int], bytes]:
    samples: list[int] = []
    result = reference
    for i in range(iters):
        start = time.perf_counter_ns()
        payload = step()
        samples.append(time.perf_counter_ns() - start)
        if result is None:
            result = payload
        elif payload != result:
            raise BenchError(f"result mismatch at iteration {i}")
    assert result is not None
    return samples, result


def run_bench(
    img: GrayImage,
    iters: int,
    remote: Optional[str] = None,
    cfg: DetectConfig | None = None,
    timeout: Optional[float] = None,
) -> LatencyStats:
    """
    运行基准

    Args:
        img: 输入图像
        iters: 每种模式的迭代次数（≥ 1）
        remote: 远程地址 HOST[:PORT]，None 表示只测本地
        cfg: 本地检测参数（应与服务端一致，否则结果比较会失败）

    Raises:
        BenchError: iters < 1 或结果不一致
        TransportError / RemoteError: 远程调用失败
    """
    if iters < 1:
        raise BenchError(f"iters must be >= 1, got {iters}")
    cfg = cfg or DetectConfig()

    local_ns, reference = _time(iters, lambda: encode_detections(detect_markers(img, cfg)), None)
    local = summarize("local", local_ns)
    logger.info(f"local: mean {local.mean_ms:.3f} ms over {iters} iterations")

    remote_stats = None
    if remote is not None:
        request = encode_image(img)
        with RecognitionClient.from_address(remote, timeout) as client:
            remote_ns, _ = _time(
                iters,
                lambda: client.request(FrameType.DETECT_MARKERS, request).payload,
                reference,
            )
        remote_stats = summarize("remote", remote_ns)
        logger.info(f"remote: mean {remote_stats.mean_ms:.3f} ms over {iters} iterations")

    return LatencyStats(local=local, remote=remote_stats)


__all__ = ["BenchError", "run_bench", "summarize"]
