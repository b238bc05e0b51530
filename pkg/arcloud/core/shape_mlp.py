"""
Shape MLP - 旗标向量特征与多层感知机分类器

旗标向量：从区域重心沿 n 条等角射线（默认 70）测量"臂长"，按最大臂长归一化到 [0, 1]。
分类器：sigmoid 隐藏层 + softmax 输出，交叉熵损失，逐样本反向传播 SGD。

所有随机性来自 SplitMix64，给定种子即可逐位复现（跨平台一致）。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage
from scipy.special import expit, log_softmax, softmax

from arcloud.core.imaging import BinaryImage
from arcloud.core.segmentation import RegionNode, region_mask
from arcloud.models.settings import FlagMode, TrainConfig

logger = logging.getLogger(__name__)

MODEL_MAGIC = "ARMLP 1"
DEFAULT_RAYS = 70
RAY_STEP = 0.25
_FIELD_PAD = 2
_MIN_EXTENT = 1.0

_MASK64 = (1 << 64) - 1

# 旗标向量：n 个 [0, 1] 内的实数
FlagVector = np.ndarray


class ModelFormatError(ValueError):
    """模型文件格式错误"""

    pass


class DimensionError(ValueError):
    """输入维度与模型/数据集不一致"""

    pass


class DatasetFormatError(ValueError):
    """数据文件（描述子 TSV、向量文件、训练目录）内容不合法"""

    pass


class EmptyRegionError(ValueError):
    """区域为空，无法提取特征"""

    pass


# === 随机数 ===


class SplitMix64:
    """SplitMix64 伪随机数流（64 位整数运算）"""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """开区间 (0, 1) 内的均匀实数"""
        return ((self.next_u64() >> 11) + 0.5) * 2.0**-53


# === 旗标向量 ===


def extract_flag_vector(
    img: BinaryImage,
    node: RegionNode,
    n: int = DEFAULT_RAYS,
    mode: FlagMode | str = FlagMode.EXTENT,
) -> FlagVector:
    """
    从区域重心发出 n 条射线（θ_k = 2πk/n，从 +x 轴起，y 向下）。

    掩码按像素中心做双线性插值得到占有率场，占有率 ≥ 0.5 视为前景，
    边界取 0.5 等值线。每条射线以 0.25 px 步长采样，相邻采样之间线性插值求交点：
    - extent: L_k = 射线最后一次离开前景的距离
    - coverage: L_k = 射线上前景段的总长度

    两种模式都按最大 extent 归一化（coverage 模式下环形与圆盘因此可区分）；
    最大 extent < 1 px（单像素级区域）时返回全零向量。

    Raises:
        EmptyRegionError: 区域没有像素
        ValueError: n < 1 或未知模式
    """
    if n < 1:
        raise ValueError(f"ray count n must be >= 1, got {n}")
    mode = FlagMode(mode)
    if node.pixel_count < 1:
        raise EmptyRegionError("cannot extract a flag vector from an empty region")

    mask, _, _ = region_mask(node, img)
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise EmptyRegionError("cannot extract a flag vector from an empty region")

    # 外围补 2 圈背景，等值线全部落在数组内部
    field = np.pad(mask.astype(np.float64), _FIELD_PAD)
    cx, cy = float(xs.mean()) + _FIELD_PAD, float(ys.mean()) + _FIELD_PAD

    h, w = field.shape
    steps = int(math.ceil(math.hypot(w, h) / RAY_STEP))
    t = np.arange(steps + 1) * RAY_STEP
    theta = 2.0 * np.pi * np.arange(n) / n
    px = cx + np.cos(theta)[:, None] * t[None, :]
    py = cy + np.sin(theta)[:, None] * t[None, :]
    occ = ndimage.map_coordinates(
        field, [py.ravel(), px.ravel()], order=1, mode="constant", cval=0.0
    ).reshape(px.shape)

    inside = occ >= 0.5
    a, b = occ[:, :-1], occ[:, 1:]
    in_a, in_b = inside[:, :-1], inside[:, 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        # 段内从起点到 0.5 交点的比例
        crossing = np.clip(np.where(a != b, (a - 0.5) / (a - b), 0.0), 0.0, 1.0)
    leaving = in_a & ~in_b
    entering = ~in_a & in_b

    exit_t = np.where(leaving, t[None, :-1] + crossing * RAY_STEP, 0.0)
    extents = exit_t.max(axis=1)
    longest = float(extents.max())
    if longest < _MIN_EXTENT:
        return np.zeros(n, dtype=np.float64)
    if mode == FlagMode.EXTENT:
        return extents / longest
    segment = np.where(in_a & in_b, 1.0, 0.0)
    segment = np.where(leaving, crossing, segment)
    segment = np.where(entering, 1.0 - crossing, segment)
    coverage = segment.sum(axis=1) * RAY_STEP
    return np.minimum(coverage / longest, 1.0)


def canonicalize(v: Sequence[float] | FlagVector) -> FlagVector:
    """字典序最大的循环移位（离散旋转归一化）"""
    arr = np.asarray(v, dtype=np.float64)
    if arr.size == 0:
        return arr.copy()
    best = max(range(len(arr)), key=lambda k: tuple(np.roll(arr, -k)))
    return np.roll(arr, -best)


@dataclass
class LabeledDataset:
    """
    带标签数据集

    Attributes:
        samples: (特征向量, 类别下标) 列表，特征维度一致
        labels: 类别名（下标即类别号）
    """

    samples: list[tuple[np.ndarray, int]] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.samples = [(np.asarray(x, dtype=np.float64), int(y)) for x, y in self.samples]
        dims = {x.shape for x, _ in self.samples}
        if len(dims) > 1:
            raise DimensionError(f"dataset samples have inconsistent dims: {sorted(dims)}")
        for _, y in self.samples:
            if not 0 <= y < len(self.labels):
                raise ValueError(f"class index {y} out of range for {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def dim(self) -> int:
        if not self.samples:
            return 0
        return int(self.samples[0][0].shape[0])

    @classmethod
    def from_tsv(cls, path: Path | str) -> "LabeledDataset":
        """
        读取外部描述子（如 SIFT）：每行 label\\tv1\\t…\\tvN

        类别按首次出现顺序编号；空行与 # 注释行跳过。

        Raises:
            OSError: 文件不可读
            DatasetFormatError: 行格式错误或维度不一致
        """
        labels: list[str] = []
        index: dict[str, int] = {}
        samples: list[tuple[np.ndarray, int]] = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            label, *values = line.rstrip("\n").split("\t")
            if not label or not values:
                raise DatasetFormatError(f"{path}:{lineno}: expected label and at least one value")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as e:
                raise DatasetFormatError(f"{path}:{lineno}: {e}") from e
            if samples and vec.shape != samples[0][0].shape:
                raise DatasetFormatError(
                    f"{path}:{lineno}: {vec.shape[0]} values, expected {samples[0][0].shape[0]}"
                )
            if label not in index:
                index[label] = len(labels)
                labels.append(label)
            samples.append((vec, index[label]))
        return cls(samples=samples, labels=labels)


# === MLP ===


@dataclass
class MlpModel:
    """
    多层感知机

    weights[l] 形状为 [out × in]，biases[l] 形状为 [out]；
    隐藏层 sigmoid，输出层 softmax。
    """

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    labels: list[str]

    def __post_init__(self) -> None:
        if len(self.layer_dims) < 2 or any(d < 1 for d in self.layer_dims):
            raise DimensionError(f"invalid layer dims: {self.layer_dims}")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise DimensionError("weights/biases do not match layer dims")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[l + 1], self.layer_dims[l])
            if w.shape != expected or b.shape != (expected[0],):
                raise DimensionError(f"layer {l}: expected weights {expected}, got {w.shape}")
        if len(self.labels) != self.layer_dims[-1]:
            raise DimensionError(
                f"{len(self.labels)} labels for {self.layer_dims[-1]} output classes"
            )

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def class_count(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            labels=list(self.labels),
        )


class Gradients(NamedTuple):
    """反向传播结果"""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss: float


class Classification(NamedTuple):
    """分类结果"""

    label: str
    confidence: float


def mlp_init(
    layer_dims: Sequence[int], seed: int, labels: Sequence[str] | None = None
) -> MlpModel:
    """
    初始化：权重在 (−1/√fan_in, +1/√fan_in) 内均匀分布（SplitMix64），偏置为 0

    权重按层、行优先依次抽取。labels 缺省为 c0..c{C−1}。

    Raises:
        DimensionError: 少于两层或存在 < 1 的维度
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise DimensionError(f"invalid layer dims: {dims}")
    rng = SplitMix64(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        values = [(2.0 * rng.next_float() - 1.0) * bound for _ in range(fan_in * fan_out)]
        weights.append(np.array(values, dtype=np.float64).reshape(fan_out, fan_in))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    names = list(labels) if labels is not None else [f"c{i}" for i in range(dims[-1])]
    return MlpModel(layer_dims=dims, weights=weights, biases=biases, labels=names)


def _check_input(model: MlpModel, x: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (model.input_dim,):
        raise DimensionError(f"input dim {arr.shape} does not match model input {model.input_dim}")
    return arr


def _forward(model: MlpModel, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """返回各层激活（含输入）与输出层 logits"""
    activations = [x]
    a = x
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = w @ a + b
        if l == last:
            return activations, z
        a = expit(z)
        activations.append(a)
    raise AssertionError("unreachable")


def mlp_forward(model: MlpModel, x: Sequence[float] | np.ndarray) -> np.ndarray:
    """前向传播，返回类别概率（softmax 内部做最大 logit 平移）"""
    _, logits = _forward(model, _check_input(model, x))
    return softmax(logits)


def mlp_backprop(model: MlpModel, x: Sequence[float] | np.ndarray, class_index: int) -> Gradients:
    """
    单样本交叉熵损失与解析梯度

    输出层 δ = p − onehot；隐藏层 δ = (Wᵀδ') ⊙ a(1−a)。
    """
    arr = _check_input(model, x)
    if not 0 <= class_index < model.class_count:
        raise DimensionError(f"class index {class_index} out of range")
    activations, logits = _forward(model, arr)
    log_p = log_softmax(logits)
    loss = float(-log_p[class_index])

    delta = np.exp(log_p)
    delta[class_index] -= 1.0
    grad_w: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    grad_b: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    for l in range(len(model.weights) - 1, -1, -1):
        a_prev = activations[l]
        grad_w[l] = np.outer(delta, a_prev)
        grad_b[l] = delta.copy()
        if l > 0:
            delta = (model.weights[l].T @ delta) * a_prev * (1.0 - a_prev)
    return Gradients(weights=grad_w, biases=grad_b, loss=loss)


def train(
    model: MlpModel, dataset: LabeledDataset, cfg: TrainConfig | None = None
) -> tuple[MlpModel, list[float]]:
    """
    逐样本 SGD 训练（不修改传入的模型）

    每轮开始时用同一个 SplitMix64(cfg.seed) 流做 Fisher–Yates 洗牌（j = next_u64 mod (i+1)）。

    Returns:
        (训练后的模型, 每轮平均损失)，损失为各样本更新前的值

    Raises:
        ValueError: 数据集为空
        DimensionError: 维度不一致
    """
    cfg = cfg or TrainConfig()
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if dataset.dim != model.input_dim:
        raise DimensionError(f"dataset dim {dataset.dim} != model input {model.input_dim}")
    if len(dataset.labels) != model.class_count:
        raise DimensionError(
            f"dataset has {len(dataset.labels)} classes, model has {model.class_count}"
        )

    trained = model.copy()
    rng = SplitMix64(cfg.seed)
    order = list(range(len(dataset)))
    lr = cfg.learning_rate
    trace: list[float] = []

    for epoch in range(cfg.epochs):
        if cfg.shuffle:
            for i in range(len(order) - 1, 0, -1):
                j = rng.next_u64() % (i + 1)
                order[i], order[j] = order[j], order[i]
        total = 0.0
        for idx in order:
            x, y = dataset.samples[idx]
            grads = mlp_backprop(trained, x, y)
            total += grads.loss
            for l in range(len(trained.weights)):
                trained.weights[l] -= lr * grads.weights[l]
                trained.biases[l] -= lr * grads.biases[l]
        trace.append(total / len(order))
        if epoch % 100 == 0:
            logger.debug(f"epoch {epoch}: mean loss {trace[-1]:.6f}")

    return trained, trace


def classify(model: MlpModel, v: Sequence[float] | np.ndarray) -> Classification:
    """argmax 分类，并列取最小类别下标"""
    p = mlp_forward(model, v)
    best = int(np.argmax(p))
    return Classification(model.labels[best], float(p[best]))


# === 模型文件 ===


def model_save(model: MlpModel) -> bytes:
    """
    文本格式：
        ARMLP 1
        <层维度>
        <空格分隔的标签>
        每层每个输出单元一行：in 个权重 + 偏置（17 位有效数字）
    """
    for label in model.labels:
        if not label or any(ch.isspace() for ch in label):
            raise ModelFormatError(f"label {label!r} cannot be stored (empty or contains whitespace)")
    lines = [MODEL_MAGIC, " ".join(str(d) for d in model.layer_dims), " ".join(model.labels)]
    for w, b in zip(model.weights, model.biases):
        for row, bias in zip(w, b):
            lines.append(" ".join(f"{v:.17g}" for v in [*row.tolist(), float(bias)]))
    return ("\n".join(lines) + "\n").encode("ascii")


def model_load(data: bytes) -> MlpModel:
    """
    解析 model_save 的输出

    Raises:
        ModelFormatError: 头部/维度/行数/数值不合法
    """
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as e:
        raise ModelFormatError("model file is not ASCII text") from e
    lines = [line.strip() for line in text.splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    if len(lines) < 3 or lines[0] != MODEL_MAGIC:
        raise ModelFormatError(f"missing '{MODEL_MAGIC}' header")

    try:
        dims = [int(tok) for tok in lines[1].split()]
    except ValueError as e:
        raise ModelFormatError(f"malformed layer dims line: {lines[1]!r}") from e
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ModelFormatError(f"invalid layer dims: {dims}")
    labels = lines[2].split()
    if len(labels) != dims[-1]:
        raise ModelFormatError(f"{len(labels)} labels for {dims[-1]} output classes")

    rows = lines[3:]
    expected_rows = sum(dims[1:])
    if len(rows) != expected_rows:
        raise ModelFormatError(f"expected {expected_rows} weight rows, got {len(rows)}")

    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    cursor = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        block = []
        for row in rows[cursor : cursor + fan_out]:
            try:
                values = [float(tok) for tok in row.split()]
            except ValueError as e:
                raise ModelFormatError(f"malformed weight row: {row[:40]!r}") from e
            if len(values) != fan_in + 1:
                raise ModelFormatError(f"weight row has {len(values)} values, expected {fan_in + 1}")
            block.append(values)
        cursor += fan_out
        arr = np.array(block, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ModelFormatError("model contains non-finite weights")
        weights.append(arr[:, :fan_in].copy())
        biases.append(arr[:, fan_in].copy())
    return MlpModel(layer_dims=dims, weights=weights, biases=biases, labels=labels)


def save_model_file(path: Path | str, model: MlpModel) -> None:
    Path(path).write_bytes(model_save(model))


def load_model_file(path: Path | str) -> MlpModel:
    """读取模型文件（OSError 原样抛出）"""
    model = model_load(Path(path).read_bytes())
    logger.info(f"Loaded model {path}: dims={model.layer_dims}")
    return model


__all__ = [
    "Classification",
    "DatasetFormatError",
    "DimensionError",
    "EmptyRegionError",
    "FlagVector",
    "Gradients",
    "LabeledDataset",
    "MlpModel",
    "ModelFormatError",
    "SplitMix64",
    "canonicalize",
    "classify",
    "extract_flag_vector",
    "load_model_file",
    "mlp_backprop",
    "mlp_forward",
    "mlp_init",
    "model_load",
    "model_save",
    "save_model_file",
    "train",
]
