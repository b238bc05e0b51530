"""
测试形状分类：旗标向量、规范化、MLP 前向/反向传播、训练与模型文件
"""

import math

import numpy as np
import pytest

from arcloud.core.imaging import BinaryImage
from arcloud.core.segmentation import trace_contours
from arcloud.core.shape_mlp import (
    DatasetFormatError,
    DimensionError,
    LabeledDataset,
    MlpModel,
    ModelFormatError,
    SplitMix64,
    canonicalize,
    classify,
    extract_flag_vector,
    load_model_file,
    mlp_backprop,
    mlp_forward,
    mlp_init,
    model_load,
    model_save,
    save_model_file,
    train,
)
from arcloud.core.shapes import SHAPE_LABELS, dataset_from_masks, make_shape_samples, render_shape
from arcloud.models.settings import TrainConfig


def _zero_model(dims: list[int], labels: list[str] | None = None) -> MlpModel:
    return MlpModel(
        layer_dims=dims,
        weights=[np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])],
        biases=[np.zeros(o) for o in dims[1:]],
        labels=labels or [f"c{i}" for i in range(dims[-1])],
    )


def _loss(model: MlpModel, x: np.ndarray, cls: int) -> float:
    return float(-math.log(mlp_forward(model, x)[cls]))


def _vector(mask: BinaryImage, mode: str = "extent", n: int = 70) -> np.ndarray:
    node = max(trace_contours(mask), key=lambda nd: nd.pixel_count)
    return extract_flag_vector(mask, node, n, mode)


class TestSplitMix64:
    """测试随机数流"""

    def test_reference_value(self):
        assert SplitMix64(0).next_u64() == 0xE220A8397B1DCDAF

    def test_float_in_open_interval(self):
        rng = SplitMix64(123)
        values = [rng.next_float() for _ in range(1000)]
        assert all(0.0 < v < 1.0 for v in values)


class TestFlagVector:
    """测试旗标向量"""

    def test_disc_is_flat(self):
        v = _vector(render_shape("disc", 80.0))
        assert np.all(np.abs(v - 1.0) <= 0.05)

    def test_square_axis_and_diagonal(self):
        v = _vector(render_shape("square", 40.0))
        for k in (9, 26, 44, 61):  # 最接近 45°/135°/225°/315° 的射线
            assert v[k] == pytest.approx(1.0, abs=0.05)
        for k in (0, 35):
            assert v[k] == pytest.approx(1 / math.sqrt(2), abs=0.05)

    def test_single_pixel(self):
        m = np.zeros((5, 5), dtype=bool)
        m[2, 2] = True
        v = _vector(BinaryImage(m))
        assert v.shape == (70,)
        assert not v.any()

    def test_values_in_unit_interval(self):
        for kind in SHAPE_LABELS:
            for mode in ("extent", "coverage"):
                v = _vector(render_shape(kind, 40.0, 17.0), mode)
                assert v.min() >= 0.0 and v.max() <= 1.0

    def test_coverage_separates_ring_from_disc(self):
        disc = _vector(render_shape("disc", 60.0), "coverage")
        ring = _vector(render_shape("ring", 60.0), "coverage")
        assert np.all(np.abs(disc - 1.0) <= 0.05)
        assert float(ring.mean()) < 0.6
        assert np.all(np.abs(_vector(render_shape("ring", 60.0)) - 1.0) <= 0.05)

    def test_invalid_ray_count(self):
        mask = render_shape("disc", 20.0)
        with pytest.raises(ValueError):
            extract_flag_vector(mask, trace_contours(mask)[0], 0)


class TestFlagVectorScaleInvariance:
    """放大 2 倍后每个分量变化 < 0.05"""

    @pytest.mark.parametrize(
        "kind,size,angle,mode",
        [
            ("disc", 48.0, 33.0, "extent"),
            ("square", 32.0, 0.0, "extent"),
            ("square", 96.0, 17.0, "extent"),
            ("cross", 36.0, 0.0, "extent"),
            ("triangle", 160.0, 0.0, "extent"),
            ("ring", 96.0, 0.0, "coverage"),
        ],
    )
    def test_doubling_size(self, kind, size, angle, mode):
        small = _vector(render_shape(kind, size, angle), mode)
        large = _vector(render_shape(kind, 2.0 * size, angle), mode)
        assert float(np.abs(small - large).max()) < 0.05

    def test_axis_aligned_square_is_exact(self):
        """像素边界对齐的边：等值线与真实边重合"""
        small = _vector(render_shape("square", 32.0))
        large = _vector(render_shape("square", 64.0))
        assert np.allclose(small, large, atol=1e-9)


class TestCanonicalize:
    """测试循环移位规范化"""

    def test_constant(self):
        assert canonicalize([0.5] * 6).tolist() == [0.5] * 6

    def test_simple_shift(self):
        assert canonicalize([0, 1, 0, 0]).tolist() == [1, 0, 0, 0]

    def test_shift_invariance(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            v = rng.random(70)
            expected = canonicalize(v)
            for k in range(0, 70, 7):
                assert np.array_equal(canonicalize(np.roll(v, k)), expected)


class TestMlpInit:
    """测试初始化"""

    def test_deterministic(self):
        a, b = mlp_init([70, 16, 5], 3), mlp_init([70, 16, 5], 3)
        assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))

    def test_bounds_and_zero_biases(self):
        model = mlp_init([70, 16, 5], 9)
        for w, b, fan_in in zip(model.weights, model.biases, (70, 16)):
            assert np.all(np.abs(w) < 1 / math.sqrt(fan_in))
            assert not b.any()

    def test_seeds_differ(self):
        a, b = mlp_init([4, 3, 2], 1), mlp_init([4, 3, 2], 2)
        assert not np.array_equal(a.weights[0], b.weights[0])

    def test_default_labels(self):
        assert mlp_init([2, 2, 3], 0).labels == ["c0", "c1", "c2"]

    @pytest.mark.parametrize("dims", [[5], [3, 0, 2], []])
    def test_invalid_dims(self, dims):
        with pytest.raises(DimensionError):
            mlp_init(dims, 0)


class TestForwardBackward:
    """测试前向与反向传播"""

    def test_zero_model_is_uniform(self):
        p = mlp_forward(_zero_model([3, 4, 5]), np.ones(3))
        assert np.allclose(p, 0.2, atol=1e-15)

    @pytest.mark.parametrize("seed", range(10))
    def test_outputs_are_a_distribution(self, seed):
        rng = np.random.default_rng(seed)
        model = mlp_init([70, 32, 5], seed)
        for scale in (1.0, 1e3, 1e8):
            p = mlp_forward(model, rng.normal(size=70) * scale)
            assert np.all(np.isfinite(p))
            assert np.all(p >= 0.0)
            assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_bias_shift_invariance(self):
        model = mlp_init([6, 4, 3], 11)
        x = np.linspace(0, 1, 6)
        before = mlp_forward(model, x)
        model.biases[-1] += 123.0
        assert np.allclose(mlp_forward(model, x), before, atol=1e-12)
        assert mlp_forward(model, x).sum() == pytest.approx(1.0, abs=1e-12)

    def test_hand_computed_network(self):
        """2-2-2 网络：手算概率"""
        model = MlpModel(
            layer_dims=[2, 2, 2],
            weights=[np.array([[1.0, -1.0], [0.5, 0.5]]), np.array([[2.0, 0.0], [0.0, 1.0]])],
            biases=[np.array([0.0, -0.5]), np.array([0.0, 0.5])],
            labels=["a", "b"],
        )
        x = np.array([1.0, 0.0])
        h1 = 1 / (1 + math.exp(-1.0))
        h2 = 1 / (1 + math.exp(-0.0))
        z1, z2 = 2 * h1, h2 + 0.5
        p1 = math.exp(z1) / (math.exp(z1) + math.exp(z2))
        p = mlp_forward(model, x)
        assert p[0] == pytest.approx(p1, abs=1e-9)
        assert p[1] == pytest.approx(1 - p1, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            mlp_forward(mlp_init([4, 2, 2], 0), np.zeros(5))

    def test_uniform_loss(self):
        g = mlp_backprop(_zero_model([3, 4, 5]), np.ones(3), 2)
        assert g.loss == pytest.approx(math.log(5), abs=1e-9)

    def test_zero_model_output_gradient(self):
        g = mlp_backprop(_zero_model([3, 4, 5]), np.ones(3), 1)
        expected = np.full(5, 0.2)
        expected[1] -= 1.0
        assert np.allclose(g.biases[-1], expected, atol=1e-15)

    def test_finite_difference_gradients(self):
        """70-16-5 模型的全部参数与中心差分一致"""
        model = mlp_init([70, 16, 5], 2024)
        rng = np.random.default_rng(5)
        for bias in model.biases:
            bias += rng.uniform(-0.5, 0.5, bias.shape)
        x = rng.random(70)
        cls = 3
        grads = mlp_backprop(model, x, cls)
        h = 1e-5

        def check(param: np.ndarray, analytic: np.ndarray) -> None:
            for idx in np.ndindex(param.shape):
                saved = param[idx]
                param[idx] = saved + h
                up = _loss(model, x, cls)
                param[idx] = saved - h
                down = _loss(model, x, cls)
                param[idx] = saved
                numeric = (up - down) / (2 * h)
                denom = max(abs(numeric), abs(analytic[idx]), 1e-8)
                assert abs(numeric - analytic[idx]) / denom < 1e-4 or abs(numeric - analytic[idx]) < 1e-9

        for l in range(len(model.weights)):
            check(model.weights[l], grads.weights[l])
            check(model.biases[l], grads.biases[l])

    def test_class_index_out_of_range(self):
        with pytest.raises(DimensionError):
            mlp_backprop(mlp_init([2, 2, 2], 0), np.zeros(2), 2)


class TestTrain:
    """测试 SGD 训练"""

    XOR = LabeledDataset(
        samples=[([0, 0], 0), ([0, 1], 1), ([1, 0], 1), ([1, 1], 0)], labels=["zero", "one"]
    )

    def test_zero_epochs(self):
        model = mlp_init([2, 4, 2], 1)
        trained, trace = train(model, self.XOR, TrainConfig(epochs=0))
        assert trace == []
        assert all(np.array_equal(a, b) for a, b in zip(trained.weights, model.weights))

    def test_does_not_mutate_input(self):
        model = mlp_init([2, 4, 2], 1)
        snapshot = [w.copy() for w in model.weights]
        train(model, self.XOR, TrainConfig(epochs=5))
        assert all(np.array_equal(a, b) for a, b in zip(model.weights, snapshot))

    def test_deterministic(self):
        cfg = TrainConfig(learning_rate=0.5, epochs=50, seed=42)
        model_a, a = train(mlp_init([2, 4, 2], 42), self.XOR, cfg)
        model_b, b = train(mlp_init([2, 4, 2], 42), self.XOR, cfg)
        assert a == b
        assert len(a) == 50
        assert all(np.array_equal(x, y) for x, y in zip(model_a.weights, model_b.weights))
        assert all(np.array_equal(x, y) for x, y in zip(model_a.biases, model_b.biases))

    def test_xor_converges(self):
        """种子 42..46 中至少 4 个达到 100% 训练准确率"""
        converged = 0
        for seed in range(42, 47):
            model, _ = train(
                mlp_init([2, 4, 2], seed, self.XOR.labels),
                self.XOR,
                TrainConfig(learning_rate=0.5, epochs=5000, seed=seed),
            )
            if all(classify(model, x).label == self.XOR.labels[y] for x, y in self.XOR.samples):
                converged += 1
        assert converged >= 4

    def test_single_sample_loss_decreases(self):
        data = LabeledDataset(samples=[([0.2, 0.9, 0.4], 1)], labels=["a", "b"])
        _, trace = train(mlp_init([3, 4, 2], 0), data, TrainConfig(learning_rate=0.5, epochs=3000))
        assert all(b < a for a, b in zip(trace, trace[1:]))
        assert trace[-1] < 1e-3

    def test_empty_dataset(self):
        with pytest.raises(ValueError, match="empty"):
            train(mlp_init([2, 2, 2], 0), LabeledDataset(labels=["a", "b"]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            train(mlp_init([3, 2, 2], 0), self.XOR)


class TestClassify:
    """测试分类"""

    def test_tie_goes_to_lowest_index(self):
        assert classify(_zero_model([2, 2], ["a", "b"]), [0.3, 0.7]) == ("a", 0.5)

    def test_forced_class(self):
        model = _zero_model([2, 3, 3], ["x", "y", "z"])
        model.biases[-1][2] = 20.0
        result = classify(model, [0.0, 0.0])
        assert result.label == "z"
        assert result.confidence > 0.99

    def test_logit_shift_keeps_argmax(self):
        model = mlp_init([4, 3, 3], 5)
        x = [0.1, 0.2, 0.3, 0.4]
        before = classify(model, x).label
        model.biases[-1] -= 7.0
        assert classify(model, x).label == before


class TestModelFile:
    """测试模型文件格式"""

    def test_round_trip_bit_exact(self, tmp_path):
        model = mlp_init([70, 16, 5], 77, list(SHAPE_LABELS))
        model.biases[0] += 0.1234567890123
        loaded = model_load(model_save(model))
        x = np.random.default_rng(0).random(70)
        assert np.array_equal(mlp_forward(loaded, x), mlp_forward(model, x))
        assert loaded.labels == list(SHAPE_LABELS)

        path = tmp_path / "m.armlp"
        save_model_file(path, model)
        assert np.array_equal(load_model_file(path).weights[1], model.weights[1])

    def test_header_layout(self):
        text = model_save(mlp_init([2, 3, 2], 0, ["a", "b"])).decode()
        lines = text.splitlines()
        assert lines[:3] == ["ARMLP 1", "2 3 2", "a b"]
        assert len(lines) == 3 + 3 + 2

    def test_corrupt_dims(self):
        data = model_save(mlp_init([2, 3, 2], 0)).replace(b"2 3 2", b"2 x 2", 1)
        with pytest.raises(ModelFormatError, match="dims"):
            model_load(data)

    def test_wrong_row_count(self):
        lines = model_save(mlp_init([2, 3, 2], 0)).decode().splitlines()
        with pytest.raises(ModelFormatError, match="rows"):
            model_load(("\n".join(lines[:-1]) + "\n").encode())

    def test_bad_magic(self):
        with pytest.raises(ModelFormatError):
            model_load(b"ARMLP 2\n2 2\na b\n")

    def test_label_with_space_cannot_be_saved(self):
        with pytest.raises(ModelFormatError):
            model_save(_zero_model([2, 2], ["a b", "c"]))


class TestFiveShapeBenchmark:
    """五类合成形状：随机旋转与尺度下的留出集准确率 ≥ 95%"""

    def test_held_out_accuracy(self, shape_model):
        held_out = dataset_from_masks(make_shape_samples(per_class=20, seed=99), 70, "coverage")
        correct = sum(
            1
            for x, y in held_out.samples
            if classify(shape_model, x).label == held_out.labels[y]
        )
        assert correct / len(held_out) >= 0.95


class TestLabeledDataset:
    """测试数据集"""

    def test_from_tsv(self, tmp_path):
        path = tmp_path / "sift.tsv"
        path.write_text("# descriptors\nb\t1\t2\t3\n\na\t4\t5\t6\nb\t7\t8\t9\n")
        data = LabeledDataset.from_tsv(path)
        assert data.labels == ["b", "a"]
        assert [y for _, y in data.samples] == [0, 1, 0]
        assert data.dim == 3

    def test_from_tsv_bad_value(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("a\t1\tx\n")
        with pytest.raises(DatasetFormatError, match="bad.tsv:1"):
            LabeledDataset.from_tsv(path)

    def test_from_tsv_ragged_rows(self, tmp_path):
        path = tmp_path / "ragged.tsv"
        path.write_text("a\t1\t2\nb\t1\t2\t3\n")
        with pytest.raises(DatasetFormatError, match="ragged.tsv:2: 3 values, expected 2"):
            LabeledDataset.from_tsv(path)

    def test_inconsistent_dims(self):
        with pytest.raises(DimensionError):
            LabeledDataset(samples=[([1, 2], 0), ([1, 2, 3], 0)], labels=["a"])
