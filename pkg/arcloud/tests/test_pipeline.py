"""
测试端到端识别流程：标记检测、形状识别、画面模板匹配
"""

import numpy as np
import pytest

from arcloud.core.golay_marker import render_marker
from arcloud.core.imaging import GrayImage
from arcloud.core.pipeline import bbox_iou, detect_markers, match_templates, recognize_shapes
from arcloud.core.segmentation import QuadCandidate
from arcloud.core.shape_mlp import DimensionError, mlp_init
from arcloud.core.template_match import Template, TemplateLibrary
from arcloud.models.settings import DetectConfig

from .synthetic import (
    MILD_PERSPECTIVES,
    marker_corners,
    marker_scene,
    max_corner_error,
    perspective_scene,
    shape_scene,
)

SCENE_IDS = (0, 1, 2047, 4095)


def _blank(width: int = 160, height: int = 120) -> GrayImage:
    return GrayImage(np.full((height, width), 255, dtype=np.uint8))


def _canonical_patch(marker_id: int) -> GrayImage:
    return GrayImage(render_marker(marker_id, 8).pixels[8:64, 8:64].copy())


class TestDetectMarkers:
    """测试标记检测"""

    def test_blank_image(self):
        assert detect_markers(_blank()) == []

    def test_three_markers(self):
        placements = [(0, 10, 10), (1000, 120, 20), (4095, 220, 140)]
        found = detect_markers(marker_scene(placements))
        assert len(found) == 3
        by_id = {d.id: d for d in found}
        assert set(by_id) == {0, 1000, 4095}
        for marker_id, x, y in placements:
            d = by_id[marker_id]
            assert max_corner_error(d.corners, marker_corners(x, y)) <= 1.5
            assert d.rotation == 0
            assert d.corrected_bits == 0

    def test_results_sorted_by_first_corner(self):
        found = detect_markers(marker_scene([(7, 200, 100), (8, 20, 120), (9, 100, 10)]))
        keys = [(d.corners[0][1], d.corners[0][0]) for d in found]
        assert keys == sorted(keys)
        assert [d.id for d in found] == [9, 7, 8]

    @pytest.mark.parametrize("dx,dy", [(1, 0), (0, 3), (7, 5), (13, -4)])
    def test_shift_moves_corners(self, dx, dy):
        base = detect_markers(marker_scene([(1, 40, 30)], width=200, height=160))
        shifted = detect_markers(marker_scene([(1, 40 + dx, 30 + dy)], width=200, height=160))
        assert [d.id for d in shifted] == [d.id for d in base] == [1]
        for (bx, by), (sx, sy) in zip(base[0].corners, shifted[0].corners):
            assert sx - bx == pytest.approx(dx, abs=0.75)
            assert sy - by == pytest.approx(dy, abs=0.75)

    def test_repeated_calls_identical(self):
        scene = marker_scene([(0, 10, 10), (1, 120, 20), (4095, 220, 140)])
        first = detect_markers(scene)
        assert len(first) == 3
        assert all(detect_markers(scene) == first for _ in range(3))

    @pytest.mark.parametrize("marker_id", SCENE_IDS)
    @pytest.mark.parametrize("turns", [0, 1, 2, 3])
    def test_rotated_scene(self, marker_id, turns):
        scene = marker_scene([(marker_id, 40, 30)], width=160, height=140)
        rotated = GrayImage(np.ascontiguousarray(np.rot90(scene.pixels, -turns)))
        found = detect_markers(rotated)
        assert [d.id for d in found] == [marker_id]
        if marker_id == 1:
            assert found[0].rotation == (4 - turns) % 4

    @pytest.mark.parametrize("marker_id", SCENE_IDS)
    @pytest.mark.parametrize("dst", MILD_PERSPECTIVES)
    def test_perspective(self, marker_id, dst):
        scene, truth = perspective_scene(marker_id, dst)
        found = detect_markers(scene)
        assert len(found) == 1
        assert found[0].id == marker_id
        # 真值按标记自身顺序，检测结果从距原点最近的角开始，这里按集合比较
        for corner in found[0].corners:
            nearest = min(np.hypot(corner[0] - t[0], corner[1] - t[1]) for t in truth)
            assert nearest <= 1.5

    def test_allowed_ids(self):
        scene = marker_scene([(0, 10, 10), (1000, 120, 20), (4095, 220, 140)])
        found = detect_markers(scene, DetectConfig(allowed_ids=frozenset({1000})))
        assert [d.id for d in found] == [1000]

    def test_global_threshold(self):
        scene = marker_scene([(321, 50, 50)])
        found = detect_markers(scene, DetectConfig(threshold_mode="global"))
        assert [d.id for d in found] == [321]

    def test_low_contrast_marker_rejected(self):
        """黑色被抬到 230：对比度低于 min_contrast"""
        scene = marker_scene([(5, 40, 40)], width=160, height=160)
        faded = GrayImage(np.maximum(scene.pixels, 230).astype(np.uint8))
        assert detect_markers(faded, DetectConfig(threshold_mode="global", t=240)) == []


class TestBboxIou:
    """测试去重用的包围盒 IoU"""

    def _quad(self, x, y, s):
        return QuadCandidate.from_corners([(x, y), (x + s, y), (x + s, y + s), (x, y + s)])

    def test_identical(self):
        assert bbox_iou(self._quad(0, 0, 10), self._quad(0, 0, 10)) == pytest.approx(1.0)

    def test_disjoint(self):
        assert bbox_iou(self._quad(0, 0, 10), self._quad(20, 20, 10)) == 0.0

    def test_half_overlap(self):
        # 交 50，并 150
        assert bbox_iou(self._quad(0, 0, 10), self._quad(5, 0, 10)) == pytest.approx(1 / 3)


class TestRecognizeShapes:
    """测试形状识别"""

    def test_disc_and_square(self, shape_model, shape_detect_config):
        scene = shape_scene([("disc", 50.0, 0.0, 60.0, 80.0), ("square", 40.0, 25.0, 170.0, 80.0)])
        found = recognize_shapes(scene, shape_detect_config, shape_model)
        assert [d.label for d in found] == ["disc", "square"]
        disc, square = found
        assert disc.pixel_count > square.pixel_count
        assert disc.centroid == pytest.approx((59.5, 79.5), abs=0.1)
        assert square.centroid == pytest.approx((169.5, 79.5), abs=0.1)
        assert all(0.0 <= d.confidence <= 1.0 for d in found)

    @pytest.mark.parametrize("kind", ["triangle", "cross", "ring"])
    def test_single_shape(self, kind, shape_model, shape_detect_config):
        scene = shape_scene([(kind, 56.0, 40.0, 120.0, 80.0)])
        found = recognize_shapes(scene, shape_detect_config, shape_model)
        assert [d.label for d in found] == [kind]

    def test_blank_image(self, shape_model, shape_detect_config):
        assert recognize_shapes(_blank(), shape_detect_config, shape_model) == []

    def test_min_area_gate(self, shape_model, shape_detect_config):
        scene = shape_scene([("disc", 8.0, 0.0, 30.0, 30.0), ("square", 40.0, 0.0, 150.0, 80.0)])
        found = recognize_shapes(scene, shape_detect_config, shape_model)
        assert len(found) == 1
        assert found[0].pixel_count == 1600

    def test_ray_count_must_match_model(self, shape_detect_config):
        model = mlp_init([16, 4, 2], 0)
        with pytest.raises(DimensionError):
            recognize_shapes(_blank(), shape_detect_config, model)


class TestMatchTemplates:
    """测试画面中的模板匹配"""

    @pytest.fixture
    def library(self):
        return TemplateLibrary(
            templates=tuple(Template(f"m{i}", _canonical_patch(i)) for i in (3, 1234, 2000)),
            min_score=0.9,
        )

    def test_finds_marker_templates(self, library):
        scene = marker_scene([(1234, 20, 20), (2000, 180, 120)])
        found = match_templates(scene, DetectConfig(threshold_mode="global"), library)
        assert [d.label for d in found] == ["m1234", "m2000"]
        assert all(d.score > 0.95 for d in found)
        assert max_corner_error(found[0].corners, marker_corners(20, 20)) <= 1.5

    def test_unknown_marker(self, library):
        scene = marker_scene([(77, 20, 20)])
        found = match_templates(scene, DetectConfig(threshold_mode="global"), library)
        assert found == []

    def test_empty_library(self):
        assert match_templates(marker_scene([(3, 20, 20)]), None, TemplateLibrary()) == []
