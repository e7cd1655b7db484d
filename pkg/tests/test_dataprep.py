import numpy as np
import pytest

from affgr.dataprep import (
    CoTRecord,
    EmptyMask,
    OracleFailure,
    PromptPair,
    empty_oracle,
    identity_oracle,
    inscribed_circle_center,
    make_prompt_pair,
    mask_to_bbox,
    self_consistency_gate,
    validate_cot_record,
)
from affgr.errors import DimensionMismatch
from affgr.masks import AffordanceMask, mask_iou
from affgr.schema import Box2D, Point2D, StructuredAnswer


def mask_from_pixels(width, height, pixels):
    m = AffordanceMask.zeros(width, height)
    for row, col in pixels:
        m.pixels[row, col] = True
    return m


def random_blob_mask(rng, max_side=64):
    h = int(rng.integers(4, max_side + 1))
    w = int(rng.integers(4, max_side + 1))
    m = np.zeros((h, w), dtype=bool)
    n_seeds = int(rng.integers(1, 4))
    for _ in range(n_seeds):
        r0 = int(rng.integers(0, h))
        c0 = int(rng.integers(0, w))
        rr = int(rng.integers(1, max(2, h // 2)))
        cr = int(rng.integers(1, max(2, w // 2)))
        ys, xs = np.ogrid[:h, :w]
        m |= ((ys - r0) / rr) ** 2 + ((xs - c0) / cr) ** 2 <= 1.0
    if not m.any():
        m[h // 2, w // 2] = True
    return AffordanceMask(m)


def brute_force_center(mask: AffordanceMask):
    """O(n^2) oracle: per foreground pixel, min distance to any background
    pixel or any pixel of the one-step outside ring; argmax, row-major ties."""
    fg = np.argwhere(mask.pixels)
    bg = np.argwhere(~mask.pixels).astype(float)
    h, w = mask.pixels.shape
    ring = []
    for c in range(-1, w + 1):
        ring.append((-1, c))
        ring.append((h, c))
    for r in range(0, h):
        ring.append((r, -1))
        ring.append((r, w))
    zeros = np.vstack([bg, np.asarray(ring, dtype=float)]) if len(bg) else np.asarray(ring, dtype=float)
    best = None
    for r, c in fg:
        d2 = ((zeros - (r, c)) ** 2).sum(axis=1).min()
        if best is None or d2 > best[0] + 1e-12:
            best = (d2, r, c)
    d2, r, c = best
    return (r, c), np.sqrt(d2)


class TestMaskToBbox:
    def test_two_pixels(self):
        m = mask_from_pixels(16, 12, [(3, 2), (5, 7)])
        assert mask_to_bbox(m) == Box2D(2, 3, 8, 6)

    def test_full_mask(self):
        m = AffordanceMask(np.ones((12, 16), dtype=bool))
        assert mask_to_bbox(m) == Box2D(0, 0, 16, 12)

    def test_single_pixel_unit_area(self):
        m = mask_from_pixels(10, 10, [(4, 4)])
        box = mask_to_bbox(m)
        assert box == Box2D(4, 4, 5, 5)
        assert box.area == 1.0

    def test_empty_mask(self):
        with pytest.raises(EmptyMask):
            mask_to_bbox(AffordanceMask.zeros(4, 4))


class TestInscribedCircle:
    def test_full_square_center(self):
        m = AffordanceMask(np.ones((11, 11), dtype=bool))
        assert inscribed_circle_center(m) == Point2D(5.5, 5.5)

    def test_single_pixel(self):
        m = mask_from_pixels(8, 8, [(2, 6)])
        assert inscribed_circle_center(m) == Point2D(6.5, 2.5)

    def test_matches_brute_force_on_random_blobs(self):
        rng = np.random.default_rng(13)
        from affgr.dataprep import _interior_distances

        for _ in range(40):
            m = random_blob_mask(rng, max_side=32)
            (r, c), dist = brute_force_center(m)
            point = inscribed_circle_center(m)
            assert point == Point2D(c + 0.5, r + 0.5)
            impl_dist = _interior_distances(m)[r, c]
            assert impl_dist == pytest.approx(dist, abs=1e-9)

    def test_empty_mask(self):
        with pytest.raises(EmptyMask):
            inscribed_circle_center(AffordanceMask.zeros(3, 3))


class TestPromptPairInvariants:
    def test_point_inside_mask_and_mask_inside_bbox(self):
        rng = np.random.default_rng(29)
        for _ in range(60):
            m = random_blob_mask(rng, max_side=48)
            prompt = make_prompt_pair(m, source_mask="m")
            col = int(prompt.point.x)
            row = int(prompt.point.y)
            assert m.pixels[row, col]
            box = prompt.bbox
            rows, cols = np.nonzero(m.pixels)
            assert box.x1 <= cols.min() and cols.max() + 1 <= box.x2
            assert box.y1 <= rows.min() and rows.max() + 1 <= box.y2
            assert box == mask_to_bbox(m)


class TestMaskIoU:
    def test_identity(self):
        m = random_blob_mask(np.random.default_rng(0))
        assert mask_iou(m, m) == 1.0

    def test_disjoint(self):
        a = mask_from_pixels(8, 8, [(0, 0)])
        b = mask_from_pixels(8, 8, [(7, 7)])
        assert mask_iou(a, b) == 0.0

    def test_counted(self):
        a = mask_from_pixels(10, 1, [(0, c) for c in range(7)])
        b = mask_from_pixels(10, 1, [(0, c) for c in range(2, 10)])
        # intersection 5, union 10
        assert mask_iou(a, b) == 0.5

    def test_both_empty_is_one(self):
        assert mask_iou(AffordanceMask.zeros(4, 4), AffordanceMask.zeros(4, 4)) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mask_iou(AffordanceMask.zeros(4, 4), AffordanceMask.zeros(5, 4))

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        a = AffordanceMask(rng.random((16, 16)) > 0.5)
        b = AffordanceMask(rng.random((16, 16)) > 0.5)
        assert mask_iou(a, b) == mask_iou(b, a)


def subset_oracle(kept_pixels):
    """Oracle returning a fixed subset of the source mask's pixels."""

    def oracle(image_ref, prompt):
        return kept_pixels

    return oracle


class TestGate:
    def test_identity_oracle_keeps_everything(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            m = random_blob_mask(rng)
            prompt = make_prompt_pair(m, "m")
            decision = self_consistency_gate(m, prompt, identity_oracle(m))
            assert decision.kept
            assert decision.gate_iou == 1.0

    def test_empty_oracle_discards_everything(self):
        rng = np.random.default_rng(19)
        for _ in range(10):
            m = random_blob_mask(rng)
            prompt = make_prompt_pair(m, "m")
            decision = self_consistency_gate(m, prompt, empty_oracle(m.width, m.height))
            assert not decision.kept
            assert decision.gate_iou == 0.0

    @pytest.mark.parametrize("kept,expected", [(59, False), (60, True), (61, True)])
    def test_boundary_straddle(self, kept, expected):
        # 100-pixel strip; the oracle reproduces exactly `kept` of them,
        # giving IoU = kept/100 against the 0.6 boundary
        full = mask_from_pixels(100, 1, [(0, c) for c in range(100)])
        sub = mask_from_pixels(100, 1, [(0, c) for c in range(kept)])
        prompt = make_prompt_pair(full, "strip")
        decision = self_consistency_gate(full, prompt, subset_oracle(sub))
        assert decision.gate_iou == pytest.approx(kept / 100, abs=0)
        assert decision.kept is expected

    def test_gate_monotone_in_oracle_coverage(self):
        # nested oracle outputs inside the truth: more coverage, higher IoU
        full = mask_from_pixels(50, 2, [(r, c) for r in range(2) for c in range(50)])
        prompt = make_prompt_pair(full, "m")
        small = mask_from_pixels(50, 2, [(0, c) for c in range(30)])
        large = mask_from_pixels(50, 2, [(r, c) for r in range(2) for c in range(40)])
        iou_small = self_consistency_gate(full, prompt, subset_oracle(small)).gate_iou
        iou_large = self_consistency_gate(full, prompt, subset_oracle(large)).gate_iou
        assert iou_large >= iou_small

    def test_oracle_failure_carries_record_id(self):
        m = random_blob_mask(np.random.default_rng(1))
        prompt = make_prompt_pair(m, "rec-42")

        def broken(image_ref, prompt):
            raise RuntimeError("segmenter crashed")

        with pytest.raises(OracleFailure) as exc_info:
            self_consistency_gate(m, prompt, broken)
        assert exc_info.value.record_id == "rec-42"

    def test_wrong_shape_oracle_is_a_failure(self):
        m = random_blob_mask(np.random.default_rng(2))
        prompt = make_prompt_pair(m, "rec-7")
        wrong = AffordanceMask.zeros(m.width + 1, m.height)
        with pytest.raises(OracleFailure):
            self_consistency_gate(m, prompt, subset_oracle(wrong))


def valid_record(**overrides):
    answer = StructuredAnswer(
        bbox=Box2D(10, 10, 60, 60),
        keypoints=(Point2D(30, 30),),
        aff_method="grasp",
        aff_part="handle",
    )
    fields = dict(
        image_ref="img-1",
        instruction="grasp the handle",
        reasoning="The handle is on the left. It affords grasping.",
        answer=answer,
        aff_method="grasp",
        aff_part="handle",
        gate_iou=0.9,
    )
    fields.update(overrides)
    return CoTRecord(**fields)


class TestValidateCotRecord:
    def test_well_formed_passes(self):
        assert validate_cot_record(valid_record()).passed

    def test_point_outside_box_fails(self):
        answer = StructuredAnswer(
            bbox=Box2D(10, 10, 60, 60),
            keypoints=(Point2D(200, 200),),
            aff_method="grasp",
            aff_part="handle",
        )
        report = validate_cot_record(valid_record(answer=answer))
        assert not report.passed
        assert any(code == "PointOutsideBox" for code, _ in report.failures)

    def test_empty_reasoning_fails(self):
        report = validate_cot_record(valid_record(reasoning="   "))
        assert not report.passed
        assert any(code == "EmptyReasoning" for code, _ in report.failures)

    def test_stray_tags_in_reasoning_fail(self):
        report = validate_cot_record(valid_record(reasoning="a </think> b"))
        assert not report.passed
        assert any(code == "MalformedTags" for code, _ in report.failures)

    def test_label_mismatch_fails(self):
        report = validate_cot_record(valid_record(aff_method="pull"))
        assert not report.passed
        assert any(code == "AffMismatch" for code, _ in report.failures)

    def test_gate_below_threshold_fails(self):
        report = validate_cot_record(valid_record(gate_iou=0.5))
        assert not report.passed
        assert any(code == "GateBelowThreshold" for code, _ in report.failures)

    def test_label_case_insensitive(self):
        assert validate_cot_record(valid_record(aff_method="Grasp ")).passed
