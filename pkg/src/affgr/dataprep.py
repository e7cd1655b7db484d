"""Box-point prompt generation, the IoU self-consistency gate, and record checks.

A prompt pair is derived from a mask as the extremal-pixel bounding box plus
the center of the largest circle inscribed in the foreground (exact Euclidean
distance, with the image border treated as background).  The gate re-segments
through a pluggable oracle and discards records whose reconstruction IoU falls
strictly below the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import DimensionMismatch
from .masks import AffordanceMask, EmptyMask, mask_iou
from .schema import (
    Box2D,
    MalformedTags,
    Point2D,
    RawRollout,
    StructuredAnswer,
    parse_think_answer,
    serialize_structured_answer,
    tokens_equal,
)

GATE_THRESHOLD_DEFAULT = 0.6

# Source corpus split sizes this tooling was built around (metadata only).
REFERENCE_SPLIT_SIZES = {"total": 42_400, "cot": 3_313, "rl": 39_087}


class SegmenterOracle(Protocol):
    """Stand-in for the neural segmenter: (image_ref, prompt) -> predicted mask."""

    def __call__(self, image_ref: str, prompt: "PromptPair") -> AffordanceMask: ...


class OracleFailure(RuntimeError):
    def __init__(self, record_id: str, cause: Exception) -> None:
        super().__init__(f"segmenter oracle failed on {record_id!r}: {cause}")
        self.record_id = record_id
        self.cause = cause


@dataclass(frozen=True)
class PromptPair:
    bbox: Box2D
    point: Point2D
    source_mask: str = ""


@dataclass(frozen=True)
class GateDecision:
    kept: bool
    gate_iou: float


@dataclass(frozen=True)
class CoTRecord:
    image_ref: str
    instruction: str
    reasoning: str
    answer: StructuredAnswer
    aff_method: str
    aff_part: str
    gate_iou: float


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    failures: tuple[tuple[str, str], ...] = field(default=())  # (code, message)


def mask_to_bbox(mask: AffordanceMask) -> Box2D:
    """Extremal-pixel box; upper edges are max index + 1 (unit pixel area)."""
    if mask.is_empty():
        raise EmptyMask("cannot derive a box from an empty mask")
    rows, cols = np.nonzero(mask.pixels)
    return Box2D(
        x1=float(cols.min()),
        y1=float(rows.min()),
        x2=float(cols.max()) + 1.0,
        y2=float(rows.max()) + 1.0,
    )


def _interior_distances(mask: AffordanceMask) -> np.ndarray:
    # Pad with one background ring so the image border counts as background;
    # the nearest outside pixel is always in this first ring.
    padded = np.pad(mask.pixels, 1, constant_values=False)
    return distance_transform_edt(padded)[1:-1, 1:-1]


def inscribed_circle_center(mask: AffordanceMask) -> Point2D:
    """Center of the largest circle inscribed in the foreground.

    Returns the center of the foreground pixel farthest (exact Euclidean
    distance) from any background-or-border pixel; ties break to the smallest
    row, then smallest column.
    """
    if mask.is_empty():
        raise EmptyMask("cannot inscribe a circle in an empty mask")
    dist = _interior_distances(mask)
    flat = int(np.argmax(dist))  # first occurrence in row-major order
    row, col = divmod(flat, mask.width)
    return Point2D(x=col + 0.5, y=row + 0.5)


def make_prompt_pair(mask: AffordanceMask, source_mask: str = "") -> PromptPair:
    return PromptPair(
        bbox=mask_to_bbox(mask),
        point=inscribed_circle_center(mask),
        source_mask=source_mask,
    )


def self_consistency_gate(
    mask: AffordanceMask,
    prompt: PromptPair,
    oracle: SegmenterOracle,
    threshold: float = GATE_THRESHOLD_DEFAULT,
) -> GateDecision:
    """Re-segment through the oracle and keep iff IoU >= threshold.

    The boundary is kept: only reconstructions strictly below the threshold
    are discarded.
    """
    try:
        predicted = oracle(prompt.source_mask, prompt)
    except Exception as exc:  # noqa: BLE001 - contract: wrap with the record id
        raise OracleFailure(prompt.source_mask, exc) from exc
    if not mask.same_shape(predicted):
        cause = DimensionMismatch(
            f"oracle returned {predicted.width}x{predicted.height}, "
            f"source is {mask.width}x{mask.height}"
        )
        raise OracleFailure(prompt.source_mask, cause)
    iou = mask_iou(mask, predicted)
    return GateDecision(kept=iou >= threshold, gate_iou=iou)


def identity_oracle(mask: AffordanceMask) -> SegmenterOracle:
    def oracle(image_ref: str, prompt: PromptPair) -> AffordanceMask:
        return mask

    return oracle


def empty_oracle(width: int, height: int) -> SegmenterOracle:
    def oracle(image_ref: str, prompt: PromptPair) -> AffordanceMask:
        return AffordanceMask.zeros(width, height)

    return oracle


def validate_cot_record(record: CoTRecord, gate_threshold: float = GATE_THRESHOLD_DEFAULT) -> ValidationReport:
    """Structural validation of a training record; semantic judging is out of scope.

    Checks: non-empty reasoning, reasoning free of stray think/answer tags
    (so the rendered record parses), every keypoint inside the answer box,
    affordance labels consistent with the answer, and the gate IoU at or
    above the retention threshold.
    """
    failures: list[tuple[str, str]] = []
    if not record.reasoning.strip():
        failures.append(("EmptyReasoning", "reasoning text is empty"))
    else:
        rendered = (
            f"<think>{record.reasoning}</think>"
            f"<answer>{serialize_structured_answer(record.answer)}</answer>"
        )
        try:
            parse_think_answer(RawRollout(rendered, image_width=1, image_height=1))
        except MalformedTags as exc:
            failures.append(("MalformedTags", str(exc)))
    box = record.answer.bbox
    for p in record.answer.keypoints:
        if not (box.x1 <= p.x <= box.x2 and box.y1 <= p.y <= box.y2):
            failures.append(("PointOutsideBox", f"keypoint ({p.x},{p.y}) outside bbox"))
            break
    if not tokens_equal(record.aff_method, record.answer.aff_method) or not tokens_equal(
        record.aff_part, record.answer.aff_part
    ):
        failures.append(("AffMismatch", "record labels disagree with the answer"))
    if record.gate_iou < gate_threshold:
        failures.append(("GateBelowThreshold", f"gate IoU {record.gate_iou} < {gate_threshold}"))
    return ValidationReport(passed=not failures, failures=tuple(failures))
