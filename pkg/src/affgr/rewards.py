"""Composite rollout reward: format, non-repeat, and accuracy sub-rewards.

The accuracy reward matches predicted boxes one-to-one against ground-truth
boxes by IoU and grants an increment of 1/max(N, K) per satisfied criterion:
IoU strictly above 0.5, corner-L1 strictly below 10 px, and per-keypoint L1
strictly below 30 px.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .schema import (
    AnswerFormatError,
    Box2D,
    MalformedTags,
    Point2D,
    RawRollout,
    StructuredAnswer,
    parse_structured_answer,
    parse_think_answer,
)

_TOTAL_TIE_TOL = 1e-9  # assignment totals closer than this count as tied


@dataclass(frozen=True)
class GroundTruthTarget:
    """Ground-truth boxes with one non-empty keypoint set per box."""

    boxes: tuple[Box2D, ...]
    keypoint_sets: tuple[tuple[Point2D, ...], ...]
    aff_method: str
    aff_part: str
    image_width: float
    image_height: float

    def __post_init__(self) -> None:
        if not self.boxes:
            raise ValueError("ground truth needs at least one box")
        if len(self.keypoint_sets) != len(self.boxes):
            raise ValueError("one keypoint set per box required")
        for kps in self.keypoint_sets:
            if not kps:
                raise ValueError("keypoint sets must be non-empty")
            for p in kps:
                if not (0 <= p.x <= self.image_width and 0 <= p.y <= self.image_height):
                    raise ValueError(f"keypoint ({p.x},{p.y}) out of bounds")


@dataclass(frozen=True)
class PredictionSet:
    """Predicted boxes and their keypoint sets, derived from a parsed answer."""

    boxes: tuple[Box2D, ...]
    keypoint_sets: tuple[tuple[Point2D, ...], ...]

    @classmethod
    def from_answer(cls, ans: StructuredAnswer) -> "PredictionSet":
        # All parsed keypoints attach to the primary box; extension boxes
        # carry none (the answer schema has no per-box keypoint syntax).
        sets: list[tuple[Point2D, ...]] = [ans.keypoints]
        sets.extend(() for _ in ans.extra_boxes)
        return cls(boxes=ans.boxes, keypoint_sets=tuple(sets))


@dataclass(frozen=True)
class RewardConfig:
    iou_threshold: float = 0.5
    box_l1_threshold_px: float = 10.0
    keypoint_l1_threshold_px: float = 30.0
    w_fmt: float = 1.0
    w_rep: float = 1.0
    w_acc: float = 1.0
    matching_strategy: str = "optimal"  # or "greedy"
    nonrepeat_ngram_size: int = 0  # 0 = exact-duplicate detection only

    def __post_init__(self) -> None:
        if min(self.iou_threshold, self.box_l1_threshold_px, self.keypoint_l1_threshold_px) <= 0:
            raise ValueError("thresholds must be positive")
        if self.matching_strategy not in ("optimal", "greedy"):
            raise ValueError(f"unknown matching strategy {self.matching_strategy!r}")


@dataclass(frozen=True)
class RewardBreakdown:
    think_format: float
    answer_format: float
    non_repeat: float
    acc_iou: float
    acc_box_l1: float
    acc_keypoint: float
    total: float
    matching: tuple[tuple[int, int], ...] = field(default=())  # (pred idx, gt idx)


def box_iou(a: Box2D, b: Box2D) -> float:
    """Intersection over union of two continuous rectangles; 0 when disjoint."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def _iou_matrix(gt_boxes: tuple[Box2D, ...], pred_boxes: tuple[Box2D, ...]) -> np.ndarray:
    m = np.zeros((len(gt_boxes), len(pred_boxes)))
    for g, gb in enumerate(gt_boxes):
        for p, pb in enumerate(pred_boxes):
            m[g, p] = box_iou(gb, pb)
    return m


def _assignment_total(iou: np.ndarray) -> float:
    if iou.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(iou, maximize=True)
    return float(iou[rows, cols].sum())


def _match_optimal(iou: np.ndarray) -> list[tuple[int, int]]:
    """Max-total-IoU assignment, canonicalized to the lexicographically
    smallest (gt, pred) pair set among ties; zero-IoU pairs stay unmatched."""
    n_gt, n_pred = iou.shape
    best_total = _assignment_total(iou)
    chosen: list[tuple[int, int]] = []
    used_g: set[int] = set()
    used_p: set[int] = set()
    pinned = 0.0
    for g in range(n_gt):
        if g in used_g:
            continue
        for p in range(n_pred):
            if p in used_p or iou[g, p] <= 0.0:
                continue
            rest = np.delete(np.delete(iou, sorted(used_g | {g}), axis=0),
                             sorted(used_p | {p}), axis=1)
            if pinned + iou[g, p] + _assignment_total(rest) >= best_total - _TOTAL_TIE_TOL:
                chosen.append((g, p))
                used_g.add(g)
                used_p.add(p)
                pinned += iou[g, p]
                break
    return chosen


def _match_greedy(iou: np.ndarray) -> list[tuple[int, int]]:
    n_gt, n_pred = iou.shape
    order = sorted(
        ((g, p) for g in range(n_gt) for p in range(n_pred) if iou[g, p] > 0.0),
        key=lambda gp: (-iou[gp[0], gp[1]], gp[0], gp[1]),
    )
    used_g: set[int] = set()
    used_p: set[int] = set()
    chosen = []
    for g, p in order:
        if g in used_g or p in used_p:
            continue
        chosen.append((g, p))
        used_g.add(g)
        used_p.add(p)
    return sorted(chosen)


def match_boxes(
    pred: PredictionSet, gt: GroundTruthTarget, cfg: RewardConfig = RewardConfig()
) -> list[tuple[int, int]]:
    """One-to-one box matching; returns (pred index, gt index) pairs.

    The optimal strategy maximizes total IoU over min(N, K) pairs; ties are
    broken toward the lowest (gt index, pred index).  Pairs with zero IoU are
    never matched.  The greedy strategy takes pairs in descending-IoU order.
    """
    iou = _iou_matrix(gt.boxes, pred.boxes)
    if cfg.matching_strategy == "greedy":
        pairs = _match_greedy(iou)
    else:
        pairs = _match_optimal(iou)
    return [(p, g) for g, p in sorted(pairs)]


def accuracy_reward(
    pred: PredictionSet, gt: GroundTruthTarget, cfg: RewardConfig = RewardConfig()
) -> tuple[float, float, float]:
    """Per-criterion accuracy components, each in [0, 1].

    For every matched pair this grants 1/max(N, K) when IoU exceeds the IoU
    threshold, 1/max(N, K) when the summed corner-coordinate L1 distance is
    below the box threshold, and (satisfied keypoints / ground-truth
    keypoints) / max(N, K) for the keypoint criterion.  Keypoints pair up
    positionally (primary with primary, i-th auxiliary with i-th auxiliary).
    """
    pairs = match_boxes(pred, gt, cfg)
    denom = max(len(gt.boxes), len(pred.boxes))
    acc_iou = 0.0
    acc_box = 0.0
    acc_kp = 0.0
    for p_idx, g_idx in pairs:
        pb, gb = pred.boxes[p_idx], gt.boxes[g_idx]
        if box_iou(gb, pb) > cfg.iou_threshold:
            acc_iou += 1.0
        corner_l1 = sum(abs(pa - ga) for pa, ga in zip(pb.corners(), gb.corners()))
        if corner_l1 < cfg.box_l1_threshold_px:
            acc_box += 1.0
        gt_kps = gt.keypoint_sets[g_idx]
        pred_kps = pred.keypoint_sets[p_idx]
        hit = 0
        for j, gkp in enumerate(gt_kps):
            if j < len(pred_kps):
                pkp = pred_kps[j]
                if abs(pkp.x - gkp.x) + abs(pkp.y - gkp.y) < cfg.keypoint_l1_threshold_px:
                    hit += 1
        acc_kp += hit / len(gt_kps)
    return acc_iou / denom, acc_box / denom, acc_kp / denom


_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def _normalize_sentence(s: str) -> str:
    return " ".join(s.translate(_PUNCT_TABLE).lower().split())


def _split_sentences(text: str) -> list[str]:
    parts: list[str] = []
    current: list[str] = []
    for ch in text:
        if ch in ".!?\n":
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    parts.append("".join(current))
    normalized = (_normalize_sentence(p) for p in parts)
    return [n for n in normalized if n]


def _ngram_set(sentence: str, n: int) -> frozenset[tuple[str, ...]]:
    words = sentence.split()
    if len(words) < n:
        return frozenset({tuple(words)})
    return frozenset(tuple(words[i:i + n]) for i in range(len(words) - n + 1))


def non_repeat_reward(think_text: str, cfg: RewardConfig = RewardConfig()) -> float:
    """1 minus the fraction of duplicate sentence instances; empty text gives 0.

    Sentences split on . ! ? and newline, then are normalized (lowercased,
    punctuation stripped, whitespace collapsed).  With nonrepeat_ngram_size
    set above 0, a sentence also counts as a duplicate when its word n-gram
    set overlaps an earlier sentence's at Jaccard >= 0.6.
    """
    sentences = _split_sentences(think_text)
    if not sentences:
        return 0.0
    duplicates = 0
    seen_exact: set[str] = set()
    seen_ngrams: list[frozenset[tuple[str, ...]]] = []
    for s in sentences:
        if s in seen_exact:
            duplicates += 1
            continue
        if cfg.nonrepeat_ngram_size > 0:
            grams = _ngram_set(s, cfg.nonrepeat_ngram_size)
            near = any(
                len(grams & prev) / len(grams | prev) >= 0.6
                for prev in seen_ngrams
                if grams or prev
            )
            seen_ngrams.append(grams)
            if near:
                duplicates += 1
                continue
        seen_exact.add(s)
    return 1.0 - duplicates / len(sentences)


def score_rollout(
    raw: RawRollout, gt: GroundTruthTarget, cfg: RewardConfig = RewardConfig()
) -> RewardBreakdown:
    """Full reward breakdown for one rollout against its ground truth.

    Format failures fold into zero sub-rewards rather than raising; the
    accuracy components are computed only when both format checks pass.
    total = w_fmt*(think+answer)/2 + w_rep*non_repeat + w_acc*(sum of accuracy).
    """
    think_fmt = 0.0
    answer_fmt = 0.0
    non_rep = 0.0
    acc = (0.0, 0.0, 0.0)
    matching: tuple[tuple[int, int], ...] = ()
    try:
        pair = parse_think_answer(raw)
        think_fmt = 1.0
    except MalformedTags:
        pair = None
    if pair is not None:
        non_rep = non_repeat_reward(pair.think_text, cfg)
        try:
            ans = parse_structured_answer(pair.answer_text, raw.image_width, raw.image_height)
            answer_fmt = 1.0
        except AnswerFormatError:
            ans = None
        if ans is not None:
            pred = PredictionSet.from_answer(ans)
            matching = tuple(match_boxes(pred, gt, cfg))
            acc = accuracy_reward(pred, gt, cfg)
    total = (
        cfg.w_fmt * (think_fmt + answer_fmt) / 2.0
        + cfg.w_rep * non_rep
        + cfg.w_acc * (acc[0] + acc[1] + acc[2])
    )
    return RewardBreakdown(
        think_format=think_fmt,
        answer_format=answer_fmt,
        non_repeat=non_rep,
        acc_iou=acc[0],
        acc_box_l1=acc[1],
        acc_keypoint=acc[2],
        total=total,
        matching=matching,
    )
