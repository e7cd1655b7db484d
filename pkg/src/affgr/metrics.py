"""Segmentation benchmark metrics: per-sample mean IoU and cumulative IoU."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DimensionMismatch
from .masks import AffordanceMask, intersection_union_counts, mask_iou


class EmptySet(ValueError):
    pass


class ZeroUnion(ValueError):
    """Every pair was empty-vs-empty, so the cumulative ratio is undefined."""


@dataclass(frozen=True)
class EvalPair:
    gt: AffordanceMask
    pred: AffordanceMask
    subset: str = ""

    def __post_init__(self) -> None:
        if not self.gt.same_shape(self.pred):
            raise DimensionMismatch(
                f"pair shapes differ: {self.gt.pixels.shape} vs {self.pred.pixels.shape}"
            )


@dataclass(frozen=True)
class SubsetRow:
    subset: str
    g_iou: float
    c_iou: float
    n: int


def g_iou(pairs: list[EvalPair]) -> float:
    """Mean of per-sample IoUs; an empty-vs-empty pair contributes 1.0."""
    if not pairs:
        raise EmptySet("no evaluation pairs")
    return sum(mask_iou(p.gt, p.pred) for p in pairs) / len(pairs)


def c_iou(pairs: list[EvalPair]) -> float:
    """Summed intersections over summed unions.

    Empty-vs-empty pairs are excluded from both sums; if every pair is such,
    the ratio is undefined and ZeroUnion is raised.
    """
    if not pairs:
        raise EmptySet("no evaluation pairs")
    inter_total = 0
    union_total = 0
    for p in pairs:
        inter, union = intersection_union_counts(p.gt, p.pred)
        inter_total += inter
        union_total += union
    if union_total == 0:
        raise ZeroUnion("all pairs are empty-vs-empty")
    return inter_total / union_total


def subset_report(pairs: list[EvalPair]) -> list[SubsetRow]:
    """Both metrics per subset tag, rows ordered by subset name."""
    groups: dict[str, list[EvalPair]] = {}
    for p in pairs:
        groups.setdefault(p.subset, []).append(p)
    rows = []
    for subset in sorted(groups):
        members = groups[subset]
        rows.append(
            SubsetRow(subset=subset, g_iou=g_iou(members), c_iou=c_iou(members), n=len(members))
        )
    return rows
