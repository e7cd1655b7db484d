"""Binary affordance masks over a pixel grid."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch


class EmptyMask(ValueError):
    pass


class AffordanceMask:
    """Row-major binary occupancy over a width x height pixel grid."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray) -> None:
        arr = np.asarray(pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask needs a 2-D grid, got shape {arr.shape}")
        self.pixels = arr.astype(bool)

    @classmethod
    def zeros(cls, width: int, height: int) -> "AffordanceMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_rows(cls, rows: list[list[int]]) -> "AffordanceMask":
        return cls(np.asarray(rows, dtype=bool))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def count(self) -> int:
        return int(self.pixels.sum())

    def is_empty(self) -> bool:
        return not self.pixels.any()

    def same_shape(self, other: "AffordanceMask") -> bool:
        return self.pixels.shape == other.pixels.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AffordanceMask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            (self.pixels == other.pixels).all()
        )

    def __repr__(self) -> str:
        return f"AffordanceMask({self.width}x{self.height}, fg={self.count()})"


def mask_iou(a: AffordanceMask, b: AffordanceMask) -> float:
    """Pixel-count IoU; two empty masks count as a perfect match (1.0)."""
    if not a.same_shape(b):
        raise DimensionMismatch(f"mask shapes differ: {a.pixels.shape} vs {b.pixels.shape}")
    union = int((a.pixels | b.pixels).sum())
    if union == 0:
        return 1.0
    inter = int((a.pixels & b.pixels).sum())
    return inter / union


def intersection_union_counts(a: AffordanceMask, b: AffordanceMask) -> tuple[int, int]:
    if not a.same_shape(b):
        raise DimensionMismatch(f"mask shapes differ: {a.pixels.shape} vs {b.pixels.shape}")
    return int((a.pixels & b.pixels).sum()), int((a.pixels | b.pixels).sum())
