"""Structured rollout grammar: think/answer tag blocks and the answer schema.

A rollout is well-formed when it consists of exactly one ``<think>...</think>``
block followed by exactly one ``<answer>...</answer>`` block, with nothing but
whitespace before, between, or after them.  The answer text itself must follow
the brace schema::

    {bbox:[x1,y1,x2,y2], point:[x,y], aff_methods: grasp, aff_parts: handle}

Two optional extension keys are accepted: ``aux_points:[[x,y],...]`` appends
auxiliary keypoints after the primary point, and ``bboxes:[[x1,y1,x2,y2],...]``
appends additional predicted boxes after the primary one.  Every other key is
rejected.  All parsing here is pure and thread-safe.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class MalformedTags(ValueError):
    """Rollout text does not match the strict think/answer tag grammar."""


class AnswerFormatError(ValueError):
    """Base class for answer-schema violations; each maps to format reward 0."""


class UnknownKey(AnswerFormatError):
    pass


class MissingKey(AnswerFormatError):
    pass


class MalformedNumber(AnswerFormatError):
    pass


class OutOfBounds(AnswerFormatError):
    pass


class MalformedStructure(AnswerFormatError):
    """Answer text is not a brace-delimited key/value list."""


@dataclass(frozen=True)
class Box2D:
    """Continuous axis-aligned rectangle [x1,x2] x [y1,y2] with x1<x2, y1<y2.

    A box derived from pixel indices uses x2 = max_col + 1 and y2 = max_row + 1
    so that a single pixel has area exactly 1.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box ({self.x1},{self.y1},{self.x2},{self.y2})")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def corners(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float


@dataclass(frozen=True)
class RawRollout:
    """One sampled model output plus the image bounds its coordinates refer to."""

    text: str
    image_width: float
    image_height: float

    def __post_init__(self) -> None:
        if not (self.image_width > 0 and self.image_height > 0):
            raise ValueError("image dimensions must be positive")


@dataclass(frozen=True)
class ThinkAnswerPair:
    think_text: str
    answer_text: str


@dataclass(frozen=True)
class StructuredAnswer:
    """Parsed answer payload.

    ``keypoints[0]`` is the primary point; the remainder are auxiliary points.
    ``extra_boxes`` holds any additional predicted boxes beyond ``bbox``.
    """

    bbox: Box2D
    keypoints: tuple[Point2D, ...]
    aff_method: str
    aff_part: str
    extra_boxes: tuple[Box2D, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.keypoints:
            raise ValueError("keypoints must be non-empty")

    @property
    def boxes(self) -> tuple[Box2D, ...]:
        return (self.bbox, *self.extra_boxes)


_THINK_OPEN = "<think>"
_THINK_CLOSE = "</think>"
_ANSWER_OPEN = "<answer>"
_ANSWER_CLOSE = "</answer>"
_ALL_TAGS = (_THINK_OPEN, _THINK_CLOSE, _ANSWER_OPEN, _ANSWER_CLOSE)

# Integers and decimals, optional sign and exponent; never inf/nan/hex.
_NUMBER_RE = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")

_REQUIRED_KEYS = ("bbox", "point", "aff_methods", "aff_parts")
_OPTIONAL_KEYS = ("aux_points", "bboxes")


def parse_think_answer(raw: RawRollout) -> ThinkAnswerPair:
    """Split rollout text into its think and answer blocks.

    The grammar is strict: each of the four tags appears exactly once, in
    order, tags are case-sensitive, and only whitespace may surround the two
    blocks.  Raises MalformedTags otherwise (which downstream scoring maps to
    a thinking-format reward of 0).
    """
    text = raw.text
    positions = []
    for tag in _ALL_TAGS:
        first = text.find(tag)
        if first < 0 or text.find(tag, first + 1) >= 0:
            raise MalformedTags(f"tag {tag} must appear exactly once")
        positions.append(first)
    t_open, t_close, a_open, a_close = positions
    if not (t_open < t_close < a_open < a_close):
        raise MalformedTags("tags out of order")
    if text[:t_open].strip():
        raise MalformedTags("content before <think>")
    if text[t_close + len(_THINK_CLOSE):a_open].strip():
        raise MalformedTags("content between blocks")
    if text[a_close + len(_ANSWER_CLOSE):].strip():
        raise MalformedTags("trailing content after </answer>")
    think = text[t_open + len(_THINK_OPEN):t_close]
    answer = text[a_open + len(_ANSWER_OPEN):a_close]
    return ThinkAnswerPair(think_text=think, answer_text=answer)


def _split_entries(body: str) -> list[str]:
    """Split on commas that sit outside [] and () nesting."""
    entries = []
    depth = 0
    current = []
    for ch in body:
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
            if depth < 0:
                raise MalformedStructure("unbalanced brackets")
        if ch == "," and depth == 0:
            entries.append("".join(current))
            current = []
        else:
            current.append(ch)
    if depth != 0:
        raise MalformedStructure("unbalanced brackets")
    entries.append("".join(current))
    return [e for e in entries if e.strip()]


def _parse_number(token: str) -> float:
    token = token.strip()
    if not _NUMBER_RE.match(token):
        raise MalformedNumber(f"not a number: {token!r}")
    return float(token)


def _parse_number_list(text: str, *, expect: int | None = None) -> list[float]:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise MalformedNumber(f"expected [..] list, got {text!r}")
    inner = text[1:-1].strip()
    items = [] if not inner else [_parse_number(tok) for tok in inner.split(",")]
    if expect is not None and len(items) != expect:
        raise MalformedNumber(f"expected {expect} numbers, got {len(items)}")
    return items


def _parse_list_of_lists(text: str, *, inner_len: int) -> list[list[float]]:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise MalformedNumber(f"expected [[..],..] list, got {text!r}")
    inner = text[1:-1].strip()
    if not inner:
        return []
    groups = _split_entries(inner)
    return [_parse_number_list(g, expect=inner_len) for g in groups]


def _check_box(vals: list[float], image_width: float, image_height: float) -> Box2D:
    x1, y1, x2, y2 = vals
    if not (0 <= x1 < x2 <= image_width and 0 <= y1 < y2 <= image_height):
        raise OutOfBounds(f"box [{x1},{y1},{x2},{y2}] outside {image_width}x{image_height}")
    return Box2D(x1, y1, x2, y2)


def _check_point(vals: list[float], image_width: float, image_height: float) -> Point2D:
    x, y = vals
    if not (0 <= x <= image_width and 0 <= y <= image_height):
        raise OutOfBounds(f"point ({x},{y}) outside {image_width}x{image_height}")
    return Point2D(x, y)


def parse_structured_answer(
    answer_text: str, image_width: float, image_height: float
) -> StructuredAnswer:
    """Parse the brace schema and verify every coordinate against image bounds.

    Accepted keys are bbox, point, aff_methods, aff_parts plus the optional
    aux_points and bboxes extensions; keys may appear in any order but at most
    once each.  Raises a subclass of AnswerFormatError on any violation (which
    downstream scoring maps to an answer-format reward of 0).
    """
    text = answer_text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise MalformedStructure("answer must be a {..} object")
    raw_entries = _split_entries(text[1:-1])
    seen: dict[str, str] = {}
    for entry in raw_entries:
        key, sep, value = entry.partition(":")
        key = key.strip()
        if not sep or not key:
            raise UnknownKey(f"entry {entry.strip()!r} is not 'key: value'")
        if key not in _REQUIRED_KEYS and key not in _OPTIONAL_KEYS:
            raise UnknownKey(f"key {key!r} is not accepted")
        if key in seen:
            raise UnknownKey(f"duplicate key {key!r}")
        seen[key] = value
    missing = [k for k in _REQUIRED_KEYS if k not in seen]
    if missing:
        raise MissingKey(f"missing keys: {', '.join(missing)}")

    bbox = _check_box(_parse_number_list(seen["bbox"], expect=4), image_width, image_height)
    keypoints = [_check_point(_parse_number_list(seen["point"], expect=2), image_width, image_height)]
    if "aux_points" in seen:
        for vals in _parse_list_of_lists(seen["aux_points"], inner_len=2):
            keypoints.append(_check_point(vals, image_width, image_height))
    extra_boxes = []
    if "bboxes" in seen:
        for vals in _parse_list_of_lists(seen["bboxes"], inner_len=4):
            extra_boxes.append(_check_box(vals, image_width, image_height))

    aff_method = seen["aff_methods"].strip()
    aff_part = seen["aff_parts"].strip()
    if not aff_method or not aff_part:
        raise MalformedStructure("aff_methods/aff_parts must be non-empty")
    return StructuredAnswer(
        bbox=bbox,
        keypoints=tuple(keypoints),
        aff_method=aff_method,
        aff_part=aff_part,
        extra_boxes=tuple(extra_boxes),
    )


def _fmt_num(v: float) -> str:
    iv = int(v)
    return str(iv) if iv == v else repr(float(v))


def serialize_structured_answer(ans: StructuredAnswer) -> str:
    """Render a StructuredAnswer back to the brace schema.

    The output round-trips exactly: parse(serialize(a)) == a for any valid a.
    """
    parts = [
        "bbox:[" + ",".join(_fmt_num(v) for v in ans.bbox.corners()) + "]",
        f"point:[{_fmt_num(ans.keypoints[0].x)},{_fmt_num(ans.keypoints[0].y)}]",
    ]
    if len(ans.keypoints) > 1:
        aux = ",".join(
            f"[{_fmt_num(p.x)},{_fmt_num(p.y)}]" for p in ans.keypoints[1:]
        )
        parts.append(f"aux_points:[{aux}]")
    if ans.extra_boxes:
        boxes = ",".join(
            "[" + ",".join(_fmt_num(v) for v in b.corners()) + "]" for b in ans.extra_boxes
        )
        parts.append(f"bboxes:[{boxes}]")
    parts.append(f"aff_methods: {ans.aff_method}")
    parts.append(f"aff_parts: {ans.aff_part}")
    return "{" + ", ".join(parts) + "}"


def tokens_equal(a: str, b: str) -> bool:
    """Compare affordance tokens the way labels are compared: trimmed, lowercased."""
    return a.strip().lower() == b.strip().lower()
