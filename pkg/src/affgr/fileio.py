"""File formats: masks (PGM / AGM1), depth (AGD1), matrices (AGX1), clouds
(AGP1 / JSONL), camera JSON, and the JSONL record schemas used by the CLI.

All multi-byte binary fields are little-endian.  Readers validate eagerly and
raise FormatError naming what went wrong; writers emit byte-stable output.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .masks import AffordanceMask
from .graspgeom import (
    FINGER_DEPTH_DEFAULT,
    FINGER_HEIGHT_DEFAULT,
    CameraModel,
    DepthFrame,
    GraspCandidate,
)


class FormatError(ValueError):
    pass


# ---------------------------------------------------------------- masks

def read_mask(path: str | Path) -> AffordanceMask:
    data = Path(path).read_bytes()
    if data[:2] == b"P5":
        return _parse_pgm(data, path)
    if data[:4] == b"AGM1":
        return _parse_agm(data, path)
    raise FormatError(f"{path}: unknown mask format (want PGM P5 or AGM1)")


def _parse_pgm(data: bytes, path: str | Path) -> AffordanceMask:
    # header tokens: magic, width, height, maxval; '#' comments allowed
    tokens: list[bytes] = []
    i = 2  # past magic
    while len(tokens) < 3:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i < len(data) and data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i:i + 1].isspace():
            i += 1
        if start == i:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:i])
    i += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if width <= 0 or height <= 0 or not (0 < maxval < 256):
        raise FormatError(f"{path}: unsupported PGM geometry {width}x{height} maxval {maxval}")
    pixels = data[i:i + width * height]
    if len(pixels) != width * height:
        raise FormatError(f"{path}: PGM payload truncated")
    arr = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width)
    return AffordanceMask(arr != 0)


def write_mask_pgm(mask: AffordanceMask, path: str | Path) -> None:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode()
    payload = (mask.pixels.astype(np.uint8) * 255).tobytes()
    Path(path).write_bytes(header + payload)


def _parse_agm(data: bytes, path: str | Path) -> AffordanceMask:
    if len(data) < 12:
        raise FormatError(f"{path}: AGM1 header truncated")
    width, height = struct.unpack_from("<II", data, 4)
    if width == 0 or height == 0:
        raise FormatError(f"{path}: zero AGM1 dimension")
    if len(data) != 12 + width * height:
        raise FormatError(f"{path}: AGM1 payload size mismatch")
    arr = np.frombuffer(data, dtype=np.uint8, offset=12).reshape(height, width)
    return AffordanceMask(arr != 0)


def write_mask_agm(mask: AffordanceMask, path: str | Path) -> None:
    header = b"AGM1" + struct.pack("<II", mask.width, mask.height)
    Path(path).write_bytes(header + mask.pixels.astype(np.uint8).tobytes())


# ---------------------------------------------------------------- depth

def read_depth(path: str | Path) -> DepthFrame:
    data = Path(path).read_bytes()
    if data[:4] != b"AGD1":
        raise FormatError(f"{path}: not an AGD1 depth file")
    if len(data) < 12:
        raise FormatError(f"{path}: AGD1 header truncated")
    width, height = struct.unpack_from("<II", data, 4)
    expected = 12 + 4 * width * height
    if width == 0 or height == 0 or len(data) != expected:
        raise FormatError(f"{path}: AGD1 payload size mismatch")
    depths = np.frombuffer(data, dtype="<f4", offset=12).astype(float).reshape(height, width)
    return DepthFrame(depths=depths)


def write_depth(frame: DepthFrame, path: str | Path) -> None:
    header = b"AGD1" + struct.pack("<II", frame.width, frame.height)
    Path(path).write_bytes(header + frame.depths.astype("<f4").tobytes())


# ---------------------------------------------------------------- matrices

def read_matrix(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != b"AGX1":
        raise FormatError(f"{path}: not an AGX1 matrix file")
    if len(data) < 12:
        raise FormatError(f"{path}: AGX1 header truncated")
    rows, cols = struct.unpack_from("<II", data, 4)
    if rows == 0 or cols == 0 or len(data) != 12 + 8 * rows * cols:
        raise FormatError(f"{path}: AGX1 payload size mismatch")
    return np.frombuffer(data, dtype="<f8", offset=12).reshape(rows, cols).copy()


def write_matrix(matrix: np.ndarray, path: str | Path) -> None:
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    header = b"AGX1" + struct.pack("<II", m.shape[0], m.shape[1])
    Path(path).write_bytes(header + m.astype("<f8").tobytes())


def load_lowrank_adapter(base_path: str | Path, up_path: str | Path,
                         down_path: str | Path) -> "LowRankAdapter":
    """Assemble a low-rank adapter from three AGX1 matrix files."""
    from .grpo import LowRankAdapter

    return LowRankAdapter(
        base=read_matrix(base_path), up=read_matrix(up_path), down=read_matrix(down_path)
    )


# ---------------------------------------------------------------- clouds

def read_cloud(path: str | Path) -> np.ndarray:
    """Points as (N, 3) float64 from AGP1 or JSONL ([x,y,z] per line)."""
    p = Path(path)
    with p.open("rb") as fh:
        head = fh.read(4)
    if head == b"AGP1":
        data = p.read_bytes()
        if len(data) < 12:
            raise FormatError(f"{path}: AGP1 header truncated")
        (count,) = struct.unpack_from("<Q", data, 4)
        if len(data) != 12 + 12 * count:
            raise FormatError(f"{path}: AGP1 payload size mismatch")
        return np.frombuffer(data, dtype="<f4", offset=12).astype(float).reshape(count, 3)
    points = []
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            value = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: bad JSON") from exc
        if isinstance(value, dict):
            value = [value.get("x"), value.get("y"), value.get("z")]
        if not (isinstance(value, list) and len(value) == 3):
            raise FormatError(f"{path}:{lineno}: expected [x,y,z]")
        points.append([float(v) for v in value])
    return np.asarray(points, dtype=float).reshape(-1, 3)


def write_cloud_agp(points: np.ndarray, path: str | Path) -> None:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    header = b"AGP1" + struct.pack("<Q", pts.shape[0])
    Path(path).write_bytes(header + pts.astype("<f4").tobytes())


# ---------------------------------------------------------------- camera

def read_camera(path: str | Path) -> CameraModel:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: bad camera JSON") from exc
    try:
        rotation = np.asarray(obj["rotation"], dtype=float).reshape(3, 3)
        return CameraModel(
            fx=float(obj["fx"]),
            fy=float(obj["fy"]),
            cx=float(obj["cx"]),
            cy=float(obj["cy"]),
            rotation=rotation,
            translation=np.asarray(obj["translation"], dtype=float).reshape(3),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: invalid camera model: {exc}") from exc


def write_camera(cam: CameraModel, path: str | Path) -> None:
    obj = {
        "fx": cam.fx,
        "fy": cam.fy,
        "cx": cam.cx,
        "cy": cam.cy,
        "rotation": [[float(v) for v in row] for row in cam.rotation],
        "translation": [float(v) for v in cam.translation],
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


# ---------------------------------------------------------------- JSONL

def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    records = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: bad JSON") from exc
        if not isinstance(obj, dict):
            raise FormatError(f"{path}:{lineno}: expected an object")
        records.append(obj)
    return records


def write_jsonl(records: Iterable[dict[str, Any]], path: str | Path) -> None:
    lines = [json.dumps(r, sort_keys=False, separators=(", ", ": ")) for r in records]
    Path(path).write_text("".join(line + "\n" for line in lines))


def dump_jsonl_line(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=False, separators=(", ", ": "))


def parse_candidate(obj: dict[str, Any], where: str) -> GraspCandidate:
    try:
        return GraspCandidate(
            center=np.asarray(obj["center"], dtype=float).reshape(3),
            rotation=np.asarray(obj["rotation"], dtype=float).reshape(3, 3),
            width=float(obj["width"]),
            score=float(obj["score"]),
            finger_depth=float(obj.get("finger_depth", FINGER_DEPTH_DEFAULT)),
            finger_height=float(obj.get("finger_height", FINGER_HEIGHT_DEFAULT)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: invalid grasp candidate: {exc}") from exc


def candidate_to_record(c: GraspCandidate) -> dict[str, Any]:
    return {
        "center": [float(v) for v in c.center],
        "rotation": [[float(v) for v in row] for row in c.rotation],
        "width": c.width,
        "finger_depth": c.finger_depth,
        "finger_height": c.finger_height,
        "score": c.score,
    }


def cot_record_to_json(record: "CoTRecord") -> dict[str, Any]:
    from .schema import serialize_structured_answer

    return {
        "image_ref": record.image_ref,
        "instruction": record.instruction,
        "reasoning": record.reasoning,
        "answer": serialize_structured_answer(record.answer),
        "aff_method": record.aff_method,
        "aff_part": record.aff_part,
        "gate_iou": record.gate_iou,
    }


def cot_record_from_json(obj: dict[str, Any], where: str,
                         image_width: float = float("inf"),
                         image_height: float = float("inf")) -> "CoTRecord":
    """Rebuild a training record; the answer string is re-parsed and, when the
    caller knows the image dimensions, re-checked against them."""
    from .dataprep import CoTRecord
    from .schema import AnswerFormatError, parse_structured_answer

    try:
        answer = parse_structured_answer(str(obj["answer"]), image_width, image_height)
        return CoTRecord(
            image_ref=str(obj["image_ref"]),
            instruction=str(obj["instruction"]),
            reasoning=str(obj["reasoning"]),
            answer=answer,
            aff_method=str(obj["aff_method"]),
            aff_part=str(obj["aff_part"]),
            gate_iou=float(obj["gate_iou"]),
        )
    except (KeyError, TypeError, ValueError, AnswerFormatError) as exc:
        raise FormatError(f"{where}: invalid training record: {exc}") from exc
