"""3-D grasp selection geometry.

Depth pixels are lifted through the inverse pinhole intrinsics and a
camera-to-world rigid transform into an ordered scene cloud.  The affordance
mask cuts out the target subcloud, each grasp candidate is scored by the
volumetric IoU between its closing volume (an oriented box) and the voxelized
target, infeasible candidates are dropped by width and collision checks, and
the survivors go through Top-K selection, confidence ranking, and pose NMS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, cKDTree

from .errors import DimensionMismatch
from .masks import AffordanceMask

MAX_OPEN_WIDTH_DEFAULT = 0.085  # two-finger gripper opening limit, meters
FINGER_DEPTH_DEFAULT = 0.04
FINGER_HEIGHT_DEFAULT = 0.02
FINGER_THICKNESS_DEFAULT = 0.01
BASE_DEPTH_DEFAULT = 0.02
VOXEL_DEFAULT = 0.005
CLEARANCE_DEFAULT = 0.005
NMS_TRANS_DEFAULT = 0.02
NMS_ROT_DEFAULT = math.radians(30.0)
TOP_K_DEFAULT = 10

_ORTHONORMAL_TOL = 1e-6


class NoFeasibleGrasp(RuntimeError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"no feasible grasp ({reason})")
        self.reason = reason


def _check_rotation(rotation: np.ndarray, what: str) -> np.ndarray:
    r = np.asarray(rotation, dtype=float)
    if r.shape != (3, 3):
        raise ValueError(f"{what} rotation must be 3x3")
    if not np.allclose(r.T @ r, np.eye(3), atol=_ORTHONORMAL_TOL):
        raise ValueError(f"{what} rotation is not orthonormal")
    if not math.isclose(float(np.linalg.det(r)), 1.0, abs_tol=_ORTHONORMAL_TOL):
        raise ValueError(f"{what} rotation determinant is not +1")
    return r


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole intrinsics plus a camera-to-world rigid transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        object.__setattr__(self, "rotation", _check_rotation(self.rotation, "camera"))
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, fx: float, fy: float, cx: float, cy: float) -> "CameraModel":
        return cls(fx, fy, cx, cy, np.eye(3), np.zeros(3))


@dataclass(frozen=True, eq=False)
class DepthFrame:
    """Row-major depths in meters along the optical axis; 0 or non-finite = invalid."""

    depths: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.depths, dtype=float)
        if d.ndim != 2:
            raise ValueError("depth frame must be 2-D")
        object.__setattr__(self, "depths", d)

    @property
    def width(self) -> int:
        return self.depths.shape[1]

    @property
    def height(self) -> int:
        return self.depths.shape[0]


@dataclass(frozen=True, eq=False)
class ScenePointCloud:
    """Ordered world-frame cloud: one entry per pixel, invalid pixels flagged."""

    points: np.ndarray  # (H*W, 3)
    valid: np.ndarray  # (H*W,) bool
    width: int
    height: int

    def valid_points(self) -> np.ndarray:
        return self.points[self.valid]


@dataclass(frozen=True, eq=False)
class TargetSubCloud:
    points: np.ndarray  # (M, 3)

    def is_empty(self) -> bool:
        return self.points.shape[0] == 0

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


@dataclass(frozen=True, eq=False)
class GraspCandidate:
    """6-DoF grasp: rotation columns are (closing, approach, lateral) axes."""

    center: np.ndarray
    rotation: np.ndarray
    width: float
    score: float
    finger_depth: float = FINGER_DEPTH_DEFAULT
    finger_height: float = FINGER_HEIGHT_DEFAULT

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", _check_rotation(self.rotation, "grasp"))
        if self.width <= 0:
            raise ValueError("grasp width must be positive")


@dataclass(frozen=True, eq=False)
class OrientedBox:
    center: np.ndarray
    rotation: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        h = np.asarray(self.half_extents, dtype=float).reshape(3)
        if (h <= 0).any():
            raise ValueError("half extents must be positive")
        object.__setattr__(self, "half_extents", h)

    @property
    def volume(self) -> float:
        return float(8.0 * np.prod(self.half_extents))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership for an (N, 3) array of points."""
        local = (np.atleast_2d(points) - self.center) @ self.rotation
        return (np.abs(local) <= self.half_extents).all(axis=1)

    def halfspaces(self) -> np.ndarray:
        """Six rows [nx, ny, nz, offset] with n.x + offset <= 0 inside."""
        rows = []
        for axis in range(3):
            n = self.rotation[:, axis]
            h = self.half_extents[axis]
            c = float(n @ self.center)
            rows.append([*n, -(c + h)])
            rows.append([*(-n), (c - h)])
        return np.asarray(rows, dtype=float)


def back_project(depth: DepthFrame, cam: CameraModel) -> ScenePointCloud:
    """Lift every valid depth pixel to a world-frame 3-D point, order preserved."""
    h, w = depth.depths.shape
    d = depth.depths
    valid = np.isfinite(d) & (d > 0)
    us, vs = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    x = (us - cam.cx) * d / cam.fx
    y = (vs - cam.cy) * d / cam.fy
    cam_pts = np.stack([x, y, d], axis=-1).reshape(-1, 3)
    cam_pts[~valid.reshape(-1)] = 0.0
    world = cam_pts @ cam.rotation.T + cam.translation
    world[~valid.reshape(-1)] = 0.0
    return ScenePointCloud(points=world, valid=valid.reshape(-1), width=w, height=h)


def extract_subcloud(cloud: ScenePointCloud, mask: AffordanceMask) -> TargetSubCloud:
    """Keep the points whose source pixel is foreground (and valid)."""
    if (mask.height, mask.width) != (cloud.height, cloud.width):
        raise DimensionMismatch(
            f"mask {mask.height}x{mask.width} vs frame {cloud.height}x{cloud.width}"
        )
    keep = mask.pixels.reshape(-1) & cloud.valid
    return TargetSubCloud(points=cloud.points[keep])


def closing_volume(g: GraspCandidate) -> OrientedBox:
    """Oriented box swept between the fingers when closing."""
    return OrientedBox(
        center=g.center,
        rotation=g.rotation,
        half_extents=np.array([g.width / 2.0, g.finger_depth / 2.0, g.finger_height / 2.0]),
    )


def _interior_point(halfspaces: np.ndarray) -> np.ndarray | None:
    """Chebyshev center of the halfspace intersection, or None if (near-)empty."""
    norms = np.linalg.norm(halfspaces[:, :3], axis=1, keepdims=True)
    a_ub = np.hstack([halfspaces[:, :3], norms])
    b_ub = -halfspaces[:, 3]
    cost = np.zeros(4)
    cost[3] = -1.0  # maximize the inscribed radius
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * 3 + [(0, None)])
    if not res.success or res.x[3] <= 1e-12:
        return None
    return res.x[:3]


def box_overlap_volume(a: OrientedBox, b: OrientedBox) -> float:
    """Exact intersection volume of two oriented boxes; 0 when separated.

    The intersection is the convex region bounded by the twelve face
    half-spaces; its vertices come from the half-space intersection around
    the Chebyshev center and the volume from their convex hull.
    """
    halfspaces = np.vstack([a.halfspaces(), b.halfspaces()])
    interior = _interior_point(halfspaces)
    if interior is None:
        return 0.0
    try:
        hsi = HalfspaceIntersection(halfspaces, interior)
        return float(ConvexHull(hsi.intersections).volume)
    except Exception:  # degenerate (flat) intersections have zero volume
        return 0.0


@dataclass(frozen=True)
class GraspIoU:
    iou: float
    empty_target: bool = False
    empty_box: bool = False


def grasp_target_iou(
    g: GraspCandidate, target: TargetSubCloud, voxel: float = VOXEL_DEFAULT
) -> GraspIoU:
    """Voxel IoU between the closing volume and the target region.

    The voxel grid is anchored at the target centroid and aligned with the
    candidate's own axes, which makes the score exactly invariant under rigid
    motions applied jointly to the candidate and the target.
    """
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    if target.is_empty():
        return GraspIoU(iou=0.0, empty_target=True)
    anchor = target.centroid()
    local = (target.points - anchor) @ g.rotation  # grid coords
    t_idx = np.unique(np.floor(local / voxel).astype(np.int64), axis=0)

    box = closing_volume(g)
    box_local_center = (box.center - anchor) @ g.rotation
    lo = np.floor((box_local_center - box.half_extents) / voxel - 0.5).astype(np.int64)
    hi = np.floor((box_local_center + box.half_extents) / voxel - 0.5).astype(np.int64)
    axes = [np.arange(lo[k], hi[k] + 1, dtype=np.int64) for k in range(3)]
    if any(ax.size == 0 for ax in axes):
        return GraspIoU(iou=0.0, empty_box=True)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    centers = (grid.astype(float) + 0.5) * voxel
    inside = (np.abs(centers - box_local_center) <= box.half_extents).all(axis=1)
    b_idx = grid[inside]
    if b_idx.shape[0] == 0:
        return GraspIoU(iou=0.0, empty_box=True)

    t_set = set(map(tuple, t_idx))
    b_set = set(map(tuple, b_idx))
    inter = len(t_set & b_set)
    union = len(t_set | b_set)
    return GraspIoU(iou=inter / union)


def _gripper_bodies(
    g: GraspCandidate,
    finger_thickness: float = FINGER_THICKNESS_DEFAULT,
    base_depth: float = BASE_DEPTH_DEFAULT,
) -> list[OrientedBox]:
    """Two finger boxes flanking the closing region plus a base box behind it."""
    closing = g.rotation[:, 0]
    approach = g.rotation[:, 1]
    half_fd = g.finger_depth / 2.0
    half_fh = g.finger_height / 2.0
    finger_halves = np.array([finger_thickness / 2.0, half_fd, half_fh])
    offset = (g.width + finger_thickness) / 2.0
    fingers = [
        OrientedBox(g.center + sign * offset * closing, g.rotation, finger_halves)
        for sign in (+1.0, -1.0)
    ]
    base_center = g.center - (half_fd + base_depth / 2.0) * approach
    base_halves = np.array([g.width / 2.0 + finger_thickness, base_depth / 2.0, half_fh])
    base = OrientedBox(base_center, g.rotation, base_halves)
    return [*fingers, base]


@dataclass(frozen=True)
class CollisionResult:
    feasible: bool
    offending: int


def collision_check(
    g: GraspCandidate,
    scene: ScenePointCloud,
    target: TargetSubCloud,
    clearance: float = CLEARANCE_DEFAULT,
    finger_thickness: float = FINGER_THICKNESS_DEFAULT,
) -> CollisionResult:
    """Infeasible iff a non-target scene point sits inside a gripper body.

    Scene points within `clearance` of any target point are exempt (the target
    itself is allowed to occupy the grasp region).
    """
    if clearance < 0:
        raise ValueError("clearance must be non-negative")
    pts = scene.valid_points()
    if pts.shape[0] == 0:
        return CollisionResult(feasible=True, offending=0)
    if target.is_empty():
        exempt = np.zeros(pts.shape[0], dtype=bool)
    else:
        # query slightly past the bound, then compare exactly
        dists, _ = cKDTree(target.points).query(
            pts, distance_upper_bound=clearance * (1 + 1e-9) + 1e-12
        )
        exempt = dists <= clearance
    checked = pts[~exempt]
    if checked.shape[0] == 0:
        return CollisionResult(feasible=True, offending=0)
    offending = np.zeros(checked.shape[0], dtype=bool)
    for body in _gripper_bodies(g, finger_thickness=finger_thickness):
        offending |= body.contains(checked)
    count = int(offending.sum())
    return CollisionResult(feasible=count == 0, offending=count)


def rotation_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle between two rotation matrices, in radians."""
    cos = (float(np.trace(a.T @ b)) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, cos)))


def _nms_sweep(
    candidates: list[GraspCandidate], order: list[int], trans_thresh: float, rot_thresh: float
) -> list[int]:
    kept: list[int] = []
    for i in order:
        c = candidates[i]
        suppressed = any(
            float(np.linalg.norm(c.center - candidates[k].center)) <= trans_thresh
            and rotation_angle(c.rotation, candidates[k].rotation) <= rot_thresh
            for k in kept
        )
        if not suppressed:
            kept.append(i)
    return kept


def grasp_nms(
    candidates: list[GraspCandidate],
    trans_thresh: float = NMS_TRANS_DEFAULT,
    rot_thresh: float = NMS_ROT_DEFAULT,
) -> list[GraspCandidate]:
    """Greedy pose NMS: keep by descending score unless a kept grasp is within
    BOTH the center-distance and rotation-angle thresholds."""
    if trans_thresh <= 0 or rot_thresh <= 0:
        raise ValueError("NMS thresholds must be positive")
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i].score, i))
    return [candidates[i] for i in _nms_sweep(candidates, order, trans_thresh, rot_thresh)]


@dataclass(frozen=True)
class GraspSelectConfig:
    voxel: float = VOXEL_DEFAULT
    clearance: float = CLEARANCE_DEFAULT
    top_k: int = TOP_K_DEFAULT
    iou_min: float | None = None
    nms_trans: float = NMS_TRANS_DEFAULT
    nms_rot: float = NMS_ROT_DEFAULT
    max_open_width: float = MAX_OPEN_WIDTH_DEFAULT
    finger_thickness: float = FINGER_THICKNESS_DEFAULT


@dataclass(frozen=True)
class CandidateOutcome:
    index: int
    stage: str  # "selected" | "width" | "collision" | "iou-threshold" | "topk" | "nms"
    iou: float | None = None
    rank: int | None = None


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[tuple[GraspCandidate, float], ...]  # (candidate, iou) ranked
    outcomes: tuple[CandidateOutcome, ...]


def select_grasps(
    candidates: list[GraspCandidate],
    scene: ScenePointCloud,
    target: TargetSubCloud,
    cfg: GraspSelectConfig = GraspSelectConfig(),
) -> SelectionResult:
    """Three-stage selection: feasibility gates, Top-K by target IoU, then
    confidence ranking with pose NMS.  Raises NoFeasibleGrasp with a stage
    reason when nothing survives."""
    if not candidates:
        raise NoFeasibleGrasp("no-candidates")
    if target.is_empty():
        raise NoFeasibleGrasp("empty-target")

    outcomes: dict[int, CandidateOutcome] = {}
    stage1: list[int] = []
    width_drops = 0
    for i, c in enumerate(candidates):
        if c.width > cfg.max_open_width:
            outcomes[i] = CandidateOutcome(index=i, stage="width")
            width_drops += 1
            continue
        coll = collision_check(
            c, scene, target, clearance=cfg.clearance, finger_thickness=cfg.finger_thickness
        )
        if not coll.feasible:
            outcomes[i] = CandidateOutcome(index=i, stage="collision")
            continue
        stage1.append(i)
    if not stage1:
        dropped = len(candidates)
        if width_drops == dropped:
            raise NoFeasibleGrasp("width")
        if width_drops == 0:
            raise NoFeasibleGrasp("collision")
        raise NoFeasibleGrasp("width+collision")

    ious = {i: grasp_target_iou(candidates[i], target, voxel=cfg.voxel).iou for i in stage1}
    stage2 = stage1
    if cfg.iou_min is not None:
        stage2 = [i for i in stage1 if ious[i] >= cfg.iou_min]
        for i in stage1:
            if i not in stage2:
                outcomes[i] = CandidateOutcome(index=i, stage="iou-threshold", iou=ious[i])
        if not stage2:
            raise NoFeasibleGrasp("iou-threshold")
    ranked_by_iou = sorted(stage2, key=lambda i: (-ious[i], -candidates[i].score, i))
    kept_topk = ranked_by_iou[: cfg.top_k]
    for i in ranked_by_iou[cfg.top_k:]:
        outcomes[i] = CandidateOutcome(index=i, stage="topk", iou=ious[i])

    by_conf = sorted(kept_topk, key=lambda i: (-candidates[i].score, i))
    kept_ids = _nms_sweep(candidates, by_conf, cfg.nms_trans, cfg.nms_rot)
    for i in by_conf:
        if i not in kept_ids:
            outcomes[i] = CandidateOutcome(index=i, stage="nms", iou=ious[i])
    selected = []
    for rank, i in enumerate(kept_ids):
        outcomes[i] = CandidateOutcome(index=i, stage="selected", iou=ious[i], rank=rank)
        selected.append((candidates[i], ious[i]))
    ordered_outcomes = tuple(outcomes[i] for i in sorted(outcomes))
    return SelectionResult(selected=tuple(selected), outcomes=ordered_outcomes)
