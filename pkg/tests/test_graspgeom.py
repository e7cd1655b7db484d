import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from affgr.errors import DimensionMismatch
from affgr.graspgeom import (
    CameraModel,
    DepthFrame,
    GraspCandidate,
    GraspSelectConfig,
    NoFeasibleGrasp,
    OrientedBox,
    TargetSubCloud,
    back_project,
    box_overlap_volume,
    closing_volume,
    collision_check,
    extract_subcloud,
    grasp_nms,
    grasp_target_iou,
    rotation_angle,
    select_grasps,
)
from affgr.masks import AffordanceMask

from synthetic_scene import (
    TOPDOWN,
    all_candidates,
    camera,
    cloud_from_points,
    depth_frame,
    planted_grasp,
    target_mask,
)


def random_rotation(rng) -> np.ndarray:
    return Rotation.from_rotvec(rng.normal(size=3)).as_matrix()


def forward_project(point, cam: CameraModel):
    """Independent pinhole forward model: world point -> (u, v, d)."""
    p = cam.rotation.T @ (np.asarray(point) - cam.translation)
    return cam.fx * p[0] / p[2] + cam.cx, cam.fy * p[1] / p[2] + cam.cy, p[2]


class TestBackProject:
    def test_principal_point_on_axis(self):
        cam = CameraModel.identity(600, 600, 320, 240)
        depths = np.zeros((480, 640))
        depths[240, 320] = 0.5
        cloud = back_project(DepthFrame(depths), cam)
        assert cloud.points[240 * 640 + 320] == pytest.approx([0.0, 0.0, 0.5])

    def test_off_axis_pixel(self):
        cam = CameraModel.identity(600, 600, 320, 240)
        depths = np.zeros((480, 640))
        depths[240, 620] = 1.0
        cloud = back_project(DepthFrame(depths), cam)
        assert cloud.points[240 * 640 + 620] == pytest.approx([0.5, 0.0, 1.0])

    def test_invalid_pixels_flagged(self):
        cam = CameraModel.identity(100, 100, 2, 2)
        depths = np.array([[1.0, 0.0], [np.nan, 2.0]])
        cloud = back_project(DepthFrame(depths), cam)
        assert list(cloud.valid) == [True, False, False, True]

    def test_round_trip_against_forward_model(self):
        rng = np.random.default_rng(31)
        cam = CameraModel(
            fx=480.0, fy=510.0, cx=31.0, cy=23.5,
            rotation=random_rotation(rng), translation=rng.normal(size=3),
        )
        depths = rng.uniform(0.3, 2.0, size=(48, 64))
        cloud = back_project(DepthFrame(depths), cam)
        for _ in range(200):
            v = int(rng.integers(0, 48))
            u = int(rng.integers(0, 64))
            pu, pv, pd = forward_project(cloud.points[v * 64 + u], cam)
            assert abs(pu - u) < 1e-6
            assert abs(pv - v) < 1e-6
            assert abs(pd - depths[v, u]) < 1e-6

    def test_ordering_preserved(self):
        cam = CameraModel.identity(10, 10, 0, 0)
        depths = np.arange(1, 7, dtype=float).reshape(2, 3)
        cloud = back_project(DepthFrame(depths), cam)
        assert cloud.points[:, 2] == pytest.approx(depths.reshape(-1))


class TestExtractSubcloud:
    def setup_method(self):
        self.cam = CameraModel.identity(100, 100, 8, 6)
        self.depths = np.full((12, 16), 1.5)
        self.cloud = back_project(DepthFrame(self.depths), self.cam)

    def test_full_mask_keeps_all(self):
        mask = AffordanceMask(np.ones((12, 16), dtype=bool))
        sub = extract_subcloud(self.cloud, mask)
        assert sub.points.shape == (12 * 16, 3)

    def test_empty_mask_empty_subcloud(self):
        sub = extract_subcloud(self.cloud, AffordanceMask.zeros(16, 12))
        assert sub.is_empty()

    def test_checkerboard_selects_exact_index_set(self):
        pattern = (np.indices((12, 16)).sum(axis=0) % 2).astype(bool)
        sub = extract_subcloud(self.cloud, AffordanceMask(pattern))
        expected = self.cloud.points[pattern.reshape(-1)]
        assert np.array_equal(sub.points, expected)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            extract_subcloud(self.cloud, AffordanceMask.zeros(4, 4))


class TestClosingVolume:
    def test_half_extents(self):
        g = GraspCandidate(np.zeros(3), np.eye(3), width=0.08, score=0.5,
                           finger_depth=0.04, finger_height=0.02)
        box = closing_volume(g)
        assert box.half_extents == pytest.approx([0.04, 0.02, 0.01])

    def test_axes_equal_rotation_columns(self):
        rot = random_rotation(np.random.default_rng(1))
        g = GraspCandidate(np.zeros(3), rot, width=0.05, score=0.5)
        assert np.array_equal(closing_volume(g).rotation, rot)

    def test_translation_equivariance(self):
        rot = random_rotation(np.random.default_rng(2))
        a = GraspCandidate(np.zeros(3), rot, width=0.05, score=0.5)
        b = GraspCandidate(np.array([1.0, 2.0, 3.0]), rot, width=0.05, score=0.5)
        va, vb = closing_volume(a), closing_volume(b)
        assert np.array_equal(va.half_extents, vb.half_extents)
        assert np.array_equal(va.rotation, vb.rotation)
        assert vb.center - va.center == pytest.approx([1.0, 2.0, 3.0])


def mc_overlap_volume(a: OrientedBox, b: OrientedBox, n: int, rng) -> float:
    """Monte-Carlo oracle: uniform samples in box a, fraction landing in b."""
    local = rng.uniform(-1.0, 1.0, size=(n, 3)) * a.half_extents
    pts = local @ a.rotation.T + a.center
    frac = b.contains(pts).mean()
    return a.volume * float(frac)


def random_obb(rng, span=0.5) -> OrientedBox:
    return OrientedBox(
        center=rng.uniform(-span / 4, span / 4, size=3),
        rotation=random_rotation(rng),
        half_extents=rng.uniform(0.05, span / 2, size=3),
    )


class TestBoxOverlapVolume:
    def test_identical_unit_cubes(self):
        cube = OrientedBox(np.zeros(3), np.eye(3), np.full(3, 0.5))
        assert box_overlap_volume(cube, cube) == pytest.approx(1.0, rel=1e-9)

    def test_offset_unit_cubes(self):
        a = OrientedBox(np.zeros(3), np.eye(3), np.full(3, 0.5))
        b = OrientedBox(np.array([0.5, 0.0, 0.0]), np.eye(3), np.full(3, 0.5))
        vol = box_overlap_volume(a, b)
        assert vol == pytest.approx(0.5, rel=1e-9)
        iou = vol / (a.volume + b.volume - vol)
        assert iou == pytest.approx(1 / 3, rel=1e-9)

    def test_separated(self):
        a = OrientedBox(np.zeros(3), np.eye(3), np.full(3, 0.5))
        b = OrientedBox(np.array([5.0, 0.0, 0.0]), np.eye(3), np.full(3, 0.5))
        assert box_overlap_volume(a, b) == 0.0

    def test_rotated_analytic_case(self):
        # unit cube vs the same cube rotated 45 deg about z: intersection is a
        # regular octagon prism with area 8*(sqrt(2)-1)
        a = OrientedBox(np.zeros(3), np.eye(3), np.full(3, 0.5))
        rot = Rotation.from_euler("z", 45, degrees=True).as_matrix()
        b = OrientedBox(np.zeros(3), rot, np.full(3, 0.5))
        area = 8 * (math.sqrt(2) - 1) / 4  # octagon from unit square pair
        assert box_overlap_volume(a, b) == pytest.approx(area, rel=1e-9)

    def test_symmetry_and_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            a, b = random_obb(rng), random_obb(rng)
            vab = box_overlap_volume(a, b)
            vba = box_overlap_volume(b, a)
            assert vab == pytest.approx(vba, rel=1e-6, abs=1e-12)
            assert vab <= min(a.volume, b.volume) + 1e-12

    def test_against_monte_carlo(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            a, b = random_obb(rng), random_obb(rng)
            exact = box_overlap_volume(a, b)
            approx = mc_overlap_volume(a, b, 200_000, rng)
            sigma = a.volume / math.sqrt(200_000)
            assert abs(exact - approx) <= max(0.02 * exact, 4 * sigma)


class TestGraspTargetIoU:
    def test_exact_fill_is_one(self):
        g = GraspCandidate(np.zeros(3), np.eye(3), width=0.04, score=0.5,
                           finger_depth=0.04, finger_height=0.04)
        # place one target point at each voxel center inside the closing box;
        # anchored at the centroid, these voxels exactly tile the box
        voxel = 0.01
        axes = np.arange(-0.02 + voxel / 2, 0.02, voxel)
        pts = np.stack(np.meshgrid(axes, axes, axes, indexing="ij"), axis=-1).reshape(-1, 3)
        result = grasp_target_iou(g, TargetSubCloud(points=pts), voxel=voxel)
        assert result.iou == 1.0

    def test_disjoint_is_zero(self):
        g = GraspCandidate(np.zeros(3), np.eye(3), width=0.05, score=0.5)
        pts = np.full((50, 3), 2.0) + np.random.default_rng(0).normal(0, 0.01, (50, 3))
        result = grasp_target_iou(g, TargetSubCloud(points=pts))
        assert result.iou == 0.0

    def test_empty_target_flagged(self):
        g = GraspCandidate(np.zeros(3), np.eye(3), width=0.05, score=0.5)
        result = grasp_target_iou(g, TargetSubCloud(points=np.zeros((0, 3))))
        assert result.iou == 0.0
        assert result.empty_target

    def test_half_slab_matches_enumeration(self):
        rng = np.random.default_rng(9)
        g = GraspCandidate(np.zeros(3), np.eye(3), width=0.06, score=0.5,
                           finger_depth=0.04, finger_height=0.02)
        pts = rng.uniform(-0.05, 0.05, size=(400, 3)) * np.array([1.0, 0.6, 0.3])
        target = TargetSubCloud(points=pts)
        voxel = 0.005
        result = grasp_target_iou(g, target, voxel=voxel)
        # definitional enumeration in the same anchored grid
        anchor = target.centroid()
        local = (pts - anchor) @ g.rotation
        t_set = {tuple(v) for v in np.floor(local / voxel).astype(int)}
        box_c = (g.center - anchor) @ g.rotation
        half = np.array([0.03, 0.02, 0.01])
        b_set = set()
        for i in range(-30, 30):
            for j in range(-30, 30):
                for k in range(-30, 30):
                    center = (np.array([i, j, k]) + 0.5) * voxel
                    if (np.abs(center - box_c) <= half).all():
                        b_set.add((i, j, k))
        expected = len(t_set & b_set) / len(t_set | b_set)
        assert result.iou == pytest.approx(expected, abs=1e-12)

    def test_rigid_invariance(self):
        rng = np.random.default_rng(10)
        g = GraspCandidate(np.array([0.01, 0.0, 0.9]), TOPDOWN, width=0.05, score=0.5)
        pts = rng.uniform(-0.03, 0.03, size=(300, 3)) + np.array([0.0, 0.0, 0.9])
        base = grasp_target_iou(g, TargetSubCloud(points=pts)).iou
        for _ in range(10):
            rot = random_rotation(rng)
            t = rng.normal(size=3)
            g2 = GraspCandidate(rot @ g.center + t, rot @ g.rotation, width=0.05, score=0.5)
            moved = grasp_target_iou(g2, TargetSubCloud(points=pts @ rot.T + t)).iou
            assert moved == pytest.approx(base, abs=1e-9)


class TestCollision:
    def test_empty_scene_feasible(self):
        g = planted_grasp()
        empty = cloud_from_points(np.zeros((0, 3)))
        result = collision_check(g, empty, TargetSubCloud(points=np.zeros((0, 3))))
        assert result.feasible

    def test_wall_through_finger_infeasible(self):
        g = GraspCandidate(np.zeros(3), np.eye(3), width=0.05, score=0.5)
        # wall of points at the right finger's x offset
        x = (0.05 + 0.01) / 2
        ys, zs = np.meshgrid(np.linspace(-0.01, 0.01, 10), np.linspace(-0.005, 0.005, 10))
        wall = np.stack([np.full(ys.size, x), ys.ravel(), zs.ravel()], axis=1)
        result = collision_check(g, cloud_from_points(wall), TargetSubCloud(np.zeros((0, 3))))
        assert not result.feasible
        assert result.offending > 0

    def test_target_points_exempt(self):
        g = GraspCandidate(np.zeros(3), np.eye(3), width=0.05, score=0.5)
        # points dead inside the right finger body; as the target they are exempt
        finger_x = (0.05 + 0.01) / 2
        inside = np.random.default_rng(3).uniform(-0.004, 0.004, size=(30, 3))
        inside[:, 0] += finger_x
        scene = cloud_from_points(inside)
        assert not collision_check(g, scene, TargetSubCloud(points=np.zeros((0, 3)))).feasible
        assert collision_check(g, scene, TargetSubCloud(points=inside)).feasible

    def test_clearance_widens_exemption(self):
        g = GraspCandidate(np.zeros(3), np.eye(3), width=0.05, score=0.5)
        finger_x = (0.05 + 0.01) / 2
        offender = np.array([[finger_x, 0.0, 0.0]])
        target = TargetSubCloud(points=np.array([[finger_x + 0.004, 0.0, 0.0]]))
        tight = collision_check(g, cloud_from_points(offender), target, clearance=0.001)
        loose = collision_check(g, cloud_from_points(offender), target, clearance=0.01)
        assert not tight.feasible
        assert loose.feasible


class TestGraspNms:
    def test_identical_poses_keep_top_score(self):
        a = GraspCandidate(np.zeros(3), np.eye(3), width=0.05, score=0.9)
        b = GraspCandidate(np.zeros(3), np.eye(3), width=0.05, score=0.8)
        kept = grasp_nms([b, a])
        assert len(kept) == 1
        assert kept[0].score == 0.9

    def test_far_apart_both_kept(self):
        a = GraspCandidate(np.zeros(3), np.eye(3), width=0.05, score=0.9)
        b = GraspCandidate(np.array([1.0, 0, 0]), np.eye(3), width=0.05, score=0.8)
        assert len(grasp_nms([a, b])) == 2

    def test_rotation_gate(self):
        # same center but rotated far past the angular threshold: kept
        rot = Rotation.from_euler("z", 90, degrees=True).as_matrix()
        a = GraspCandidate(np.zeros(3), np.eye(3), width=0.05, score=0.9)
        b = GraspCandidate(np.zeros(3), rot, width=0.05, score=0.8)
        assert len(grasp_nms([a, b])) == 2

    def test_chain_collapses_to_top(self):
        # three mutually-near grasps: only the best survives greedy NMS
        mk = lambda x, s: GraspCandidate(np.array([x, 0, 0]), np.eye(3), width=0.05, score=s)
        kept = grasp_nms([mk(0.0, 0.7), mk(0.015, 0.9), mk(0.03, 0.8)])
        assert [k.score for k in kept] == [0.9]

    def test_antichain_property(self):
        rng = np.random.default_rng(12)
        cands = [
            GraspCandidate(rng.uniform(-0.05, 0.05, 3), random_rotation(rng),
                           width=0.05, score=float(rng.uniform(0, 1)))
            for _ in range(40)
        ]
        kept = grasp_nms(cands)
        for i, a in enumerate(kept):
            for b in kept[i + 1:]:
                near = (
                    float(np.linalg.norm(a.center - b.center)) <= 0.02
                    and rotation_angle(a.rotation, b.rotation) <= math.radians(30)
                )
                assert not near


class TestSelectGrasps:
    def setup_method(self):
        self.scene = back_project(depth_frame(), camera())
        self.target = extract_subcloud(self.scene, target_mask())

    def test_single_feasible_candidate_returned(self):
        result = select_grasps([planted_grasp()], self.scene, self.target)
        assert len(result.selected) == 1
        assert result.outcomes[0].stage == "selected"

    def test_planted_grasp_ranks_first(self):
        cands = all_candidates()
        result = select_grasps(cands, self.scene, self.target)
        first, first_iou = result.selected[0]
        assert first is cands[0]
        assert first_iou == max(iou for _, iou in result.selected)

    def test_all_oversize_raises_width(self):
        cands = [
            GraspCandidate(np.zeros(3), np.eye(3), width=0.1 + 0.01 * i, score=0.5)
            for i in range(3)
        ]
        with pytest.raises(NoFeasibleGrasp) as excinfo:
            select_grasps(cands, self.scene, self.target)
        assert excinfo.value.reason == "width"

    def test_empty_target_raises(self):
        empty = extract_subcloud(self.scene, target_mask(empty=True))
        with pytest.raises(NoFeasibleGrasp) as excinfo:
            select_grasps(all_candidates(), self.scene, empty)
        assert excinfo.value.reason == "empty-target"

    def test_output_subset_of_input(self):
        cands = all_candidates()
        result = select_grasps(cands, self.scene, self.target)
        ids = {id(c) for c in cands}
        assert all(id(c) in ids for c, _ in result.selected)

    def test_top_k_monotone(self):
        cands = all_candidates()
        pre_nms_sets = []
        for k in (3, 6, 10):
            cfg = GraspSelectConfig(top_k=k)
            result = select_grasps(cands, self.scene, self.target, cfg)
            surviving = {
                o.index for o in result.outcomes if o.stage in ("selected", "nms")
            }
            pre_nms_sets.append(surviving)
        assert pre_nms_sets[0] <= pre_nms_sets[1] <= pre_nms_sets[2]

    def test_stage_outcomes_cover_all_candidates(self):
        cands = all_candidates()
        result = select_grasps(cands, self.scene, self.target)
        assert sorted(o.index for o in result.outcomes) == list(range(len(cands)))

    def test_rigid_motion_leaves_ranking_unchanged(self):
        rng = np.random.default_rng(77)
        cands = all_candidates()
        base = select_grasps(cands, self.scene, self.target)
        base_order = [id(c) for c, _ in base.selected]
        for _ in range(5):
            rot = random_rotation(rng)
            t = rng.normal(size=3)
            moved_scene = cloud_from_points(self.scene.valid_points() @ rot.T + t)
            moved_target = TargetSubCloud(points=self.target.points @ rot.T + t)
            moved = [
                GraspCandidate(rot @ c.center + t, rot @ c.rotation, width=c.width,
                               score=c.score, finger_depth=c.finger_depth,
                               finger_height=c.finger_height)
                for c in cands
            ]
            result = select_grasps(moved, moved_scene, moved_target)
            order = [moved.index(c) for c, _ in result.selected]
            expected = [next(i for i, c in enumerate(cands) if id(c) == cid) for cid in base_order]
            assert order == expected
