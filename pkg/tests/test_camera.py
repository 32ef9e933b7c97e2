import numpy as np
import pytest

from handfit.camera import (
    BehindCameraError,
    Camera,
    Keypoints2D,
    default_camera,
    mirror_camera,
    project,
    project_points,
    projection_jacobian,
)
from handfit.skeleton import NUM_JOINTS


class TestCamera:
    def test_known_projection(self, cam):
        pts = np.array([[0.0, 0.0, 0.5], [0.1, 0.0, 0.5], [0.0, -0.05, 0.25]])
        px = project_points(pts, cam)
        np.testing.assert_allclose(px[0], [cam.cx, cam.cy])
        np.testing.assert_allclose(px[1], [cam.cx + cam.fx * 0.2, cam.cy])
        np.testing.assert_allclose(px[2], [cam.cx, cam.cy - cam.fy * 0.2])

    def test_behind_camera_reports_joint(self, cam):
        pts = np.zeros((3, 3))
        pts[:, 2] = [0.5, -0.1, 0.5]
        with pytest.raises(BehindCameraError) as err:
            project_points(pts, cam)
        assert err.value.joint_index == 1
        assert err.value.depth == pytest.approx(-0.1)

    def test_invalid_intrinsics(self):
        with pytest.raises(ValueError):
            Camera(fx=-1.0, fy=500.0, cx=0.0, cy=0.0)
        with pytest.raises(ValueError):
            Camera(fx=500.0, fy=500.0, cx=0.0, cy=0.0, z_min=0.0)

    def test_round_trip(self, cam):
        assert Camera.from_dict(cam.to_dict()) == cam

    def test_mirror_camera(self, cam):
        m = mirror_camera(cam)
        assert m.cx == cam.image_width - 1 - cam.cx
        assert mirror_camera(m) == cam

    def test_jacobian_matches_fd(self, cam):
        rng = np.random.default_rng(0)
        pts = np.column_stack([
            rng.uniform(-0.2, 0.2, 10),
            rng.uniform(-0.2, 0.2, 10),
            rng.uniform(0.3, 0.9, 10),
        ])
        jac = projection_jacobian(pts, cam)
        h = 1e-6
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fd = (project_points(pts + e, cam) - project_points(pts - e, cam)) / (2 * h)
            np.testing.assert_allclose(jac[:, :, k], fd, atol=1e-5)


class TestKeypoints2D:
    def test_from_sparse(self):
        kp = Keypoints2D.from_sparse({0: (10.0, 20.0), 8: (30.0, 40.0)})
        assert list(kp.annotated_indices) == [0, 8]
        np.testing.assert_array_equal(kp.points[8], [30.0, 40.0])

    def test_default_mask_all_annotated(self):
        kp = Keypoints2D(np.zeros((NUM_JOINTS, 2)))
        assert kp.mask.all()

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            Keypoints2D(np.zeros((20, 2)))
        with pytest.raises(ValueError):
            Keypoints2D(np.zeros((NUM_JOINTS, 2)), np.ones(20, dtype=bool))

    def test_annotated_points_must_be_finite(self):
        pts = np.zeros((NUM_JOINTS, 2))
        pts[3, 0] = np.nan
        with pytest.raises(ValueError):
            Keypoints2D(pts)
        mask = np.ones(NUM_JOINTS, dtype=bool)
        mask[3] = False
        Keypoints2D(pts, mask)  # unannotated entries may be anything

    def test_project_marks_all_annotated(self, cam):
        pts = np.tile([0.0, 0.0, 0.5], (NUM_JOINTS, 1))
        assert project(pts, cam).mask.all()
