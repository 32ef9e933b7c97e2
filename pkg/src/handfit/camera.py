"""Pinhole projection from metric camera-frame points to pixels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .skeleton import NUM_JOINTS


class BehindCameraError(ValueError):
    """A point sits at or behind the minimum valid depth."""

    def __init__(self, joint_index: int, depth: float):
        self.joint_index = joint_index
        self.depth = depth
        super().__init__(f"joint {joint_index} at depth {depth:.4f} m is behind the camera")


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    image_width: int = 800
    image_height: int = 448
    z_min: float = 0.01

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.z_min <= 0:
            raise ValueError("z_min must be positive")

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "image_width": self.image_width, "image_height": self.image_height,
            "z_min": self.z_min,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        return cls(**d)


def mirror_camera(cam: Camera) -> Camera:
    """Intrinsics seen by horizontally flipped images (u -> width - 1 - u)."""
    from dataclasses import replace

    return replace(cam, cx=cam.image_width - 1 - cam.cx)


def default_camera() -> Camera:
    """Test camera for the default 800x448 frame."""
    return Camera(fx=500.0, fy=500.0, cx=400.0, cy=224.0)


@dataclass
class Keypoints2D:
    """21 pixel positions plus the mask of annotated joints."""

    points: np.ndarray
    mask: np.ndarray = field(default_factory=lambda: np.ones(NUM_JOINTS, dtype=bool))

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.points.shape != (NUM_JOINTS, 2):
            raise ValueError("points must be (21, 2)")
        if self.mask.shape != (NUM_JOINTS,):
            raise ValueError("mask must be (21,)")
        if not np.all(np.isfinite(self.points[self.mask])):
            raise ValueError("annotated keypoints must be finite")

    @classmethod
    def from_sparse(cls, entries: dict[int, tuple[float, float]]) -> "Keypoints2D":
        points = np.zeros((NUM_JOINTS, 2))
        mask = np.zeros(NUM_JOINTS, dtype=bool)
        for joint, uv in entries.items():
            points[joint] = uv
            mask[joint] = True
        return cls(points, mask)

    @property
    def annotated_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def copy(self) -> "Keypoints2D":
        return Keypoints2D(self.points.copy(), self.mask.copy())


def project_points(points: np.ndarray, cam: Camera) -> np.ndarray:
    """Project (n, 3) metric points to (n, 2) pixels."""
    points = np.asarray(points, dtype=float)
    z = points[:, 2]
    bad = np.flatnonzero(z < cam.z_min)
    if bad.size:
        raise BehindCameraError(int(bad[0]), float(z[bad[0]]))
    u = cam.fx * points[:, 0] / z + cam.cx
    v = cam.fy * points[:, 1] / z + cam.cy
    return np.stack([u, v], axis=1)


def project(keypoints: np.ndarray, cam: Camera) -> Keypoints2D:
    """Project 21 joints; every joint is marked annotated."""
    return Keypoints2D(project_points(keypoints, cam))


def projection_jacobian(points: np.ndarray, cam: Camera) -> np.ndarray:
    """d(pixel)/d(point) per point: (n, 2, 3)."""
    points = np.asarray(points, dtype=float)
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    n = points.shape[0]
    jac = np.zeros((n, 2, 3))
    jac[:, 0, 0] = cam.fx / z
    jac[:, 0, 2] = -cam.fx * x / z**2
    jac[:, 1, 1] = cam.fy / z
    jac[:, 1, 2] = -cam.fy * y / z**2
    return jac
