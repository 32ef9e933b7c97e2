"""Synthetic pose banks and seeded test-set generation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import skeleton
from .camera import Camera, Keypoints2D, project
from .skeleton import ARTICULATION_DIM, HandParams, SkeletonTemplate

DEFAULT_FRUSTUM = {
    "x": (-0.25, 0.25),
    "y": (-0.25, 0.25),
    "z": (0.3, 0.8),
}

VIEWPOINTS = ("ego", "third")


class BankValidationError(ValueError):
    def __init__(self, message: str, bad_indices: Optional[list[int]] = None):
        super().__init__(message)
        self.bad_indices = bad_indices or []


@dataclass
class PoseBank:
    """Sample banks: articulation rows (n, 45) and global-pose rows (m, 6)
    laid out as rotation (3) followed by translation (3)."""

    articulation: np.ndarray
    global_pose: np.ndarray
    viewpoint: str = "ego"
    source: str = "synthetic"
    frustum: dict = field(default_factory=lambda: dict(DEFAULT_FRUSTUM))

    def __post_init__(self):
        self.articulation = np.asarray(self.articulation, dtype=float)
        self.global_pose = np.asarray(self.global_pose, dtype=float)

    @property
    def sizes(self) -> tuple[int, int]:
        return len(self.articulation), len(self.global_pose)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "viewpoint": self.viewpoint,
            "source": self.source,
            "frustum": {k: list(v) for k, v in self.frustum.items()},
            "articulation_bank": self.articulation.tolist(),
            "global_bank": self.global_pose.tolist(),
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def load_bank(path, template: SkeletonTemplate) -> PoseBank:
    """Load and validate a bank file against the articulation limits."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        art = np.asarray(data["articulation_bank"], dtype=float)
        glob = np.asarray(data["global_bank"], dtype=float)
        viewpoint = data.get("viewpoint", "ego")
        frustum = {k: tuple(v) for k, v in data.get("frustum", DEFAULT_FRUSTUM).items()}
    except (KeyError, TypeError, ValueError) as err:
        raise BankValidationError(f"malformed bank file: {err}") from err
    if art.ndim != 2 or art.shape[0] == 0 or art.shape[1] != ARTICULATION_DIM:
        raise BankValidationError("articulation bank must be a nonempty (n, 45) array")
    if glob.ndim != 2 or glob.shape[0] == 0 or glob.shape[1] != 6:
        raise BankValidationError("global bank must be a nonempty (m, 6) array")
    tol = 1e-9
    bad = np.flatnonzero(
        (art < template.limit_min - tol).any(axis=1)
        | (art > template.limit_max + tol).any(axis=1)
    )
    if bad.size:
        raise BankValidationError(
            f"{bad.size} articulation rows violate the limits", bad.tolist()
        )
    trans = glob[:, 3:]
    for axis, key in enumerate("xyz"):
        lo, hi = frustum[key]
        out = (trans[:, axis] < lo - tol) | (trans[:, axis] > hi + tol)
        bad = np.flatnonzero(out)
        if bad.size:
            raise BankValidationError(
                f"{bad.size} global rows fall outside the declared frustum", bad.tolist()
            )
    return PoseBank(art, glob, viewpoint, data.get("source", "unknown"), frustum)


def _sample_frustum(rng: np.random.Generator, frustum: dict) -> np.ndarray:
    return np.array([rng.uniform(*frustum[k]) for k in "xyz"])


def _sample_cone_rotation(rng: np.random.Generator, max_angle: float) -> np.ndarray:
    axis = rng.normal(size=3)
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        return np.zeros(3)
    return (rng.uniform(0.0, max_angle) / norm) * axis


def synth_bank(
    seed: int,
    template: SkeletonTemplate,
    n_articulation: int = 2000,
    n_global: int = 2000,
    viewpoint: str = "ego",
    frustum: Optional[dict] = None,
) -> PoseBank:
    """Stand-in for captured pose banks.

    Articulation: per-component Gaussian around the limit midpoint with
    sigma = range/6, clipped into the limits. Global pose: rotations in a
    cone of up to 60 degrees around the rest orientation (palm roughly
    facing the camera), translations uniform in the frustum box.
    """
    if n_articulation <= 0 or n_global <= 0:
        raise ValueError("bank sizes must be positive")
    frustum = dict(frustum or DEFAULT_FRUSTUM)
    rng = np.random.default_rng(seed)
    center = skeleton.midpoint_articulation(template)
    sigma = (template.limit_max - template.limit_min) / 6.0
    art = rng.normal(loc=center, scale=1.0, size=(n_articulation, ARTICULATION_DIM))
    art = center + (art - center) * sigma
    art = np.clip(art, template.limit_min, template.limit_max)
    glob = np.empty((n_global, 6))
    for i in range(n_global):
        glob[i, :3] = _sample_cone_rotation(rng, np.pi / 3.0)
        glob[i, 3:] = _sample_frustum(rng, frustum)
    return PoseBank(art, glob, viewpoint, "synthetic", frustum)


def sample_pose(bank: PoseBank, viewpoint: str, rng: np.random.Generator) -> HandParams:
    """Draw one pose: articulation always from the bank; global pose from
    the bank for ego views, uniform orientation for third-person views."""
    if viewpoint not in VIEWPOINTS:
        raise ValueError(f"viewpoint must be one of {VIEWPOINTS}")
    n_art, n_glob = bank.sizes
    if n_art == 0 or n_glob == 0:
        raise ValueError("cannot sample from an empty bank")
    art = bank.articulation[rng.integers(n_art)].copy()
    if viewpoint == "ego":
        row = bank.global_pose[rng.integers(n_glob)]
        rotation, translation = row[:3].copy(), row[3:].copy()
    else:
        rotation = rng.uniform(-np.pi, np.pi, size=3)
        translation = _sample_frustum(rng, bank.frustum)
    return HandParams(articulation=art, rotation=rotation, translation=translation)


@dataclass
class PoseSample:
    params: HandParams
    keypoints_3d: np.ndarray
    canonical: np.ndarray
    keypoints_2d: Keypoints2D


@dataclass
class TestSet:
    samples: list[PoseSample]
    viewpoint: str
    seed: int
    resampled: int


class ResampleBudgetError(RuntimeError):
    """The frustum produced too many out-of-frame poses."""


def _visible(kp2d: np.ndarray, cam: Camera) -> bool:
    return bool(
        (kp2d[:, 0] >= 0).all() and (kp2d[:, 0] < cam.image_width).all()
        and (kp2d[:, 1] >= 0).all() and (kp2d[:, 1] < cam.image_height).all()
    )


def generate_testset(
    bank: PoseBank,
    viewpoint: str,
    n: int,
    seed: int,
    cam: Camera,
    template: SkeletonTemplate,
    budget_factor: int = 100,
) -> TestSet:
    """n mutually consistent (params, 3D, canonical, 2D) tuples.

    Deterministic under the seed; each instance uses a generator derived
    from (seed, index). Poses projecting outside the image are resampled
    against a global budget of budget_factor * n draws.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    samples: list[PoseSample] = []
    resampled = 0
    budget = budget_factor * n
    for index in range(n):
        rng = np.random.default_rng([seed, index])
        while True:
            if budget <= 0:
                raise ResampleBudgetError(
                    "resample budget exhausted; check the frustum and camera"
                )
            budget -= 1
            params = sample_pose(bank, viewpoint, rng)
            kp3d = skeleton.forward_kinematics(params, template)
            if (kp3d[:, 2] < cam.z_min).any():
                resampled += 1
                continue
            kp2d = project(kp3d, cam)
            if not _visible(kp2d.points, cam):
                resampled += 1
                continue
            samples.append(PoseSample(
                params=params,
                keypoints_3d=kp3d,
                canonical=skeleton.canonicalize(kp3d, template),
                keypoints_2d=kp2d,
            ))
            break
    return TestSet(samples=samples, viewpoint=viewpoint, seed=seed, resampled=resampled)
