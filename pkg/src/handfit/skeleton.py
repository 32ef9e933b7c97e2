"""Rigid-link hand skeleton: parameters, joint tree, forward kinematics.

Joint order (21 joints): 0 = wrist, then 4 joints per finger in the order
thumb, index, middle, ring, pinky. Each finger contributes three articulated
joints (knuckle, middle, distal) followed by a passive tip.

The articulation vector has 45 entries, 3 per articulated joint, laid out
finger-major: (abduction, twist, flexion) = rotations about the local
x, y, z axes. The local joint rotation is Rz(flexion) @ Ry(twist) @
Rx(abduction), applied in the parent frame. The global pose is an
axis-angle root rotation followed by a metric translation (camera frame).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

NUM_JOINTS = 21
NUM_ARTICULATED = 15
ARTICULATION_DIM = 45
# Optimizable vector: articulation (45) + rotation (3) + translation (3).
PARAM_DIM = 51
ROT_SLICE = slice(45, 48)
TRANS_SLICE = slice(48, 51)

WRIST = 0
PARENTS = np.array(
    [-1, 0, 1, 2, 3, 0, 5, 6, 7, 0, 9, 10, 11, 0, 13, 14, 15, 0, 17, 18, 19]
)
TIP_JOINTS = (4, 8, 12, 16, 20)
ARTICULATED_JOINTS = tuple(
    j for j in range(1, NUM_JOINTS) if j not in TIP_JOINTS
)

FINGER_NAMES = ("thumb", "index", "middle", "ring", "pinky")
JOINT_NAMES = ["wrist"]
for _f in FINGER_NAMES:
    JOINT_NAMES += [f"{_f}_{part}" for part in ("knuckle", "middle", "distal", "tip")]

# Abduction/twist/flexion offsets inside one articulated joint's 3 entries.
AX_ABDUCTION, AX_TWIST, AX_FLEXION = 0, 1, 2


def articulation_slot(finger: int, joint: int) -> int:
    """First articulation index for finger in 0..4, joint in 0..2."""
    return 3 * (3 * finger + joint)


def joint_articulation_slot(joint_index: int) -> int:
    """First articulation index for an articulated joint index."""
    finger, offset = divmod(joint_index - 1, 4)
    if offset == 3:
        raise ValueError(f"joint {joint_index} is a passive tip")
    return articulation_slot(finger, offset)


class HandSide(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class DegeneratePoseError(ValueError):
    """Raised when a pose has no usable reference bone."""


@dataclass
class HandParams:
    """Full hand parameterization: 10 shape + 45 articulation + 6 global."""

    shape: np.ndarray = field(default_factory=lambda: np.zeros(10))
    articulation: np.ndarray = field(default_factory=lambda: np.zeros(ARTICULATION_DIM))
    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.shape = np.asarray(self.shape, dtype=float)
        self.articulation = np.asarray(self.articulation, dtype=float)
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)

    def copy(self) -> "HandParams":
        return HandParams(
            self.shape.copy(),
            self.articulation.copy(),
            self.rotation.copy(),
            self.translation.copy(),
        )

    def as_vector(self) -> np.ndarray:
        """Optimizable entries only (shape is never optimized)."""
        return np.concatenate([self.articulation, self.rotation, self.translation])

    def with_vector(self, vec: np.ndarray) -> "HandParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (PARAM_DIM,):
            raise ValueError(f"expected vector of length {PARAM_DIM}")
        return HandParams(
            self.shape.copy(),
            vec[:ARTICULATION_DIM].copy(),
            vec[ROT_SLICE].copy(),
            vec[TRANS_SLICE].copy(),
        )

    def to_dict(self) -> dict:
        return {
            "shape": self.shape.tolist(),
            "articulation": self.articulation.tolist(),
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HandParams":
        return cls(
            np.asarray(d.get("shape", np.zeros(10)), dtype=float),
            np.asarray(d["articulation"], dtype=float),
            np.asarray(d["rotation"], dtype=float),
            np.asarray(d["translation"], dtype=float),
        )


@dataclass(frozen=True)
class SkeletonTemplate:
    """Immutable joint tree with rest offsets, limits and prior weights.

    rest_offsets[j] is the bone from parent(j) to j expressed in the parent
    frame (meters); row 0 is zero. limit_min/limit_max bound the articulation
    vector, prior_weights scale the articulation prior per entry.
    """

    rest_offsets: np.ndarray
    limit_min: np.ndarray
    limit_max: np.ndarray
    prior_weights: np.ndarray
    reference_bone: tuple[int, int] = (0, 9)
    joint_names: tuple[str, ...] = tuple(JOINT_NAMES)
    parents: np.ndarray = field(default_factory=lambda: PARENTS.copy())
    # Optional linear map from 10 shape coefficients to 20 per-bone length
    # scale factors (bone j-1 for joint j); zero by default and never fitted.
    shape_map: np.ndarray = field(default_factory=lambda: np.zeros((20, 10)))

    def __post_init__(self):
        object.__setattr__(self, "rest_offsets", np.asarray(self.rest_offsets, dtype=float))
        object.__setattr__(self, "limit_min", np.asarray(self.limit_min, dtype=float))
        object.__setattr__(self, "limit_max", np.asarray(self.limit_max, dtype=float))
        object.__setattr__(self, "prior_weights", np.asarray(self.prior_weights, dtype=float))
        object.__setattr__(self, "parents", np.asarray(self.parents, dtype=int))
        object.__setattr__(self, "shape_map", np.asarray(self.shape_map, dtype=float))
        if self.rest_offsets.shape != (NUM_JOINTS, 3):
            raise ValueError("rest_offsets must be (21, 3)")
        if np.any(self.limit_min > self.limit_max):
            raise ValueError("limit_min must be <= limit_max componentwise")
        if np.any(self.prior_weights < 0):
            raise ValueError("prior_weights must be nonnegative")
        if self.reference_length <= 0:
            raise ValueError("reference bone must have positive rest length")
        for attr in ("rest_offsets", "limit_min", "limit_max", "prior_weights",
                     "parents", "shape_map"):
            getattr(self, attr).setflags(write=False)

    @property
    def bone_lengths(self) -> np.ndarray:
        """Rest length of each non-root bone, indexed by child joint 1..20."""
        return np.linalg.norm(self.rest_offsets[1:], axis=1)

    @property
    def reference_length(self) -> float:
        a, b = self.reference_bone
        child = b if self.parents[b] == a else a
        return float(np.linalg.norm(self.rest_offsets[child]))

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "joint_names": list(self.joint_names),
            "parents": self.parents.tolist(),
            "rest_offsets": self.rest_offsets.tolist(),
            "limit_min": self.limit_min.tolist(),
            "limit_max": self.limit_max.tolist(),
            "prior_weights": self.prior_weights.tolist(),
            "reference_bone": list(self.reference_bone),
            "shape_map": self.shape_map.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonTemplate":
        return cls(
            rest_offsets=np.asarray(d["rest_offsets"], dtype=float),
            limit_min=np.asarray(d["limit_min"], dtype=float),
            limit_max=np.asarray(d["limit_max"], dtype=float),
            prior_weights=np.asarray(d["prior_weights"], dtype=float),
            reference_bone=tuple(d.get("reference_bone", (0, 9))),
            joint_names=tuple(d.get("joint_names", JOINT_NAMES)),
            parents=np.asarray(d.get("parents", PARENTS), dtype=int),
            shape_map=np.asarray(d.get("shape_map", np.zeros((20, 10))), dtype=float),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "SkeletonTemplate":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _default_limits() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo = np.zeros(ARTICULATION_DIM)
    hi = np.zeros(ARTICULATION_DIM)
    w = np.zeros(ARTICULATION_DIM)
    for finger in range(5):
        for joint in range(3):
            s = articulation_slot(finger, joint)
            # Flexion is the free axis on every joint.
            lo[s + AX_FLEXION] = -np.pi / 2
            hi[s + AX_FLEXION] = 0.25
            w[s + AX_FLEXION] = 0.05
            w[s + AX_ABDUCTION] = 1.0
            w[s + AX_TWIST] = 1.0
            if joint == 0:
                if finger == 0:
                    # Thumb base gets a wider abduction range plus some twist.
                    lo[s + AX_ABDUCTION], hi[s + AX_ABDUCTION] = -1.0, 1.0
                    lo[s + AX_TWIST], hi[s + AX_TWIST] = -0.6, 0.6
                else:
                    lo[s + AX_ABDUCTION], hi[s + AX_ABDUCTION] = -0.45, 0.45
            # Remaining axes stay locked at zero range.
    return lo, hi, w


def _default_rest_offsets() -> np.ndarray:
    # Flat right hand: palm facing -z, fingers along +y, thumb toward +x.
    # Bone lengths follow average adult hand proportions (meters).
    offsets = np.zeros((NUM_JOINTS, 3))
    finger_chains = {
        # finger: (wrist->knuckle offset, then successive bone offsets)
        0: [(0.025, 0.025, 0.0), (0.025, 0.030, 0.0), (0.020, 0.024, 0.0), (0.018, 0.020, 0.0)],
        1: [(0.022, 0.088, 0.0), (0.0, 0.040, 0.0), (0.0, 0.025, 0.0), (0.0, 0.023, 0.0)],
        2: [(0.000, 0.092, 0.0), (0.0, 0.045, 0.0), (0.0, 0.028, 0.0), (0.0, 0.025, 0.0)],
        3: [(-0.019, 0.088, 0.0), (0.0, 0.042, 0.0), (0.0, 0.027, 0.0), (0.0, 0.024, 0.0)],
        4: [(-0.036, 0.080, 0.0), (0.0, 0.033, 0.0), (0.0, 0.021, 0.0), (0.0, 0.021, 0.0)],
    }
    for finger, chain in finger_chains.items():
        for k, bone in enumerate(chain):
            offsets[1 + 4 * finger + k] = bone
    return offsets


def default_template() -> SkeletonTemplate:
    lo, hi, w = _default_limits()
    return SkeletonTemplate(
        rest_offsets=_default_rest_offsets(),
        limit_min=lo,
        limit_max=hi,
        prior_weights=w,
        reference_bone=(0, 9),
    )


# ---------------------------------------------------------------------------
# Rotations
# ---------------------------------------------------------------------------

def _rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def _drot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[0, 0, 0], [0, -s, -c], [0, c, -s]])


def _drot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[-s, 0, c], [0, 0, 0], [-c, 0, -s]])


def _drot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[-s, -c, 0], [c, -s, 0], [0, 0, 0]])


def local_rotation(angles: np.ndarray) -> np.ndarray:
    """Joint rotation Rz(flexion) @ Ry(twist) @ Rx(abduction)."""
    ax, ay, az = angles
    return _rot_z(az) @ _rot_y(ay) @ _rot_x(ax)


def local_rotation_with_jacobian(angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ax, ay, az = angles
    rx, ry, rz = _rot_x(ax), _rot_y(ay), _rot_z(az)
    rot = rz @ ry @ rx
    jac = np.empty((3, 3, 3))
    jac[:, :, AX_ABDUCTION] = rz @ ry @ _drot_x(ax)
    jac[:, :, AX_TWIST] = rz @ _drot_y(ay) @ rx
    jac[:, :, AX_FLEXION] = _drot_z(az) @ ry @ rx
    return rot, jac


def _local_rotations_batch(
    articulation: np.ndarray, with_jacobian: bool
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Local rotations for all 15 articulated joints at once.

    Returns (15, 3, 3) rotations and, when requested, their (15, 3, 3, 3)
    derivatives wrt the joint's (abduction, twist, flexion) angles.
    """
    angles = articulation.reshape(NUM_ARTICULATED, 3)
    c = np.cos(angles)
    s = np.sin(angles)
    n = NUM_ARTICULATED
    rx = np.zeros((n, 3, 3))
    rx[:, 0, 0] = 1.0
    rx[:, 1, 1] = c[:, 0]; rx[:, 1, 2] = -s[:, 0]
    rx[:, 2, 1] = s[:, 0]; rx[:, 2, 2] = c[:, 0]
    ry = np.zeros((n, 3, 3))
    ry[:, 1, 1] = 1.0
    ry[:, 0, 0] = c[:, 1]; ry[:, 0, 2] = s[:, 1]
    ry[:, 2, 0] = -s[:, 1]; ry[:, 2, 2] = c[:, 1]
    rz = np.zeros((n, 3, 3))
    rz[:, 2, 2] = 1.0
    rz[:, 0, 0] = c[:, 2]; rz[:, 0, 1] = -s[:, 2]
    rz[:, 1, 0] = s[:, 2]; rz[:, 1, 1] = c[:, 2]
    zy = rz @ ry
    rot = zy @ rx
    if not with_jacobian:
        return rot, None
    drx = np.zeros((n, 3, 3))
    drx[:, 1, 1] = -s[:, 0]; drx[:, 1, 2] = -c[:, 0]
    drx[:, 2, 1] = c[:, 0]; drx[:, 2, 2] = -s[:, 0]
    dry = np.zeros((n, 3, 3))
    dry[:, 0, 0] = -s[:, 1]; dry[:, 0, 2] = c[:, 1]
    dry[:, 2, 0] = -c[:, 1]; dry[:, 2, 2] = -s[:, 1]
    drz = np.zeros((n, 3, 3))
    drz[:, 0, 0] = -s[:, 2]; drz[:, 0, 1] = -c[:, 2]
    drz[:, 1, 0] = c[:, 2]; drz[:, 1, 1] = -s[:, 2]
    jac = np.empty((n, 3, 3, 3))
    jac[:, AX_ABDUCTION] = zy @ drx
    jac[:, AX_TWIST] = rz @ dry @ rx
    jac[:, AX_FLEXION] = drz @ ry @ rx
    return rot, jac


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def rotation_from_axis_angle(v: np.ndarray) -> np.ndarray:
    """Rodrigues rotation from an axis-angle vector."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v)
    k = _skew(v)
    if theta < 1e-8:
        return np.eye(3) + k + 0.5 * (k @ k)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * k + b * (k @ k)


def rotation_from_axis_angle_with_jacobian(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotation and its derivative wrt the three axis-angle components.

    Uses the closed form of Gallego & Yezzi for theta > 0 and the
    first-order limit at the origin.
    """
    v = np.asarray(v, dtype=float)
    rot = rotation_from_axis_angle(v)
    theta2 = float(v @ v)
    jac = np.empty((3, 3, 3))
    eye = np.eye(3)
    if theta2 < 1e-16:
        for i in range(3):
            jac[:, :, i] = _skew(eye[i])
        return rot, jac
    kv = _skew(v)
    imr = eye - rot
    for i in range(3):
        term = v[i] * kv + _skew(np.cross(v, imr[:, i]))
        jac[:, :, i] = (term / theta2) @ rot
    return rot, jac


# ---------------------------------------------------------------------------
# Constraints
# ---------------------------------------------------------------------------

def clip_articulation(articulation: np.ndarray, template: SkeletonTemplate) -> np.ndarray:
    """Componentwise projection of the articulation vector into its limits."""
    return np.minimum(np.maximum(articulation, template.limit_min), template.limit_max)


def clip_passthrough_mask(articulation: np.ndarray, template: SkeletonTemplate) -> np.ndarray:
    """1.0 where the clip is inactive, 0.0 where it clamps.

    Locked entries (zero-width range) always clamp; entries sitting exactly
    on a non-degenerate limit pass through, so a value projected onto the
    boundary can still be pulled back inside.
    """
    inside = (
        (template.limit_min < template.limit_max)
        & (articulation >= template.limit_min)
        & (articulation <= template.limit_max)
    )
    return inside.astype(float)


def midpoint_articulation(template: SkeletonTemplate) -> np.ndarray:
    """Midpoint of the articulation limits, the annotation-mode prior center."""
    return 0.5 * (template.limit_min + template.limit_max)


# ---------------------------------------------------------------------------
# Forward kinematics
# ---------------------------------------------------------------------------

def _bone_scales(shape: np.ndarray, template: SkeletonTemplate) -> np.ndarray:
    return 1.0 + template.shape_map @ shape


def forward_kinematics(params: HandParams, template: SkeletonTemplate) -> np.ndarray:
    """21 joint positions (meters, camera frame)."""
    art = clip_articulation(params.articulation, template)
    scales = _bone_scales(params.shape, template)
    locals_, _ = _local_rotations_batch(art, with_jacobian=False)
    pos = np.zeros((NUM_JOINTS, 3))
    world = [None] * NUM_JOINTS
    world[WRIST] = rotation_from_axis_angle(params.rotation)
    pos[WRIST] = params.translation
    for j in range(1, NUM_JOINTS):
        p = template.parents[j]
        bone = template.rest_offsets[j] * scales[j - 1]
        pos[j] = pos[p] + world[p] @ bone
        if j not in TIP_JOINTS:
            world[j] = world[p] @ locals_[joint_articulation_slot(j) // 3]
    return pos


def forward_kinematics_with_jacobian(
    params: HandParams, template: SkeletonTemplate
) -> tuple[np.ndarray, np.ndarray]:
    """Joint positions plus their Jacobian wrt the 51 optimizable entries.

    Derivatives propagate down the tree; clamped articulation entries get a
    zero derivative (projected-gradient convention).
    """
    art = clip_articulation(params.articulation, template)
    passthrough = clip_passthrough_mask(params.articulation, template)
    scales = _bone_scales(params.shape, template)
    locals_, dlocals = _local_rotations_batch(art, with_jacobian=True)

    pos = np.zeros((NUM_JOINTS, 3))
    # Derivative-major layout (entry, 3, 3) keeps the propagation a single
    # batched matmul per joint.
    jac_k = np.zeros((NUM_JOINTS, PARAM_DIM, 3))
    world = [None] * NUM_JOINTS
    dworld = [None] * NUM_JOINTS

    rot, drot = rotation_from_axis_angle_with_jacobian(params.rotation)
    world[WRIST] = rot
    dw0 = np.zeros((PARAM_DIM, 3, 3))
    dw0[ROT_SLICE] = np.moveaxis(drot, 2, 0)
    dworld[WRIST] = dw0
    pos[WRIST] = params.translation
    jac_k[WRIST][TRANS_SLICE] = np.eye(3)

    for j in range(1, NUM_JOINTS):
        p = template.parents[j]
        bone = template.rest_offsets[j] * scales[j - 1]
        dwp = dworld[p]
        pos[j] = pos[p] + world[p] @ bone
        jac_k[j] = jac_k[p] + dwp @ bone
        if j not in TIP_JOINTS:
            s = joint_articulation_slot(j)
            row = s // 3
            world[j] = world[p] @ locals_[row]
            dw = dwp @ locals_[row]
            wp = world[p]
            for a in range(3):
                gate = passthrough[s + a]
                if gate != 0.0:
                    dw[s + a] += wp @ (dlocals[row, a] * gate)
            dworld[j] = dw
    return pos, jac_k.transpose(0, 2, 1)


# ---------------------------------------------------------------------------
# Canonical (root-relative, scale-normalized) poses
# ---------------------------------------------------------------------------

def canonicalize(keypoints: np.ndarray, template: SkeletonTemplate) -> np.ndarray:
    """Root-relative keypoints divided by the measured reference bone length."""
    kp = np.asarray(keypoints, dtype=float)
    a, b = template.reference_bone
    ref_len = float(np.linalg.norm(kp[b] - kp[a]))
    if ref_len < 1e-9:
        raise DegeneratePoseError("reference bone has near-zero length")
    return (kp - kp[WRIST]) / ref_len


# ---------------------------------------------------------------------------
# Left/right mirroring
# ---------------------------------------------------------------------------

_REFLECT = np.diag([-1.0, 1.0, 1.0])


def mirror_keypoints_2d(points: np.ndarray, image_width: int) -> np.ndarray:
    """Horizontal pixel flip: u -> width - 1 - u."""
    if image_width <= 0:
        raise ValueError("image_width must be positive")
    out = np.asarray(points, dtype=float).copy()
    out[..., 0] = image_width - 1 - out[..., 0]
    return out


def mirror_keypoints_3d(points: np.ndarray) -> np.ndarray:
    """Reflect metric points across the x = 0 plane."""
    return np.asarray(points, dtype=float) @ _REFLECT


def mirror_axis_angle(v: np.ndarray) -> np.ndarray:
    """Axis-angle of the reflected rotation: (vx, vy, vz) -> (vx, -vy, -vz)."""
    v = np.asarray(v, dtype=float)
    return np.array([v[0], -v[1], -v[2]])


def mirror_params(params: HandParams) -> HandParams:
    """Express a fitted right-hand solution as the mirrored-side solution.

    Per-joint angles transform as (abduction, twist, flexion) ->
    (abduction, -twist, -flexion); the global rotation reflects as an
    axis-angle and the translation x flips.
    """
    art = params.articulation.copy()
    art[AX_TWIST::3] *= -1.0
    art[AX_FLEXION::3] *= -1.0
    trans = params.translation.copy()
    trans[0] *= -1.0
    return HandParams(params.shape.copy(), art, mirror_axis_angle(params.rotation), trans)


def mirror_template(template: SkeletonTemplate) -> SkeletonTemplate:
    """Template for the opposite hand: bones reflected, limits remapped."""
    offsets = template.rest_offsets @ _REFLECT
    lo = template.limit_min.copy()
    hi = template.limit_max.copy()
    for start in (AX_TWIST, AX_FLEXION):
        lo[start::3], hi[start::3] = -template.limit_max[start::3], -template.limit_min[start::3]
    return replace(template, rest_offsets=offsets, limit_min=lo, limit_max=hi)
