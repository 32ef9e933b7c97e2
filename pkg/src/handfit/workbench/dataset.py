"""Canonical dataset files: JSON Lines, one instance per line.

Schema (units: pixels for 2D, meters for 3D, radians for angles; joint
order as in handfit.skeleton.JOINT_NAMES):

  image          path string or null (synthetic)
  side           "left" | "right"
  camera         {fx, fy, cx, cy, image_width, image_height, z_min} | null
  keypoints_2d   list of 21 entries, each [u, v] or null (unannotated)
  keypoints_3d   list of 21 [x, y, z] or null
  canonical      list of 21 root-relative scale-normalized [x, y, z] or null
  params         {shape, articulation, rotation, translation} or null
  status         "unreviewed" | "accepted" | "rejected"
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import skeleton
from ..camera import Camera, Keypoints2D, project
from ..skeleton import NUM_JOINTS, HandParams, HandSide

STATUSES = ("unreviewed", "accepted", "rejected")


class DatasetFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, fieldname: Optional[str] = None):
        where = f" (line {line}" + (f", field {fieldname!r})" if fieldname else ")") if line else ""
        super().__init__(message + where)
        self.line = line
        self.fieldname = fieldname


@dataclass
class DatasetInstance:
    image: Optional[str] = None
    side: HandSide = HandSide.RIGHT
    camera: Optional[Camera] = None
    keypoints_2d: Optional[Keypoints2D] = None
    keypoints_3d: Optional[np.ndarray] = None
    canonical: Optional[np.ndarray] = None
    params: Optional[HandParams] = None
    status: str = "unreviewed"

    @property
    def fully_annotated(self) -> bool:
        return self.keypoints_2d is not None and bool(self.keypoints_2d.mask.all())

    def to_dict(self) -> dict:
        kp2d = None
        if self.keypoints_2d is not None:
            kp2d = [
                list(map(float, p)) if m else None
                for p, m in zip(self.keypoints_2d.points, self.keypoints_2d.mask)
            ]
        return {
            "image": self.image,
            "side": self.side.value,
            "camera": self.camera.to_dict() if self.camera else None,
            "keypoints_2d": kp2d,
            "keypoints_3d": self.keypoints_3d.tolist() if self.keypoints_3d is not None else None,
            "canonical": self.canonical.tolist() if self.canonical is not None else None,
            "params": self.params.to_dict() if self.params else None,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d: dict, line: Optional[int] = None) -> "DatasetInstance":
        try:
            side = HandSide(d.get("side", "right"))
        except ValueError as err:
            raise DatasetFormatError(str(err), line, "side") from err
        status = d.get("status", "unreviewed")
        if status not in STATUSES:
            raise DatasetFormatError(f"unknown status {status!r}", line, "status")
        kp2d = None
        raw2d = d.get("keypoints_2d")
        if raw2d is not None:
            if len(raw2d) != NUM_JOINTS:
                raise DatasetFormatError("keypoints_2d must have 21 entries", line, "keypoints_2d")
            points = np.zeros((NUM_JOINTS, 2))
            mask = np.zeros(NUM_JOINTS, dtype=bool)
            for j, entry in enumerate(raw2d):
                if entry is not None:
                    points[j] = entry
                    mask[j] = True
            kp2d = Keypoints2D(points, mask)

        def arr(key, shape):
            raw = d.get(key)
            if raw is None:
                return None
            out = np.asarray(raw, dtype=float)
            if out.shape != shape:
                raise DatasetFormatError(f"{key} must have shape {shape}", line, key)
            return out

        return cls(
            image=d.get("image"),
            side=side,
            camera=Camera.from_dict(d["camera"]) if d.get("camera") else None,
            keypoints_2d=kp2d,
            keypoints_3d=arr("keypoints_3d", (NUM_JOINTS, 3)),
            canonical=arr("canonical", (NUM_JOINTS, 3)),
            params=HandParams.from_dict(d["params"]) if d.get("params") else None,
            status=status,
        )


def instance_consistency_error(
    instance: DatasetInstance, template: skeleton.SkeletonTemplate
) -> Optional[float]:
    """Max pixel distance between stored annotated 2D keypoints and the
    projection of the stored parameters; None when not checkable."""
    if instance.params is None or instance.camera is None or instance.keypoints_2d is None:
        return None
    if not instance.keypoints_2d.mask.any():
        return None
    kp3d = skeleton.forward_kinematics(instance.params, template)
    projected = project(kp3d, instance.camera)
    mask = instance.keypoints_2d.mask
    diff = projected.points[mask] - instance.keypoints_2d.points[mask]
    return float(np.linalg.norm(diff, axis=1).max())


def export_dataset(instances: list[DatasetInstance], path) -> None:
    with open(path, "w") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict()) + "\n")


def _import_canonical(path) -> list[DatasetInstance]:
    instances = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                data = json.loads(raw)
            except json.JSONDecodeError as err:
                raise DatasetFormatError(f"invalid JSON: {err}", lineno) from err
            instances.append(DatasetInstance.from_dict(data, lineno))
    return instances


def _import_simple_2d(path) -> list[DatasetInstance]:
    """Minimal 2D-only format: one JSON document with
    {"instances": [{"keypoints": [[u, v] | null] * 21, "side"?, "image"?}]}.
    """
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise DatasetFormatError(f"invalid JSON: {err}") from err
    if not isinstance(data, dict) or "instances" not in data:
        raise DatasetFormatError("simple-2d file must contain an 'instances' list")
    instances = []
    for i, entry in enumerate(data["instances"]):
        instances.append(DatasetInstance.from_dict(
            {
                "image": entry.get("image"),
                "side": entry.get("side", "right"),
                "keypoints_2d": entry.get("keypoints"),
            },
            line=i + 1,
        ))
    return instances


FORMATS = ("canonical", "simple-2d")


def import_dataset(path, format: str = "canonical") -> list[DatasetInstance]:
    """Parse a dataset file. Instances lacking full 21-joint annotation are
    kept but flagged via ``fully_annotated``; conversion skips them."""
    if format == "canonical":
        return _import_canonical(path)
    if format == "simple-2d":
        return _import_simple_2d(path)
    raise ValueError(f"format must be one of {FORMATS}")
