"""Pose-estimation metrics: EPE, PCK curves, AUC, spherical root errors."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .skeleton import WRIST, SkeletonTemplate

M_TO_CM = 100.0


@dataclass(frozen=True)
class PckCurve:
    thresholds: np.ndarray
    fractions: np.ndarray
    unit: str = "px"

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float)
        f = np.asarray(self.fractions, dtype=float)
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "fractions", f)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("thresholds must be a 1-D array")
        if np.any(np.diff(t) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if f.shape != t.shape:
            raise ValueError("fractions must match thresholds")
        if np.any(f < 0) or np.any(f > 1) or np.any(np.diff(f) < 0):
            raise ValueError("fractions must be nondecreasing within [0, 1]")

    def to_dict(self) -> dict:
        return {"unit": self.unit, "thresholds": self.thresholds.tolist(),
                "fractions": self.fractions.tolist()}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"threshold_{self.unit}", "fraction"])
            for t, f in zip(self.thresholds, self.fractions):
                writer.writerow([t, f])


# Default threshold grids. Only the canonical-unit interval 0..1 comes from
# the evaluation protocol; the others are documented choices.
def grid_2d_px() -> np.ndarray:
    return np.linspace(0.0, 100.0, 101)


def grid_3d_canonical() -> np.ndarray:
    return np.linspace(0.0, 1.0, 101)


def grid_angle_deg() -> np.ndarray:
    return np.linspace(0.0, 30.0, 61)


def grid_radius_cm() -> np.ndarray:
    return np.linspace(0.0, 20.0, 41)


ALIGNMENTS = ("none", "root", "root+scale")


def align(pred: np.ndarray, gt: np.ndarray, alignment: str,
          template: Optional[SkeletonTemplate] = None) -> np.ndarray:
    """Return predictions aligned to ground truth.

    "root" translates the prediction root onto the ground-truth root;
    "root+scale" first rescales the prediction so its reference bone
    matches the ground truth's, then aligns the roots.
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError("prediction and ground truth must have the same shape")
    if alignment == "none":
        return pred
    if alignment == "root":
        return pred - pred[WRIST] + gt[WRIST]
    if alignment == "root+scale":
        a, b = (template.reference_bone if template is not None else (0, 9))
        pred_len = np.linalg.norm(pred[b] - pred[a])
        gt_len = np.linalg.norm(gt[b] - gt[a])
        if pred_len < 1e-12:
            raise ValueError("degenerate reference bone in prediction")
        scale = gt_len / pred_len
        return (pred - pred[WRIST]) * scale + gt[WRIST]
    raise ValueError(f"alignment must be one of {ALIGNMENTS}")


def joint_errors(pred: np.ndarray, gt: np.ndarray, alignment: str = "none",
                 template: Optional[SkeletonTemplate] = None) -> np.ndarray:
    """Per-joint Euclidean distances in centimeters after alignment."""
    aligned = align(pred, gt, alignment, template)
    return np.linalg.norm(aligned - np.asarray(gt, dtype=float), axis=1) * M_TO_CM


def epe(pred: np.ndarray, gt: np.ndarray, alignment: str = "none",
        template: Optional[SkeletonTemplate] = None) -> float:
    """Mean per-joint Euclidean distance in centimeters."""
    return float(joint_errors(pred, gt, alignment, template).mean())


def pck_curve(errors: Iterable[float], thresholds: np.ndarray, unit: str = "px") -> PckCurve:
    errors = np.asarray(list(errors), dtype=float)
    if errors.size == 0:
        raise ValueError("cannot compute PCK from an empty error list")
    thresholds = np.asarray(thresholds, dtype=float)
    fractions = (errors[None, :] <= thresholds[:, None]).mean(axis=1)
    return PckCurve(thresholds, fractions, unit)


def auc(curve: PckCurve) -> float:
    """Trapezoidal area under the PCK curve, normalized to [0, 1]."""
    t = curve.thresholds
    if t.size < 2:
        raise ValueError("AUC needs at least two thresholds")
    span = t[-1] - t[0]
    return float(np.trapezoid(curve.fractions, t) / span)


def spherical_errors(pred_root: np.ndarray, gt_root: np.ndarray) -> tuple[float, float]:
    """Root placement error in spherical terms: (angle degrees, radius cm).

    Angle between the camera-origin rays through both roots, and the
    absolute difference of their distances from the origin.
    """
    pred_root = np.asarray(pred_root, dtype=float)
    gt_root = np.asarray(gt_root, dtype=float)
    np_pred = np.linalg.norm(pred_root)
    np_gt = np.linalg.norm(gt_root)
    if np_pred < 1e-12 or np_gt < 1e-12:
        raise ValueError("root must have positive distance from the camera origin")
    cosang = np.clip(pred_root @ gt_root / (np_pred * np_gt), -1.0, 1.0)
    angle = float(np.degrees(np.arccos(cosang)))
    radius = float(abs(np_pred - np_gt) * M_TO_CM)
    return angle, radius


def evaluate_batch(
    preds: Iterable[np.ndarray],
    gts: Iterable[np.ndarray],
    template: Optional[SkeletonTemplate] = None,
    canonical_errors: Optional[Iterable[float]] = None,
    pixel_errors: Optional[Iterable[float]] = None,
) -> dict:
    """Aggregate metric report over paired 3D predictions and ground truths."""
    preds = list(preds)
    gts = list(gts)
    per_joint_cm: list[float] = []
    epes = []
    angles, radii = [], []
    for p, g in zip(preds, gts):
        errs = joint_errors(p, g, "root+scale", template)
        per_joint_cm.extend(errs.tolist())
        epes.append(float(errs.mean()))
        ang, rad = spherical_errors(np.asarray(p)[WRIST], np.asarray(g)[WRIST])
        angles.append(ang)
        radii.append(rad)
    report: dict = {
        "count": len(epes),
        "epe_cm": {"mean": float(np.mean(epes)), "median": float(np.median(epes)),
                   "p95": float(np.percentile(epes, 95))},
        "curves": {},
    }
    angle_curve = pck_curve(angles, grid_angle_deg(), unit="deg")
    radius_curve = pck_curve(radii, grid_radius_cm(), unit="cm")
    report["curves"]["root_angle"] = angle_curve.to_dict()
    report["curves"]["root_radius"] = radius_curve.to_dict()
    report["auc"] = {
        "root_angle": auc(angle_curve),
        "root_radius": auc(radius_curve),
    }
    if canonical_errors is not None:
        curve = pck_curve(canonical_errors, grid_3d_canonical(), unit="canonical")
        report["curves"]["canonical_3d"] = curve.to_dict()
        report["auc"]["canonical_3d"] = auc(curve)
    if pixel_errors is not None:
        curve = pck_curve(pixel_errors, grid_2d_px(), unit="px")
        report["curves"]["pck_2d"] = curve.to_dict()
        report["auc"]["pck_2d"] = auc(curve)
    return report


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
