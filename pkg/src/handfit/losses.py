"""Fitting losses and their analytic gradients over masked parameter sets."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import skeleton
from .camera import Camera, Keypoints2D, project_points, projection_jacobian
from .skeleton import (
    ARTICULATION_DIM,
    NUM_JOINTS,
    PARAM_DIM,
    ROT_SLICE,
    TRANS_SLICE,
    WRIST,
    HandParams,
    SkeletonTemplate,
)

DEFAULT_ALIGNMENT_WEIGHT = 1e5


class EmptyAnnotationError(ValueError):
    """Raised when a 2D loss is requested with no annotated joints."""


class LossKind(enum.Enum):
    ARTICULATION_PRIOR = "articulation_prior"
    REPROJECTION = "reprojection"
    FIT = "fit"                                # reprojection + prior
    CANONICAL_ALIGNMENT = "canonical_alignment"
    ALIGNMENT_WITH_PRIOR = "alignment_with_prior"


@dataclass
class LossReport:
    total: float
    components: dict[str, float]

    @classmethod
    def from_components(cls, components: dict[str, float]) -> "LossReport":
        return cls(total=float(sum(components.values())), components=components)


@dataclass
class FitContext:
    """Immutable inputs shared by loss evaluations during one fit."""

    template: SkeletonTemplate
    camera: Optional[Camera] = None
    observed: Optional[Keypoints2D] = None
    canonical_target: Optional[np.ndarray] = None   # (21, 3), dimensionless
    scale_length: Optional[float] = None            # meters; template ref length by default
    alignment_weight: float = DEFAULT_ALIGNMENT_WEIGHT
    prior_center: Optional[np.ndarray] = None       # (45,); limit midpoint by default
    prior_weights: Optional[np.ndarray] = None      # (45,); template weights by default

    def resolved_scale(self) -> float:
        return self.scale_length if self.scale_length is not None else self.template.reference_length

    def resolved_center(self) -> np.ndarray:
        if self.prior_center is not None:
            return np.asarray(self.prior_center, dtype=float)
        return skeleton.midpoint_articulation(self.template)

    def resolved_weights(self) -> np.ndarray:
        if self.prior_weights is not None:
            return np.asarray(self.prior_weights, dtype=float)
        return self.template.prior_weights


# Parameter masks over the 51 optimizable entries.

def mask_rotation() -> np.ndarray:
    m = np.zeros(PARAM_DIM, dtype=bool)
    m[ROT_SLICE] = True
    return m


def mask_rotation_articulation() -> np.ndarray:
    m = np.zeros(PARAM_DIM, dtype=bool)
    m[:ARTICULATION_DIM] = True
    m[ROT_SLICE] = True
    return m


def mask_translation() -> np.ndarray:
    m = np.zeros(PARAM_DIM, dtype=bool)
    m[TRANS_SLICE] = True
    return m


def mask_full() -> np.ndarray:
    return np.ones(PARAM_DIM, dtype=bool)


MASKS_BY_NAME = {
    "rotation": mask_rotation,
    "rotation+articulation": mask_rotation_articulation,
    "translation": mask_translation,
    "full": mask_full,
}


def _prior_value_and_grad(
    articulation: np.ndarray, ctx: FitContext
) -> tuple[float, np.ndarray]:
    template = ctx.template
    clipped = skeleton.clip_articulation(articulation, template)
    center = ctx.resolved_center()
    weights = ctx.resolved_weights()
    diff = clipped - center
    value = float(np.sum(weights * diff * diff))
    gate = skeleton.clip_passthrough_mask(articulation, template)
    grad = np.zeros(PARAM_DIM)
    grad[:ARTICULATION_DIM] = 2.0 * weights * diff * gate
    return value, grad


def articulation_prior(
    articulation: np.ndarray,
    center: np.ndarray,
    weights: np.ndarray,
    template: SkeletonTemplate,
) -> float:
    """Weighted squared deviation of the clipped articulation from a center pose."""
    clipped = skeleton.clip_articulation(articulation, template)
    diff = clipped - center
    return float(np.sum(np.asarray(weights) * diff * diff))


def _reprojection_value_and_grad(
    pos: np.ndarray, jac: Optional[np.ndarray], ctx: FitContext
) -> tuple[float, Optional[np.ndarray]]:
    observed = ctx.observed
    if observed is None or not observed.mask.any():
        raise EmptyAnnotationError("reprojection loss requires annotated joints")
    if ctx.camera is None:
        raise ValueError("reprojection loss requires a camera")
    idx = observed.annotated_indices
    pts = pos[idx]
    pixels = project_points(pts, ctx.camera)
    residual = pixels - observed.points[idx]
    value = float(np.sum(residual * residual))
    if jac is None:
        return value, None
    dpix = projection_jacobian(pts, ctx.camera)          # (k, 2, 3)
    # grad = sum_k 2 r_k . dpix_k . dpos_k
    grad = 2.0 * np.einsum("ka,kab,kbp->p", residual, dpix, jac[idx])
    return value, grad


def _alignment_value_and_grad(
    pos: np.ndarray, jac: Optional[np.ndarray], ctx: FitContext
) -> tuple[float, Optional[np.ndarray]]:
    if ctx.canonical_target is None:
        raise ValueError("alignment loss requires a canonical target pose")
    target = ctx.resolved_scale() * np.asarray(ctx.canonical_target, dtype=float)
    rel = pos - pos[WRIST]
    residual = rel - target
    value = ctx.alignment_weight / NUM_JOINTS * float(np.sum(residual * residual))
    if jac is None:
        return value, None
    jrel = jac - jac[WRIST]
    grad = (2.0 * ctx.alignment_weight / NUM_JOINTS) * np.einsum("ka,kap->p", residual, jrel)
    return value, grad


_NEEDS_KINEMATICS = {
    LossKind.REPROJECTION,
    LossKind.FIT,
    LossKind.CANONICAL_ALIGNMENT,
    LossKind.ALIGNMENT_WITH_PRIOR,
}


def _assemble(
    kind: LossKind,
    params: HandParams,
    ctx: FitContext,
    with_grad: bool,
) -> tuple[LossReport, Optional[np.ndarray]]:
    components: dict[str, float] = {}
    grad = np.zeros(PARAM_DIM) if with_grad else None

    if kind in _NEEDS_KINEMATICS:
        if with_grad:
            pos, jac = skeleton.forward_kinematics_with_jacobian(params, ctx.template)
        else:
            pos, jac = skeleton.forward_kinematics(params, ctx.template), None

    if kind in (LossKind.REPROJECTION, LossKind.FIT):
        value, g = _reprojection_value_and_grad(pos, jac, ctx)
        components["reprojection"] = value
        if with_grad:
            grad += g
    if kind in (LossKind.CANONICAL_ALIGNMENT, LossKind.ALIGNMENT_WITH_PRIOR):
        value, g = _alignment_value_and_grad(pos, jac, ctx)
        components["canonical_alignment"] = value
        if with_grad:
            grad += g
    if kind in (LossKind.ARTICULATION_PRIOR, LossKind.FIT, LossKind.ALIGNMENT_WITH_PRIOR):
        value, g = _prior_value_and_grad(params.articulation, ctx)
        components["articulation_prior"] = value
        if with_grad:
            grad += g

    return LossReport.from_components(components), grad


def evaluate(kind: LossKind, params: HandParams, ctx: FitContext) -> LossReport:
    report, _ = _assemble(kind, params, ctx, with_grad=False)
    return report


def value_and_grad(
    kind: LossKind,
    params: HandParams,
    ctx: FitContext,
    mask: Optional[np.ndarray] = None,
) -> tuple[LossReport, np.ndarray]:
    """Loss report plus its gradient; entries outside the mask are zeroed."""
    if mask is not None and not np.any(mask):
        raise ValueError("parameter mask selects no entries")
    report, grad = _assemble(kind, params, ctx, with_grad=True)
    if mask is not None:
        grad = np.where(mask, grad, 0.0)
    return report, grad
