import numpy as np
import pytest

from handfit import losses, skeleton
from handfit.camera import Keypoints2D, project
from handfit.losses import (
    EmptyAnnotationError,
    FitContext,
    LossKind,
    MASKS_BY_NAME,
    articulation_prior,
    evaluate,
    mask_full,
    mask_rotation,
    mask_translation,
    value_and_grad,
)
from handfit.skeleton import (
    ARTICULATION_DIM,
    PARAM_DIM,
    HandParams,
    canonicalize,
    forward_kinematics,
    midpoint_articulation,
)

from conftest import random_params


def make_context(template, cam, params):
    kp3d = forward_kinematics(params, template)
    return FitContext(
        template=template,
        camera=cam,
        observed=project(kp3d, cam),
        canonical_target=canonicalize(kp3d, template),
    )


def fd_gradient(kind, params, ctx, h=1e-5):
    vec = params.as_vector()
    grad = np.zeros(PARAM_DIM)
    for k in range(PARAM_DIM):
        e = np.zeros(PARAM_DIM)
        e[k] = h
        hi = evaluate(kind, params.with_vector(vec + e), ctx).total
        lo = evaluate(kind, params.with_vector(vec - e), ctx).total
        grad[k] = (hi - lo) / (2 * h)
    return grad


class TestValues:
    def test_prior_zero_at_center(self, template):
        center = midpoint_articulation(template)
        assert articulation_prior(center, center, template.prior_weights, template) == 0.0

    def test_prior_matches_manual_sum(self, template):
        rng = np.random.default_rng(0)
        art = rng.uniform(template.limit_min, template.limit_max, ARTICULATION_DIM)
        center = midpoint_articulation(template)
        manual = float(np.sum(template.prior_weights * (art - center) ** 2))
        assert articulation_prior(art, center, template.prior_weights, template) == pytest.approx(manual)

    def test_prior_evaluates_at_clipped_value(self, template):
        # values outside the limits cost as much as the nearest legal pose
        outside = template.limit_max + 1.0
        center = midpoint_articulation(template)
        at_edge = articulation_prior(template.limit_max, center, template.prior_weights, template)
        assert articulation_prior(outside, center, template.prior_weights, template) == pytest.approx(at_edge)

    def test_reprojection_zero_at_ground_truth(self, template, cam):
        rng = np.random.default_rng(1)
        params = random_params(rng, template)
        ctx = make_context(template, cam, params)
        assert evaluate(LossKind.REPROJECTION, params, ctx).total == pytest.approx(0.0, abs=1e-18)

    def test_reprojection_counts_annotated_joints_only(self, template, cam):
        rng = np.random.default_rng(2)
        params = random_params(rng, template)
        ctx = make_context(template, cam, params)
        observed = ctx.observed.copy()
        observed.points[5] += [3.0, -4.0]   # 5 px off on one joint
        ctx.observed = observed
        assert evaluate(LossKind.REPROJECTION, params, ctx).total == pytest.approx(25.0)
        observed.mask[5] = False
        assert evaluate(LossKind.REPROJECTION, params, ctx).total == pytest.approx(0.0, abs=1e-18)

    def test_alignment_zero_at_ground_truth(self, template, cam):
        rng = np.random.default_rng(3)
        params = random_params(rng, template)
        ctx = make_context(template, cam, params)
        assert evaluate(LossKind.CANONICAL_ALIGNMENT, params, ctx).total == pytest.approx(0.0, abs=1e-12)

    def test_alignment_scales_with_weight(self, template, cam):
        rng = np.random.default_rng(4)
        params = random_params(rng, template)
        ctx = make_context(template, cam, random_params(rng, template))
        base = evaluate(LossKind.CANONICAL_ALIGNMENT, params, ctx).total
        ctx.alignment_weight *= 2.0
        assert evaluate(LossKind.CANONICAL_ALIGNMENT, params, ctx).total == pytest.approx(2 * base)

    def test_fit_is_sum_of_components(self, template, cam):
        rng = np.random.default_rng(5)
        params = random_params(rng, template)
        ctx = make_context(template, cam, random_params(rng, template))
        report = evaluate(LossKind.FIT, params, ctx)
        assert set(report.components) == {"reprojection", "articulation_prior"}
        assert report.total == pytest.approx(sum(report.components.values()))

    def test_empty_annotation_raises(self, template, cam):
        ctx = FitContext(
            template=template, camera=cam,
            observed=Keypoints2D(np.zeros((21, 2)), np.zeros(21, dtype=bool)),
        )
        with pytest.raises(EmptyAnnotationError):
            evaluate(LossKind.REPROJECTION, HandParams(translation=[0, 0, 0.5]), ctx)

    def test_missing_target_raises(self, template, cam):
        ctx = FitContext(template=template, camera=cam)
        with pytest.raises(ValueError):
            evaluate(LossKind.CANONICAL_ALIGNMENT, HandParams(translation=[0, 0, 0.5]), ctx)


class TestGradients:
    @pytest.mark.parametrize("kind", list(LossKind))
    def test_gradient_matches_fd(self, template, cam, kind):
        rng = np.random.default_rng(hash(kind.value) % 2**32)
        for _ in range(3):
            params = random_params(rng, template)
            ctx = make_context(template, cam, random_params(rng, template))
            _, grad = value_and_grad(kind, params, ctx, mask_full())
            fd = fd_gradient(kind, params, ctx)
            err = np.abs(fd - grad)
            tol = np.maximum(1e-3 * np.maximum(np.abs(fd), np.abs(grad)), 1e-6)
            assert (err <= tol).all()

    @pytest.mark.parametrize("mask_name", sorted(MASKS_BY_NAME))
    def test_masked_gradient_zero_outside_mask(self, template, cam, mask_name):
        rng = np.random.default_rng(6)
        params = random_params(rng, template)
        ctx = make_context(template, cam, random_params(rng, template))
        mask = MASKS_BY_NAME[mask_name]()
        _, grad = value_and_grad(LossKind.FIT, params, ctx, mask)
        assert not grad[~mask].any()

    def test_empty_mask_rejected(self, template, cam):
        rng = np.random.default_rng(7)
        params = random_params(rng, template)
        ctx = make_context(template, cam, params)
        with pytest.raises(ValueError):
            value_and_grad(LossKind.FIT, params, ctx, np.zeros(PARAM_DIM, dtype=bool))

    def test_prior_gradient_zero_for_locked_entries(self, template, cam):
        rng = np.random.default_rng(8)
        params = random_params(rng, template)
        ctx = make_context(template, cam, params)
        _, grad = value_and_grad(LossKind.ARTICULATION_PRIOR, params, ctx, mask_full())
        locked = template.limit_min == template.limit_max
        assert not grad[:ARTICULATION_DIM][locked].any()

    def test_masks_cover_expected_entries(self):
        rot = mask_rotation()
        trans = mask_translation()
        assert rot.sum() == 3 and trans.sum() == 3
        assert not (rot & trans).any()
        assert MASKS_BY_NAME["rotation+articulation"]().sum() == ARTICULATION_DIM + 3
        assert mask_full().all()
