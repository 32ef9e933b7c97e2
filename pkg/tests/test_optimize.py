import numpy as np
import pytest

from handfit.losses import FitContext, LossKind, evaluate, mask_full, mask_rotation
from handfit.optimize import (
    AdamState,
    DivergenceError,
    FixedIterations,
    LossThreshold,
    Patience,
    adam_step,
    run_stage,
)
from handfit.skeleton import ARTICULATION_DIM, PARAM_DIM, HandParams, midpoint_articulation

from conftest import random_params


def reference_adam(x0, grad_fn, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    """Textbook Adam, written independently of the library implementation."""
    x = x0.copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        x = x - lr * m_hat / (np.sqrt(v_hat) + eps)
    return x


class TestAdamStep:
    def test_matches_reference_on_quadratic(self):
        rng = np.random.default_rng(0)
        target = rng.normal(size=PARAM_DIM)
        x0 = rng.normal(size=PARAM_DIM)
        grad_fn = lambda x: 2.0 * (x - target)

        state = AdamState()
        x = x0.copy()
        for _ in range(100):
            x = adam_step(state, x, grad_fn(x), lr=0.05)
        expected = reference_adam(x0, grad_fn, lr=0.05, steps=100)
        np.testing.assert_allclose(x, expected, atol=1e-12)

    def test_first_step_magnitude_is_lr(self):
        state = AdamState()
        x = np.zeros(PARAM_DIM)
        g = np.random.default_rng(1).normal(size=PARAM_DIM) * 100.0
        out = adam_step(state, x, g, lr=0.01)
        # first bias-corrected step has unit normalized magnitude per entry
        np.testing.assert_allclose(np.abs(out - x), 0.01, rtol=1e-6)

    def test_masked_entries_bit_identical(self):
        rng = np.random.default_rng(2)
        state = AdamState()
        x = rng.normal(size=PARAM_DIM)
        mask = np.zeros(PARAM_DIM, dtype=bool)
        mask[:5] = True
        before = x.copy()
        out = adam_step(state, x, rng.normal(size=PARAM_DIM), lr=0.1, mask=mask)
        assert (out[5:] == before[5:]).all()
        assert (out[:5] != before[:5]).all()
        assert not state.m[5:].any() and not state.v[5:].any()
        assert not state.entry_steps[5:].any()

    def test_late_activated_entry_takes_first_step(self):
        # an entry masked out for 50 steps behaves like a fresh first step
        # once activated, thanks to per-entry bias correction
        rng = np.random.default_rng(3)
        state = AdamState()
        x = np.zeros(PARAM_DIM)
        mask = np.ones(PARAM_DIM, dtype=bool)
        mask[0] = False
        for _ in range(50):
            x = adam_step(state, x, rng.normal(size=PARAM_DIM), lr=0.1, mask=mask)
        before = x[0]
        x = adam_step(state, x, np.full(PARAM_DIM, 3.0), lr=0.1)
        assert abs(x[0] - before) == pytest.approx(0.1, rel=1e-6)

    def test_non_finite_gradient_diverges(self):
        g = np.zeros(PARAM_DIM)
        g[7] = np.nan
        with pytest.raises(DivergenceError):
            adam_step(AdamState(), np.zeros(PARAM_DIM), g, lr=0.1)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adam_step(AdamState(), np.zeros(PARAM_DIM), np.zeros(3), lr=0.1)

    def test_state_copy_is_independent(self):
        state = AdamState()
        adam_step(state, np.zeros(PARAM_DIM), np.ones(PARAM_DIM), lr=0.1)
        clone = state.copy()
        adam_step(state, np.zeros(PARAM_DIM), np.ones(PARAM_DIM), lr=0.1)
        assert clone.step == 1 and state.step == 2
        assert not np.array_equal(clone.m, state.m)


class TestStoppingRules:
    def test_validation(self):
        with pytest.raises(ValueError):
            FixedIterations(-1)
        with pytest.raises(ValueError):
            Patience(0)
        with pytest.raises(ValueError):
            LossThreshold(-1.0, 10)


class TestRunStage:
    def make_ctx(self, template):
        return FitContext(template=template)

    def test_prior_descends_to_center(self, template):
        rng = np.random.default_rng(4)
        params = random_params(rng, template, margin=0.25)
        ctx = self.make_ctx(template)
        start = evaluate(LossKind.ARTICULATION_PRIOR, params, ctx).total
        result = run_stage(
            LossKind.ARTICULATION_PRIOR, params, ctx, mask_full(),
            lr=0.01, rule=FixedIterations(200),
        )
        assert result.report.total < 0.05 * start
        np.testing.assert_allclose(
            result.params.articulation, midpoint_articulation(template), atol=0.05
        )

    def test_zero_iterations(self, template):
        rng = np.random.default_rng(5)
        params = random_params(rng, template)
        result = run_stage(
            LossKind.ARTICULATION_PRIOR, params, self.make_ctx(template), mask_full(),
            lr=0.01, rule=FixedIterations(0),
        )
        assert result.iterations == 0
        np.testing.assert_array_equal(result.params.as_vector(), params.as_vector())

    def test_threshold_already_met_stops_immediately(self, template):
        params = HandParams(articulation=midpoint_articulation(template))
        result = run_stage(
            LossKind.ARTICULATION_PRIOR, params, self.make_ctx(template), mask_full(),
            lr=0.01, rule=LossThreshold(1e-6, 100),
        )
        assert result.iterations == 0

    def test_patience_stops_on_plateau(self, template):
        params = HandParams(articulation=midpoint_articulation(template))
        # already at the optimum: the loss can never improve
        result = run_stage(
            LossKind.ARTICULATION_PRIOR, params, self.make_ctx(template), mask_full(),
            lr=1e-4, rule=Patience(5, max_iterations=1000),
        )
        assert result.iterations <= 20

    def test_masked_stage_leaves_other_entries(self, template):
        rng = np.random.default_rng(6)
        params = random_params(rng, template)
        result = run_stage(
            LossKind.ARTICULATION_PRIOR, params, self.make_ctx(template), mask_rotation(),
            lr=0.01, rule=FixedIterations(10),
        )
        np.testing.assert_array_equal(result.params.articulation, params.articulation)
        np.testing.assert_array_equal(result.params.translation, params.translation)

    def test_warm_start_equals_continuous_run(self, template):
        rng = np.random.default_rng(7)
        params = random_params(rng, template, margin=0.25)
        ctx = self.make_ctx(template)

        split_state = AdamState()
        first = run_stage(LossKind.ARTICULATION_PRIOR, params, ctx, mask_full(),
                          lr=0.01, rule=FixedIterations(50), state=split_state)
        second = run_stage(LossKind.ARTICULATION_PRIOR, first.last_params, ctx, mask_full(),
                           lr=0.01, rule=FixedIterations(50), state=split_state)
        full = run_stage(LossKind.ARTICULATION_PRIOR, params, ctx, mask_full(),
                         lr=0.01, rule=FixedIterations(100))
        np.testing.assert_allclose(
            second.last_params.as_vector(), full.last_params.as_vector(), atol=1e-12
        )

    def test_returns_best_seen(self, template):
        # huge lr makes Adam overshoot and oscillate; the returned report
        # must be the minimum over the whole trajectory
        rng = np.random.default_rng(8)
        params = random_params(rng, template, margin=0.25)
        ctx = self.make_ctx(template)
        result = run_stage(LossKind.ARTICULATION_PRIOR, params, ctx, mask_full(),
                           lr=2.0, rule=FixedIterations(50))
        final = evaluate(LossKind.ARTICULATION_PRIOR, result.last_params, ctx).total
        assert result.report.total <= final + 1e-12
        best = evaluate(LossKind.ARTICULATION_PRIOR, result.params, ctx).total
        assert best == pytest.approx(result.report.total)

    def test_articulation_clipped_each_step(self, template):
        rng = np.random.default_rng(9)
        params = random_params(rng, template, margin=0.25)
        result = run_stage(LossKind.ARTICULATION_PRIOR, params, self.make_ctx(template),
                           mask_full(), lr=2.0, rule=FixedIterations(25))
        assert (result.last_params.articulation >= template.limit_min - 1e-12).all()
        assert (result.last_params.articulation <= template.limit_max + 1e-12).all()
