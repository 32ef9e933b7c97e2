"""Masked Adam optimizer and staged loss minimization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import losses, skeleton
from .losses import FitContext, LossKind, LossReport
from .skeleton import ARTICULATION_DIM, PARAM_DIM, TRANS_SLICE, HandParams


class DivergenceError(RuntimeError):
    """Optimization produced a non-finite loss or gradient."""

    def __init__(self, message: str, last_params: Optional[HandParams] = None,
                 last_report: Optional[LossReport] = None):
        super().__init__(message)
        self.last_params = last_params
        self.last_report = last_report


@dataclass
class AdamState:
    """Per-entry Adam moments. Entries outside the step mask are untouched."""

    m: np.ndarray = field(default_factory=lambda: np.zeros(PARAM_DIM))
    v: np.ndarray = field(default_factory=lambda: np.zeros(PARAM_DIM))
    entry_steps: np.ndarray = field(default_factory=lambda: np.zeros(PARAM_DIM, dtype=int))
    step: int = 0
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.entry_steps.copy(),
                         self.step, self.b1, self.b2, self.eps)


def adam_step(
    state: AdamState,
    vec: np.ndarray,
    grad: np.ndarray,
    lr: float,
    mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """One bias-corrected Adam update on the active entries of ``vec``.

    Mutates ``state`` in place and returns the updated vector. Bias
    correction counts steps per entry so that a freshly activated entry
    behaves like a first Adam step.
    """
    grad = np.asarray(grad, dtype=float)
    if grad.shape != vec.shape:
        raise ValueError("gradient dimension does not match parameters")
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient")
    if mask is None:
        mask = np.ones_like(vec, dtype=bool)
    state.step += 1
    out = vec.copy()
    idx = np.flatnonzero(mask)
    state.entry_steps[idx] += 1
    t = state.entry_steps[idx]
    g = grad[idx]
    state.m[idx] = state.b1 * state.m[idx] + (1.0 - state.b1) * g
    state.v[idx] = state.b2 * state.v[idx] + (1.0 - state.b2) * g * g
    m_hat = state.m[idx] / (1.0 - state.b1 ** t)
    v_hat = state.v[idx] / (1.0 - state.b2 ** t)
    out[idx] = vec[idx] - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


# ---------------------------------------------------------------------------
# Stopping rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedIterations:
    iterations: int

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iteration count must be nonnegative")


@dataclass(frozen=True)
class Patience:
    """Stop once the loss has not strictly improved for ``window`` iterations."""

    window: int
    max_iterations: int = 2000

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("patience window must be positive")


@dataclass(frozen=True)
class LossThreshold:
    """Stop as soon as the stage loss is at or below ``threshold``."""

    threshold: float
    max_iterations: int

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")


StoppingRule = Union[FixedIterations, Patience, LossThreshold]


@dataclass
class StageResult:
    params: HandParams          # best-seen under the stage loss
    last_params: HandParams     # final iterate, for trajectory inspection
    state: AdamState
    report: LossReport          # report at the best-seen parameters
    iterations: int


def _should_stop(rule: StoppingRule, iterations: int, total: float, since_improve: int) -> bool:
    if isinstance(rule, FixedIterations):
        return iterations >= rule.iterations
    if isinstance(rule, Patience):
        return since_improve >= rule.window or iterations >= rule.max_iterations
    if isinstance(rule, LossThreshold):
        return total <= rule.threshold or iterations >= rule.max_iterations
    raise TypeError(f"unknown stopping rule {rule!r}")


def run_stage(
    kind: LossKind,
    params: HandParams,
    ctx: FitContext,
    mask: np.ndarray,
    lr: float,
    rule: StoppingRule,
    state: Optional[AdamState] = None,
    clip_each_step: bool = True,
    min_depth: Optional[float] = None,
) -> StageResult:
    """Minimize one stage loss with Adam until the stopping rule fires.

    ``clip_each_step`` projects the articulation into its limits after each
    update and, when ``min_depth`` is set and translation is active, keeps
    the root depth above that floor (bounds the large-step stages).
    """
    if state is None:
        state = AdamState()
    vec = params.as_vector()

    def project(v: np.ndarray) -> np.ndarray:
        if not clip_each_step:
            return v
        v = v.copy()
        v[:ARTICULATION_DIM] = skeleton.clip_articulation(v[:ARTICULATION_DIM], ctx.template)
        if min_depth is not None and mask[TRANS_SLICE].any():
            v[50] = max(v[50], min_depth)
        return v

    def eval_at(v: np.ndarray) -> tuple[LossReport, np.ndarray]:
        report, grad = losses.value_and_grad(kind, params.with_vector(v), ctx, mask)
        if not np.isfinite(report.total):
            raise DivergenceError("non-finite loss", params.with_vector(v), report)
        return report, grad

    report, grad = eval_at(vec)
    best_vec, best_report = vec, report
    iterations = 0
    since_improve = 0
    while not _should_stop(rule, iterations, report.total, since_improve):
        try:
            vec = adam_step(state, vec, grad, lr, mask)
        except DivergenceError as err:
            raise DivergenceError(str(err), params.with_vector(best_vec), best_report) from err
        vec = project(vec)
        report, grad = eval_at(vec)
        iterations += 1
        if report.total < best_report.total:
            best_vec, best_report = vec, report
            since_improve = 0
        else:
            since_improve += 1
    return StageResult(
        params=params.with_vector(best_vec),
        last_params=params.with_vector(vec),
        state=state,
        report=best_report,
        iterations=iterations,
    )
