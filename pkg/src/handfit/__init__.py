"""Constrained kinematic hand-model fitting toolkit.

Submodules:
  skeleton   parameterized hand skeleton and forward kinematics
  camera     pinhole projection
  losses     fitting losses with analytic gradients
  optimize   masked Adam and staged minimization
  fitting    supervised/unsupervised fits and tracking sessions
  sampling   synthetic pose banks and test-set generation
  metrics    EPE / PCK / AUC / spherical root errors
  workbench  dataset files, config, annotation HTTP service, CLI
"""

from .camera import Camera, Keypoints2D, default_camera, project
from .fitting import (
    FitConfig,
    FitResult,
    TrackingSession,
    fit_supervised,
    fit_unsupervised,
    track_frame,
)
from .losses import FitContext, LossKind, LossReport
from .metrics import auc, epe, pck_curve, spherical_errors
from .optimize import AdamState, FixedIterations, LossThreshold, Patience, run_stage
from .sampling import PoseBank, generate_testset, load_bank, sample_pose, synth_bank
from .skeleton import (
    HandParams,
    HandSide,
    SkeletonTemplate,
    canonicalize,
    clip_articulation,
    default_template,
    forward_kinematics,
    mirror_params,
)

__version__ = "0.1.0"
