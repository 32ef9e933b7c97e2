"""Warm-start tracking across a noisy synthetic sequence.

One TrackingSession keeps the hand parameters and the optimizer moments
between frames; each frame only runs stages whose loss threshold is not
already met, so converged frames are nearly free.
"""

import numpy as np

from handfit import (
    HandParams,
    TrackingSession,
    default_camera,
    default_template,
    epe,
    project,
    track_frame,
)
from handfit.camera import Keypoints2D
from handfit.sampling import sample_pose, synth_bank
from handfit.skeleton import canonicalize, forward_kinematics

template = default_template()
cam = default_camera()
rng = np.random.default_rng(12)
bank = synth_bank(12, template, 500, 500)

# Interpolate between two sampled poses to get smooth motion.
a = sample_pose(bank, "ego", rng)
b = sample_pose(bank, "ego", rng)
frames = []
for k in range(30):
    w = k / 29
    params = HandParams(
        articulation=(1 - w) * a.articulation + w * b.articulation,
        rotation=(1 - w) * a.rotation + w * b.rotation,
        translation=(1 - w) * a.translation + w * b.translation,
    )
    kp3d = forward_kinematics(params, template)
    frames.append((kp3d, project(kp3d, cam), canonicalize(kp3d, template)))

session = TrackingSession(camera=cam, template=template)
print("frame  iterations  loss(px^2)  EPE(cm)")
for k, (kp3d, kp2d, canonical) in enumerate(frames):
    noisy = Keypoints2D(kp2d.points + rng.normal(0, 1.0, (21, 2)))
    result = track_frame(session, noisy, canonical + rng.normal(0, 0.02, (21, 3)))
    err = epe(forward_kinematics(result.params, template), kp3d,
              "root+scale", template)
    print(f"{k:5d}  {result.iterations:10d}  {result.report.total:10.2f}  {err:7.3f}")

print(f"\ntracked {session.frames} frames without a reset")
