"""Supervised fitting from sparse 2D annotations.

Synthesizes a hand, keeps only the wrist and the five fingertips as
"clicked" annotations, then fits articulation and global pose jointly
until the reprojection stops improving.
"""

import numpy as np

from handfit import default_camera, default_template, fit_supervised, project
from handfit.camera import Keypoints2D
from handfit.sampling import generate_testset, synth_bank
from handfit.skeleton import TIP_JOINTS, WRIST, forward_kinematics

template = default_template()
cam = default_camera()

bank = synth_bank(3, template, 500, 500)
sample = generate_testset(bank, "ego", 1, 3, cam, template).samples[0]

annotated = (WRIST,) + TIP_JOINTS
observed = Keypoints2D.from_sparse({
    j: tuple(sample.keypoints_2d.points[j]) for j in annotated
})
print(f"annotated joints: {[template.joint_names[j] for j in annotated]}")

# Start near the truth, as an annotator would after dragging the sliders.
rng = np.random.default_rng(4)
init = sample.params.copy()
init.articulation = init.articulation + rng.uniform(-0.1, 0.1, 45)
init.translation = init.translation + rng.normal(0, 0.01, 3)

result = fit_supervised(init, observed, cam, template)
print(f"converged after {result.iterations} iterations, "
      f"loss {result.report.total:.4f} px^2")

fitted = project(forward_kinematics(result.params, template), cam)
errors = np.linalg.norm(
    fitted.points[observed.mask] - observed.points[observed.mask], axis=1
)
print("per-annotation reprojection error (px):")
for j, err in zip(annotated, errors):
    print(f"  {template.joint_names[j]:15s} {err:.3f}")
