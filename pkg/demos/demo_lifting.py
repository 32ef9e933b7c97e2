"""2D-to-3D lifting with the four-stage schedule.

Given exact 2D keypoints plus a canonical (root-relative, scale-free)
pose, the fitter recovers metric 3D keypoints: orientation first, then
articulation, then translation, then everything jointly.
"""

import numpy as np

from handfit import default_camera, default_template, epe, fit_unsupervised
from handfit.sampling import generate_testset, synth_bank
from handfit.skeleton import forward_kinematics

template = default_template()
cam = default_camera()

bank = synth_bank(7, template, 1000, 1000)
testset = generate_testset(bank, "ego", 10, 21, cam, template)

errors = []
for i, sample in enumerate(testset.samples):
    result = fit_unsupervised(sample.keypoints_2d, sample.canonical, cam, template)
    err = epe(
        forward_kinematics(result.params, template),
        sample.keypoints_3d, "root+scale", template,
    )
    errors.append(err)
    stages = " -> ".join(f"{r.total:9.2f}" for r in result.stage_reports)
    print(f"pose {i}: stage losses {stages}   EPE {err:.3f} cm")

print(f"\nmean EPE {np.mean(errors):.3f} cm over {len(errors)} poses "
      f"({testset.resampled} out-of-frame resamples)")
