"""Pose banks and seeded test-set generation.

Banks hold plausible articulation rows and global-pose rows; test sets
draw from them deterministically and keep only poses that project fully
inside the image.
"""

import numpy as np

from handfit import default_camera, default_template
from handfit.sampling import generate_testset, load_bank, synth_bank

template = default_template()
cam = default_camera()

bank = synth_bank(5, template, 2000, 2000)
n_art, n_glob = bank.sizes
print(f"bank: {n_art} articulation rows, {n_glob} global rows, "
      f"viewpoint {bank.viewpoint!r}")
print(f"frustum: {bank.frustum}")

bank.save("bank_demo.json")
reloaded = load_bank("bank_demo.json", template)
print(f"reloaded bank validates against the template limits "
      f"({reloaded.sizes[0]} rows)")

for viewpoint in ("ego", "third"):
    testset = generate_testset(bank, viewpoint, 50, 9, cam, template)
    spans = [
        np.ptp(s.keypoints_2d.points, axis=0).max() for s in testset.samples
    ]
    print(f"{viewpoint}: 50 poses, {testset.resampled} resamples, "
          f"2D span {np.min(spans):.0f}-{np.max(spans):.0f} px")

# Same seed, same test set - byte for byte.
again = generate_testset(bank, "ego", 50, 9, cam, template)
first = generate_testset(bank, "ego", 50, 9, cam, template)
identical = all(
    np.array_equal(x.params.as_vector(), y.params.as_vector())
    for x, y in zip(again.samples, first.samples)
)
print(f"regeneration under the same seed is identical: {identical}")
