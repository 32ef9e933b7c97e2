"""Pose a hand and walk through the kinematic chain.

Shows the parameterization (45 articulation + 6 global entries), the
joint tree, and how flexing one finger propagates down its chain.
"""

import numpy as np

from handfit import HandParams, default_template, forward_kinematics
from handfit.skeleton import FINGER_NAMES, PARENTS, articulation_slot

template = default_template()

# Rest pose: flat right hand, palm facing -z, fingers along +y.
rest = forward_kinematics(HandParams(), template)
print("rest pose (meters):")
for name, position in zip(template.joint_names, rest):
    print(f"  {name:15s} {position[0]:+.3f} {position[1]:+.3f} {position[2]:+.3f}")

# Curl the index finger: flexion is the third axis of each joint triple.
curled = HandParams(translation=np.array([0.0, 0.0, 0.5]))
for joint in range(3):
    slot = articulation_slot(1, joint)  # finger 1 = index
    curled.articulation[slot + 2] = -1.2

posed = forward_kinematics(curled, template)
moved = np.linalg.norm(posed - (rest + curled.translation), axis=1)
print("\njoints displaced by curling the index finger:")
for j in np.flatnonzero(moved > 1e-9):
    print(f"  {template.joint_names[j]} moved {100 * moved[j]:.1f} cm")

# Rigidity: bone lengths never change, whatever the articulation.
rng = np.random.default_rng(0)
params = HandParams(
    articulation=rng.uniform(template.limit_min, template.limit_max),
    rotation=rng.normal(0, 0.5, 3),
    translation=[0.0, 0.0, 0.6],
)
kp = forward_kinematics(params, template)
lengths = [np.linalg.norm(kp[j] - kp[PARENTS[j]]) for j in range(1, 21)]
print(f"\nrandom pose bone lengths: min {min(lengths):.4f} m, max {max(lengths):.4f} m")
print(f"reference bone ({FINGER_NAMES[2]} metacarpal): {template.reference_length} m")
