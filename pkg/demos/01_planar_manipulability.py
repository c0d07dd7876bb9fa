"""Manipulability of a planar two-link arm, by hand and by the library.

For link lengths l1, l2 the index is l1 * l2 * |sin(theta2)|: the arm loses a
direction of motion when the elbow is straight or folded back.
"""

# %%
import numpy as np

from manipgp.kinematics import manipulability, manipulability_gradient, planar_chain

arm = planar_chain([0.8, 0.55])

# %% The index over the elbow angle; the shoulder angle plays no role.
for elbow in np.linspace(0.0, np.pi, 7):
    m = manipulability(arm, [0.3, elbow]).m
    print(f"elbow {elbow:5.2f} rad   m = {m:.4f}   closed form = {0.8 * 0.55 * abs(np.sin(elbow)):.4f}")

# %% Gradient ascent on m straightens the elbow to a right angle.
q = np.array([0.3, 0.15])
for step in range(40):
    q = q + 0.5 * manipulability_gradient(arm, q)
print(f"\nafter ascent: elbow = {q[1]:.3f} rad (pi/2 = {np.pi / 2:.3f}), m = {manipulability(arm, q).m:.4f}")
