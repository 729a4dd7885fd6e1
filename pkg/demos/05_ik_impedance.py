"""Action-to-torque pipeline: damped least squares IK plus the variable
impedance law on a 7-DoF arm.

Run:  python3 demos/05_ik_impedance.py
"""
import numpy as np

from corn.control import IkConfig, fk, franka_like_chain, ik, jacobian, torque
from corn.geom import Pose, Rotation

chain = franka_like_chain()
ready = np.array([0.0, -np.pi / 4, 0.0, -2.356, 0.0, 1.571, np.pi / 4])

ee = fk(chain, ready)
print(f"end effector at ready pose: {np.round(ee.translation, 4)}")
sv = np.linalg.svd(jacobian(chain, ready), compute_uv=False)
print(f"jacobian singular values: {np.round(sv, 3)}")

# a policy-style subgoal residual: 2 cm forward, small wrist twist
residual = Pose([0.02, 0.0, -0.01], Rotation.from_axis_angle([0.0, 0.1, 0.0]))
result = ik(chain, ready, residual, IkConfig())
print(f"ik converged={result.converged} in {result.iterations} iterations, "
      f"pos error {result.pos_error:.2e} m, rot error {result.rot_error:.2e} rad")

reached = fk(chain, result.q)
print(f"reached: {np.round(reached.translation, 4)} "
      f"(target {np.round(ee.translation + residual.translation, 4)})")

# variable impedance: tau = kp (q_target - q) - rho sqrt(kp) qdot
kp = np.full(7, 80.0)
rho = np.full(7, 1.5)
qdot = np.full(7, 0.2)
tau = torque(kp, rho, result.q, ready, qdot)
print(f"commanded torques: {np.round(tau, 3)}")
print(f"  damping gains kd = rho*sqrt(kp) = {rho[0] * np.sqrt(kp[0]):.2f} per joint")
